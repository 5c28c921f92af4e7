#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "relaxctrl/control_space.hpp"
#include "relaxctrl/rng.hpp"

using namespace relaxctrl;

TEST_CASE("grid construction and spacing") {
  const Grid g = Grid::make(1, {4}, {1.0}, 2, 0.5);
  CHECK(g.dx(0) == 0.25);
  CHECK(g.dt() == 0.25);
  CHECK(g.interior_nodes() == 3);

  const Grid g2 = Grid::make(2, {8, 8}, {1.0, 1.0}, 10, 1.0);
  CHECK(g2.interior_nodes() == 49);

  CHECK_THROWS_AS(Grid::make(1, {1}, {1.0}, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Grid::make(1, {4}, {1.0}, 0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Grid::make(1, {4}, {-1.0}, 2, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(Grid::make(1, {4}, {1.0}, 2, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Grid::make(3, {4, 4, 4}, {1.0, 1.0, 1.0}, 2, 1.0),
                  std::invalid_argument);
}

TEST_CASE("node ordering is x-fastest and weights sum to the measure") {
  const Grid g = Grid::make(2, {4, 3}, {1.0, 2.0}, 1, 1.0);
  // 3 interior nodes in x, 2 in y; idx 1 moves along x, idx 3 wraps to row 2.
  CHECK(g.node_coord(0)[0] == doctest::Approx(0.25));
  CHECK(g.node_coord(0)[1] == doctest::Approx(2.0 / 3.0));
  CHECK(g.node_coord(1)[0] == doctest::Approx(0.5));
  CHECK(g.node_coord(1)[1] == doctest::Approx(2.0 / 3.0));
  CHECK(g.node_coord(3)[0] == doctest::Approx(0.25));
  CHECK(g.node_coord(3)[1] == doctest::Approx(4.0 / 3.0));

  for (const Grid& grid :
       {Grid::make(1, {2}, {1.0}, 1, 1.0), Grid::make(1, {7}, {2.5}, 1, 1.0),
        Grid::make(2, {5, 9}, {1.0, 3.0}, 1, 1.0)}) {
    double total = 0.0;
    for (int i = 0; i < grid.interior_nodes(); ++i) total += grid.quad_weight(i);
    CHECK(total == doctest::Approx(grid.domain_measure()).epsilon(1e-14));
  }
}

TEST_CASE("project_to_B clamps boxes and scans finite sets") {
  const ControlSet box = ControlSet::box({-1.0}, {1.0});
  CHECK(box.project(std::vector<double>{1.7})[0] == 1.0);
  CHECK(box.project(std::vector<double>{0.3})[0] == 0.3);

  const ControlSet pts = ControlSet::finite_points({{-1.0}, {1.0}});
  CHECK(pts.project(std::vector<double>{0.2})[0] == 1.0);
  // Exact tie resolves to the lowest index.
  CHECK(pts.project(std::vector<double>{0.0})[0] == -1.0);

  SUBCASE("idempotence") {
    SplitMix64 rng(17);
    const ControlSet box2 = ControlSet::box({-1.0, 0.0}, {1.0, 2.0});
    const ControlSet pts2 =
        ControlSet::finite_points({{0.0, 0.0}, {1.0, 1.0}, {-1.0, 2.0}});
    for (int trial = 0; trial < 200; ++trial) {
      const std::vector<double> z{4.0 * rng.next_double() - 2.0,
                                  4.0 * rng.next_double() - 2.0};
      for (const ControlSet* B : {&box2, &pts2}) {
        const auto once = B->project(z);
        const auto twice = B->project(once);
        CHECK(once == twice);
        CHECK(B->contains(once));
      }
    }
  }
}

TEST_CASE("control set validation") {
  CHECK_THROWS_AS(ControlSet::box({1.0}, {-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ControlSet::finite_points({}), std::invalid_argument);
  CHECK_THROWS_AS(ControlSet::finite_points({{1.0}, {1.0}}),
                  std::invalid_argument);
}

TEST_CASE("constants dictionary samples the box lattice including vertices") {
  const Grid g = Grid::make(1, {6}, {1.0}, 4, 1.0);
  const ControlSet B = ControlSet::box({-1.0}, {1.0});
  const ControlDictionary dict =
      build_dictionary(g, B, DictionaryStrategy::Constants, 3);
  REQUIRE(dict.size() == 3);
  CHECK(dict.atom(0).value(0)[0] == -1.0);
  CHECK(dict.atom(1).value(0)[0] == 0.0);
  CHECK(dict.atom(2).value(0)[0] == 1.0);
  for (int l = 0; l < dict.size(); ++l) {
    for (int i = 1; i < g.interior_nodes(); ++i) {
      CHECK(dict.atom(l).value(i)[0] == dict.atom(l).value(0)[0]);
    }
  }

  const ControlSet pts = ControlSet::finite_points({{-1.0}, {1.0}});
  const ControlDictionary dp =
      build_dictionary(g, pts, DictionaryStrategy::Constants, 2);
  CHECK(dp.atom(0).value(0)[0] == -1.0);
  CHECK(dp.atom(1).value(0)[0] == 1.0);
  CHECK_THROWS_AS(build_dictionary(g, pts, DictionaryStrategy::Constants, 3),
                  std::invalid_argument);
  CHECK_THROWS_AS(build_dictionary(g, B, DictionaryStrategy::Constants, 0),
                  std::invalid_argument);
}

TEST_CASE("bang dictionaries are two-valued, feasible, and reproducible") {
  const Grid g = Grid::make(1, {9}, {1.0}, 2, 1.0);
  const ControlSet B = ControlSet::box({-1.0}, {1.0});
  const ControlDictionary a =
      build_dictionary(g, B, DictionaryStrategy::Bang, 5, 7);
  const ControlDictionary b =
      build_dictionary(g, B, DictionaryStrategy::Bang, 5, 7);
  REQUIRE(a.size() == 5);
  for (int l = 0; l < a.size(); ++l) {
    CHECK(a.atom(l) == b.atom(l));  // bitwise identical re-run
    CHECK(a.atom(l).feasible(B));
    for (int i = 0; i < g.interior_nodes(); ++i) {
      const double v = a.atom(l).value(i)[0];
      CHECK((v == -1.0 || v == 1.0));
    }
  }
  const ControlDictionary c =
      build_dictionary(g, B, DictionaryStrategy::Bang, 5, 8);
  bool any_diff = false;
  for (int l = 0; l < c.size(); ++l) any_diff = any_diff || !(a.atom(l) == c.atom(l));
  CHECK(any_diff);
}

TEST_CASE("custom atom files load with feasibility repair") {
  const Grid g = Grid::make(1, {3}, {1.0}, 2, 1.0);  // 2 interior nodes
  const ControlSet B = ControlSet::box({-1.0}, {1.0});
  const std::string path = "custom_atoms_test.json";
  {
    std::ofstream out(path);
    out << "[[[0.5],[2.0]],[[-3.0],[0.0]]]";
  }
  const ControlDictionary dict =
      build_dictionary(g, B, DictionaryStrategy::Custom, 0, 0, path);
  REQUIRE(dict.size() == 2);
  CHECK(dict.atom(0).value(0)[0] == 0.5);
  CHECK(dict.atom(0).value(1)[0] == 1.0);   // 2.0 projected to the box
  CHECK(dict.atom(1).value(0)[0] == -1.0);  // -3.0 projected

  {
    std::ofstream out(path);
    out << "[[[0.5]]]";  // one node instead of two
  }
  CHECK_THROWS(build_dictionary(g, B, DictionaryStrategy::Custom, 0, 0, path));
  {
    std::ofstream out(path);
    out << "this is not json";
  }
  CHECK_THROWS(build_dictionary(g, B, DictionaryStrategy::Custom, 0, 0, path));
  CHECK_THROWS(build_dictionary(g, B, DictionaryStrategy::Custom, 0, 0,
                                "no_such_file.json"));
  std::remove(path.c_str());
}

TEST_CASE("dictionary rejects mismatched or infeasible atoms") {
  const Grid g = Grid::make(1, {4}, {1.0}, 2, 1.0);
  const ControlSet B = ControlSet::box({-1.0}, {1.0});
  CHECK_THROWS_AS(ControlDictionary(g, B, {}), std::invalid_argument);
  CHECK_THROWS_AS(ControlDictionary(g, B, {ControlField::constant(g, {2.0})}),
                  std::invalid_argument);
  const Grid other = Grid::make(1, {5}, {1.0}, 2, 1.0);
  CHECK_THROWS_AS(
      ControlDictionary(g, B, {ControlField::constant(other, {0.5})}),
      std::invalid_argument);
}
