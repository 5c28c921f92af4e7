#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "relaxctrl/measure_ops.hpp"
#include "relaxctrl/optimizer.hpp"
#include "relaxctrl/pde.hpp"
#include "relaxctrl/presets.hpp"
#include "relaxctrl/rng.hpp"
#include "relaxctrl/verify.hpp"

using namespace relaxctrl;

namespace {

DictionaryPtr constants_dict(const Grid& g, const ControlSet& B, int count) {
  return std::make_shared<const ControlDictionary>(
      build_dictionary(g, B, DictionaryStrategy::Constants, count));
}

/// Pure diffusion problem with a single zero-valued control atom.
ParabolicProblem diffusion_only(const Grid& g, Eigen::VectorXd y0) {
  CostDensity zero;
  zero.eval = [](double, std::span<const double>, std::span<const double>,
                 std::span<const double>) { return 0.0; };
  zero.dy = [](double, std::span<const double>, std::span<const double>,
               std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  zero.name = "zero";
  ProblemFlags flags;
  flags.cost_quadratic = true;
  return ParabolicProblem("diffusion", g, 1, DiffusionTensor::isotropic(1, 1.0),
                          fields::zero(1, 1), zero, std::nullopt, std::move(y0),
                          ControlSet::finite_points({{0.0}}), flags);
}

Eigen::VectorXd sine_vector(const Grid& g) {
  Eigen::VectorXd v(g.interior_nodes());
  for (int i = 0; i < g.interior_nodes(); ++i) {
    double s = std::sin(std::numbers::pi * g.node_coord(i)[0] / g.extent(0));
    if (g.dim() == 2) {
      s *= std::sin(std::numbers::pi * g.node_coord(i)[1] / g.extent(1));
    }
    v[i] = s;
  }
  return v;
}

}  // namespace

TEST_CASE("diffusion stencil in one dimension") {
  const Grid g = Grid::make(1, {4}, {1.0}, 1, 1.0);
  const DiffusionOperator op =
      assemble_diffusion(g, DiffusionTensor::isotropic(1, 1.0), 1);
  const Eigen::MatrixXd L = Eigen::MatrixXd(op.matrix(0));
  REQUIRE(L.rows() == 3);
  const double s = 16.0;  // 1/dx^2
  CHECK(L(0, 0) == 2 * s);
  CHECK(L(0, 1) == -s);
  CHECK(L(1, 0) == -s);
  CHECK(L(1, 1) == 2 * s);
  CHECK(L(1, 2) == -s);
  CHECK(L(2, 2) == 2 * s);
  CHECK(L(0, 2) == 0.0);
}

TEST_CASE("stencil symmetry and positive definiteness") {
  SplitMix64 rng(3);
  const auto check_sym_pd = [&](const Grid& g, const DiffusionTensor& A) {
    const DiffusionOperator op = assemble_diffusion(g, A, 1);
    const auto& L = op.matrix(0);
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd u(g.interior_nodes()), v(g.interior_nodes());
      for (int i = 0; i < g.interior_nodes(); ++i) {
        u[i] = rng.next_double() - 0.5;
        v[i] = rng.next_double() - 0.5;
      }
      CHECK((L * u).dot(v) == doctest::Approx((L * v).dot(u)).epsilon(1e-13));
      CHECK((L * u).dot(u) > 0.0);
    }
  };
  check_sym_pd(Grid::make(1, {9}, {1.0}, 1, 1.0), DiffusionTensor::isotropic(1, 0.7));
  check_sym_pd(Grid::make(2, {6, 5}, {1.0, 1.5}, 1, 1.0),
               DiffusionTensor::isotropic(1, 1.0));
  Eigen::Matrix2d aniso;
  aniso << 1.0, 0.2, 0.2, 0.8;
  check_sym_pd(Grid::make(2, {6, 6}, {1.0, 1.0}, 1, 1.0),
               DiffusionTensor::blocks({aniso}));
  Eigen::Matrix2d indef;
  indef << 1.0, 0.0, 0.0, -1.0;
  CHECK_THROWS_AS(DiffusionTensor::blocks({indef}).validate(2),
                  std::invalid_argument);
}

TEST_CASE("stencil reproduces the sine eigenpair at second order") {
  for (int dim : {1, 2}) {
    double prev = 0.0;
    for (int level = 0; level < 3; ++level) {
      const int nx = 8 << level;
      const Grid g = dim == 1 ? Grid::make(1, {nx}, {1.0}, 1, 1.0)
                              : Grid::make(2, {nx, nx}, {1.0, 1.0}, 1, 1.0);
      const DiffusionOperator op =
          assemble_diffusion(g, DiffusionTensor::isotropic(1, 1.0), 1);
      const Eigen::VectorXd v = sine_vector(g);
      const double lambda = dim * std::numbers::pi * std::numbers::pi;
      const double err = (op.apply(v) - lambda * v).lpNorm<Eigen::Infinity>();
      if (level > 0) CHECK(err < 0.3 * prev);
      prev = err;
    }
  }
}

TEST_CASE("average_field") {
  const Grid g = Grid::make(1, {6}, {1.0}, 4, 1.0);
  const ControlSet B = ControlSet::box({-1.0}, {1.0});
  auto dict = constants_dict(g, B, 3);
  CostDensity phi;
  phi.eval = [](double, std::span<const double>, std::span<const double>,
                std::span<const double>) { return 0.0; };
  phi.dy = [](double, std::span<const double>, std::span<const double>,
              std::span<const double>, std::span<double> o) { o[0] = 0.0; };
  ProblemFlags flags;
  const ParabolicProblem p("avg", g, 1, DiffusionTensor::isotropic(1, 1.0),
                           fields::scalar_affine(0.0, 1.0, 0.0), phi,
                           std::nullopt, sine_vector(g), B, flags);

  const Eigen::VectorXd y = sine_vector(g);
  SUBCASE("Dirac weights evaluate the plain field") {
    const Eigen::VectorXd favg =
        average_field_fine(p, 0.0, y, Eigen::VectorXd::Unit(3, 2), *dict);
    for (int i = 0; i < g.interior_nodes(); ++i) CHECK(favg[i] == 1.0);
  }
  SUBCASE("symmetric atoms cancel a linear field") {
    Eigen::VectorXd w(3);
    w << 0.5, 0.0, 0.5;
    const Eigen::VectorXd favg = average_field_fine(p, 0.0, y, w, *dict);
    for (int i = 0; i < g.interior_nodes(); ++i) CHECK(favg[i] == 0.0);
  }
  SUBCASE("fine average equals the pushforward average") {
    SplitMix64 rng(5);
    Eigen::VectorXd w(3);
    double sum = 0.0;
    for (int l = 0; l < 3; ++l) sum += (w[l] = rng.next_double() + 0.1);
    w /= sum;
    const auto nu = barycenter(w, *dict);
    const Eigen::VectorXd fine = average_field_fine(p, 0.0, y, w, *dict);
    const Eigen::VectorXd coarse = average_field_coarse(p, 0.0, y, nu, 0);
    CHECK((fine - coarse).lpNorm<Eigen::Infinity>() <= 1e-14);
  }
  SUBCASE("weight row length must match the dictionary") {
    CHECK_THROWS_AS(
        average_field_fine(p, 0.0, y, Eigen::VectorXd::Zero(2), *dict),
        std::invalid_argument);
  }
}

TEST_CASE("forward solve") {
  SUBCASE("zero data stays zero") {
    const Grid g = Grid::make(1, {8}, {1.0}, 10, 1.0);
    const ParabolicProblem p =
        diffusion_only(g, Eigen::VectorXd::Zero(g.interior_nodes()));
    auto dict = std::make_shared<const ControlDictionary>(
        g, p.control_set(),
        std::vector<ControlField>{ControlField::constant(g, {0.0})});
    const auto fwd = solve_forward(p, RelaxedControl::dirac(g, dict, 0));
    CHECK_FALSE(fwd.diverged());
    for (const auto& row : fwd.y.rows) CHECK(row.lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("heat kernel oracle under refinement") {
    double prev = 0.0;
    for (int level = 0; level < 2; ++level) {
      const int nx = 8 << level, nt = 25 << (2 * level);
      const Grid g = Grid::make(1, {nx}, {1.0}, nt, 0.1);
      const ParabolicProblem p = diffusion_only(g, sine_vector(g));
      auto dict = std::make_shared<const ControlDictionary>(
          g, p.control_set(),
          std::vector<ControlField>{ControlField::constant(g, {0.0})});
      const auto fwd = solve_forward(p, RelaxedControl::dirac(g, dict, 0));
      const double decay = oracles::heat_mode_decay(1.0, 1.0, 0.1);
      const Eigen::VectorXd exact = decay * sine_vector(g);
      const double err =
          (fwd.y.rows.back() - exact).lpNorm<Eigen::Infinity>();
      if (level > 0) CHECK(err < 0.5 * prev);
      prev = err;
    }
  }

  SUBCASE("constant source settles to the elliptic profile") {
    const Grid g = Grid::make(1, {32}, {1.0}, 400, 4.0);
    CostDensity zero;
    zero.eval = [](double, std::span<const double>, std::span<const double>,
                   std::span<const double>) { return 0.0; };
    const ParabolicProblem p("steady", g, 1, DiffusionTensor::isotropic(1, 1.0),
                             fields::scalar_affine(0.0, 0.0, 1.0), zero,
                             std::nullopt,
                             Eigen::VectorXd::Zero(g.interior_nodes()),
                             ControlSet::finite_points({{0.0}}), ProblemFlags{});
    auto dict = std::make_shared<const ControlDictionary>(
        g, p.control_set(),
        std::vector<ControlField>{ControlField::constant(g, {0.0})});
    const auto fwd = solve_forward(p, RelaxedControl::dirac(g, dict, 0));
    for (int i = 0; i < g.interior_nodes(); ++i) {
      const double x = g.node_coord(i)[0];
      CHECK(fwd.y.rows.back()[i] ==
            doctest::Approx(0.5 * x * (1.0 - x)).epsilon(1e-3));
    }
  }

  SUBCASE("nonnegative data stays nonnegative and energy decays") {
    const Grid g = Grid::make(2, {6, 6}, {1.0, 1.0}, 30, 0.5);
    SplitMix64 rng(9);
    Eigen::VectorXd y0(g.interior_nodes());
    for (int i = 0; i < g.interior_nodes(); ++i) y0[i] = rng.next_double();
    const ParabolicProblem p = diffusion_only(g, y0);
    auto dict = std::make_shared<const ControlDictionary>(
        g, p.control_set(),
        std::vector<ControlField>{ControlField::constant(g, {0.0})});
    const auto fwd = solve_forward(p, RelaxedControl::dirac(g, dict, 0));
    double prev_norm = std::numeric_limits<double>::infinity();
    for (const auto& row : fwd.y.rows) {
      CHECK(row.minCoeff() >= -1e-12);
      const double norm = row.norm();
      CHECK(norm <= prev_norm + 1e-12);
      prev_norm = norm;
    }
  }

  SUBCASE("states superpose when the field is affine") {
    const Grid g = Grid::make(1, {8}, {1.0}, 12, 1.0);
    const ControlSet B = ControlSet::box({-1.0}, {1.0});
    CostDensity zero;
    zero.eval = [](double, std::span<const double>, std::span<const double>,
                   std::span<const double>) { return 0.0; };
    const ParabolicProblem p("affine", g, 1, DiffusionTensor::isotropic(1, 1.0),
                             fields::scalar_affine(0.5, 1.0, 0.2), zero,
                             std::nullopt, sine_vector(g), B, ProblemFlags{});
    auto dict = constants_dict(g, B, 3);
    SplitMix64 rng(31);
    Eigen::MatrixXd wa(g.nt(), 3), wb(g.nt(), 3);
    for (int k = 0; k < g.nt(); ++k) {
      double sa = 0.0, sb = 0.0;
      for (int l = 0; l < 3; ++l) {
        sa += (wa(k, l) = rng.next_double() + 0.05);
        sb += (wb(k, l) = rng.next_double() + 0.05);
      }
      wa.row(k) /= sa;
      wb.row(k) /= sb;
    }
    const double lambda = 0.375;
    const RelaxedControl ma(g, dict, wa), mb(g, dict, wb);
    const RelaxedControl mix = ma.blend(mb, 1.0 - lambda);
    const auto ya = solve_forward(p, ma), yb = solve_forward(p, mb),
               ymix = solve_forward(p, mix);
    for (std::size_t k = 0; k < ya.y.rows.size(); ++k) {
      const Eigen::VectorXd blend =
          lambda * ya.y.rows[k] + (1.0 - lambda) * yb.y.rows[k];
      CHECK((ymix.y.rows[k] - blend).lpNorm<Eigen::Infinity>() <= 1e-12);
    }
  }

  SUBCASE("blow-up is reported as divergence, and its cost is infinite") {
    const Grid g = Grid::make(1, {6}, {1.0}, 40, 4.0);
    FieldFn f;
    f.n = 1;
    f.m = 1;
    f.eval = [](double, std::span<const double>, std::span<const double> y,
                std::span<const double>, std::span<double> out) {
      out[0] = 40.0 * y[0] * y[0];
    };
    f.dy = [](double, std::span<const double>, std::span<const double> y,
              std::span<const double>, std::span<double> out) {
      out[0] = 80.0 * y[0];
    };
    f.name = "quadratic_growth";
    CostDensity zero;
    zero.eval = [](double, std::span<const double>, std::span<const double>,
                   std::span<const double>) { return 0.0; };
    const ParabolicProblem p("blowup", g, 1, DiffusionTensor::isotropic(1, 1.0),
                             std::move(f), zero, std::nullopt,
                             10.0 * sine_vector(g).cwiseAbs(),
                             ControlSet::finite_points({{0.0}}), ProblemFlags{});
    auto dict = std::make_shared<const ControlDictionary>(
        g, p.control_set(),
        std::vector<ControlField>{ControlField::constant(g, {0.0})});
    const RelaxedControl mu = RelaxedControl::dirac(g, dict, 0);
    const auto fwd = solve_forward(p, mu);
    CHECK(fwd.diverged());
    CHECK(fwd.diverged_at >= 1);
    CHECK(evaluate_cost(p, fwd, mu) == std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("evaluate_cost") {
  const Grid g = Grid::make(1, {8}, {1.0}, 5, 1.0);
  const ControlSet B = ControlSet::box({-1.0}, {1.0});
  auto dict = constants_dict(g, B, 3);

  SUBCASE("zero costs give zero") {
    const ParabolicProblem p =
        build_preset("chatter", g, {{"state_weight", 0.0}});
    Eigen::MatrixXd w(g.nt(), 3);
    for (int k = 0; k < g.nt(); ++k) w.row(k) << 0.5, 0.0, 0.5;
    const RelaxedControl mu(g, dict, w);
    const auto fwd = solve_forward(p, mu);
    // Double-well vanishes at both atoms in use; state cost disabled.
    CHECK(evaluate_cost(p, fwd, mu) == 0.0);
  }

  SUBCASE("double well vanishes on atoms at the wells") {
    const ParabolicProblem p = build_preset("chatter", g, {});
    Eigen::MatrixXd w(g.nt(), 3);
    for (int k = 0; k < g.nt(); ++k) w.row(k) << 0.5, 0.0, 0.5;
    const RelaxedControl mu(g, dict, w);
    const auto fwd = solve_forward(p, mu);
    CHECK(evaluate_cost(p, fwd, mu) == 0.0);  // mean drift is exactly zero
  }
}

namespace {

/// One-step problem over the four switching atoms of the representation
/// family; lets the cost be evaluated directly on the static measures.
struct CompositeFixture {
  Grid grid;
  TwoAtomicSetup setup;
  DictionaryPtr dict;

  explicit CompositeFixture(int nx)
      : grid(Grid::make(1, {nx}, {1.0}, 1, 1.0)), setup(make_two_atomic_setup(grid)) {
    const RelaxedControl probe =
        choquet_represent(setup.u1, setup.u2, setup.A, setup.B, 0.0);
    dict = probe.dictionary_ptr();
  }

  ParabolicProblem problem(CompositeRelaxation mode) const {
    CostIntegrand hz;
    hz.eval = [](double, std::span<const double>, std::span<const double>,
                 std::span<const double> z) { return z[0]; };
    hz.dy = [](double, std::span<const double>, std::span<const double>,
               std::span<const double>, std::span<double> o) { o[0] = 0.0; };
    hz.name = "z";
    CompositeCost cost;
    cost.mode = mode;
    CompositeCostTerm term;
    term.factors.push_back({ScalarFn::square(), hz});
    cost.terms = {term};
    ProblemFlags flags;
    flags.cost_quadratic = mode == CompositeRelaxation::AveragedInner;
    return ParabolicProblem("composite-fixture", grid, 1,
                            DiffusionTensor::isotropic(1, 1.0),
                            fields::zero(1, 1), cost, std::nullopt,
                            Eigen::VectorXd::Zero(grid.interior_nodes()),
                            setup.B, flags);
  }

  double cost_at(const ParabolicProblem& p, double a) const {
    const RelaxedControl mu =
        choquet_represent(setup.u1, setup.u2, setup.A, setup.B, a);
    const RelaxedControl on_grid(grid, dict, mu.weights());
    const auto fwd = solve_forward(p, on_grid);
    return evaluate_cost(p, fwd, on_grid);
  }
};

}  // namespace

TEST_CASE("composite cost: the two extensions differ exactly as expected") {
  const CompositeFixture fx(8);

  SUBCASE("atom-wise averaging varies along the representation family") {
    const ParabolicProblem p = fx.problem(CompositeRelaxation::AtomwiseAverage);
    const double c0 = fx.cost_at(p, 0.0);
    const double c1 = fx.cost_at(p, 0.1);
    const double c2 = fx.cost_at(p, 0.25);
    // Affine in a with positive slope.
    CHECK(std::abs((c1 - c0) - 0.4 * (c2 - c0)) <= 1e-12);
    CHECK(c2 - c0 > 1e-3);
  }

  SUBCASE("averaged-inner evaluation is constant along the family") {
    const ParabolicProblem p = fx.problem(CompositeRelaxation::AveragedInner);
    const double c0 = fx.cost_at(p, 0.0);
    const double c1 = fx.cost_at(p, 0.1);
    const double c2 = fx.cost_at(p, 0.25);
    CHECK(std::abs(c1 - c0) <= 1e-12 * (1.0 + std::abs(c0)));
    CHECK(std::abs(c2 - c0) <= 1e-12 * (1.0 + std::abs(c0)));
  }
}

TEST_CASE("adjoint solve") {
  SUBCASE("vanishing cost derivatives give a vanishing adjoint") {
    const Grid g = Grid::make(1, {8}, {1.0}, 6, 1.0);
    const ControlSet B = ControlSet::box({-1.0}, {1.0});
    CostDensity zero;
    zero.eval = [](double, std::span<const double>, std::span<const double>,
                   std::span<const double>) { return 0.0; };
    zero.dy = [](double, std::span<const double>, std::span<const double>,
                 std::span<const double>, std::span<double> o) { o[0] = 0.0; };
    const ParabolicProblem p("zero-cost", g, 1, DiffusionTensor::isotropic(1, 1.0),
                             fields::scalar_affine(0.0, 1.0, 0.0), zero,
                             std::nullopt, sine_vector(g), B, ProblemFlags{});
    auto dict = constants_dict(g, B, 3);
    const RelaxedControl mu = RelaxedControl::uniform(g, dict);
    const auto fwd = solve_forward(p, mu);
    const auto chi = solve_adjoint(p, fwd.y, mu);
    for (const auto& row : chi.rows) CHECK(row.lpNorm<Eigen::Infinity>() == 0.0);
  }

  SUBCASE("terminal row is the negative terminal-cost derivative, nodally") {
    const Grid g = Grid::make(1, {8}, {1.0}, 6, 1.0);
    const ParabolicProblem p = build_preset("lq", g, {{"beta", 0.3}});
    auto dict = constants_dict(g, p.control_set(), 3);
    const RelaxedControl mu = RelaxedControl::uniform(g, dict);
    const auto fwd = solve_forward(p, mu);
    const auto chi = solve_adjoint(p, fwd.y, mu);
    for (int i = 0; i < g.interior_nodes(); ++i) {
      CHECK(chi.rows.back()[i] == -2.0 * 0.3 * fwd.y.rows.back()[i]);
    }
  }

  SUBCASE("missing derivatives are reported") {
    const Grid g = Grid::make(1, {6}, {1.0}, 4, 1.0);
    const ControlSet B = ControlSet::box({-1.0}, {1.0});
    CostDensity no_dy;
    no_dy.eval = [](double, std::span<const double>, std::span<const double> y,
                    std::span<const double>) { return y[0] * y[0]; };
    const ParabolicProblem p("no-dy", g, 1, DiffusionTensor::isotropic(1, 1.0),
                             fields::scalar_affine(0.0, 1.0, 0.0), no_dy,
                             std::nullopt, sine_vector(g), B, ProblemFlags{});
    auto dict = constants_dict(g, B, 2);
    const RelaxedControl mu = RelaxedControl::uniform(g, dict);
    const auto fwd = solve_forward(p, mu);
    CHECK_THROWS_AS(solve_adjoint(p, fwd.y, mu), std::runtime_error);
  }
}

TEST_CASE("reduced gradients match finite differences") {
  SUBCASE("tracking cost with terminal term") {
    const Grid g = Grid::make(1, {8}, {1.0}, 6, 0.6);
    const ParabolicProblem p = build_preset("lq", g, {});
    auto dict = constants_dict(g, p.control_set(), 3);
    const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(g.nt(), 3, 1.0 / 3.0);
    CHECK(gradient_fd_check(p, dict, w, 1e-5).max_rel_error <= 1e-6);
  }

  SUBCASE("state-coupled reaction (nonzero f_y)") {
    const Grid g = Grid::make(1, {7}, {1.0}, 5, 0.5);
    const ControlSet B = ControlSet::box({-1.0}, {1.0});
    const ParabolicProblem p(
        "coupled", g, 1, DiffusionTensor::isotropic(1, 0.8),
        fields::scalar_affine(-0.7, 1.0, 0.1),
        costs::quadratic_tracking(1, 1.0, 0.2, nullptr),
        costs::terminal_quadratic(1, 0.5, nullptr), sine_vector(g), B,
        ProblemFlags{});
    auto dict = constants_dict(g, B, 3);
    SplitMix64 rng(77);
    Eigen::MatrixXd w(g.nt(), 3);
    for (int k = 0; k < g.nt(); ++k) {
      double s = 0.0;
      for (int l = 0; l < 3; ++l) s += (w(k, l) = rng.next_double() + 0.2);
      w.row(k) /= s;
    }
    CHECK(gradient_fd_check(p, dict, w, 1e-5).max_rel_error <= 1e-6);
  }

  SUBCASE("composite cost, averaged-inner mode") {
    const Grid g = Grid::make(1, {8}, {1.0}, 6, 0.6);
    const ParabolicProblem p = build_preset("composite", g, {});
    auto dict = constants_dict(g, p.control_set(), 3);
    const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(g.nt(), 3, 1.0 / 3.0);
    CHECK(gradient_fd_check(p, dict, w, 1e-5).max_rel_error <= 1e-6);
  }

  SUBCASE("composite cost, atom-wise mode") {
    const CompositeFixture fx(6);
    ParabolicProblem p = fx.problem(CompositeRelaxation::AtomwiseAverage);
    const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(1, 4, 0.25);
    CHECK(gradient_fd_check(p, fx.dict, w, 1e-5).max_rel_error <= 1e-6);
  }

  SUBCASE("two-component system") {
    const Grid g = Grid::make(1, {6}, {1.0}, 5, 0.5);
    const ControlSet B = ControlSet::box({-1.0}, {1.0});
    Eigen::MatrixXd C(2, 2), D(2, 1);
    C << -0.2, 0.4, -0.4, -0.2;
    D << 1.0, 0.3;
    Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
    const int N = g.interior_nodes();
    Eigen::VectorXd y0(2 * N);
    for (int i = 0; i < N; ++i) {
      y0[i] = std::sin(std::numbers::pi * g.node_coord(i)[0]);
      y0[N + i] = 0.25;
    }
    const ParabolicProblem p(
        "system", g, 2,
        DiffusionTensor::blocks({Eigen::Matrix2d::Identity(),
                                 0.5 * Eigen::Matrix2d::Identity()}),
        fields::linear_system(C, D, e),
        costs::quadratic_tracking(2, 1.0, 0.1, nullptr),
        costs::terminal_quadratic(2, 0.2, nullptr), y0, B, ProblemFlags{});
    auto dict = constants_dict(g, B, 3);
    const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(g.nt(), 3, 1.0 / 3.0);
    CHECK(gradient_fd_check(p, dict, w, 1e-5).max_rel_error <= 1e-6);
  }

  SUBCASE("two-dimensional domain with anisotropic diffusion") {
    const Grid g = Grid::make(2, {5, 4}, {1.0, 1.5}, 4, 0.4);
    const ControlSet B = ControlSet::box({-1.0}, {1.0});
    Eigen::Matrix2d A;
    A << 1.0, 0.15, 0.15, 0.7;
    Eigen::VectorXd y0(g.interior_nodes());
    for (int i = 0; i < g.interior_nodes(); ++i) {
      const auto x = g.node_coord(i);
      y0[i] = x[0] * (1.0 - x[0]) * x[1] * (1.5 - x[1]);
    }
    const ParabolicProblem p("aniso2d", g, 1, DiffusionTensor::blocks({A}),
                             fields::scalar_affine(0.0, 1.0, 0.0),
                             costs::quadratic_tracking(1, 1.0, 0.3, nullptr),
                             costs::terminal_quadratic(1, 0.4, nullptr), y0, B,
                             ProblemFlags{});
    auto dict = constants_dict(g, B, 3);
    const Eigen::MatrixXd w = Eigen::MatrixXd::Constant(g.nt(), 3, 1.0 / 3.0);
    CHECK(gradient_fd_check(p, dict, w, 1e-5).max_rel_error <= 1e-6);
  }
}

TEST_CASE("coarse cell gradients match finite differences") {
  const Grid g = Grid::make(1, {6}, {1.0}, 4, 0.4);
  // Exchange directions preserve the per-cell simplex; the expected
  // derivative is the weighted cell Hamiltonian difference.
  const auto check_cells = [&](const ParabolicProblem& p) {
    const auto support = sample_control_points(p.control_set(), 3);
    PdeSolver solver(p);
    const int N = g.interior_nodes(), Z = 3;
    std::vector<Eigen::MatrixXd> w(
        g.nt(), Eigen::MatrixXd::Constant(N, Z, 1.0 / Z));
    const SpaceTimeYoungMeasure nu(g, support, w);
    const auto fwd = solver.forward(nu);
    const auto chi = solver.adjoint(fwd.y, nu);
    const auto H = hamiltonian_cells(solver, fwd.y, chi, nu);
    const double eps = 1e-6;
    double worst = 0.0;
    for (int k = 0; k < g.nt(); k += 2) {
      for (int i = 0; i < N; i += 2) {
        auto wp = w, wm = w;
        wp[k](i, 0) += eps;
        wp[k](i, 2) -= eps;
        wm[k](i, 0) -= eps;
        wm[k](i, 2) += eps;
        const SpaceTimeYoungMeasure nup(g, support, wp), num(g, support, wm);
        const double jp = solver.cost(solver.forward(nup), nup);
        const double jm = solver.cost(solver.forward(num), num);
        const double fd = (jp - jm) / (2.0 * eps);
        const double adj =
            -g.dt() * g.quad_weight(i) * (H[k](i, 0) - H[k](i, 2));
        worst = std::max(worst, std::abs(fd - adj));
      }
    }
    return worst;
  };
  CHECK(check_cells(build_preset("filippov", g, {})) <= 1e-8);
  CHECK(check_cells(build_preset("composite", g, {})) <= 1e-8);
}

TEST_CASE("coarse solve handles composite costs") {
  const Grid g = Grid::make(1, {5}, {1.0}, 4, 0.4);
  const ParabolicProblem p = build_preset("composite", g, {});
  SolveOptions opts;
  opts.max_iters = 200;
  const CoarseSolveResult r =
      solve_relaxed_coarse(p, sample_control_points(p.control_set(), 3), opts);
  CHECK(r.report.termination == "converged");
  for (std::size_t i = 1; i < r.report.cost_history.size(); ++i) {
    CHECK(r.report.cost_history[i] <= r.report.cost_history[i - 1] + 1e-12);
  }
}
