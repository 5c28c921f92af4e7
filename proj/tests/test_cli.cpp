#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relaxctrl/config.hpp"
#include "relaxctrl/presets.hpp"
#include "relaxctrl/runner.hpp"
#include "relaxctrl/serialize.hpp"

using namespace relaxctrl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "relaxctrl_cli_tests";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

fs::path write_config(const std::string& name, const json& doc) {
  const fs::path path = scratch_dir() / name;
  std::ofstream out(path);
  out << doc.dump(2);
  return path;
}

json minimal_lq() {
  return json{{"problem", {{"preset", "lq"}}},
              {"grid",
               {{"dim", 1}, {"nx", {12}}, {"extent", {1.0}}, {"nt", 10}, {"T", 1.0}}},
              {"solver", {{"max_iters", 100}, {"mp_tolerance", 1e-6}}}};
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(RELAXCTRL_BIN) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing fills defaults and echoes them") {
  const auto path = write_config("minimal.json", json{{"problem", {{"preset", "lq"}}}});
  const RunConfig cfg = parse_config(path.string());
  CHECK(cfg.preset == "lq");
  CHECK(cfg.grid.nx(0) == 16);  // preset default grid
  CHECK(cfg.grid.nt() == 20);
  CHECK(cfg.solver.mp_tolerance == 1e-6);
  CHECK(cfg.dict_count == 3);
  const json echo = cfg.echo();
  CHECK(echo.at("problem").at("preset") == "lq");
  CHECK(echo.at("solver").at("step_rule") == "exact");
  CHECK(echo.at("relaxation") == "fine");
}

TEST_CASE("config parsing is strict") {
  SUBCASE("unknown keys are rejected by name") {
    auto doc = minimal_lq();
    doc["gridd"] = json::object();
    const auto path = write_config("unknown.json", doc);
    try {
      parse_config(path.string());
      FAIL("expected a parse error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("gridd") != std::string::npos);
    }
  }
  SUBCASE("nested unknown keys carry their path") {
    auto doc = minimal_lq();
    doc["solver"]["stepsize"] = 0.1;
    const auto path = write_config("nested_unknown.json", doc);
    try {
      parse_config(path.string());
      FAIL("expected a parse error");
    } catch (const std::exception& e) {
      CHECK(std::string(e.what()).find("solver.stepsize") != std::string::npos);
    }
  }
  SUBCASE("grid range violations are reported") {
    auto doc = minimal_lq();
    doc["grid"]["nt"] = 0;
    const auto path = write_config("bad_nt.json", doc);
    try {
      parse_config(path.string());
      FAIL("expected a parse error");
    } catch (const std::exception& e) {
      const std::string msg = e.what();
      CHECK(msg.find("grid") != std::string::npos);
      CHECK(msg.find("nt") != std::string::npos);
    }
  }
  SUBCASE("preset parameters are range-checked") {
    auto doc = minimal_lq();
    doc["problem"]["params"] = {{"gamma", 99.0}};
    CHECK_THROWS(parse_config(write_config("bad_param.json", doc).string()));
    doc["problem"]["params"] = {{"gamm", 1.0}};
    CHECK_THROWS(parse_config(write_config("bad_param2.json", doc).string()));
  }
  SUBCASE("unregistered presets are rejected") {
    const auto path =
        write_config("bad_preset.json", json{{"problem", {{"preset", "nope"}}}});
    CHECK_THROWS(parse_config(path.string()));
  }
  SUBCASE("missing files and invalid JSON are reported") {
    CHECK_THROWS(parse_config((scratch_dir() / "absent.json").string()));
    const fs::path path = scratch_dir() / "broken.json";
    std::ofstream(path) << "{not json";
    CHECK_THROWS(parse_config(path.string()));
  }
}

TEST_CASE("solve command produces the documented bundle") {
  auto doc = minimal_lq();
  const fs::path out = scratch_dir() / "solve_out";
  doc["output"] = {{"dir", out.string()}};
  const auto path = write_config("solve.json", doc);
  CHECK(run_binary("solve --config " + path.string()) == 0);

  REQUIRE(fs::exists(out / "report.json"));
  const json report = json::parse(slurp(out / "report.json"));
  CHECK(report.contains("config"));
  REQUIRE(report.contains("report"));
  for (const char* key :
       {"cost_history", "mp_history", "final_cost", "per_time_residual",
        "max_residual", "fw_gap", "hamiltonian_profile",
        "hamiltonian_dispersion", "iterations", "termination"}) {
    CHECK(report.at("report").contains(key));
  }
  CHECK(report.at("report").at("termination") == "converged");

  // Wall time lives in the metadata file, not the payload.
  CHECK(slurp(out / "report.json").find("wall_time") == std::string::npos);
  const json meta = json::parse(slurp(out / "meta.json"));
  CHECK(meta.contains("wall_time_seconds"));

  const json control = json::parse(slurp(out / "control.json"));
  const RelaxedControl mu = relaxed_control_from_json(control);
  CHECK(mu.steps() == 10);
  CHECK(mu.atoms() == 3);

  const std::string state = slurp(out / "state.csv");
  CHECK(state.find("# relaxctrl trajectory") == 0);
  // Header (2 comment lines + column line) plus nt+1 data rows.
  CHECK(std::count(state.begin(), state.end(), '\n') == 3 + 11);
  CHECK(fs::exists(out / "adjoint.csv"));
  CHECK(fs::exists(out / "residual.csv"));
  CHECK(fs::exists(out / "hamiltonian.csv"));
  const json state_json = json::parse(slurp(out / "state.json"));
  CHECK(state_json.at("rows").size() == 11);
  CHECK(fs::exists(out / "adjoint.json"));
}

TEST_CASE("solve exit codes") {
  SUBCASE("iteration limit maps to 2") {
    auto doc = minimal_lq();
    doc["solver"]["max_iters"] = 0;
    doc["output"] = {{"dir", (scratch_dir() / "limit_out").string()}};
    const auto path = write_config("limit.json", doc);
    CHECK(run_binary("solve --config " + path.string()) == 2);
  }
  SUBCASE("unwritable output maps to 1") {
    auto doc = minimal_lq();
    const fs::path blocker = scratch_dir() / "blocker";
    std::ofstream(blocker) << "file";
    doc["output"] = {{"dir", (blocker / "nested").string()}};
    const auto path = write_config("unwritable.json", doc);
    CHECK(run_binary("solve --config " + path.string()) == 1);
  }
  SUBCASE("bad config maps to 1") {
    CHECK(run_binary("solve --config does_not_exist.json") == 1);
  }
}

TEST_CASE("identical config and seed give byte-identical reports") {
  auto doc = minimal_lq();
  doc["problem"] = {{"preset", "chatter"}};
  doc["grid"]["nt"] = 16;
  doc["seed"] = 42;
  const fs::path out1 = scratch_dir() / "det1", out2 = scratch_dir() / "det2";
  const auto path = write_config("det.json", doc);
  CHECK(run_binary("solve --config " + path.string() + " --out " + out1.string()) == 0);
  CHECK(run_binary("solve --config " + path.string() + " --out " + out2.string()) == 0);
  CHECK(slurp(out1 / "report.json") == slurp(out2 / "report.json"));
  CHECK(slurp(out1 / "control.json") == slurp(out2 / "control.json"));
  CHECK(slurp(out1 / "state.csv") == slurp(out2 / "state.csv"));
}

TEST_CASE("chatter command emits one ladder row per level") {
  auto doc = minimal_lq();
  doc["problem"] = {{"preset", "chatter"}};
  doc["grid"]["nt"] = 12;
  const fs::path out = scratch_dir() / "chatter_out";
  doc["output"] = {{"dir", out.string()}};
  const auto path = write_config("chatter.json", doc);
  CHECK(run_binary("chatter --config " + path.string() + " --levels 2,4,8,16") == 0);
  const std::string csv = slurp(out / "chatter.csv");
  // Comment, column header, 4 data rows.
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + 4);

  SUBCASE("a Dirac optimum chatters with zero gap") {
    // gamma large enough that the solve lands on the pure zero atom.
    const ParabolicProblem p =
        build_preset("lq", Grid::make(1, {8}, {1.0}, 6, 1.0), {});
    auto dict = std::make_shared<const ControlDictionary>(build_dictionary(
        p.grid(), p.control_set(), DictionaryStrategy::Constants, 3));
    const FineSolveResult r = solve_relaxed(p, dict, SolveOptions{});
    for (int k = 0; k < p.grid().nt(); ++k) {
      CHECK(r.control.weights()(k, 1) == 1.0);
    }
    const auto rows = chatter_ladder(p, r.control, {2, 4, 8});
    for (const auto& row : rows) CHECK(row.gap == 0.0);
  }
}

TEST_CASE("verify command writes the check bundle") {
  auto doc = minimal_lq();
  const fs::path out = scratch_dir() / "verify_out";
  doc["output"] = {{"dir", out.string()}};
  const auto path = write_config("verify.json", doc);
  CHECK(run_binary("verify --config " + path.string()) == 0);
  const json v = json::parse(slurp(out / "verify.json"));
  CHECK(v.at("all_pass") == true);
  REQUIRE(v.at("checks").size() >= 5);
  for (const auto& check : v.at("checks")) {
    CHECK(check.contains("name"));
    CHECK(check.contains("pass"));
    CHECK(check.contains("measured"));
    CHECK(check.contains("tolerance"));
  }

  SUBCASE("the broken-derivative fixture fails the gradient check") {
    json bad = {{"problem", {{"preset", "broken-gradient"}}},
                {"output", {{"dir", (scratch_dir() / "verify_bad").string()}}}};
    const auto bad_path = write_config("verify_bad.json", bad);
    CHECK(run_binary("verify --config " + bad_path.string()) == 2);
    const json vb = json::parse(slurp(scratch_dir() / "verify_bad" / "verify.json"));
    CHECK(vb.at("all_pass") == false);
    bool gradient_failed = false;
    for (const auto& check : vb.at("checks")) {
      if (check.at("name") == "gradient_fd") gradient_failed = !check.at("pass");
    }
    CHECK(gradient_failed);
  }
}

TEST_CASE("presets command lists the registry") {
  std::ostringstream out;
  CHECK(list_presets(out) == 0);
  const std::string table = out.str();
  for (const char* name : {"lq", "chatter", "composite", "filippov"}) {
    CHECK(table.find(name) != std::string::npos);
  }
}

TEST_CASE("coarse solve runs end to end") {
  json doc = {{"problem", {{"preset", "filippov"}}},
              {"grid",
               {{"dim", 1}, {"nx", {8}}, {"extent", {1.0}}, {"nt", 8}, {"T", 0.5}}},
              {"relaxation", "coarse"},
              {"support", {{"count", 3}}},
              {"solver", {{"max_iters", 200}, {"mp_tolerance", 1e-6}}}};
  const fs::path out = scratch_dir() / "coarse_out";
  doc["output"] = {{"dir", out.string()}};
  const auto path = write_config("coarse.json", doc);
  CHECK(run_binary("solve --config " + path.string()) == 0);
  const json control = json::parse(slurp(out / "control.json"));
  const SpaceTimeYoungMeasure nu = young_measure_from_json(control);
  CHECK(nu.slices() == 8);
  CHECK(nu.support_size() == 3);
}
