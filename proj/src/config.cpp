#include "relaxctrl/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

#include "relaxctrl/presets.hpp"

namespace relaxctrl {

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const std::string& path,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("config: unknown key '" +
                                  (path.empty() ? key : path + "." + key) + "'");
    }
  }
}

template <class T>
T get_or(const json& obj, const std::string& key, const T& fallback) {
  if (!obj.contains(key)) return fallback;
  return obj.at(key).get<T>();
}

StepRule parse_step_rule(const std::string& s) {
  if (s == "harmonic") return StepRule::Harmonic;
  if (s == "exact") return StepRule::ExactQuadratic;
  if (s == "armijo") return StepRule::Armijo;
  throw std::invalid_argument(
      "config: solver.step_rule must be harmonic|exact|armijo, got '" + s + "'");
}

DirectionRule parse_direction(const std::string& s) {
  if (s == "pairwise") return DirectionRule::Pairwise;
  if (s == "fw") return DirectionRule::FrankWolfe;
  throw std::invalid_argument(
      "config: solver.direction must be pairwise|fw, got '" + s + "'");
}

DictionaryStrategy parse_strategy(const std::string& s) {
  if (s == "constants") return DictionaryStrategy::Constants;
  if (s == "bang") return DictionaryStrategy::Bang;
  if (s == "custom") return DictionaryStrategy::Custom;
  throw std::invalid_argument(
      "config: dictionary.strategy must be constants|bang|custom, got '" + s +
      "'");
}

}  // namespace

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw std::runtime_error("config: invalid JSON in '" + path + "': " + e.what());
  }
  return parse_config_json(doc);
}

RunConfig parse_config_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config: expected an object");
  reject_unknown_keys(doc, "",
                      {"problem", "grid", "relaxation", "dictionary", "support",
                       "solver", "seed", "output", "chatter", "verify"});

  RunConfig cfg;

  const json& prob = doc.at("problem");
  reject_unknown_keys(prob, "problem", {"preset", "params"});
  cfg.preset = prob.at("preset").get<std::string>();
  const auto& registry = preset_registry();
  auto pit = registry.find(cfg.preset);
  if (pit == registry.end()) {
    throw std::invalid_argument("config: problem.preset '" + cfg.preset +
                                "' is not a registered preset");
  }
  if (prob.contains("params")) {
    for (const auto& [key, value] : prob.at("params").items()) {
      if (!value.is_number()) {
        throw std::invalid_argument("config: problem.params." + key +
                                    " must be a number");
      }
      cfg.params[key] = value.get<double>();
    }
  }

  const GridDefaults& gd = pit->second.default_grid;
  int dim = gd.dim, nt = gd.nt;
  std::vector<int> nx = gd.nx;
  std::vector<double> extent = gd.extent;
  double T = gd.T;
  if (doc.contains("grid")) {
    const json& g = doc.at("grid");
    reject_unknown_keys(g, "grid", {"dim", "nx", "extent", "nt", "T"});
    dim = get_or(g, "dim", dim);
    nx = get_or(g, "nx", nx);
    extent = get_or(g, "extent", extent);
    nt = get_or(g, "nt", nt);
    T = get_or(g, "T", T);
    if (static_cast<int>(nx.size()) != dim && dim == 2 && nx.size() == 1) {
      nx = {nx[0], nx[0]};
    }
    if (static_cast<int>(extent.size()) != dim && dim == 2 && extent.size() == 1) {
      extent = {extent[0], extent[0]};
    }
  }
  try {
    cfg.grid = Grid::make(dim, nx, extent, nt, T);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(std::string("config: grid: ") + e.what());
  }

  const std::string relax = get_or<std::string>(doc, "relaxation", "fine");
  if (relax == "fine") {
    cfg.relaxation = RelaxationKind::Fine;
  } else if (relax == "coarse") {
    cfg.relaxation = RelaxationKind::Coarse;
  } else {
    throw std::invalid_argument("config: relaxation must be fine|coarse, got '" +
                                relax + "'");
  }

  cfg.dict_count = pit->second.default_dictionary_count;
  cfg.support_count = pit->second.default_dictionary_count;
  if (doc.contains("dictionary")) {
    const json& d = doc.at("dictionary");
    reject_unknown_keys(d, "dictionary", {"strategy", "count", "seed", "path"});
    cfg.dict_strategy = parse_strategy(get_or<std::string>(d, "strategy", "constants"));
    cfg.dict_count = get_or(d, "count", cfg.dict_count);
    cfg.dict_seed = get_or<std::uint64_t>(d, "seed", 0);
    cfg.dict_custom_path = get_or<std::string>(d, "path", "");
    if (cfg.dict_strategy == DictionaryStrategy::Custom &&
        cfg.dict_custom_path.empty()) {
      throw std::invalid_argument("config: dictionary.path required for custom");
    }
    if (cfg.dict_count < 1) {
      throw std::invalid_argument("config: dictionary.count must be >= 1");
    }
  }
  if (doc.contains("support")) {
    const json& s = doc.at("support");
    reject_unknown_keys(s, "support", {"count"});
    cfg.support_count = get_or(s, "count", cfg.support_count);
    if (cfg.support_count < 1) {
      throw std::invalid_argument("config: support.count must be >= 1");
    }
  }

  if (doc.contains("solver")) {
    const json& s = doc.at("solver");
    reject_unknown_keys(s, "solver",
                        {"max_iters", "mp_tolerance", "step_rule", "direction",
                         "restarts", "armijo"});
    cfg.solver.max_iters = get_or(s, "max_iters", cfg.solver.max_iters);
    cfg.solver.mp_tolerance = get_or(s, "mp_tolerance", cfg.solver.mp_tolerance);
    cfg.solver.step_rule =
        parse_step_rule(get_or<std::string>(s, "step_rule", "exact"));
    cfg.solver.direction =
        parse_direction(get_or<std::string>(s, "direction", "pairwise"));
    cfg.solver.restarts = get_or(s, "restarts", cfg.solver.restarts);
    if (s.contains("armijo")) {
      const json& a = s.at("armijo");
      reject_unknown_keys(a, "solver.armijo",
                          {"slope_fraction", "shrink", "alpha_min"});
      cfg.solver.armijo.slope_fraction =
          get_or(a, "slope_fraction", cfg.solver.armijo.slope_fraction);
      cfg.solver.armijo.shrink = get_or(a, "shrink", cfg.solver.armijo.shrink);
      cfg.solver.armijo.alpha_min =
          get_or(a, "alpha_min", cfg.solver.armijo.alpha_min);
    }
  }
  cfg.seed = get_or<std::uint64_t>(doc, "seed", 0);
  cfg.solver.seed = cfg.seed;
  cfg.solver.validate();

  if (doc.contains("output")) {
    const json& o = doc.at("output");
    reject_unknown_keys(o, "output", {"dir"});
    cfg.out_dir = get_or<std::string>(o, "dir", cfg.out_dir);
  }
  if (doc.contains("chatter")) {
    const json& c = doc.at("chatter");
    reject_unknown_keys(c, "chatter", {"levels"});
    cfg.chatter_levels = get_or(c, "levels", cfg.chatter_levels);
    for (int k : cfg.chatter_levels) {
      if (k < 1) throw std::invalid_argument("config: chatter.levels must be >= 1");
    }
    if (cfg.chatter_levels.empty()) {
      throw std::invalid_argument("config: chatter.levels must be nonempty");
    }
  }
  if (doc.contains("verify")) {
    const json& v = doc.at("verify");
    reject_unknown_keys(v, "verify", {"fd_step", "fd_tolerance"});
    cfg.fd_step = get_or(v, "fd_step", cfg.fd_step);
    cfg.fd_tolerance = get_or(v, "fd_tolerance", cfg.fd_tolerance);
    if (!(cfg.fd_step > 0.0) || !(cfg.fd_tolerance > 0.0)) {
      throw std::invalid_argument("config: verify.fd_step/fd_tolerance must be > 0");
    }
  }

  // Validate preset parameter names and ranges early.
  build_preset(cfg.preset, cfg.grid, cfg.params);
  return cfg;
}

nlohmann::json RunConfig::echo() const {
  json j;
  j["problem"] = {{"preset", preset}, {"params", params}};
  json g;
  g["dim"] = grid.dim();
  std::vector<int> nx;
  std::vector<double> extent;
  for (int a = 0; a < grid.dim(); ++a) {
    nx.push_back(grid.nx(a));
    extent.push_back(grid.extent(a));
  }
  g["nx"] = nx;
  g["extent"] = extent;
  g["nt"] = grid.nt();
  g["T"] = grid.T();
  j["grid"] = g;
  j["relaxation"] = relaxation == RelaxationKind::Fine ? "fine" : "coarse";
  json d;
  d["strategy"] = dict_strategy == DictionaryStrategy::Constants ? "constants"
                  : dict_strategy == DictionaryStrategy::Bang    ? "bang"
                                                                 : "custom";
  d["count"] = dict_count;
  d["seed"] = dict_seed;
  if (!dict_custom_path.empty()) d["path"] = dict_custom_path;
  j["dictionary"] = d;
  j["support"] = {{"count", support_count}};
  json s;
  s["max_iters"] = solver.max_iters;
  s["mp_tolerance"] = solver.mp_tolerance;
  s["step_rule"] = solver.step_rule == StepRule::Harmonic ? "harmonic"
                   : solver.step_rule == StepRule::Armijo ? "armijo"
                                                          : "exact";
  s["direction"] =
      solver.direction == DirectionRule::Pairwise ? "pairwise" : "fw";
  s["restarts"] = solver.restarts;
  j["solver"] = s;
  j["seed"] = seed;
  j["chatter"] = {{"levels", chatter_levels}};
  j["verify"] = {{"fd_step", fd_step}, {"fd_tolerance", fd_tolerance}};
  return j;
}

}  // namespace relaxctrl
