#ifndef RELAXCTRL_CONFIG_HPP
#define RELAXCTRL_CONFIG_HPP

#include <cstdint>
#include <json.hpp>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "relaxctrl/control_space.hpp"
#include "relaxctrl/grid.hpp"
#include "relaxctrl/optimizer.hpp"

namespace relaxctrl {

enum class RelaxationKind { Fine, Coarse };

/// Fully resolved run configuration. Parsing is strict: unknown keys are
/// rejected with their path, grid and preset parameters are range-checked.
struct RunConfig {
  std::string preset;
  std::map<std::string, double> params;
  Grid grid = Grid::make(1, {2}, {1.0}, 1, 1.0);
  RelaxationKind relaxation = RelaxationKind::Fine;

  DictionaryStrategy dict_strategy = DictionaryStrategy::Constants;
  int dict_count = 3;
  std::uint64_t dict_seed = 0;
  std::string dict_custom_path;

  int support_count = 3;

  SolveOptions solver;
  std::uint64_t seed = 0;

  std::string out_dir = "out";
  std::vector<int> chatter_levels{2, 4, 8, 16};
  double fd_step = 1e-5;
  double fd_tolerance = 1e-6;

  /// The resolved configuration echoed into reports (deterministic).
  nlohmann::json echo() const;
};

RunConfig parse_config(const std::string& path);
RunConfig parse_config_json(const nlohmann::json& doc);

}  // namespace relaxctrl

#endif
