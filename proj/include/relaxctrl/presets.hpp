#ifndef RELAXCTRL_PRESETS_HPP
#define RELAXCTRL_PRESETS_HPP

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "relaxctrl/problem.hpp"

namespace relaxctrl {

struct PresetParam {
  double value = 0.0;  // default
  double lo = 0.0;
  double hi = 0.0;
  std::string doc;
};

struct GridDefaults {
  int dim = 1;
  std::vector<int> nx{16};
  std::vector<double> extent{1.0};
  int nt = 20;
  double T = 1.0;
};

struct Preset {
  std::string name;
  std::string description;
  std::map<std::string, PresetParam> params;
  GridDefaults default_grid;
  int default_dictionary_count = 3;
  std::function<ParabolicProblem(const Grid& grid,
                                 const std::map<std::string, double>& params)>
      build;
  ProblemFlags flags;
};

/// All registered problem presets, keyed by name.
const std::map<std::string, Preset>& preset_registry();

/// Builds a preset problem; overrides are validated against the documented
/// parameter ranges, unknown parameter names are rejected.
ParabolicProblem build_preset(const std::string& name, const Grid& grid,
                              const std::map<std::string, double>& overrides);

}  // namespace relaxctrl

#endif
