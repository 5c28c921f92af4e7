#ifndef RELAXCTRL_RUNNER_HPP
#define RELAXCTRL_RUNNER_HPP

#include <ostream>
#include <string>
#include <vector>

#include "relaxctrl/config.hpp"

namespace relaxctrl {

/// Exit codes shared by the command entry points: 0 converged/ok, 1 error,
/// 2 not converged (or failed checks).
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNotConverged = 2;

struct ChatterRow {
  int level = 1;
  double chattered_cost = 0.0;
  double relaxed_cost_refined = 0.0;
  double gap = 0.0;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string note;
};

int run_solve(const RunConfig& cfg, std::ostream& log);
int run_verify(const RunConfig& cfg, std::ostream& log);
int run_chatter(const RunConfig& cfg, std::ostream& log);
int list_presets(std::ostream& out);

/// The checks run_verify performs, exposed for reuse.
std::vector<CheckResult> verification_bundle(const RunConfig& cfg);

/// The ladder run_chatter performs on a solved control, exposed for reuse.
std::vector<ChatterRow> chatter_ladder(const ParabolicProblem& p,
                                       const RelaxedControl& optimum,
                                       const std::vector<int>& levels);

}  // namespace relaxctrl

#endif
