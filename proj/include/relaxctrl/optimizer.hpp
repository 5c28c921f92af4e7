#ifndef RELAXCTRL_OPTIMIZER_HPP
#define RELAXCTRL_OPTIMIZER_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "relaxctrl/pde.hpp"

namespace relaxctrl {

enum class StepRule { Harmonic, ExactQuadratic, Armijo };

/// Search direction of the conditional-gradient iteration. Both use the same
/// Hamiltonian-maximization oracle; Pairwise additionally moves mass off the
/// worst supported atom, which avoids the zig-zag stall of plain steps when
/// the optimum sits on a face of the simplex.
enum class DirectionRule { FrankWolfe, Pairwise };

struct ArmijoParams {
  double slope_fraction = 1e-4;
  double shrink = 0.5;
  double alpha_min = 1e-12;
};

struct SolveOptions {
  int max_iters = 500;
  double mp_tolerance = 1e-6;
  StepRule step_rule = StepRule::ExactQuadratic;
  DirectionRule direction = DirectionRule::Pairwise;
  ArmijoParams armijo;
  int restarts = 0;  // extra seeded starts beyond the uniform one
  std::uint64_t seed = 0;

  void validate() const;
};

struct RestartSummary {
  std::uint64_t seed = 0;
  double final_cost = 0.0;
  std::string termination;
};

struct SolveReport {
  std::vector<double> cost_history;
  std::vector<double> mp_history;
  double final_cost = 0.0;
  std::vector<double> per_time_residual;
  double max_residual = 0.0;
  double fw_gap = 0.0;
  std::vector<double> hamiltonian_profile;
  double hamiltonian_dispersion = 0.0;
  int iterations = 0;
  std::string termination;  // converged | iteration_limit | diverged
  std::string step_rule;
  std::string direction;
  std::vector<RestartSummary> restart_runs;
  double wall_time_seconds = 0.0;  // serialized into metadata, not the payload
};

/// Hamiltonian of one atom at step k: quadrature pairing of the reaction
/// with the adjoint row minus the running-cost weight derivative. For
/// composite costs in averaged-inner mode the cost term is the chain rule
/// through the outer derivatives at the control's current averaged inner
/// integrals (mu supplies them).
double hamiltonian(const PdeSolver& solver, const StateTrajectory& y,
                   const AdjointTrajectory& chi, const RelaxedControl& mu,
                   int k, int atom);

/// All atom Hamiltonians: steps x atoms. Atom scans may run on several
/// threads (RELAXCTRL_THREADS); every entry is written once so the result is
/// thread-count independent.
Eigen::MatrixXd hamiltonian_matrix(const PdeSolver& solver,
                                   const StateTrajectory& y,
                                   const AdjointTrajectory& chi,
                                   const RelaxedControl& mu);

/// Local-density Hamiltonian at one cell: f(t,x,y,z).chi(t,x) - phi(t,x,y,z).
/// Only defined for local running costs; composite costs are not pointwise
/// decomposable and raise an error.
double pointwise_hamiltonian(const ParabolicProblem& p, const StateTrajectory& y,
                             const AdjointTrajectory& chi, int k, int node,
                             std::span<const double> z);

/// Cell Hamiltonians of a coarse iterate: per step, interior-nodes x support.
/// Uses the cost's cell derivative, so composite costs are covered through
/// their chain rule.
std::vector<Eigen::MatrixXd> hamiltonian_cells(const PdeSolver& solver,
                                               const StateTrajectory& y,
                                               const AdjointTrajectory& chi,
                                               const SpaceTimeYoungMeasure& nu);

/// Argmax atom per time step; exact ties resolve to the lowest index.
std::vector<int> lmo_fine(const Eigen::MatrixXd& hamiltonians);
/// Argmax support point per (step, node) cell.
std::vector<std::vector<int>> lmo_coarse(
    const std::vector<Eigen::MatrixXd>& cell_hamiltonians);

struct MpResidual {
  std::vector<double> per_time;  // fine: residual; coarse: cell quadrature
  double max = 0.0;
  double fw_gap = 0.0;  // dt-weighted residual total
  std::vector<Eigen::MatrixXd> per_cell;  // coarse only
};

MpResidual mp_residual_fine(const Grid& grid, const Eigen::MatrixXd& hamiltonians,
                            const Eigen::MatrixXd& weights);
MpResidual mp_residual_coarse(const Grid& grid,
                              const std::vector<Eigen::MatrixXd>& cells,
                              const SpaceTimeYoungMeasure& nu);

struct HamiltonianConstancy {
  std::vector<double> profile;  // measure-averaged augmented Hamiltonian
  double dispersion = 0.0;      // (max - min) / (1 + |mean|)
};

HamiltonianConstancy hamiltonian_constancy(const PdeSolver& solver,
                                           const StateTrajectory& y,
                                           const AdjointTrajectory& chi,
                                           const RelaxedControl& mu);
HamiltonianConstancy hamiltonian_constancy(const PdeSolver& solver,
                                           const StateTrajectory& y,
                                           const AdjointTrajectory& chi,
                                           const SpaceTimeYoungMeasure& nu);

struct FineSolveResult {
  RelaxedControl control;
  StateTrajectory y;
  AdjointTrajectory chi;
  SolveReport report;
};

struct CoarseSolveResult {
  SpaceTimeYoungMeasure control;
  StateTrajectory y;
  AdjointTrajectory chi;
  SolveReport report;
};

/// Conditional gradient over the per-step probability simplices, stopping on
/// the maximum-principle residual. Deterministic given options.
FineSolveResult solve_relaxed(const ParabolicProblem& p, DictionaryPtr dict,
                              const SolveOptions& options);
CoarseSolveResult solve_relaxed_coarse(const ParabolicProblem& p,
                                       std::vector<std::vector<double>> support,
                                       const SolveOptions& options);

struct FilippovExtraction {
  std::vector<int> selection;           // atom per time step
  std::vector<double> f_mismatch;       // L2 nodal norm per step
  std::vector<double> cost_slack;       // atom cost - averaged cost per step
  std::vector<bool> cost_feasible;      // slack <= tolerance
  double max_mismatch = 0.0;
  bool exact_within_tol = false;
  double mismatch_tolerance = 1e-8;
};

/// Single-valued selection matching the measure-averaged velocity: per step,
/// the dictionary atom of minimal reaction mismatch among atoms whose cost
/// does not exceed the averaged cost (plus slack); best-effort otherwise.
FilippovExtraction filippov_extract(const ParabolicProblem& p,
                                    const RelaxedControl& mu,
                                    const StateTrajectory& y,
                                    double mismatch_tolerance = 1e-8);

}  // namespace relaxctrl

#endif
