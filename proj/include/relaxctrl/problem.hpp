#ifndef RELAXCTRL_PROBLEM_HPP
#define RELAXCTRL_PROBLEM_HPP

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "relaxctrl/control_space.hpp"
#include "relaxctrl/grid.hpp"
#include "relaxctrl/integrands.hpp"

namespace relaxctrl {

/// Reaction field f(t, x, y, z) -> R^n with optional state Jacobian
/// (row-major n x n). All evaluators come from the named factories below.
struct FieldFn {
  int n = 1;
  int m = 1;
  std::function<void(double t, std::span<const double> x,
                     std::span<const double> y, std::span<const double> z,
                     std::span<double> out)>
      eval;
  std::function<void(double t, std::span<const double> x,
                     std::span<const double> y, std::span<const double> z,
                     std::span<double> out_nn)>
      dy;  // optional
  bool time_dependent = false;
  std::string name;
};

/// Local running cost density phi(t, x, y, z) with optional dphi/dy.
struct CostDensity {
  std::function<double(double t, std::span<const double> x,
                       std::span<const double> y, std::span<const double> z)>
      eval;
  std::function<void(double t, std::span<const double> x,
                     std::span<const double> y, std::span<const double> z,
                     std::span<double> dy_out)>
      dy;  // optional
  bool time_dependent = false;
  std::string name;
};

/// Inner integrand of a composite cost term, h(t, x, y, z), with optional
/// dh/dy.
struct CostIntegrand {
  std::function<double(double t, std::span<const double> x,
                       std::span<const double> y, std::span<const double> z)>
      eval;
  std::function<void(double t, std::span<const double> x,
                     std::span<const double> y, std::span<const double> z,
                     std::span<double> dy_out)>
      dy;  // optional
  bool time_dependent = false;
  std::string name;
};

struct CompositeCostFactor {
  ScalarFn outer = ScalarFn::identity();
  CostIntegrand inner;
};

struct CompositeCostTerm {
  std::vector<CompositeCostFactor> factors;
};

/// How a composite running cost extends to fine relaxed controls:
///  - AtomwiseAverage: the measure averages the whole composite value per
///    atom (the extension of the cost as one integrand on the control set).
///  - AveragedInner: the outer functions wrap the measure-averaged inner
///    integrals (the relaxation matching the coarse form; this is the one
///    whose maximum principle the optimizer uses).
/// Coarse controls always average inside.
enum class CompositeRelaxation { AtomwiseAverage, AveragedInner };

struct CompositeCost {
  std::vector<CompositeCostTerm> terms;
  CompositeRelaxation mode = CompositeRelaxation::AveragedInner;
};

struct TerminalCost {
  std::function<double(std::span<const double> x, std::span<const double> y)>
      eval;
  std::function<void(std::span<const double> x, std::span<const double> y,
                     std::span<double> dy_out)>
      dy;  // optional
  std::string name;
};

/// Constant diffusion tensor: one d x d block per state component (scalar
/// blocks are a*I). The symmetric part must be positive definite.
class DiffusionTensor {
 public:
  static DiffusionTensor isotropic(int n, double a);
  static DiffusionTensor blocks(std::vector<Eigen::Matrix2d> per_component);

  int components() const { return static_cast<int>(blocks_.size()); }
  const Eigen::Matrix2d& block(int c) const { return blocks_[c]; }
  void validate(int dim) const;

 private:
  std::vector<Eigen::Matrix2d> blocks_;
};

/// Preset metadata: which structural assumptions the data satisfy. These are
/// documented properties, not runtime-verified ones.
struct ProblemFlags {
  bool autonomous = true;
  /// Cost is quadratic along weight segments (reaction independent of y and
  /// running cost quadratic in y), so exact line search applies.
  bool cost_quadratic = false;
  bool orientor_convex = false;
  /// One-sided Lipschitz constant of -f in y (semi-monotonicity).
  double semi_monotonicity_a1 = 0.0;
  /// Differentiability data (state derivatives of f and costs) provided.
  bool differentiable = true;
};

using RunningCost = std::variant<CostDensity, CompositeCost>;

class ParabolicProblem {
 public:
  ParabolicProblem(std::string name, Grid grid, int n, DiffusionTensor A,
                   FieldFn f, RunningCost running,
                   std::optional<TerminalCost> terminal, Eigen::VectorXd y0,
                   ControlSet B, ProblemFlags flags);

  const std::string& name() const { return name_; }
  const Grid& grid() const { return grid_; }
  int n() const { return n_; }
  const DiffusionTensor& diffusion() const { return A_; }
  const FieldFn& f() const { return f_; }
  const RunningCost& running_cost() const { return running_; }
  bool has_local_cost() const {
    return std::holds_alternative<CostDensity>(running_);
  }
  const CostDensity& local_cost() const {
    return std::get<CostDensity>(running_);
  }
  const CompositeCost& composite_cost() const {
    return std::get<CompositeCost>(running_);
  }
  const std::optional<TerminalCost>& terminal_cost() const { return terminal_; }
  /// Initial state, component-major: y0[c*N + i] for component c, node i.
  const Eigen::VectorXd& y0() const { return y0_; }
  const ControlSet& control_set() const { return B_; }
  const ProblemFlags& flags() const { return flags_; }

  /// Same problem on a time-refined grid (spatial layout unchanged).
  ParabolicProblem with_time_steps(int new_nt) const;

 private:
  std::string name_;
  Grid grid_;
  int n_;
  DiffusionTensor A_;
  FieldFn f_;
  RunningCost running_;
  std::optional<TerminalCost> terminal_;
  Eigen::VectorXd y0_;
  ControlSet B_;
  ProblemFlags flags_;
};

namespace fields {
FieldFn zero(int n, int m);
/// n = m = 1: f = a*y + b*z + c.
FieldFn scalar_affine(double a, double b, double c);
/// f = C*y + D*z + e.
FieldFn linear_system(Eigen::MatrixXd C, Eigen::MatrixXd D, Eigen::VectorXd e);
}  // namespace fields

namespace costs {
/// phi = q*|y - yref(x)|^2 + r*|z|^2 (yref evaluated per node).
CostDensity quadratic_tracking(
    int n, double q, double r,
    std::function<void(std::span<const double> x, std::span<double> yref)>
        yref);
/// n = m = 1: phi = q*y^2 + (z^2 - 1)^2.
CostDensity double_well(double q);
TerminalCost terminal_quadratic(
    int n, double beta,
    std::function<void(std::span<const double> x, std::span<double> yref)>
        yref);
/// Composite inner integrands (n = m = 1): h = y - shift, and h = z^2.
CostIntegrand integrand_state_shift(double shift);
CostIntegrand integrand_control_square();
}  // namespace costs

/// Nodal sampling of a pointwise initial condition, component-major.
Eigen::VectorXd sample_initial_state(
    const Grid& grid, int n,
    const std::function<void(std::span<const double> x, std::span<double> y)>&
        fn);

}  // namespace relaxctrl

#endif
