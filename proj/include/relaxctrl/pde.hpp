#ifndef RELAXCTRL_PDE_HPP
#define RELAXCTRL_PDE_HPP

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <memory>
#include <vector>

#include "relaxctrl/measures.hpp"
#include "relaxctrl/problem.hpp"

namespace relaxctrl {

/// Nodal trajectory on the space-time grid: rows 0..nt, each a
/// component-major vector of size n * interior_nodes.
struct Trajectory {
  Grid grid;
  int n = 1;
  std::vector<Eigen::VectorXd> rows;

  double value(int k, int node, int comp) const {
    return rows[k][static_cast<Eigen::Index>(comp) * grid.interior_nodes() +
                   node];
  }
};

/// State trajectory: row 0 equals y0.
using StateTrajectory = Trajectory;
/// Adjoint trajectory: row k is the multiplier the reduced gradient pairs
/// with the reaction term of step k; the last row holds the terminal
/// condition.
using AdjointTrajectory = Trajectory;

struct ForwardResult {
  StateTrajectory y;
  int diverged_at = -1;  // first non-finite step, -1 when clean
  bool diverged() const { return diverged_at >= 0; }
};

/// Second-order central-difference discretization of -div(A grad .) on
/// interior nodes with homogeneous Dirichlet rows eliminated; one sparse
/// block per state component. The assembled matrices are symmetric.
class DiffusionOperator {
 public:
  DiffusionOperator(const Grid& grid, const DiffusionTensor& A, int n);

  const Eigen::SparseMatrix<double>& matrix(int component) const {
    return blocks_[component];
  }
  int components() const { return static_cast<int>(blocks_.size()); }

  /// Applies the full block operator to a component-major vector.
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;

 private:
  int N_;
  std::vector<Eigen::SparseMatrix<double>> blocks_;
};

DiffusionOperator assemble_diffusion(const Grid& grid,
                                     const DiffusionTensor& A, int n);

/// Nodal quadrature weights of the grid as a vector.
Eigen::VectorXd quadrature_weights(const Grid& grid);

/// Quadrature inner product of component-major nodal vectors.
double weighted_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& quad_w, int n);

/// Measure-averaged reaction field at one time: fine and coarse variants.
Eigen::VectorXd average_field_fine(const ParabolicProblem& p, double t,
                                   const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& mu_row,
                                   const ControlDictionary& dict);
Eigen::VectorXd average_field_coarse(const ParabolicProblem& p, double t,
                                     const Eigen::VectorXd& y,
                                     const SpaceTimeYoungMeasure& nu,
                                     int slice);

/// Bound solver: assembles the diffusion blocks and factorizes the implicit
/// step (I + dt*L) once per component; forward, cost and adjoint runs reuse
/// the factorization. All evaluations sum in fixed node/atom order.
class PdeSolver {
 public:
  explicit PdeSolver(const ParabolicProblem& p);

  const ParabolicProblem& problem() const { return *p_; }
  const DiffusionOperator& diffusion() const { return op_; }
  const Eigen::VectorXd& quad() const { return quad_w_; }

  ForwardResult forward(const RelaxedControl& mu) const;
  ForwardResult forward(const SpaceTimeYoungMeasure& nu) const;
  /// Raw-weight fine path (rows need not be normalized); used by finite
  /// difference checks and line searches.
  ForwardResult forward_raw(const Eigen::MatrixXd& fine_weights,
                            const ControlDictionary& dict) const;

  double cost(const ForwardResult& fwd, const RelaxedControl& mu) const;
  double cost(const ForwardResult& fwd, const SpaceTimeYoungMeasure& nu) const;
  double cost_raw(const ForwardResult& fwd, const Eigen::MatrixXd& fine_weights,
                  const ControlDictionary& dict) const;

  AdjointTrajectory adjoint(const StateTrajectory& y,
                            const RelaxedControl& mu) const;
  AdjointTrajectory adjoint(const StateTrajectory& y,
                            const SpaceTimeYoungMeasure& nu) const;

  /// Running cost value at step time t for one weight row / slice.
  double running_cost_fine(double t, const Eigen::VectorXd& y,
                           const Eigen::VectorXd& mu_row,
                           const ControlDictionary& dict) const;
  double running_cost_coarse(double t, const Eigen::VectorXd& y,
                             const SpaceTimeYoungMeasure& nu, int slice) const;

  /// d(running_cost_fine)/d(mu_row[atom]); the phi-term the Hamiltonian and
  /// gradient use.
  double cost_weight_derivative(double t, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& mu_row,
                                const ControlDictionary& dict, int atom) const;
  /// d(running_cost_coarse)/d(weight of support point z at `node`), without
  /// the quadrature factor (Hamiltonian units).
  double cost_cell_derivative(double t, const Eigen::VectorXd& y,
                              const SpaceTimeYoungMeasure& nu, int slice,
                              int node, std::span<const double> z) const;

  /// Running-cost integrand evaluated at a single atom: the density
  /// quadrature, or the whole composite value of the atom. This is the
  /// per-atom cost both sides of a selection comparison use.
  double atom_cost_value(double t, const Eigen::VectorXd& y,
                         const ControlDictionary& dict, int atom) const;

  /// Quadrature of the terminal cost at the last state row.
  double terminal_cost(const Eigen::VectorXd& y_final) const;

  /// M^{-1} rhs per component (the implicit step).
  Eigen::VectorXd implicit_solve(const Eigen::VectorXd& rhs) const;

 private:
  const ParabolicProblem* p_;
  DiffusionOperator op_;
  Eigen::VectorXd quad_w_;
  std::vector<std::shared_ptr<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>>
      step_solvers_;

  template <class ControlRowFn>
  ForwardResult forward_impl(ControlRowFn&& field_at) const;
  template <class AvgFieldDy, class CostDy>
  AdjointTrajectory adjoint_impl(const StateTrajectory& y, AvgFieldDy&& favg_dy,
                                 CostDy&& cost_dy) const;
  /// Adjoint-consistent solve: W^{-1} M^{-1} (W b), reusing the forward
  /// factorization (the diffusion blocks are symmetric).
  Eigen::VectorXd adjoint_solve(const Eigen::VectorXd& b) const;

  void state_cost_derivative_fine(double t, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& mu_row,
                                  const ControlDictionary& dict,
                                  Eigen::VectorXd& rho) const;
  void state_cost_derivative_coarse(double t, const Eigen::VectorXd& y,
                                    const SpaceTimeYoungMeasure& nu, int slice,
                                    Eigen::VectorXd& rho) const;
  void averaged_field_jacobian_fine(double t, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& mu_row,
                                    const ControlDictionary& dict,
                                    Eigen::VectorXd& blocks) const;
  void averaged_field_jacobian_coarse(double t, const Eigen::VectorXd& y,
                                      const SpaceTimeYoungMeasure& nu,
                                      int slice, Eigen::VectorXd& blocks) const;
};

/// One-shot wrappers.
ForwardResult solve_forward(const ParabolicProblem& p, const RelaxedControl& mu);
ForwardResult solve_forward(const ParabolicProblem& p,
                            const SpaceTimeYoungMeasure& nu);
double evaluate_cost(const ParabolicProblem& p, const ForwardResult& fwd,
                     const RelaxedControl& mu);
double evaluate_cost(const ParabolicProblem& p, const ForwardResult& fwd,
                     const SpaceTimeYoungMeasure& nu);
AdjointTrajectory solve_adjoint(const ParabolicProblem& p,
                                const StateTrajectory& y,
                                const RelaxedControl& mu);
AdjointTrajectory solve_adjoint(const ParabolicProblem& p,
                                const StateTrajectory& y,
                                const SpaceTimeYoungMeasure& nu);

}  // namespace relaxctrl

#endif
