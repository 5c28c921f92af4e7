#include "relaxctrl/pde.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <variant>

namespace relaxctrl {

namespace {

inline void gather_state(const Eigen::VectorXd& y, int N, int n, int node,
                         std::vector<double>& out) {
  for (int c = 0; c < n; ++c) out[c] = y[static_cast<Eigen::Index>(c) * N + node];
}

}  // namespace

DiffusionOperator::DiffusionOperator(const Grid& grid,
                                     const DiffusionTensor& A, int n)
    : N_(grid.interior_nodes()) {
  A.validate(grid.dim());
  if (A.components() != n) {
    throw std::invalid_argument("DiffusionOperator: block count != n");
  }
  blocks_.reserve(n);
  const int d = grid.dim();
  for (int c = 0; c < n; ++c) {
    const Eigen::Matrix2d& D = A.block(c);
    std::vector<Eigen::Triplet<double>> trip;
    if (d == 1) {
      const double s = D(0, 0) / (grid.dx(0) * grid.dx(0));
      for (int i = 0; i < N_; ++i) {
        trip.emplace_back(i, i, 2.0 * s);
        if (i > 0) trip.emplace_back(i, i - 1, -s);
        if (i + 1 < N_) trip.emplace_back(i, i + 1, -s);
      }
    } else {
      const int n0 = grid.interior_per_axis(0);
      const int n1 = grid.interior_per_axis(1);
      const double sx = D(0, 0) / (grid.dx(0) * grid.dx(0));
      const double sy = D(1, 1) / (grid.dx(1) * grid.dx(1));
      const double sxy = (D(0, 1) + D(1, 0)) / (4.0 * grid.dx(0) * grid.dx(1));
      auto at = [n0](int i, int j) { return i + n0 * j; };
      for (int j = 0; j < n1; ++j) {
        for (int i = 0; i < n0; ++i) {
          const int row = at(i, j);
          trip.emplace_back(row, row, 2.0 * sx + 2.0 * sy);
          if (i > 0) trip.emplace_back(row, at(i - 1, j), -sx);
          if (i + 1 < n0) trip.emplace_back(row, at(i + 1, j), -sx);
          if (j > 0) trip.emplace_back(row, at(i, j - 1), -sy);
          if (j + 1 < n1) trip.emplace_back(row, at(i, j + 1), -sy);
          if (sxy != 0.0) {
            if (i + 1 < n0 && j + 1 < n1)
              trip.emplace_back(row, at(i + 1, j + 1), -sxy);
            if (i > 0 && j > 0) trip.emplace_back(row, at(i - 1, j - 1), -sxy);
            if (i + 1 < n0 && j > 0)
              trip.emplace_back(row, at(i + 1, j - 1), sxy);
            if (i > 0 && j + 1 < n1)
              trip.emplace_back(row, at(i - 1, j + 1), sxy);
          }
        }
      }
    }
    Eigen::SparseMatrix<double> L(N_, N_);
    L.setFromTriplets(trip.begin(), trip.end());
    L.makeCompressed();
    blocks_.push_back(std::move(L));
  }
}

Eigen::VectorXd DiffusionOperator::apply(const Eigen::VectorXd& v) const {
  Eigen::VectorXd out(v.size());
  for (int c = 0; c < components(); ++c) {
    out.segment(static_cast<Eigen::Index>(c) * N_, N_) =
        blocks_[c] * v.segment(static_cast<Eigen::Index>(c) * N_, N_);
  }
  return out;
}

DiffusionOperator assemble_diffusion(const Grid& grid,
                                     const DiffusionTensor& A, int n) {
  return DiffusionOperator(grid, A, n);
}

Eigen::VectorXd quadrature_weights(const Grid& grid) {
  Eigen::VectorXd w(grid.interior_nodes());
  for (int i = 0; i < grid.interior_nodes(); ++i) w[i] = grid.quad_weight(i);
  return w;
}

double weighted_inner(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                      const Eigen::VectorXd& quad_w, int n) {
  const int N = static_cast<int>(quad_w.size());
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    double dot = 0.0;
    for (int c = 0; c < n; ++c) {
      const Eigen::Index idx = static_cast<Eigen::Index>(c) * N + i;
      dot += a[idx] * b[idx];
    }
    sum += quad_w[i] * dot;
  }
  return sum;
}

Eigen::VectorXd average_field_fine(const ParabolicProblem& p, double t,
                                   const Eigen::VectorXd& y,
                                   const Eigen::VectorXd& mu_row,
                                   const ControlDictionary& dict) {
  if (mu_row.size() != dict.size()) {
    throw std::invalid_argument("average_field: weight row / dictionary mismatch");
  }
  const Grid& g = p.grid();
  const int N = g.interior_nodes();
  const int n = p.n();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N) * n);
  std::vector<double> ybuf(n), fbuf(n);
  for (int l = 0; l < dict.size(); ++l) {
    const double w = mu_row[l];
    if (w == 0.0) continue;
    const ControlField& u = dict.atom(l);
    for (int i = 0; i < N; ++i) {
      const auto x = g.node_coord(i);
      gather_state(y, N, n, i, ybuf);
      p.f().eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                 u.value(i), fbuf);
      for (int c = 0; c < n; ++c) out[static_cast<Eigen::Index>(c) * N + i] += w * fbuf[c];
    }
  }
  return out;
}

Eigen::VectorXd average_field_coarse(const ParabolicProblem& p, double t,
                                     const Eigen::VectorXd& y,
                                     const SpaceTimeYoungMeasure& nu,
                                     int slice) {
  const Grid& g = p.grid();
  const int N = g.interior_nodes();
  const int n = p.n();
  if (nu.slice(slice).rows() != N) {
    throw std::invalid_argument("average_field: measure grid mismatch");
  }
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N) * n);
  const auto& w = nu.slice(slice);
  std::vector<double> ybuf(n), fbuf(n);
  for (int i = 0; i < N; ++i) {
    const auto x = g.node_coord(i);
    gather_state(y, N, n, i, ybuf);
    for (int s = 0; s < nu.support_size(); ++s) {
      if (w(i, s) == 0.0) continue;
      const auto& z = nu.support()[s];
      p.f().eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                 {z.data(), z.size()}, fbuf);
      for (int c = 0; c < n; ++c) {
        out[static_cast<Eigen::Index>(c) * N + i] += w(i, s) * fbuf[c];
      }
    }
  }
  return out;
}

PdeSolver::PdeSolver(const ParabolicProblem& p)
    : p_(&p), op_(p.grid(), p.diffusion(), p.n()), quad_w_(quadrature_weights(p.grid())) {
  const double dt = p.grid().dt();
  const int N = p.grid().interior_nodes();
  Eigen::SparseMatrix<double> eye(N, N);
  eye.setIdentity();
  for (int c = 0; c < p.n(); ++c) {
    Eigen::SparseMatrix<double> M = eye + dt * op_.matrix(c);
    auto solver =
        std::make_shared<Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>>>();
    solver->compute(M);
    if (solver->info() != Eigen::Success) {
      throw std::runtime_error("PdeSolver: implicit step factorization failed");
    }
    step_solvers_.push_back(std::move(solver));
  }
}

Eigen::VectorXd PdeSolver::implicit_solve(const Eigen::VectorXd& rhs) const {
  const int N = p_->grid().interior_nodes();
  Eigen::VectorXd out(rhs.size());
  for (int c = 0; c < p_->n(); ++c) {
    out.segment(static_cast<Eigen::Index>(c) * N, N) =
        step_solvers_[c]->solve(rhs.segment(static_cast<Eigen::Index>(c) * N, N));
  }
  return out;
}

Eigen::VectorXd PdeSolver::adjoint_solve(const Eigen::VectorXd& b) const {
  const int N = p_->grid().interior_nodes();
  Eigen::VectorXd scaled(b.size());
  for (int c = 0; c < p_->n(); ++c) {
    for (int i = 0; i < N; ++i) {
      scaled[static_cast<Eigen::Index>(c) * N + i] =
          quad_w_[i] * b[static_cast<Eigen::Index>(c) * N + i];
    }
  }
  Eigen::VectorXd sol = implicit_solve(scaled);
  for (int c = 0; c < p_->n(); ++c) {
    for (int i = 0; i < N; ++i) {
      sol[static_cast<Eigen::Index>(c) * N + i] /= quad_w_[i];
    }
  }
  return sol;
}

template <class ControlRowFn>
ForwardResult PdeSolver::forward_impl(ControlRowFn&& field_at) const {
  const Grid& g = p_->grid();
  ForwardResult res;
  res.y.grid = g;
  res.y.n = p_->n();
  res.y.rows.assign(g.nt() + 1, Eigen::VectorXd::Zero(p_->y0().size()));
  res.y.rows[0] = p_->y0();
  const double dt = g.dt();
  for (int k = 0; k < g.nt(); ++k) {
    const Eigen::VectorXd F = field_at(k, g.time(k), res.y.rows[k]);
    const Eigen::VectorXd rhs = res.y.rows[k] + dt * F;
    res.y.rows[k + 1] = implicit_solve(rhs);
    if (!res.y.rows[k + 1].allFinite()) {
      res.diverged_at = k + 1;
      break;
    }
  }
  return res;
}

ForwardResult PdeSolver::forward(const RelaxedControl& mu) const {
  if (mu.steps() != p_->grid().nt()) {
    throw std::invalid_argument("solve_forward: control steps != grid nt");
  }
  return forward_raw(mu.weights(), mu.dictionary());
}

ForwardResult PdeSolver::forward_raw(const Eigen::MatrixXd& fine_weights,
                                     const ControlDictionary& dict) const {
  if (fine_weights.rows() != p_->grid().nt()) {
    throw std::invalid_argument("solve_forward: weight rows != grid nt");
  }
  return forward_impl([&](int k, double t, const Eigen::VectorXd& y) {
    return average_field_fine(*p_, t, y, fine_weights.row(k).transpose(), dict);
  });
}

ForwardResult PdeSolver::forward(const SpaceTimeYoungMeasure& nu) const {
  if (nu.slices() != p_->grid().nt()) {
    throw std::invalid_argument("solve_forward: measure slices != grid nt");
  }
  return forward_impl([&](int k, double t, const Eigen::VectorXd& y) {
    return average_field_coarse(*p_, t, y, nu, k);
  });
}

namespace {

/// Inner quadrature integrals of every composite factor for one atom.
std::vector<std::vector<double>> composite_inner_integrals_atom(
    const ParabolicProblem& p, const Eigen::VectorXd& quad_w, double t,
    const Eigen::VectorXd& y, const ControlField& u) {
  const CompositeCost& cc = p.composite_cost();
  const Grid& g = p.grid();
  const int N = g.interior_nodes();
  const int n = p.n();
  std::vector<std::vector<double>> vals(cc.terms.size());
  std::vector<double> ybuf(n);
  for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
    vals[ti].resize(cc.terms[ti].factors.size(), 0.0);
    for (std::size_t fj = 0; fj < cc.terms[ti].factors.size(); ++fj) {
      const auto& h = cc.terms[ti].factors[fj].inner;
      double sum = 0.0;
      for (int i = 0; i < N; ++i) {
        const auto x = g.node_coord(i);
        gather_state(y, N, n, i, ybuf);
        sum += quad_w[i] *
               h.eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                      u.value(i));
      }
      vals[ti][fj] = sum;
    }
  }
  return vals;
}

/// Measure-averaged inner integrals over the atoms of a fine weight row.
std::vector<std::vector<double>> composite_inner_integrals_fine(
    const ParabolicProblem& p, const Eigen::VectorXd& quad_w, double t,
    const Eigen::VectorXd& y, const Eigen::VectorXd& mu_row,
    const ControlDictionary& dict) {
  const CompositeCost& cc = p.composite_cost();
  std::vector<std::vector<double>> avg(cc.terms.size());
  for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
    avg[ti].assign(cc.terms[ti].factors.size(), 0.0);
  }
  for (int l = 0; l < dict.size(); ++l) {
    if (mu_row[l] == 0.0) continue;
    const auto per_atom =
        composite_inner_integrals_atom(p, quad_w, t, y, dict.atom(l));
    for (std::size_t ti = 0; ti < avg.size(); ++ti) {
      for (std::size_t fj = 0; fj < avg[ti].size(); ++fj) {
        avg[ti][fj] += mu_row[l] * per_atom[ti][fj];
      }
    }
  }
  return avg;
}

/// Young-averaged inner integrals of one slice.
std::vector<std::vector<double>> composite_inner_integrals_coarse(
    const ParabolicProblem& p, const Eigen::VectorXd& quad_w, double t,
    const Eigen::VectorXd& y, const SpaceTimeYoungMeasure& nu, int slice) {
  const CompositeCost& cc = p.composite_cost();
  const Grid& g = p.grid();
  const int N = g.interior_nodes();
  const int n = p.n();
  const auto& w = nu.slice(slice);
  std::vector<std::vector<double>> vals(cc.terms.size());
  std::vector<double> ybuf(n);
  for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
    vals[ti].resize(cc.terms[ti].factors.size(), 0.0);
    for (std::size_t fj = 0; fj < cc.terms[ti].factors.size(); ++fj) {
      const auto& h = cc.terms[ti].factors[fj].inner;
      double sum = 0.0;
      for (int i = 0; i < N; ++i) {
        const auto x = g.node_coord(i);
        gather_state(y, N, n, i, ybuf);
        double cell = 0.0;
        for (int s = 0; s < nu.support_size(); ++s) {
          if (w(i, s) == 0.0) continue;
          const auto& z = nu.support()[s];
          cell += w(i, s) *
                  h.eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                         {z.data(), z.size()});
        }
        sum += quad_w[i] * cell;
      }
      vals[ti][fj] = sum;
    }
  }
  return vals;
}

double composite_value(const CompositeCost& cc,
                       const std::vector<std::vector<double>>& inners,
                       double t) {
  (void)t;
  double total = 0.0;
  for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
    double prod = 1.0;
    for (std::size_t fj = 0; fj < cc.terms[ti].factors.size(); ++fj) {
      prod *= cc.terms[ti].factors[fj].outer(inners[ti][fj]);
    }
    total += prod;
  }
  return total;
}

/// d(composite)/d(inner integral fj of term ti) at the given inner values.
double composite_chain(const CompositeCost& cc,
                       const std::vector<std::vector<double>>& inners,
                       std::size_t ti, std::size_t fj) {
  double prod = 1.0;
  for (std::size_t j = 0; j < cc.terms[ti].factors.size(); ++j) {
    const double v = inners[ti][j];
    prod *= j == fj ? cc.terms[ti].factors[j].outer.derivative(v)
                    : cc.terms[ti].factors[j].outer(v);
  }
  return prod;
}

}  // namespace

double PdeSolver::running_cost_fine(double t, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& mu_row,
                                    const ControlDictionary& dict) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  if (p_->has_local_cost()) {
    const CostDensity& phi = p_->local_cost();
    double total = 0.0;
    std::vector<double> ybuf(n);
    for (int l = 0; l < dict.size(); ++l) {
      if (mu_row[l] == 0.0) continue;
      const ControlField& u = dict.atom(l);
      double atom_sum = 0.0;
      for (int i = 0; i < N; ++i) {
        const auto x = g.node_coord(i);
        gather_state(y, N, n, i, ybuf);
        atom_sum += quad_w_[i] *
                    phi.eval(t, {x.data(), static_cast<std::size_t>(g.dim())},
                             ybuf, u.value(i));
      }
      total += mu_row[l] * atom_sum;
    }
    return total;
  }
  const CompositeCost& cc = p_->composite_cost();
  if (cc.mode == CompositeRelaxation::AtomwiseAverage) {
    double total = 0.0;
    for (int l = 0; l < dict.size(); ++l) {
      if (mu_row[l] == 0.0) continue;
      const auto inners =
          composite_inner_integrals_atom(*p_, quad_w_, t, y, dict.atom(l));
      total += mu_row[l] * composite_value(cc, inners, t);
    }
    return total;
  }
  const auto inners =
      composite_inner_integrals_fine(*p_, quad_w_, t, y, mu_row, dict);
  return composite_value(cc, inners, t);
}

double PdeSolver::running_cost_coarse(double t, const Eigen::VectorXd& y,
                                      const SpaceTimeYoungMeasure& nu,
                                      int slice) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  if (p_->has_local_cost()) {
    const CostDensity& phi = p_->local_cost();
    const auto& w = nu.slice(slice);
    double sum = 0.0;
    std::vector<double> ybuf(n);
    for (int i = 0; i < N; ++i) {
      const auto x = g.node_coord(i);
      gather_state(y, N, n, i, ybuf);
      double cell = 0.0;
      for (int s = 0; s < nu.support_size(); ++s) {
        if (w(i, s) == 0.0) continue;
        const auto& z = nu.support()[s];
        cell += w(i, s) *
                phi.eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                         {z.data(), z.size()});
      }
      sum += quad_w_[i] * cell;
    }
    return sum;
  }
  const auto inners =
      composite_inner_integrals_coarse(*p_, quad_w_, t, y, nu, slice);
  return composite_value(p_->composite_cost(), inners, t);
}

double PdeSolver::cost_weight_derivative(double t, const Eigen::VectorXd& y,
                                         const Eigen::VectorXd& mu_row,
                                         const ControlDictionary& dict,
                                         int atom) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  if (p_->has_local_cost()) {
    const CostDensity& phi = p_->local_cost();
    const ControlField& u = dict.atom(atom);
    double sum = 0.0;
    std::vector<double> ybuf(n);
    for (int i = 0; i < N; ++i) {
      const auto x = g.node_coord(i);
      gather_state(y, N, n, i, ybuf);
      sum += quad_w_[i] *
             phi.eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                      u.value(i));
    }
    return sum;
  }
  const CompositeCost& cc = p_->composite_cost();
  const auto atom_inners =
      composite_inner_integrals_atom(*p_, quad_w_, t, y, dict.atom(atom));
  if (cc.mode == CompositeRelaxation::AtomwiseAverage) {
    return composite_value(cc, atom_inners, t);
  }
  const auto avg =
      composite_inner_integrals_fine(*p_, quad_w_, t, y, mu_row, dict);
  double deriv = 0.0;
  for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
    for (std::size_t fj = 0; fj < cc.terms[ti].factors.size(); ++fj) {
      deriv += composite_chain(cc, avg, ti, fj) * atom_inners[ti][fj];
    }
  }
  return deriv;
}

double PdeSolver::cost_cell_derivative(double t, const Eigen::VectorXd& y,
                                       const SpaceTimeYoungMeasure& nu,
                                       int slice, int node,
                                       std::span<const double> z) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  std::vector<double> ybuf(n);
  gather_state(y, N, n, node, ybuf);
  const auto x = g.node_coord(node);
  if (p_->has_local_cost()) {
    return p_->local_cost().eval(
        t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf, z);
  }
  const CompositeCost& cc = p_->composite_cost();
  const auto avg = composite_inner_integrals_coarse(*p_, quad_w_, t, y, nu, slice);
  double deriv = 0.0;
  for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
    for (std::size_t fj = 0; fj < cc.terms[ti].factors.size(); ++fj) {
      const auto& h = cc.terms[ti].factors[fj].inner;
      deriv += composite_chain(cc, avg, ti, fj) *
               h.eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf, z);
    }
  }
  return deriv;
}

double PdeSolver::atom_cost_value(double t, const Eigen::VectorXd& y,
                                  const ControlDictionary& dict,
                                  int atom) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  if (p_->has_local_cost()) {
    const CostDensity& phi = p_->local_cost();
    const ControlField& u = dict.atom(atom);
    double sum = 0.0;
    std::vector<double> ybuf(n);
    for (int i = 0; i < N; ++i) {
      const auto x = g.node_coord(i);
      gather_state(y, N, n, i, ybuf);
      sum += quad_w_[i] *
             phi.eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                      u.value(i));
    }
    return sum;
  }
  const auto inners =
      composite_inner_integrals_atom(*p_, quad_w_, t, y, dict.atom(atom));
  return composite_value(p_->composite_cost(), inners, t);
}

double PdeSolver::terminal_cost(const Eigen::VectorXd& y_final) const {
  if (!p_->terminal_cost()) return 0.0;
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  double sum = 0.0;
  std::vector<double> ybuf(n);
  for (int i = 0; i < N; ++i) {
    const auto x = g.node_coord(i);
    gather_state(y_final, N, n, i, ybuf);
    sum += quad_w_[i] * p_->terminal_cost()->eval(
                            {x.data(), static_cast<std::size_t>(g.dim())}, ybuf);
  }
  return sum;
}

namespace {
template <class RunningFn>
double cost_impl(const ParabolicProblem& p, const PdeSolver& solver,
                 const ForwardResult& fwd, RunningFn&& running_at) {
  if (fwd.diverged()) return std::numeric_limits<double>::infinity();
  const Grid& g = p.grid();
  double total = 0.0;
  for (int k = 0; k < g.nt(); ++k) {
    total += g.dt() * running_at(k, g.time(k), fwd.y.rows[k]);
  }
  return total + solver.terminal_cost(fwd.y.rows[g.nt()]);
}
}  // namespace

double PdeSolver::cost(const ForwardResult& fwd, const RelaxedControl& mu) const {
  return cost_raw(fwd, mu.weights(), mu.dictionary());
}

double PdeSolver::cost_raw(const ForwardResult& fwd,
                           const Eigen::MatrixXd& fine_weights,
                           const ControlDictionary& dict) const {
  return cost_impl(*p_, *this, fwd,
                   [&](int k, double t, const Eigen::VectorXd& y) {
                     return running_cost_fine(t, y, fine_weights.row(k).transpose(),
                                              dict);
                   });
}

double PdeSolver::cost(const ForwardResult& fwd,
                       const SpaceTimeYoungMeasure& nu) const {
  return cost_impl(*p_, *this, fwd,
                   [&](int k, double t, const Eigen::VectorXd& y) {
                     return running_cost_coarse(t, y, nu, k);
                   });
}

void PdeSolver::state_cost_derivative_fine(double t, const Eigen::VectorXd& y,
                                           const Eigen::VectorXd& mu_row,
                                           const ControlDictionary& dict,
                                           Eigen::VectorXd& rho) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  rho.setZero();
  std::vector<double> ybuf(n), dbuf(n);
  if (p_->has_local_cost()) {
    const CostDensity& phi = p_->local_cost();
    if (!phi.dy) throw std::runtime_error("solve_adjoint: running cost lacks dy");
    for (int l = 0; l < dict.size(); ++l) {
      if (mu_row[l] == 0.0) continue;
      const ControlField& u = dict.atom(l);
      for (int i = 0; i < N; ++i) {
        const auto x = g.node_coord(i);
        gather_state(y, N, n, i, ybuf);
        phi.dy(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
               u.value(i), dbuf);
        for (int c = 0; c < n; ++c) {
          rho[static_cast<Eigen::Index>(c) * N + i] += mu_row[l] * dbuf[c];
        }
      }
    }
    return;
  }
  const CompositeCost& cc = p_->composite_cost();
  for (const auto& term : cc.terms) {
    for (const auto& factor : term.factors) {
      if (!factor.inner.dy) {
        throw std::runtime_error("solve_adjoint: composite integrand lacks dy");
      }
    }
  }
  if (cc.mode == CompositeRelaxation::AveragedInner) {
    const auto avg =
        composite_inner_integrals_fine(*p_, quad_w_, t, y, mu_row, dict);
    for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
      for (std::size_t fj = 0; fj < cc.terms[ti].factors.size(); ++fj) {
        const double chain = composite_chain(cc, avg, ti, fj);
        if (chain == 0.0) continue;
        const auto& h = cc.terms[ti].factors[fj].inner;
        for (int l = 0; l < dict.size(); ++l) {
          if (mu_row[l] == 0.0) continue;
          const ControlField& u = dict.atom(l);
          for (int i = 0; i < N; ++i) {
            const auto x = g.node_coord(i);
            gather_state(y, N, n, i, ybuf);
            h.dy(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                 u.value(i), dbuf);
            for (int c = 0; c < n; ++c) {
              rho[static_cast<Eigen::Index>(c) * N + i] +=
                  chain * mu_row[l] * dbuf[c];
            }
          }
        }
      }
    }
    return;
  }
  // Atomwise: per-atom chain coefficients at the atom's own inner integrals.
  for (int l = 0; l < dict.size(); ++l) {
    if (mu_row[l] == 0.0) continue;
    const ControlField& u = dict.atom(l);
    const auto inners = composite_inner_integrals_atom(*p_, quad_w_, t, y, u);
    for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
      for (std::size_t fj = 0; fj < cc.terms[ti].factors.size(); ++fj) {
        const double chain = composite_chain(cc, inners, ti, fj);
        if (chain == 0.0) continue;
        const auto& h = cc.terms[ti].factors[fj].inner;
        for (int i = 0; i < N; ++i) {
          const auto x = g.node_coord(i);
          gather_state(y, N, n, i, ybuf);
          h.dy(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
               u.value(i), dbuf);
          for (int c = 0; c < n; ++c) {
            rho[static_cast<Eigen::Index>(c) * N + i] +=
                mu_row[l] * chain * dbuf[c];
          }
        }
      }
    }
  }
}

void PdeSolver::state_cost_derivative_coarse(double t, const Eigen::VectorXd& y,
                                             const SpaceTimeYoungMeasure& nu,
                                             int slice,
                                             Eigen::VectorXd& rho) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  rho.setZero();
  const auto& w = nu.slice(slice);
  std::vector<double> ybuf(n), dbuf(n);
  if (p_->has_local_cost()) {
    const CostDensity& phi = p_->local_cost();
    if (!phi.dy) throw std::runtime_error("solve_adjoint: running cost lacks dy");
    for (int i = 0; i < N; ++i) {
      const auto x = g.node_coord(i);
      gather_state(y, N, n, i, ybuf);
      for (int s = 0; s < nu.support_size(); ++s) {
        if (w(i, s) == 0.0) continue;
        const auto& z = nu.support()[s];
        phi.dy(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
               {z.data(), z.size()}, dbuf);
        for (int c = 0; c < n; ++c) {
          rho[static_cast<Eigen::Index>(c) * N + i] += w(i, s) * dbuf[c];
        }
      }
    }
    return;
  }
  const CompositeCost& cc = p_->composite_cost();
  const auto avg = composite_inner_integrals_coarse(*p_, quad_w_, t, y, nu, slice);
  for (std::size_t ti = 0; ti < cc.terms.size(); ++ti) {
    for (std::size_t fj = 0; fj < cc.terms[ti].factors.size(); ++fj) {
      const auto& h = cc.terms[ti].factors[fj].inner;
      if (!h.dy) throw std::runtime_error("solve_adjoint: composite integrand lacks dy");
      const double chain = composite_chain(cc, avg, ti, fj);
      if (chain == 0.0) continue;
      for (int i = 0; i < N; ++i) {
        const auto x = g.node_coord(i);
        gather_state(y, N, n, i, ybuf);
        for (int s = 0; s < nu.support_size(); ++s) {
          if (w(i, s) == 0.0) continue;
          const auto& z = nu.support()[s];
          h.dy(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
               {z.data(), z.size()}, dbuf);
          for (int c = 0; c < n; ++c) {
            rho[static_cast<Eigen::Index>(c) * N + i] +=
                chain * w(i, s) * dbuf[c];
          }
        }
      }
    }
  }
}

void PdeSolver::averaged_field_jacobian_fine(double t, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& mu_row,
                                             const ControlDictionary& dict,
                                             Eigen::VectorXd& blocks) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  if (!p_->f().dy) throw std::runtime_error("solve_adjoint: field lacks dy");
  blocks.setZero();
  std::vector<double> ybuf(n), jbuf(static_cast<std::size_t>(n) * n);
  for (int l = 0; l < dict.size(); ++l) {
    if (mu_row[l] == 0.0) continue;
    const ControlField& u = dict.atom(l);
    for (int i = 0; i < N; ++i) {
      const auto x = g.node_coord(i);
      gather_state(y, N, n, i, ybuf);
      p_->f().dy(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                 u.value(i), jbuf);
      for (int e = 0; e < n * n; ++e) {
        blocks[static_cast<Eigen::Index>(i) * n * n + e] += mu_row[l] * jbuf[e];
      }
    }
  }
}

void PdeSolver::averaged_field_jacobian_coarse(double t,
                                               const Eigen::VectorXd& y,
                                               const SpaceTimeYoungMeasure& nu,
                                               int slice,
                                               Eigen::VectorXd& blocks) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  if (!p_->f().dy) throw std::runtime_error("solve_adjoint: field lacks dy");
  blocks.setZero();
  const auto& w = nu.slice(slice);
  std::vector<double> ybuf(n), jbuf(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < N; ++i) {
    const auto x = g.node_coord(i);
    gather_state(y, N, n, i, ybuf);
    for (int s = 0; s < nu.support_size(); ++s) {
      if (w(i, s) == 0.0) continue;
      const auto& z = nu.support()[s];
      p_->f().dy(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                 {z.data(), z.size()}, jbuf);
      for (int e = 0; e < n * n; ++e) {
        blocks[static_cast<Eigen::Index>(i) * n * n + e] += w(i, s) * jbuf[e];
      }
    }
  }
}

template <class AvgFieldDy, class CostDy>
AdjointTrajectory PdeSolver::adjoint_impl(const StateTrajectory& y,
                                          AvgFieldDy&& favg_dy,
                                          CostDy&& cost_dy) const {
  const Grid& g = p_->grid();
  const int N = g.interior_nodes();
  const int n = p_->n();
  const double dt = g.dt();
  AdjointTrajectory chi;
  chi.grid = g;
  chi.n = n;
  chi.rows.assign(g.nt() + 1, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N) * n));

  // Terminal condition: the multiplier the reduced gradient needs is the
  // negative pointwise terminal-cost derivative.
  if (p_->terminal_cost()) {
    if (!p_->terminal_cost()->dy) {
      throw std::runtime_error("solve_adjoint: terminal cost lacks dy");
    }
    std::vector<double> ybuf(n), dbuf(n);
    for (int i = 0; i < N; ++i) {
      const auto x = g.node_coord(i);
      gather_state(y.rows[g.nt()], N, n, i, ybuf);
      p_->terminal_cost()->dy({x.data(), static_cast<std::size_t>(g.dim())},
                              ybuf, dbuf);
      for (int c = 0; c < n; ++c) {
        chi.rows[g.nt()][static_cast<Eigen::Index>(c) * N + i] = -dbuf[c];
      }
    }
  }

  if (g.nt() >= 1) chi.rows[g.nt() - 1] = adjoint_solve(chi.rows[g.nt()]);

  Eigen::VectorXd rho(static_cast<Eigen::Index>(N) * n);
  Eigen::VectorXd jac(static_cast<Eigen::Index>(N) * n * n);
  for (int k = g.nt() - 2; k >= 0; --k) {
    const int kp = k + 1;
    const double t = g.time(kp);
    cost_dy(kp, t, y.rows[kp], rho);
    favg_dy(kp, t, y.rows[kp], jac);
    Eigen::VectorXd b = chi.rows[kp];
    // b += dt * D^T chi_{k+1} - dt * rho, blocks applied per node.
    for (int i = 0; i < N; ++i) {
      for (int c = 0; c < n; ++c) {
        double acc = 0.0;
        for (int r = 0; r < n; ++r) {
          acc += jac[static_cast<Eigen::Index>(i) * n * n + r * n + c] *
                 chi.rows[kp][static_cast<Eigen::Index>(r) * N + i];
        }
        b[static_cast<Eigen::Index>(c) * N + i] += dt * (acc - rho[static_cast<Eigen::Index>(c) * N + i]);
      }
    }
    chi.rows[k] = adjoint_solve(b);
  }
  return chi;
}

AdjointTrajectory PdeSolver::adjoint(const StateTrajectory& y,
                                     const RelaxedControl& mu) const {
  return adjoint_impl(
      y,
      [&](int k, double t, const Eigen::VectorXd& yk, Eigen::VectorXd& jac) {
        averaged_field_jacobian_fine(t, yk, mu.row(k), mu.dictionary(), jac);
      },
      [&](int k, double t, const Eigen::VectorXd& yk, Eigen::VectorXd& rho) {
        state_cost_derivative_fine(t, yk, mu.row(k), mu.dictionary(), rho);
      });
}

AdjointTrajectory PdeSolver::adjoint(const StateTrajectory& y,
                                     const SpaceTimeYoungMeasure& nu) const {
  return adjoint_impl(
      y,
      [&](int k, double t, const Eigen::VectorXd& yk, Eigen::VectorXd& jac) {
        averaged_field_jacobian_coarse(t, yk, nu, k, jac);
      },
      [&](int k, double t, const Eigen::VectorXd& yk, Eigen::VectorXd& rho) {
        state_cost_derivative_coarse(t, yk, nu, k, rho);
      });
}

ForwardResult solve_forward(const ParabolicProblem& p, const RelaxedControl& mu) {
  return PdeSolver(p).forward(mu);
}

ForwardResult solve_forward(const ParabolicProblem& p,
                            const SpaceTimeYoungMeasure& nu) {
  return PdeSolver(p).forward(nu);
}

double evaluate_cost(const ParabolicProblem& p, const ForwardResult& fwd,
                     const RelaxedControl& mu) {
  return PdeSolver(p).cost(fwd, mu);
}

double evaluate_cost(const ParabolicProblem& p, const ForwardResult& fwd,
                     const SpaceTimeYoungMeasure& nu) {
  return PdeSolver(p).cost(fwd, nu);
}

AdjointTrajectory solve_adjoint(const ParabolicProblem& p,
                                const StateTrajectory& y,
                                const RelaxedControl& mu) {
  return PdeSolver(p).adjoint(y, mu);
}

AdjointTrajectory solve_adjoint(const ParabolicProblem& p,
                                const StateTrajectory& y,
                                const SpaceTimeYoungMeasure& nu) {
  return PdeSolver(p).adjoint(y, nu);
}

}  // namespace relaxctrl
