#include "relaxctrl/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "relaxctrl/parallel.hpp"
#include "relaxctrl/rng.hpp"

namespace relaxctrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double f_chi_pairing(const ParabolicProblem& p, const Eigen::VectorXd& quad_w,
                     double t, const Eigen::VectorXd& y,
                     const Eigen::VectorXd& chi_row, const ControlField& u) {
  const Grid& g = p.grid();
  const int N = g.interior_nodes();
  const int n = p.n();
  std::vector<double> ybuf(n), fbuf(n);
  double sum = 0.0;
  for (int i = 0; i < N; ++i) {
    const auto x = g.node_coord(i);
    for (int c = 0; c < n; ++c) ybuf[c] = y[static_cast<Eigen::Index>(c) * N + i];
    p.f().eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
               u.value(i), fbuf);
    double dot = 0.0;
    for (int c = 0; c < n; ++c) {
      dot += fbuf[c] * chi_row[static_cast<Eigen::Index>(c) * N + i];
    }
    sum += quad_w[i] * dot;
  }
  return sum;
}

std::string step_rule_name(StepRule r) {
  switch (r) {
    case StepRule::Harmonic: return "harmonic";
    case StepRule::ExactQuadratic: return "exact";
    case StepRule::Armijo: return "armijo";
  }
  return "?";
}

std::string direction_name(DirectionRule r) {
  return r == DirectionRule::FrankWolfe ? "frank_wolfe" : "pairwise";
}

}  // namespace

void SolveOptions::validate() const {
  if (max_iters < 0) throw std::invalid_argument("SolveOptions: max_iters >= 0");
  if (!(mp_tolerance > 0.0)) {
    throw std::invalid_argument("SolveOptions: mp_tolerance > 0");
  }
  if (restarts < 0) throw std::invalid_argument("SolveOptions: restarts >= 0");
  if (!(armijo.slope_fraction > 0.0) || !(armijo.shrink > 0.0) ||
      armijo.shrink >= 1.0 || !(armijo.alpha_min > 0.0)) {
    throw std::invalid_argument("SolveOptions: bad Armijo parameters");
  }
}

double hamiltonian(const PdeSolver& solver, const StateTrajectory& y,
                   const AdjointTrajectory& chi, const RelaxedControl& mu,
                   int k, int atom) {
  const ParabolicProblem& p = solver.problem();
  const double t = p.grid().time(k);
  const double fterm = f_chi_pairing(p, solver.quad(), t, y.rows[k],
                                     chi.rows[k], mu.dictionary().atom(atom));
  const double phi_term = solver.cost_weight_derivative(
      t, y.rows[k], mu.row(k), mu.dictionary(), atom);
  return fterm - phi_term;
}

Eigen::MatrixXd hamiltonian_matrix(const PdeSolver& solver,
                                   const StateTrajectory& y,
                                   const AdjointTrajectory& chi,
                                   const RelaxedControl& mu) {
  const int nt = mu.steps();
  const int L = mu.atoms();
  Eigen::MatrixXd H(nt, L);
  for (int k = 0; k < nt; ++k) {
    parallel_index_for(L, [&](int l) {
      H(k, l) = hamiltonian(solver, y, chi, mu, k, l);
    });
  }
  return H;
}

double pointwise_hamiltonian(const ParabolicProblem& p, const StateTrajectory& y,
                             const AdjointTrajectory& chi, int k, int node,
                             std::span<const double> z) {
  if (!p.has_local_cost()) {
    throw std::invalid_argument(
        "pointwise_hamiltonian: composite costs are not pointwise decomposable");
  }
  const Grid& g = p.grid();
  const int N = g.interior_nodes();
  const int n = p.n();
  const double t = g.time(k);
  const auto x = g.node_coord(node);
  std::vector<double> ybuf(n), fbuf(n);
  for (int c = 0; c < n; ++c) {
    ybuf[c] = y.rows[k][static_cast<Eigen::Index>(c) * N + node];
  }
  p.f().eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf, z, fbuf);
  double dot = 0.0;
  for (int c = 0; c < n; ++c) {
    dot += fbuf[c] * chi.rows[k][static_cast<Eigen::Index>(c) * N + node];
  }
  return dot - p.local_cost().eval(t, {x.data(), static_cast<std::size_t>(g.dim())},
                                   ybuf, z);
}

std::vector<Eigen::MatrixXd> hamiltonian_cells(const PdeSolver& solver,
                                               const StateTrajectory& y,
                                               const AdjointTrajectory& chi,
                                               const SpaceTimeYoungMeasure& nu) {
  const ParabolicProblem& p = solver.problem();
  const Grid& g = p.grid();
  const int N = g.interior_nodes();
  const int n = p.n();
  const int Z = nu.support_size();
  std::vector<Eigen::MatrixXd> cells(nu.slices());
  std::vector<double> ybuf(n), fbuf(n);
  for (int k = 0; k < nu.slices(); ++k) {
    const double t = g.time(k);
    cells[k].resize(N, Z);
    for (int i = 0; i < N; ++i) {
      const auto x = g.node_coord(i);
      for (int c = 0; c < n; ++c) {
        ybuf[c] = y.rows[k][static_cast<Eigen::Index>(c) * N + i];
      }
      for (int s = 0; s < Z; ++s) {
        const auto& z = nu.support()[s];
        p.f().eval(t, {x.data(), static_cast<std::size_t>(g.dim())}, ybuf,
                   {z.data(), z.size()}, fbuf);
        double dot = 0.0;
        for (int c = 0; c < n; ++c) {
          dot += fbuf[c] * chi.rows[k][static_cast<Eigen::Index>(c) * N + i];
        }
        cells[k](i, s) = dot - solver.cost_cell_derivative(t, y.rows[k], nu, k,
                                                           i, {z.data(), z.size()});
      }
    }
  }
  return cells;
}

std::vector<int> lmo_fine(const Eigen::MatrixXd& hamiltonians) {
  std::vector<int> picks(hamiltonians.rows());
  for (Eigen::Index k = 0; k < hamiltonians.rows(); ++k) {
    int best = 0;
    for (Eigen::Index l = 1; l < hamiltonians.cols(); ++l) {
      if (hamiltonians(k, l) > hamiltonians(k, best)) best = static_cast<int>(l);
    }
    picks[k] = best;
  }
  return picks;
}

std::vector<std::vector<int>> lmo_coarse(
    const std::vector<Eigen::MatrixXd>& cell_hamiltonians) {
  std::vector<std::vector<int>> picks(cell_hamiltonians.size());
  for (std::size_t k = 0; k < cell_hamiltonians.size(); ++k) {
    const auto& H = cell_hamiltonians[k];
    picks[k].resize(H.rows());
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
      int best = 0;
      for (Eigen::Index s = 1; s < H.cols(); ++s) {
        if (H(i, s) > H(i, best)) best = static_cast<int>(s);
      }
      picks[k][i] = best;
    }
  }
  return picks;
}

MpResidual mp_residual_fine(const Grid& grid, const Eigen::MatrixXd& hamiltonians,
                            const Eigen::MatrixXd& weights) {
  MpResidual res;
  res.per_time.resize(hamiltonians.rows());
  for (Eigen::Index k = 0; k < hamiltonians.rows(); ++k) {
    double hmax = hamiltonians(k, 0);
    for (Eigen::Index l = 1; l < hamiltonians.cols(); ++l) {
      hmax = std::max(hmax, hamiltonians(k, l));
    }
    double avg = 0.0;
    for (Eigen::Index l = 0; l < hamiltonians.cols(); ++l) {
      avg += weights(k, l) * hamiltonians(k, l);
    }
    res.per_time[k] = std::max(0.0, hmax - avg);
    res.max = std::max(res.max, res.per_time[k]);
    res.fw_gap += grid.dt() * res.per_time[k];
  }
  return res;
}

MpResidual mp_residual_coarse(const Grid& grid,
                              const std::vector<Eigen::MatrixXd>& cells,
                              const SpaceTimeYoungMeasure& nu) {
  MpResidual res;
  res.per_time.resize(cells.size(), 0.0);
  res.per_cell.resize(cells.size());
  for (std::size_t k = 0; k < cells.size(); ++k) {
    const auto& H = cells[k];
    const auto& w = nu.slice(static_cast<int>(k));
    res.per_cell[k].resize(H.rows(), 1);
    double step_integral = 0.0;
    for (Eigen::Index i = 0; i < H.rows(); ++i) {
      double hmax = H(i, 0);
      for (Eigen::Index s = 1; s < H.cols(); ++s) hmax = std::max(hmax, H(i, s));
      double avg = 0.0;
      for (Eigen::Index s = 0; s < H.cols(); ++s) avg += w(i, s) * H(i, s);
      const double r = std::max(0.0, hmax - avg);
      res.per_cell[k](i, 0) = r;
      res.max = std::max(res.max, r);
      step_integral += grid.quad_weight(static_cast<int>(i)) * r;
    }
    res.per_time[k] = step_integral;
    res.fw_gap += grid.dt() * step_integral;
  }
  return res;
}

namespace {

template <class RunningFn, class FAvgFn>
HamiltonianConstancy constancy_impl(const PdeSolver& solver,
                                    const StateTrajectory& y,
                                    const AdjointTrajectory& chi, int nt,
                                    RunningFn&& running, FAvgFn&& favg) {
  const ParabolicProblem& p = solver.problem();
  HamiltonianConstancy out;
  out.profile.resize(nt);
  for (int k = 0; k < nt; ++k) {
    const double t = p.grid().time(k);
    const Eigen::VectorXd fbar = favg(k, t);
    const Eigen::VectorXd Ay = solver.diffusion().apply(y.rows[k]);
    const double pair = weighted_inner(fbar - Ay, chi.rows[k], solver.quad(), p.n());
    out.profile[k] = pair - running(k, t);
  }
  double mx = out.profile[0], mn = out.profile[0], mean = 0.0;
  for (double v : out.profile) {
    mx = std::max(mx, v);
    mn = std::min(mn, v);
    mean += v;
  }
  mean /= static_cast<double>(out.profile.size());
  out.dispersion = (mx - mn) / (1.0 + std::abs(mean));
  return out;
}

}  // namespace

HamiltonianConstancy hamiltonian_constancy(const PdeSolver& solver,
                                           const StateTrajectory& y,
                                           const AdjointTrajectory& chi,
                                           const RelaxedControl& mu) {
  const ParabolicProblem& p = solver.problem();
  return constancy_impl(
      solver, y, chi, mu.steps(),
      [&](int k, double t) {
        return solver.running_cost_fine(t, y.rows[k], mu.row(k), mu.dictionary());
      },
      [&](int k, double t) {
        return average_field_fine(p, t, y.rows[k], mu.row(k), mu.dictionary());
      });
}

HamiltonianConstancy hamiltonian_constancy(const PdeSolver& solver,
                                           const StateTrajectory& y,
                                           const AdjointTrajectory& chi,
                                           const SpaceTimeYoungMeasure& nu) {
  const ParabolicProblem& p = solver.problem();
  return constancy_impl(
      solver, y, chi, nu.slices(),
      [&](int k, double t) { return solver.running_cost_coarse(t, y.rows[k], nu, k); },
      [&](int k, double t) { return average_field_coarse(p, t, y.rows[k], nu, k); });
}

namespace {

struct FineIterate {
  Eigen::MatrixXd w;
  ForwardResult fwd;
  double cost = kInf;
};

/// One conditional-gradient run from the given start weights.
FineSolveResult solve_fine_single(const PdeSolver& solver, DictionaryPtr dict,
                                  Eigen::MatrixXd w0, const SolveOptions& opts) {
  const ParabolicProblem& p = solver.problem();
  const Grid& g = p.grid();
  const int nt = g.nt();
  const int L = dict->size();
  const double dt = g.dt();

  const StepRule rule = opts.step_rule == StepRule::ExactQuadratic &&
                                !p.flags().cost_quadratic
                            ? StepRule::Armijo
                            : opts.step_rule;

  SolveReport report;
  report.step_rule = step_rule_name(rule);
  report.direction = direction_name(opts.direction);

  FineIterate cur;
  cur.w = std::move(w0);
  cur.fwd = solver.forward_raw(cur.w, *dict);
  cur.cost = cur.fwd.diverged() ? kInf : solver.cost_raw(cur.fwd, cur.w, *dict);
  report.cost_history.push_back(cur.cost);

  AdjointTrajectory chi;
  Eigen::MatrixXd H;
  MpResidual res;
  int it = 0;
  std::string termination;

  if (cur.fwd.diverged()) {
    termination = "diverged";
  }

  while (termination.empty()) {
    RelaxedControl mu_cur(g, dict, cur.w);
    cur.w = mu_cur.weights();
    chi = solver.adjoint(cur.fwd.y, mu_cur);
    H = hamiltonian_matrix(solver, cur.fwd.y, chi, mu_cur);
    res = mp_residual_fine(g, H, cur.w);
    report.mp_history.push_back(res.max);
    if (res.max <= opts.mp_tolerance) {
      termination = "converged";
      break;
    }
    if (it >= opts.max_iters) {
      termination = "iteration_limit";
      break;
    }

    // Direction toward the Hamiltonian maximizer; pairwise additionally
    // drains the worst supported atom.
    const std::vector<int> towards = lmo_fine(H);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(nt, L);
    if (opts.direction == DirectionRule::FrankWolfe) {
      d = -cur.w;
      for (int k = 0; k < nt; ++k) d(k, towards[k]) += 1.0;
    } else {
      for (int k = 0; k < nt; ++k) {
        int away = -1;
        for (int l = 0; l < L; ++l) {
          if (cur.w(k, l) <= 0.0) continue;
          if (away < 0 || H(k, l) < H(k, away)) away = l;
        }
        if (away < 0 || away == towards[k]) continue;
        const double mass = cur.w(k, away);
        d(k, towards[k]) += mass;
        d(k, away) -= mass;
      }
    }

    double gprime = 0.0;  // dJ/dalpha at 0
    for (int k = 0; k < nt; ++k) {
      for (int l = 0; l < L; ++l) gprime -= dt * H(k, l) * d(k, l);
    }
    if (!(gprime < 0.0)) {
      termination = "iteration_limit";  // no descent direction left
      break;
    }

    double alpha = 0.0;
    FineIterate next;
    auto try_alpha = [&](double a) {
      FineIterate cand;
      cand.w = cur.w + a * d;
      cand.fwd = solver.forward_raw(cand.w, *dict);
      cand.cost =
          cand.fwd.diverged() ? kInf : solver.cost_raw(cand.fwd, cand.w, *dict);
      return cand;
    };

    if (rule == StepRule::Harmonic) {
      alpha = 2.0 / (it + 2.0);
      next = try_alpha(alpha);
      if (next.fwd.diverged()) {
        termination = "diverged";
        report.cost_history.push_back(next.cost);
        break;
      }
    } else if (rule == StepRule::ExactQuadratic) {
      const FineIterate full = try_alpha(1.0);
      const double c2 = full.cost - cur.cost - gprime;
      if (!std::isfinite(full.cost)) {
        termination = "diverged";
        report.cost_history.push_back(full.cost);
        break;
      }
      if (c2 > 1e-300) {
        alpha = std::clamp(-gprime / (2.0 * c2), 0.0, 1.0);
      } else {
        alpha = full.cost <= cur.cost ? 1.0 : 0.0;
      }
      if (alpha == 0.0) {
        termination = "iteration_limit";
        break;
      }
      next = alpha == 1.0 ? full : try_alpha(alpha);
    } else {  // Armijo
      bool accepted = false;
      double a = 1.0;
      while (a >= opts.armijo.alpha_min) {
        FineIterate cand = try_alpha(a);
        if (std::isfinite(cand.cost) &&
            cand.cost <= cur.cost + opts.armijo.slope_fraction * a * gprime) {
          alpha = a;
          next = std::move(cand);
          accepted = true;
          break;
        }
        a *= opts.armijo.shrink;
      }
      if (!accepted) {
        termination = "iteration_limit";
        break;
      }
    }

    cur = std::move(next);
    report.cost_history.push_back(cur.cost);
    ++it;
  }

  RelaxedControl mu_final(g, dict, cur.w);
  if (chi.rows.empty()) {
    // Diverged before the first adjoint; leave diagnostics empty.
    chi.grid = g;
    chi.n = p.n();
    chi.rows.assign(nt + 1, Eigen::VectorXd::Zero(p.y0().size()));
  } else {
    const auto hc = hamiltonian_constancy(solver, cur.fwd.y, chi, mu_final);
    report.hamiltonian_profile = hc.profile;
    report.hamiltonian_dispersion = hc.dispersion;
  }
  report.final_cost = cur.cost;
  report.per_time_residual = res.per_time;
  report.max_residual = res.max;
  report.fw_gap = res.fw_gap;
  report.iterations = it;
  report.termination = termination;
  return FineSolveResult{std::move(mu_final), std::move(cur.fwd.y),
                         std::move(chi), std::move(report)};
}

Eigen::MatrixXd perturbed_uniform(int rows, int cols, std::uint64_t seed) {
  auto rng = SplitMix64::split(seed, 0x5eedULL);
  Eigen::MatrixXd w(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < cols; ++c) {
      w(r, c) = 1.0 / cols + 0.5 * rng.next_double() / cols;
      sum += w(r, c);
    }
    w.row(r) /= sum;
  }
  return w;
}

}  // namespace

FineSolveResult solve_relaxed(const ParabolicProblem& p, DictionaryPtr dict,
                              const SolveOptions& options) {
  options.validate();
  const auto t0 = std::chrono::steady_clock::now();
  PdeSolver solver(p);
  const int nt = p.grid().nt();
  const int L = dict->size();

  std::optional<FineSolveResult> best;
  std::vector<RestartSummary> runs;
  for (int run = 0; run <= options.restarts; ++run) {
    Eigen::MatrixXd w0 =
        run == 0 ? Eigen::MatrixXd::Constant(nt, L, 1.0 / L)
                 : perturbed_uniform(nt, L, options.seed + run);
    FineSolveResult result = solve_fine_single(solver, dict, std::move(w0), options);
    runs.push_back({options.seed + run, result.report.final_cost,
                    result.report.termination});
    if (!best || result.report.final_cost < best->report.final_cost) {
      best = std::move(result);
    }
  }
  best->report.restart_runs = std::move(runs);
  best->report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return std::move(*best);
}

namespace {

struct CoarseIterate {
  std::vector<Eigen::MatrixXd> w;
  ForwardResult fwd;
  double cost = kInf;
};

SpaceTimeYoungMeasure coarse_measure(const Grid& g,
                                     const std::vector<std::vector<double>>& support,
                                     std::vector<Eigen::MatrixXd> w) {
  return SpaceTimeYoungMeasure(g, support, std::move(w));
}

CoarseSolveResult solve_coarse_single(const PdeSolver& solver,
                                      const std::vector<std::vector<double>>& support,
                                      std::vector<Eigen::MatrixXd> w0,
                                      const SolveOptions& opts) {
  const ParabolicProblem& p = solver.problem();
  const Grid& g = p.grid();
  const int nt = g.nt();
  const int N = g.interior_nodes();
  const int Z = static_cast<int>(support.size());
  const double dt = g.dt();

  const StepRule rule = opts.step_rule == StepRule::ExactQuadratic &&
                                !p.flags().cost_quadratic
                            ? StepRule::Armijo
                            : opts.step_rule;

  SolveReport report;
  report.step_rule = step_rule_name(rule);
  report.direction = direction_name(opts.direction);

  CoarseIterate cur;
  cur.w = std::move(w0);
  {
    const auto nu = coarse_measure(g, support, cur.w);
    cur.fwd = solver.forward(nu);
    cur.cost = cur.fwd.diverged() ? kInf : solver.cost(cur.fwd, nu);
  }
  report.cost_history.push_back(cur.cost);

  AdjointTrajectory chi;
  std::vector<Eigen::MatrixXd> H;
  MpResidual res;
  int it = 0;
  std::string termination;
  if (cur.fwd.diverged()) termination = "diverged";

  while (termination.empty()) {
    const SpaceTimeYoungMeasure nu_cur = coarse_measure(g, support, cur.w);
    for (int k = 0; k < nt; ++k) cur.w[k] = nu_cur.slice(k);
    chi = solver.adjoint(cur.fwd.y, nu_cur);
    H = hamiltonian_cells(solver, cur.fwd.y, chi, nu_cur);
    res = mp_residual_coarse(g, H, nu_cur);
    report.mp_history.push_back(res.max);
    if (res.max <= opts.mp_tolerance) {
      termination = "converged";
      break;
    }
    if (it >= opts.max_iters) {
      termination = "iteration_limit";
      break;
    }

    const auto towards = lmo_coarse(H);
    std::vector<Eigen::MatrixXd> d(nt, Eigen::MatrixXd::Zero(N, Z));
    for (int k = 0; k < nt; ++k) {
      for (int i = 0; i < N; ++i) {
        if (opts.direction == DirectionRule::FrankWolfe) {
          d[k].row(i) = -cur.w[k].row(i);
          d[k](i, towards[k][i]) += 1.0;
        } else {
          int away = -1;
          for (int s = 0; s < Z; ++s) {
            if (cur.w[k](i, s) <= 0.0) continue;
            if (away < 0 || H[k](i, s) < H[k](i, away)) away = s;
          }
          if (away < 0 || away == towards[k][i]) continue;
          const double mass = cur.w[k](i, away);
          d[k](i, towards[k][i]) += mass;
          d[k](i, away) -= mass;
        }
      }
    }

    double gprime = 0.0;
    for (int k = 0; k < nt; ++k) {
      for (int i = 0; i < N; ++i) {
        const double qw = g.quad_weight(i);
        for (int s = 0; s < Z; ++s) gprime -= dt * qw * H[k](i, s) * d[k](i, s);
      }
    }
    if (!(gprime < 0.0)) {
      termination = "iteration_limit";
      break;
    }

    auto try_alpha = [&](double a) {
      CoarseIterate cand;
      cand.w.resize(nt);
      for (int k = 0; k < nt; ++k) cand.w[k] = cur.w[k] + a * d[k];
      const auto nu = coarse_measure(g, support, cand.w);
      cand.fwd = solver.forward(nu);
      cand.cost = cand.fwd.diverged() ? kInf : solver.cost(cand.fwd, nu);
      return cand;
    };

    double alpha = 0.0;
    CoarseIterate next;
    if (rule == StepRule::Harmonic) {
      alpha = 2.0 / (it + 2.0);
      next = try_alpha(alpha);
      if (next.fwd.diverged()) {
        termination = "diverged";
        report.cost_history.push_back(next.cost);
        break;
      }
    } else if (rule == StepRule::ExactQuadratic) {
      CoarseIterate full = try_alpha(1.0);
      if (!std::isfinite(full.cost)) {
        termination = "diverged";
        report.cost_history.push_back(full.cost);
        break;
      }
      const double c2 = full.cost - cur.cost - gprime;
      if (c2 > 1e-300) {
        alpha = std::clamp(-gprime / (2.0 * c2), 0.0, 1.0);
      } else {
        alpha = full.cost <= cur.cost ? 1.0 : 0.0;
      }
      if (alpha == 0.0) {
        termination = "iteration_limit";
        break;
      }
      next = alpha == 1.0 ? std::move(full) : try_alpha(alpha);
    } else {
      bool accepted = false;
      double a = 1.0;
      while (a >= opts.armijo.alpha_min) {
        CoarseIterate cand = try_alpha(a);
        if (std::isfinite(cand.cost) &&
            cand.cost <= cur.cost + opts.armijo.slope_fraction * a * gprime) {
          alpha = a;
          next = std::move(cand);
          accepted = true;
          break;
        }
        a *= opts.armijo.shrink;
      }
      if (!accepted) {
        termination = "iteration_limit";
        break;
      }
    }

    cur = std::move(next);
    report.cost_history.push_back(cur.cost);
    ++it;
  }

  SpaceTimeYoungMeasure nu_final = coarse_measure(g, support, cur.w);
  if (chi.rows.empty()) {
    chi.grid = g;
    chi.n = p.n();
    chi.rows.assign(nt + 1, Eigen::VectorXd::Zero(p.y0().size()));
  } else {
    const auto hc = hamiltonian_constancy(solver, cur.fwd.y, chi, nu_final);
    report.hamiltonian_profile = hc.profile;
    report.hamiltonian_dispersion = hc.dispersion;
  }
  report.final_cost = cur.cost;
  report.per_time_residual = res.per_time;
  report.max_residual = res.max;
  report.fw_gap = res.fw_gap;
  report.iterations = it;
  report.termination = termination;
  return CoarseSolveResult{std::move(nu_final), std::move(cur.fwd.y),
                           std::move(chi), std::move(report)};
}

}  // namespace

CoarseSolveResult solve_relaxed_coarse(const ParabolicProblem& p,
                                       std::vector<std::vector<double>> support,
                                       const SolveOptions& options) {
  options.validate();
  const auto t0 = std::chrono::steady_clock::now();
  PdeSolver solver(p);
  const Grid& g = p.grid();
  const int Z = static_cast<int>(support.size());
  if (Z < 1) throw std::invalid_argument("solve_relaxed_coarse: empty support");

  std::optional<CoarseSolveResult> best;
  std::vector<RestartSummary> runs;
  for (int run = 0; run <= options.restarts; ++run) {
    std::vector<Eigen::MatrixXd> w0(
        g.nt(), Eigen::MatrixXd::Constant(g.interior_nodes(), Z, 1.0 / Z));
    if (run > 0) {
      for (int k = 0; k < g.nt(); ++k) {
        w0[k] = perturbed_uniform(g.interior_nodes(), Z,
                                  options.seed + run + 7919ULL * k);
      }
    }
    CoarseSolveResult result =
        solve_coarse_single(solver, support, std::move(w0), options);
    runs.push_back({options.seed + run, result.report.final_cost,
                    result.report.termination});
    if (!best || result.report.final_cost < best->report.final_cost) {
      best = std::move(result);
    }
  }
  best->report.restart_runs = std::move(runs);
  best->report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return std::move(*best);
}

FilippovExtraction filippov_extract(const ParabolicProblem& p,
                                    const RelaxedControl& mu,
                                    const StateTrajectory& y,
                                    double mismatch_tolerance) {
  PdeSolver solver(p);
  const Grid& g = p.grid();
  const int nt = mu.steps();
  const int L = mu.atoms();
  const ControlDictionary& dict = mu.dictionary();

  FilippovExtraction out;
  out.mismatch_tolerance = mismatch_tolerance;
  out.selection.resize(nt);
  out.f_mismatch.resize(nt);
  out.cost_slack.resize(nt);
  out.cost_feasible.resize(nt);

  bool all_exact = true;
  for (int k = 0; k < nt; ++k) {
    const double t = g.time(k);
    const Eigen::VectorXd favg =
        average_field_fine(p, t, y.rows[k], mu.row(k), dict);
    std::vector<double> atom_cost(L);
    double cost_avg = 0.0;
    for (int l = 0; l < L; ++l) {
      atom_cost[l] = solver.atom_cost_value(t, y.rows[k], dict, l);
      cost_avg += mu.row(k)[l] * atom_cost[l];
    }
    const double slack_tol = 1e-9 * (1.0 + std::abs(cost_avg));

    int best_feasible = -1, best_any = -1;
    double best_feasible_mismatch = kInf, best_any_mismatch = kInf;
    for (int l = 0; l < L; ++l) {
      const Eigen::VectorXd fl =
          average_field_fine(p, t, y.rows[k], Eigen::VectorXd::Unit(L, l), dict);
      const Eigen::VectorXd diff = favg - fl;
      const double mismatch =
          std::sqrt(weighted_inner(diff, diff, solver.quad(), p.n()));
      if (mismatch < best_any_mismatch) {
        best_any_mismatch = mismatch;
        best_any = l;
      }
      if (atom_cost[l] <= cost_avg + slack_tol && mismatch < best_feasible_mismatch) {
        best_feasible_mismatch = mismatch;
        best_feasible = l;
      }
    }
    const bool feasible = best_feasible >= 0;
    const int pick = feasible ? best_feasible : best_any;
    const double mismatch = feasible ? best_feasible_mismatch : best_any_mismatch;
    out.selection[k] = pick;
    out.f_mismatch[k] = mismatch;
    out.cost_slack[k] = atom_cost[pick] - cost_avg;
    out.cost_feasible[k] = feasible;
    out.max_mismatch = std::max(out.max_mismatch, mismatch);
    if (!feasible || mismatch > mismatch_tolerance) all_exact = false;
  }
  out.exact_within_tol = all_exact;
  return out;
}

}  // namespace relaxctrl
