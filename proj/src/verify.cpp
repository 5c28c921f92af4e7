#include "relaxctrl/verify.hpp"

#include <cmath>

namespace relaxctrl {

GradientCheck gradient_fd_check(const ParabolicProblem& p, DictionaryPtr dict,
                                const Eigen::MatrixXd& weights, double fd_step) {
  PdeSolver solver(p);
  const Grid& g = p.grid();
  const int nt = static_cast<int>(weights.rows());
  const int L = static_cast<int>(weights.cols());
  const double dt = g.dt();

  RelaxedControl mu(g, dict, weights);
  const Eigen::MatrixXd base = mu.weights();
  ForwardResult fwd = solver.forward(mu);
  AdjointTrajectory chi = solver.adjoint(fwd.y, mu);
  const Eigen::MatrixXd H = hamiltonian_matrix(solver, fwd.y, chi, mu);

  auto cost_at = [&](const Eigen::MatrixXd& w) {
    const ForwardResult f = solver.forward_raw(w, *dict);
    return solver.cost_raw(f, w, *dict);
  };

  // Entries far below the gradient's scale carry no relative information in
  // a finite difference (the quotient is dominated by cancellation noise),
  // so the denominator is floored three decades under the largest entry.
  double scale = 1e-300;
  for (int k = 0; k < nt; ++k) {
    for (int l = 0; l < L; ++l) scale = std::max(scale, dt * std::abs(H(k, l)));
  }
  const double floor = 1e-3 * scale;

  GradientCheck out;
  auto record = [&](double fd, double adj, int k, int l) {
    const double denom = std::max({std::abs(fd), std::abs(adj), floor});
    const double rel = std::abs(fd - adj) / denom;
    if (rel > out.max_rel_error) {
      out.max_rel_error = rel;
      out.worst_step = k;
      out.worst_atom = l;
    }
    ++out.directions;
  };

  // Raw coordinate directions.
  for (int k = 0; k < nt; ++k) {
    for (int l = 0; l < L; ++l) {
      Eigen::MatrixXd wp = base, wm = base;
      wp(k, l) += fd_step;
      wm(k, l) -= fd_step;
      const double fd = (cost_at(wp) - cost_at(wm)) / (2.0 * fd_step);
      record(fd, -dt * H(k, l), k, l);
    }
  }
  // Simplex-tangent exchanges within each step.
  for (int k = 0; k < nt; ++k) {
    for (int l = 0; l < L; ++l) {
      for (int l2 = 0; l2 < L; ++l2) {
        if (l2 == l) continue;
        Eigen::MatrixXd wp = base, wm = base;
        wp(k, l) += fd_step;
        wp(k, l2) -= fd_step;
        wm(k, l) -= fd_step;
        wm(k, l2) += fd_step;
        const double fd = (cost_at(wp) - cost_at(wm)) / (2.0 * fd_step);
        record(fd, -dt * (H(k, l) - H(k, l2)), k, l);
      }
    }
  }
  return out;
}

TwoAtomicSetup make_two_atomic_setup(const Grid& grid) {
  ControlSet B = ControlSet::box({-1.0}, {1.0});
  const Grid spatial = grid.with_time_steps(1);
  ControlField u1 = ControlField::constant(spatial, {0.0});
  ControlField u2 = ControlField::constant(spatial, {1.0});
  std::vector<double> lo(grid.dim(), 0.0), hi(grid.dim(), 0.0);
  for (int a = 0; a < grid.dim(); ++a) hi[a] = grid.extent(a);
  hi[0] = 0.5 * grid.extent(0);
  NodeMask A = NodeMask::from_box(spatial, lo, hi);
  SpaceTimeYoungMeasure nu = two_atomic_slice(u1, u2, A, B);
  return TwoAtomicSetup{std::move(B), std::move(u1), std::move(u2),
                        std::move(A), std::move(nu)};
}

RepresentationPanelResult representation_panel_check(const Grid& grid) {
  const TwoAtomicSetup setup = make_two_atomic_setup(grid);
  const auto panel = integrands::standard_panel(setup.u1.grid(), setup.B);

  RepresentationPanelResult out;
  out.panel_size = static_cast<int>(panel.size());
  out.barycenter_exact = true;
  for (double a : {0.0, 0.1, 0.25}) {
    const RelaxedControl mu =
        choquet_represent(setup.u1, setup.u2, setup.A, setup.B, a);
    for (const auto& h : panel) {
      const double lhs = relaxed_eval(h, mu.row(0), mu.dictionary());
      const double rhs = young_eval(h, setup.nu);
      const double err = std::abs(lhs - rhs) / (1.0 + std::abs(rhs));
      out.max_identity_error = std::max(out.max_identity_error, err);
    }
    const SpaceTimeYoungMeasure push = barycenter(mu.row(0), mu.dictionary());
    if (!young_slices_equal(push, 0, setup.nu, 0, 0.0)) {
      out.barycenter_exact = false;
    }
  }
  return out;
}

NonuniquenessWitness nonuniqueness_witness(const Grid& grid) {
  const TwoAtomicSetup setup = make_two_atomic_setup(grid);
  const PsiIntegrand h = integrands::component(setup.u1.grid(), setup.B, 0);
  const CompositeTestFunctional square =
      CompositeTestFunctional::of(ScalarFn::square(),
                                  integrands::component(setup.u1.grid(), setup.B, 0));

  NonuniquenessWitness out;
  const double avals[3] = {0.0, 0.1, 0.25};
  for (int i = 0; i < 3; ++i) {
    const RelaxedControl mu =
        choquet_represent(setup.u1, setup.u2, setup.A, setup.B, avals[i]);
    out.linear_values[i] = relaxed_eval(h, mu.row(0), mu.dictionary());
    out.composite_values[i] = relaxed_eval(square, mu.row(0), mu.dictionary());
  }
  double lmin = out.linear_values[0], lmax = out.linear_values[0];
  for (double v : out.linear_values) {
    lmin = std::min(lmin, v);
    lmax = std::max(lmax, v);
  }
  out.linear_spread = lmax - lmin;
  const double frac = (avals[1] - avals[0]) / (avals[2] - avals[0]);
  const double lerp = out.composite_values[0] +
                      frac * (out.composite_values[2] - out.composite_values[0]);
  out.collinearity_error = std::abs(out.composite_values[1] - lerp);
  out.slope =
      (out.composite_values[2] - out.composite_values[0]) / (avals[2] - avals[0]);

  // Direct quadrature of the two-atomic slice against h = z.
  const Grid spatial = setup.u1.grid();
  double oracle = 0.0;
  for (int i = 0; i < spatial.interior_nodes(); ++i) {
    const double mass_u2 = setup.A.contains(i) ? 0.5 : 0.75;
    oracle += spatial.quad_weight(i) * (mass_u2 * 1.0);
  }
  out.young_oracle = oracle;
  return out;
}

}  // namespace relaxctrl
