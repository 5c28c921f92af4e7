#include "relaxctrl/problem.hpp"

#include <cmath>
#include <stdexcept>

namespace relaxctrl {

DiffusionTensor DiffusionTensor::isotropic(int n, double a) {
  std::vector<Eigen::Matrix2d> blocks(n, a * Eigen::Matrix2d::Identity());
  DiffusionTensor A;
  A.blocks_ = std::move(blocks);
  return A;
}

DiffusionTensor DiffusionTensor::blocks(
    std::vector<Eigen::Matrix2d> per_component) {
  if (per_component.empty()) {
    throw std::invalid_argument("DiffusionTensor: needs >= 1 component block");
  }
  DiffusionTensor A;
  A.blocks_ = std::move(per_component);
  return A;
}

void DiffusionTensor::validate(int dim) const {
  for (const auto& b : blocks_) {
    const Eigen::Matrix2d sym = 0.5 * (b + b.transpose());
    if (dim == 1) {
      if (!(sym(0, 0) > 0.0)) {
        throw std::invalid_argument("DiffusionTensor: not positive definite");
      }
    } else {
      const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
      if (!(es.eigenvalues().minCoeff() > 0.0)) {
        throw std::invalid_argument("DiffusionTensor: not positive definite");
      }
    }
  }
}

ParabolicProblem::ParabolicProblem(std::string name, Grid grid, int n,
                                   DiffusionTensor A, FieldFn f,
                                   RunningCost running,
                                   std::optional<TerminalCost> terminal,
                                   Eigen::VectorXd y0, ControlSet B,
                                   ProblemFlags flags)
    : name_(std::move(name)),
      grid_(grid),
      n_(n),
      A_(std::move(A)),
      f_(std::move(f)),
      running_(std::move(running)),
      terminal_(std::move(terminal)),
      y0_(std::move(y0)),
      B_(std::move(B)),
      flags_(flags) {
  if (n_ < 1) throw std::invalid_argument("ParabolicProblem: n >= 1");
  if (A_.components() != n_) {
    throw std::invalid_argument("ParabolicProblem: diffusion blocks != n");
  }
  A_.validate(grid_.dim());
  if (f_.n != n_ || f_.m != B_.m()) {
    throw std::invalid_argument("ParabolicProblem: field dimensions mismatch");
  }
  if (y0_.size() != static_cast<Eigen::Index>(grid_.interior_nodes()) * n_) {
    throw std::invalid_argument("ParabolicProblem: y0 size mismatch");
  }
  if (const auto* comp = std::get_if<CompositeCost>(&running_)) {
    if (comp->terms.empty()) {
      throw std::invalid_argument("ParabolicProblem: composite cost needs terms");
    }
    for (const auto& term : comp->terms) {
      if (term.factors.empty()) {
        throw std::invalid_argument(
            "ParabolicProblem: composite term needs factors");
      }
    }
  }
}

ParabolicProblem ParabolicProblem::with_time_steps(int new_nt) const {
  ParabolicProblem p = *this;
  p.grid_ = grid_.with_time_steps(new_nt);
  return p;
}

namespace fields {

FieldFn zero(int n, int m) {
  FieldFn f;
  f.n = n;
  f.m = m;
  f.eval = [](double, std::span<const double>, std::span<const double>,
              std::span<const double>, std::span<double> out) {
    for (auto& v : out) v = 0.0;
  };
  f.dy = [](double, std::span<const double>, std::span<const double>,
            std::span<const double>, std::span<double> out) {
    for (auto& v : out) v = 0.0;
  };
  f.name = "zero";
  return f;
}

FieldFn scalar_affine(double a, double b, double c) {
  FieldFn f;
  f.n = 1;
  f.m = 1;
  f.eval = [a, b, c](double, std::span<const double>, std::span<const double> y,
                     std::span<const double> z, std::span<double> out) {
    out[0] = a * y[0] + b * z[0] + c;
  };
  f.dy = [a](double, std::span<const double>, std::span<const double>,
             std::span<const double>, std::span<double> out) { out[0] = a; };
  f.name = "scalar_affine";
  return f;
}

FieldFn linear_system(Eigen::MatrixXd C, Eigen::MatrixXd D, Eigen::VectorXd e) {
  const int n = static_cast<int>(C.rows());
  if (C.cols() != n || D.rows() != n || e.size() != n) {
    throw std::invalid_argument("linear_system: inconsistent shapes");
  }
  const int m = static_cast<int>(D.cols());
  FieldFn f;
  f.n = n;
  f.m = m;
  f.eval = [C, D, e, n, m](double, std::span<const double>,
                           std::span<const double> y, std::span<const double> z,
                           std::span<double> out) {
    for (int r = 0; r < n; ++r) {
      double v = e[r];
      for (int c = 0; c < n; ++c) v += C(r, c) * y[c];
      for (int c = 0; c < m; ++c) v += D(r, c) * z[c];
      out[r] = v;
    }
  };
  f.dy = [C, n](double, std::span<const double>, std::span<const double>,
                std::span<const double>, std::span<double> out) {
    for (int r = 0; r < n; ++r) {
      for (int c = 0; c < n; ++c) out[r * n + c] = C(r, c);
    }
  };
  f.name = "linear_system";
  return f;
}

}  // namespace fields

namespace costs {

CostDensity quadratic_tracking(
    int n, double q, double r,
    std::function<void(std::span<const double> x, std::span<double> yref)>
        yref) {
  CostDensity phi;
  phi.eval = [n, q, r, yref](double, std::span<const double> x,
                             std::span<const double> y,
                             std::span<const double> z) {
    std::vector<double> ref(n, 0.0);
    if (yref) yref(x, ref);
    double v = 0.0;
    for (int c = 0; c < n; ++c) {
      const double d = y[c] - ref[c];
      v += q * d * d;
    }
    for (std::size_t j = 0; j < z.size(); ++j) v += r * z[j] * z[j];
    return v;
  };
  phi.dy = [n, q, yref](double, std::span<const double> x,
                        std::span<const double> y, std::span<const double>,
                        std::span<double> out) {
    std::vector<double> ref(n, 0.0);
    if (yref) yref(x, ref);
    for (int c = 0; c < n; ++c) out[c] = 2.0 * q * (y[c] - ref[c]);
  };
  phi.name = "quadratic_tracking";
  return phi;
}

CostDensity double_well(double q) {
  CostDensity phi;
  phi.eval = [q](double, std::span<const double>, std::span<const double> y,
                 std::span<const double> z) {
    const double w = z[0] * z[0] - 1.0;
    return q * y[0] * y[0] + w * w;
  };
  phi.dy = [q](double, std::span<const double>, std::span<const double> y,
               std::span<const double>, std::span<double> out) {
    out[0] = 2.0 * q * y[0];
  };
  phi.name = "double_well";
  return phi;
}

TerminalCost terminal_quadratic(
    int n, double beta,
    std::function<void(std::span<const double> x, std::span<double> yref)>
        yref) {
  TerminalCost phi;
  phi.eval = [n, beta, yref](std::span<const double> x,
                             std::span<const double> y) {
    std::vector<double> ref(n, 0.0);
    if (yref) yref(x, ref);
    double v = 0.0;
    for (int c = 0; c < n; ++c) {
      const double d = y[c] - ref[c];
      v += beta * d * d;
    }
    return v;
  };
  phi.dy = [n, beta, yref](std::span<const double> x, std::span<const double> y,
                           std::span<double> out) {
    std::vector<double> ref(n, 0.0);
    if (yref) yref(x, ref);
    for (int c = 0; c < n; ++c) out[c] = 2.0 * beta * (y[c] - ref[c]);
  };
  phi.name = "terminal_quadratic";
  return phi;
}

CostIntegrand integrand_state_shift(double shift) {
  CostIntegrand h;
  h.eval = [shift](double, std::span<const double>, std::span<const double> y,
                   std::span<const double>) { return y[0] - shift; };
  h.dy = [](double, std::span<const double>, std::span<const double>,
            std::span<const double>, std::span<double> out) { out[0] = 1.0; };
  h.name = "state_shift";
  return h;
}

CostIntegrand integrand_control_square() {
  CostIntegrand h;
  h.eval = [](double, std::span<const double>, std::span<const double>,
              std::span<const double> z) { return z[0] * z[0]; };
  h.dy = [](double, std::span<const double>, std::span<const double>,
            std::span<const double>, std::span<double> out) { out[0] = 0.0; };
  h.name = "control_square";
  return h;
}

}  // namespace costs

Eigen::VectorXd sample_initial_state(
    const Grid& grid, int n,
    const std::function<void(std::span<const double> x, std::span<double> y)>&
        fn) {
  const int N = grid.interior_nodes();
  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(N) * n);
  std::vector<double> buf(n);
  for (int i = 0; i < N; ++i) {
    const auto x = grid.node_coord(i);
    fn({x.data(), static_cast<std::size_t>(grid.dim())}, buf);
    for (int c = 0; c < n; ++c) y0[static_cast<Eigen::Index>(c) * N + i] = buf[c];
  }
  return y0;
}

}  // namespace relaxctrl
