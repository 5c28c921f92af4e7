#include "relaxctrl/integrands.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relaxctrl {

namespace integrands {
namespace {

double ipow(double base, int e) {
  double r = 1.0;
  for (int i = 0; i < e; ++i) r *= base;
  return r;
}

/// Every factory runs its integrand over a deterministic sample of
/// I x Omega x B and rejects non-finite values.
PsiIntegrand checked(PsiIntegrand h, const Grid& grid, const ControlSet& B) {
  const auto zs = B.probe_points();
  const double times[] = {0.0, 0.5 * grid.T(), grid.T()};
  for (double t : times) {
    for (int idx = 0; idx < grid.interior_nodes(); ++idx) {
      const auto x = grid.node_coord(idx);
      for (const auto& z : zs) {
        const double v = h.eval(t, {x.data(), static_cast<std::size_t>(grid.dim())}, z);
        if (!std::isfinite(v)) {
          throw std::invalid_argument("PsiIntegrand '" + h.name +
                                      "' is not finite on I x Omega x B");
        }
      }
    }
  }
  return h;
}

}  // namespace

PsiIntegrand constant(double c) {
  PsiIntegrand h;
  h.eval = [c](double, std::span<const double>, std::span<const double>) {
    return c;
  };
  h.name = "const";
  if (!std::isfinite(c)) throw std::invalid_argument("constant integrand must be finite");
  return h;
}

PsiIntegrand monomial(const Grid& grid, const ControlSet& B, double c,
                      std::vector<int> x_powers, std::vector<int> z_powers) {
  for (int p : x_powers)
    if (p < 0 || p > 4) throw std::invalid_argument("monomial: x exponent in 0..4");
  for (int p : z_powers)
    if (p < 0 || p > 4) throw std::invalid_argument("monomial: z exponent in 0..4");
  PsiIntegrand h;
  h.eval = [c, xp = std::move(x_powers), zp = std::move(z_powers)](
               double, std::span<const double> x, std::span<const double> z) {
    double v = c;
    for (std::size_t a = 0; a < xp.size() && a < x.size(); ++a) v *= ipow(x[a], xp[a]);
    for (std::size_t j = 0; j < zp.size() && j < z.size(); ++j) v *= ipow(z[j], zp[j]);
    return v;
  };
  h.name = "monomial";
  return checked(std::move(h), grid, B);
}

PsiIntegrand component(const Grid& grid, const ControlSet& B, int j) {
  if (j < 0 || j >= B.m()) throw std::invalid_argument("component: index out of range");
  PsiIntegrand h;
  h.eval = [j](double, std::span<const double>, std::span<const double> z) {
    return z[j];
  };
  h.name = "z" + std::to_string(j);
  return checked(std::move(h), grid, B);
}

PsiIntegrand abs_power(const Grid& grid, const ControlSet& B,
                       std::vector<double> z0, double p, double c) {
  if (!(p > 0.0)) throw std::invalid_argument("abs_power: p > 0 required");
  if (static_cast<int>(z0.size()) != B.m()) {
    throw std::invalid_argument("abs_power: z0 dimension mismatch");
  }
  PsiIntegrand h;
  h.eval = [z0 = std::move(z0), p, c](double, std::span<const double>,
                                      std::span<const double> z) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < z0.size(); ++j) {
      const double d = z[j] - z0[j];
      d2 += d * d;
    }
    return c * std::pow(d2, 0.5 * p);
  };
  h.name = "abs_power";
  return checked(std::move(h), grid, B);
}

PsiIntegrand subdomain(const Grid& grid, const ControlSet& B,
                       std::vector<double> lo, std::vector<double> hi,
                       PsiIntegrand inner) {
  PsiIntegrand h;
  h.time_dependent = inner.time_dependent;
  h.name = inner.name + "|box";
  h.eval = [lo = std::move(lo), hi = std::move(hi),
            f = std::move(inner.eval)](double t, std::span<const double> x,
                                       std::span<const double> z) {
    for (std::size_t a = 0; a < x.size(); ++a) {
      if (!(x[a] >= lo[a] && x[a] < hi[a])) return 0.0;
    }
    return f(t, x, z);
  };
  return checked(std::move(h), grid, B);
}

PsiIntegrand time_affine(const Grid& grid, const ControlSet& B, double a,
                         double b, PsiIntegrand inner) {
  PsiIntegrand h;
  h.time_dependent = b != 0.0 || inner.time_dependent;
  h.name = inner.name + "*t";
  h.eval = [a, b, f = std::move(inner.eval)](double t, std::span<const double> x,
                                             std::span<const double> z) {
    return (a + b * t) * f(t, x, z);
  };
  return checked(std::move(h), grid, B);
}

std::vector<PsiIntegrand> standard_panel(const Grid& grid,
                                         const ControlSet& B) {
  std::vector<PsiIntegrand> panel;
  panel.push_back(constant(1.0));
  panel.push_back(component(grid, B, 0));
  panel.push_back(monomial(grid, B, 1.0, {}, {2}));
  panel.push_back(monomial(grid, B, 1.0, {1}, {1}));
  panel.push_back(monomial(grid, B, 0.5, {2}, {3}));
  std::vector<double> z0(B.m(), 0.5);
  panel.push_back(abs_power(grid, B, z0, 2.0));
  std::vector<double> lo(grid.dim(), 0.0), hi(grid.dim(), 0.0);
  for (int a = 0; a < grid.dim(); ++a) hi[a] = 0.5 * grid.extent(a);
  panel.push_back(subdomain(grid, B, lo, hi, component(grid, B, 0)));
  return panel;
}

}  // namespace integrands

ScalarFn ScalarFn::identity() { return ScalarFn(Kind::Identity, 1.0, 0.0, "identity"); }
ScalarFn ScalarFn::square() { return ScalarFn(Kind::Square, 1.0, 0.0, "square"); }
ScalarFn ScalarFn::exp_clip(double clip) {
  return ScalarFn(Kind::ExpClip, clip, 0.0, "exp_clip");
}
ScalarFn ScalarFn::affine(double a, double b) {
  return ScalarFn(Kind::Affine, a, b, "affine");
}

double ScalarFn::operator()(double v) const {
  switch (kind_) {
    case Kind::Identity: return v;
    case Kind::Square: return v * v;
    case Kind::ExpClip: return std::exp(std::min(v, a_));
    case Kind::Affine: return a_ * v + b_;
  }
  return v;
}

double ScalarFn::derivative(double v) const {
  switch (kind_) {
    case Kind::Identity: return 1.0;
    case Kind::Square: return 2.0 * v;
    case Kind::ExpClip: return v < a_ ? std::exp(v) : 0.0;
    case Kind::Affine: return a_;
  }
  return 1.0;
}

CompositeTestFunctional::CompositeTestFunctional(std::vector<CompositeTerm> terms)
    : terms_(std::move(terms)) {
  if (terms_.empty()) {
    throw std::invalid_argument("CompositeTestFunctional: needs >= 1 term");
  }
  for (const auto& term : terms_) {
    if (term.factors.empty()) {
      throw std::invalid_argument("CompositeTestFunctional: term needs >= 1 factor");
    }
  }
}

CompositeTestFunctional CompositeTestFunctional::of(ScalarFn outer,
                                                    PsiIntegrand inner) {
  CompositeTerm term;
  term.factors.push_back({std::move(outer), std::move(inner)});
  return CompositeTestFunctional({std::move(term)});
}

}  // namespace relaxctrl
