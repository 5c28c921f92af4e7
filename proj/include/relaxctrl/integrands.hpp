#ifndef RELAXCTRL_INTEGRANDS_HPP
#define RELAXCTRL_INTEGRANDS_HPP

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "relaxctrl/control_space.hpp"
#include "relaxctrl/grid.hpp"

namespace relaxctrl {

/// Test integrand h(t, x, z). Instances come from the factory functions
/// below (closed forms with numeric parameters); each factory probes h on a
/// sample of I x Omega x B and rejects non-finite values.
struct PsiIntegrand {
  std::function<double(double t, std::span<const double> x,
                       std::span<const double> z)>
      eval;
  bool time_dependent = false;
  std::string name;
};

namespace integrands {

/// h = c.
PsiIntegrand constant(double c);

/// h = c * prod_a x_a^xp[a] * prod_j z_j^zp[j]; exponents in 0..4.
PsiIntegrand monomial(const Grid& grid, const ControlSet& B, double c,
                      std::vector<int> x_powers, std::vector<int> z_powers);

/// h = z_j (shorthand for the linear component test).
PsiIntegrand component(const Grid& grid, const ControlSet& B, int j);

/// h = c * |z - z0|^p (Euclidean norm).
PsiIntegrand abs_power(const Grid& grid, const ControlSet& B,
                       std::vector<double> z0, double p, double c = 1.0);

/// Restriction to a subdomain: h(t,x,z) = 1_{x in box} * inner(t,x,z).
PsiIntegrand subdomain(const Grid& grid, const ControlSet& B,
                       std::vector<double> lo, std::vector<double> hi,
                       PsiIntegrand inner);

/// Time modulation: h(t,x,z) = (a + b*t) * inner(t,x,z).
PsiIntegrand time_affine(const Grid& grid, const ControlSet& B, double a,
                         double b, PsiIntegrand inner);

/// The fixed evaluation panel used by identity checks: constants, linear and
/// quadratic component tests, a shifted |z-z0|^p, mixed x-z monomials and a
/// subdomain-restricted linear test. At least five integrands for any (grid, B).
std::vector<PsiIntegrand> standard_panel(const Grid& grid, const ControlSet& B);

}  // namespace integrands

/// Scalar outer functions f_ij applied to averaged integrals; the registry
/// consists of continuous forms that stay bounded on bounded inputs (exp is
/// clipped).
class ScalarFn {
 public:
  enum class Kind { Identity, Square, ExpClip, Affine };

  static ScalarFn identity();
  static ScalarFn square();
  static ScalarFn exp_clip(double clip = 40.0);
  static ScalarFn affine(double a, double b);  // a*v + b

  double operator()(double v) const;
  double derivative(double v) const;
  Kind kind() const { return kind_; }
  const std::string& name() const { return name_; }

 private:
  ScalarFn(Kind kind, double a, double b, std::string name)
      : kind_(kind), a_(a), b_(b), name_(std::move(name)) {}
  Kind kind_;
  double a_ = 1.0;
  double b_ = 0.0;
  std::string name_;
};

/// Composite test functional v = sum_i prod_j f_ij(Psi h_ij), the dense ring
/// of separating tests. Evaluators for both sides (control fields and Young
/// slices) live in measure_ops.
struct CompositeFactor {
  ScalarFn outer = ScalarFn::identity();
  PsiIntegrand inner;
};

struct CompositeTerm {
  std::vector<CompositeFactor> factors;
};

class CompositeTestFunctional {
 public:
  explicit CompositeTestFunctional(std::vector<CompositeTerm> terms);
  const std::vector<CompositeTerm>& terms() const { return terms_; }

  /// Single-term, single-factor convenience: f(Psi h).
  static CompositeTestFunctional of(ScalarFn outer, PsiIntegrand inner);

 private:
  std::vector<CompositeTerm> terms_;
};

}  // namespace relaxctrl

#endif
