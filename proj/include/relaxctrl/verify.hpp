#ifndef RELAXCTRL_VERIFY_HPP
#define RELAXCTRL_VERIFY_HPP

#include <string>
#include <vector>

#include "relaxctrl/measure_ops.hpp"
#include "relaxctrl/optimizer.hpp"
#include "relaxctrl/pde.hpp"

namespace relaxctrl {

/// Compares the adjoint-based reduced gradient with central finite
/// differences of the raw cost, over every weight coordinate and every
/// within-step weight-exchange direction.
struct GradientCheck {
  double max_rel_error = 0.0;
  int worst_step = -1;
  int worst_atom = -1;
  int directions = 0;
};

GradientCheck gradient_fd_check(const ParabolicProblem& p, DictionaryPtr dict,
                                const Eigen::MatrixXd& weights, double fd_step);

/// The canonical two-field piecewise slice used by the identity checks:
/// u1 = 0 and u2 = 1 on the grid's spatial layout, switching across the
/// half-domain along axis 0.
struct TwoAtomicSetup {
  ControlSet B;
  ControlField u1;
  ControlField u2;
  NodeMask A;
  SpaceTimeYoungMeasure nu;
};

TwoAtomicSetup make_two_atomic_setup(const Grid& grid);

struct RepresentationPanelResult {
  double max_identity_error = 0.0;  // worst |<mu, Psi h> - <nu, h>| over panel
  bool barycenter_exact = false;    // pushforward reproduces nu exactly
  int panel_size = 0;
};

/// Runs the representation identity over the standard integrand panel for
/// the weight family a in {0, 0.1, 0.25}.
RepresentationPanelResult representation_panel_check(const Grid& grid);

struct NonuniquenessWitness {
  double linear_values[3] = {0, 0, 0};     // <mu_a, Psi h>, h = z
  double composite_values[3] = {0, 0, 0};  // <mu_a, (Psi h)^2>
  double linear_spread = 0.0;
  double collinearity_error = 0.0;
  double slope = 0.0;
  double young_oracle = 0.0;  // direct quadrature of <nu, h>
};

NonuniquenessWitness nonuniqueness_witness(const Grid& grid);

}  // namespace relaxctrl

#endif
