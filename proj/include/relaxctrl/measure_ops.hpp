#ifndef RELAXCTRL_MEASURE_OPS_HPP
#define RELAXCTRL_MEASURE_OPS_HPP

#include <Eigen/Dense>

#include "relaxctrl/control_space.hpp"
#include "relaxctrl/integrands.hpp"
#include "relaxctrl/measures.hpp"

namespace relaxctrl {

/// [Psi h](u) = integral over Omega of h(t, x, u(x)), by the nodal
/// quadrature of the field's grid. Summation is in node-index order.
double psi_eval(const PsiIntegrand& h, const ControlField& u, double t = 0.0);

/// Composite value v(u) = sum_i prod_j f_ij(Psi h_ij(u)).
double composite_eval(const CompositeTestFunctional& v, const ControlField& u,
                      double t = 0.0);

/// <mu, Psi h> = sum_l mu_l [Psi h](u_l) for a weight row over the
/// dictionary.
double relaxed_eval(const PsiIntegrand& h, const Eigen::VectorXd& mu_row,
                    const ControlDictionary& dict, double t = 0.0);

/// <mu, v> = sum_l mu_l v(u_l) with the full composite value per atom.
double relaxed_eval(const CompositeTestFunctional& v,
                    const Eigen::VectorXd& mu_row,
                    const ControlDictionary& dict, double t = 0.0);

/// integral over Omega of sum_z w(x,z) h(t,x,z) for one time slice.
double young_eval(const PsiIntegrand& h, const SpaceTimeYoungMeasure& nu,
                  int slice = 0, double t = 0.0);

/// Weak* extension of a composite functional to a Young slice: the outer
/// functions wrap the measure-averaged inner integrals.
double composite_young_eval(const CompositeTestFunctional& v,
                            const SpaceTimeYoungMeasure& nu, int slice = 0,
                            double t = 0.0);

/// The piecewise two-atomic slice: nu_x = 1/2 d_{u1(x)} + 1/2 d_{u2(x)} on
/// the masked region A and 1/4 d_{u1(x)} + 3/4 d_{u2(x)} elsewhere.
SpaceTimeYoungMeasure two_atomic_slice(const ControlField& u1,
                                       const ControlField& u2,
                                       const NodeMask& A,
                                       const ControlSet& B);

/// One-parameter family of static measures representing the two-atomic
/// slice: weights (a, 1/2-a, 1/4-a, 1/4+a), 0 <= a <= 1/4, over the atoms
/// {u11, u12, u21, u22} built by switching u1/u2 across A. Zero-weight atoms
/// are retained in place.
RelaxedControl choquet_represent(const ControlField& u1,
                                 const ControlField& u2, const NodeMask& A,
                                 const ControlSet& B, double a);

/// Pushforward of a static atom measure to the matched Young slice:
/// nu_x = sum_l mu_l d_{u_l(x)}, with coincident nodal values merged by
/// exact equality.
SpaceTimeYoungMeasure barycenter(const Eigen::VectorXd& mu_row,
                                 const ControlDictionary& dict);

}  // namespace relaxctrl

#endif
