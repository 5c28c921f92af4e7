#ifndef RELAXCTRL_CHATTER_HPP
#define RELAXCTRL_CHATTER_HPP

#include <vector>

#include "relaxctrl/integrands.hpp"
#include "relaxctrl/measure_ops.hpp"
#include "relaxctrl/measures.hpp"

namespace relaxctrl {

/// Apportionment of k slots to the weight row: floor(k*w) plus
/// largest-remainder top-up, remainder ties resolved to the lowest atom
/// index. Realizes k*w exactly whenever k*w is integral.
std::vector<int> largest_remainder_counts(const Eigen::VectorXd& weights,
                                          int k);

/// Deterministic interleaving of the slot counts: slot j goes to the atom
/// with the largest running quota deficit (j+1)*counts_l/k - assigned_l among
/// atoms that still have slots left, ties to the lowest index. Spreads each
/// atom's slots evenly instead of blocking them together.
std::vector<int> quota_sequence(const std::vector<int>& counts);

/// A classical control oscillating at time scale dt/k: each coarse step is
/// split into k sub-steps, each assigned one dictionary atom.
struct ChatterSchedule {
  Grid coarse_grid;
  DictionaryPtr dict;
  int refinement = 1;
  std::vector<std::vector<int>> substep_atoms;  // [coarse step][sub-step]

  int atom_at(int global_substep) const {
    return substep_atoms[global_substep / refinement]
                        [global_substep % refinement];
  }
  /// The schedule as a Dirac control on the time-refined grid (for forward
  /// solves of the chattered control).
  RelaxedControl as_dirac_control() const;
};

ChatterSchedule chatter_time(const RelaxedControl& mu, int k);

/// <delta(u_chat), h>: time integral of Psi h along the oscillating control,
/// midpoint rule per sub-step.
double chatter_time_pairing(const ChatterSchedule& s, const PsiIntegrand& h);

/// <mu, h> on the same sub-step time sampling, so the two pairings agree
/// exactly for time-independent h whenever the slot counts realize the
/// weights exactly.
double relaxed_time_pairing(const RelaxedControl& mu, const PsiIntegrand& h,
                            int substeps_per_step);

/// A classical control oscillating in both time and space: axis-0 stripes of
/// width dx0/k whose atom pattern rotates with the time sub-step, realizing
/// each coarse cell's weights with the same quota contract.
class SpacetimeChatter {
 public:
  SpacetimeChatter(SpaceTimeYoungMeasure nu, int k);

  const Grid& refined_grid() const { return refined_grid_; }
  const SpaceTimeYoungMeasure& measure() const { return nu_; }
  int refinement() const { return k_; }

  /// Support index active at (global sub-step, refined interior node).
  int support_at(int global_substep, int refined_node) const;
  /// Materialized field on the refined grid at one sub-step.
  ControlField field_at(int global_substep) const;
  /// Coarse interior node owning a refined node (nearest along axis 0).
  int coarse_node_of(int refined_node) const;

 private:
  SpaceTimeYoungMeasure nu_;
  int k_;
  Grid refined_grid_;
  std::vector<std::vector<int>> cell_seq_;  // [slice * N + node] -> k entries
  int stripe_of_(int refined_node) const;
};

SpacetimeChatter chatter_spacetime(const SpaceTimeYoungMeasure& nu, int k);

/// Space-time quadrature of h along the chattered field.
double spacetime_chatter_pairing(const SpacetimeChatter& c,
                                 const PsiIntegrand& h);
/// The measure side on the identical refined sampling.
double young_pairing_refined(const SpacetimeChatter& c, const PsiIntegrand& h);

}  // namespace relaxctrl

#endif
