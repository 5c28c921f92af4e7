#ifndef RELAXCTRL_MEASURES_HPP
#define RELAXCTRL_MEASURES_HPP

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "relaxctrl/control_space.hpp"
#include "relaxctrl/grid.hpp"

namespace relaxctrl {

/// Weight rows are accepted when they are nonnegative (up to -kSimplexTol)
/// and sum to 1 within kSimplexTol; construction renormalizes explicitly.
inline constexpr double kSimplexTol = 1e-12;

namespace detail {
/// Clamps tiny negatives, validates the simplex constraints, renormalizes.
/// `what` names the offending object in error messages.
void renormalize_rows(Eigen::MatrixXd& w, const char* what);
}  // namespace detail

/// Fine relaxed control: one probability vector over the dictionary atoms
/// per time step. A single-row instance represents a static measure on the
/// atom family.
class RelaxedControl {
 public:
  RelaxedControl(Grid grid, DictionaryPtr dict, Eigen::MatrixXd weights);

  static RelaxedControl uniform(const Grid& grid, DictionaryPtr dict);
  /// Dirac at one atom for every step.
  static RelaxedControl dirac(const Grid& grid, DictionaryPtr dict, int atom);
  /// Dirac at a per-step atom selection.
  static RelaxedControl dirac_path(const Grid& grid, DictionaryPtr dict,
                                   const std::vector<int>& atoms);
  /// One-row static measure over the dictionary (nt of the stored grid is 1).
  static RelaxedControl static_row(DictionaryPtr dict,
                                   const Eigen::VectorXd& row);

  const Grid& grid() const { return grid_; }
  const ControlDictionary& dictionary() const { return *dict_; }
  DictionaryPtr dictionary_ptr() const { return dict_; }
  int steps() const { return static_cast<int>(weights_.rows()); }
  int atoms() const { return static_cast<int>(weights_.cols()); }
  const Eigen::MatrixXd& weights() const { return weights_; }
  Eigen::VectorXd row(int k) const { return weights_.row(k).transpose(); }

  /// Convex combination (1-alpha)*this + alpha*other on the same dictionary.
  RelaxedControl blend(const RelaxedControl& other, double alpha) const;

 private:
  Grid grid_;
  DictionaryPtr dict_;
  Eigen::MatrixXd weights_;  // steps x atoms
};

/// Coarse space-time Young measure: a probability vector over a shared list
/// of support points of B for every (time step, interior node) cell. An
/// instance with one slice represents a measure on Omega alone.
class SpaceTimeYoungMeasure {
 public:
  SpaceTimeYoungMeasure(Grid grid, std::vector<std::vector<double>> support,
                        std::vector<Eigen::MatrixXd> slice_weights);

  static SpaceTimeYoungMeasure uniform(const Grid& grid,
                                       std::vector<std::vector<double>> support,
                                       int slices);
  /// nu_x = delta_{u(x)} for every cell of every slice.
  static SpaceTimeYoungMeasure dirac_field(const Grid& grid,
                                           const ControlField& u, int slices);

  const Grid& grid() const { return grid_; }
  int slices() const { return static_cast<int>(weights_.size()); }
  int support_size() const { return static_cast<int>(support_.size()); }
  const std::vector<std::vector<double>>& support() const { return support_; }
  /// Weights of one time slice: interior-nodes x support matrix.
  const Eigen::MatrixXd& slice(int k) const { return weights_[k]; }
  const std::vector<Eigen::MatrixXd>& slices_data() const { return weights_; }

  SpaceTimeYoungMeasure with_slice(int k, Eigen::MatrixXd w) const;
  SpaceTimeYoungMeasure blend(const SpaceTimeYoungMeasure& other,
                              double alpha) const;

 private:
  Grid grid_;
  std::vector<std::vector<double>> support_;
  std::vector<Eigen::MatrixXd> weights_;
};

/// Measure equality up to support relabeling: compares the per-cell value ->
/// mass maps with the given tolerance on masses (values compare exactly).
bool young_slices_equal(const SpaceTimeYoungMeasure& a, int slice_a,
                        const SpaceTimeYoungMeasure& b, int slice_b,
                        double mass_tol);

}  // namespace relaxctrl

#endif
