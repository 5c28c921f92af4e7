#include "relaxctrl/measures.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>

namespace relaxctrl {

namespace detail {

void renormalize_rows(Eigen::MatrixXd& w, const char* what) {
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    double sum = 0.0;
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      double v = w(r, c);
      if (!std::isfinite(v)) {
        throw std::invalid_argument(std::string(what) + ": non-finite weight");
      }
      if (v < 0.0) {
        if (v < -kSimplexTol) {
          throw std::invalid_argument(std::string(what) +
                                      ": negative weight in row " +
                                      std::to_string(r));
        }
        v = 0.0;
        w(r, c) = 0.0;
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kSimplexTol) {
      throw std::invalid_argument(std::string(what) + ": row " +
                                  std::to_string(r) + " sums to " +
                                  std::to_string(sum) + ", not 1");
    }
    // Rows already normalized at machine level are left untouched: the
    // division is not idempotent in floating point and would break the
    // bit-exact round-trip of serialized weights.
    if (std::abs(sum - 1.0) > 16.0 * std::numeric_limits<double>::epsilon()) {
      w.row(r) /= sum;
    }
  }
}

}  // namespace detail

RelaxedControl::RelaxedControl(Grid grid, DictionaryPtr dict,
                               Eigen::MatrixXd weights)
    : grid_(grid), dict_(std::move(dict)), weights_(std::move(weights)) {
  if (!dict_) throw std::invalid_argument("RelaxedControl: null dictionary");
  if (!grid_.same_spatial(dict_->grid())) {
    throw std::invalid_argument("RelaxedControl: grid/dictionary spatial mismatch");
  }
  if (weights_.cols() != dict_->size()) {
    throw std::invalid_argument("RelaxedControl: weight columns != atom count");
  }
  if (weights_.rows() < 1) {
    throw std::invalid_argument("RelaxedControl: needs >= 1 row");
  }
  detail::renormalize_rows(weights_, "RelaxedControl");
}

RelaxedControl RelaxedControl::uniform(const Grid& grid, DictionaryPtr dict) {
  const int L = dict->size();
  Eigen::MatrixXd w =
      Eigen::MatrixXd::Constant(grid.nt(), L, 1.0 / static_cast<double>(L));
  return RelaxedControl(grid, std::move(dict), std::move(w));
}

RelaxedControl RelaxedControl::dirac(const Grid& grid, DictionaryPtr dict,
                                     int atom) {
  std::vector<int> atoms(grid.nt(), atom);
  return dirac_path(grid, std::move(dict), atoms);
}

RelaxedControl RelaxedControl::dirac_path(const Grid& grid, DictionaryPtr dict,
                                          const std::vector<int>& atoms) {
  if (static_cast<int>(atoms.size()) != grid.nt()) {
    throw std::invalid_argument("RelaxedControl: one atom per time step expected");
  }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(grid.nt(), dict->size());
  for (int k = 0; k < grid.nt(); ++k) {
    if (atoms[k] < 0 || atoms[k] >= dict->size()) {
      throw std::invalid_argument("RelaxedControl: atom index out of range");
    }
    w(k, atoms[k]) = 1.0;
  }
  return RelaxedControl(grid, std::move(dict), std::move(w));
}

RelaxedControl RelaxedControl::static_row(DictionaryPtr dict,
                                          const Eigen::VectorXd& row) {
  const Grid g = dict->grid().with_time_steps(1);
  Eigen::MatrixXd w(1, row.size());
  w.row(0) = row.transpose();
  return RelaxedControl(g, std::move(dict), std::move(w));
}

RelaxedControl RelaxedControl::blend(const RelaxedControl& other,
                                     double alpha) const {
  if (dict_ != other.dict_ || weights_.rows() != other.weights_.rows()) {
    throw std::invalid_argument("RelaxedControl::blend: incompatible controls");
  }
  Eigen::MatrixXd w = (1.0 - alpha) * weights_ + alpha * other.weights_;
  return RelaxedControl(grid_, dict_, std::move(w));
}

SpaceTimeYoungMeasure::SpaceTimeYoungMeasure(
    Grid grid, std::vector<std::vector<double>> support,
    std::vector<Eigen::MatrixXd> slice_weights)
    : grid_(grid), support_(std::move(support)), weights_(std::move(slice_weights)) {
  if (support_.empty()) {
    throw std::invalid_argument("SpaceTimeYoungMeasure: empty support");
  }
  const std::size_t m = support_[0].size();
  for (const auto& z : support_) {
    if (z.size() != m) {
      throw std::invalid_argument("SpaceTimeYoungMeasure: support dimension mismatch");
    }
  }
  if (weights_.empty()) {
    throw std::invalid_argument("SpaceTimeYoungMeasure: needs >= 1 slice");
  }
  for (auto& w : weights_) {
    if (w.rows() != grid_.interior_nodes() ||
        w.cols() != static_cast<Eigen::Index>(support_.size())) {
      throw std::invalid_argument("SpaceTimeYoungMeasure: slice shape mismatch");
    }
    detail::renormalize_rows(w, "SpaceTimeYoungMeasure");
  }
}

SpaceTimeYoungMeasure SpaceTimeYoungMeasure::uniform(
    const Grid& grid, std::vector<std::vector<double>> support, int slices) {
  const int Z = static_cast<int>(support.size());
  std::vector<Eigen::MatrixXd> w(
      slices, Eigen::MatrixXd::Constant(grid.interior_nodes(), Z,
                                        1.0 / static_cast<double>(Z)));
  return SpaceTimeYoungMeasure(grid, std::move(support), std::move(w));
}

SpaceTimeYoungMeasure SpaceTimeYoungMeasure::dirac_field(const Grid& grid,
                                                         const ControlField& u,
                                                         int slices) {
  // Collect the distinct nodal values, in order of first appearance.
  std::vector<std::vector<double>> support;
  std::vector<int> node_support(grid.interior_nodes());
  for (int i = 0; i < grid.interior_nodes(); ++i) {
    const auto z = u.value(i);
    int found = -1;
    for (std::size_t s = 0; s < support.size(); ++s) {
      bool eq = true;
      for (int c = 0; c < u.m(); ++c) {
        if (support[s][c] != z[c]) eq = false;
      }
      if (eq) {
        found = static_cast<int>(s);
        break;
      }
    }
    if (found < 0) {
      support.emplace_back(z.begin(), z.end());
      found = static_cast<int>(support.size()) - 1;
    }
    node_support[i] = found;
  }
  Eigen::MatrixXd w =
      Eigen::MatrixXd::Zero(grid.interior_nodes(), support.size());
  for (int i = 0; i < grid.interior_nodes(); ++i) w(i, node_support[i]) = 1.0;
  std::vector<Eigen::MatrixXd> ws(slices, w);
  return SpaceTimeYoungMeasure(grid, std::move(support), std::move(ws));
}

SpaceTimeYoungMeasure SpaceTimeYoungMeasure::with_slice(
    int k, Eigen::MatrixXd w) const {
  auto ws = weights_;
  ws[k] = std::move(w);
  return SpaceTimeYoungMeasure(grid_, support_, std::move(ws));
}

SpaceTimeYoungMeasure SpaceTimeYoungMeasure::blend(
    const SpaceTimeYoungMeasure& other, double alpha) const {
  if (support_ != other.support_ || slices() != other.slices()) {
    throw std::invalid_argument("SpaceTimeYoungMeasure::blend: incompatible measures");
  }
  auto ws = weights_;
  for (int k = 0; k < slices(); ++k) {
    ws[k] = (1.0 - alpha) * weights_[k] + alpha * other.weights_[k];
  }
  return SpaceTimeYoungMeasure(grid_, support_, std::move(ws));
}

bool young_slices_equal(const SpaceTimeYoungMeasure& a, int slice_a,
                        const SpaceTimeYoungMeasure& b, int slice_b,
                        double mass_tol) {
  if (!a.grid().same_spatial(b.grid())) return false;
  const auto& wa = a.slice(slice_a);
  const auto& wb = b.slice(slice_b);
  for (int i = 0; i < a.grid().interior_nodes(); ++i) {
    // Aggregate mass per distinct support value at this node.
    std::map<std::vector<double>, double> ma, mb;
    for (int s = 0; s < a.support_size(); ++s) {
      if (wa(i, s) != 0.0) ma[a.support()[s]] += wa(i, s);
    }
    for (int s = 0; s < b.support_size(); ++s) {
      if (wb(i, s) != 0.0) mb[b.support()[s]] += wb(i, s);
    }
    if (ma.size() != mb.size()) return false;
    for (const auto& [z, mass] : ma) {
      auto it = mb.find(z);
      if (it == mb.end()) return false;
      if (std::abs(it->second - mass) > mass_tol) return false;
    }
  }
  return true;
}

}  // namespace relaxctrl
