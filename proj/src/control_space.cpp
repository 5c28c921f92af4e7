#include "relaxctrl/control_space.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "relaxctrl/rng.hpp"

namespace relaxctrl {

ControlSet ControlSet::box(std::vector<double> lo, std::vector<double> hi) {
  if (lo.empty() || lo.size() != hi.size()) {
    throw std::invalid_argument("ControlSet: box bounds must be nonempty and equal-sized");
  }
  for (std::size_t c = 0; c < lo.size(); ++c) {
    if (!(lo[c] <= hi[c]) || !std::isfinite(lo[c]) || !std::isfinite(hi[c])) {
      throw std::invalid_argument("ControlSet: box requires finite lo <= hi");
    }
  }
  ControlSet B;
  B.kind_ = Kind::Box;
  B.m_ = static_cast<int>(lo.size());
  B.lo_ = std::move(lo);
  B.hi_ = std::move(hi);
  return B;
}

ControlSet ControlSet::finite_points(std::vector<std::vector<double>> points) {
  if (points.empty()) {
    throw std::invalid_argument("ControlSet: finite point set must be nonempty");
  }
  const std::size_t m = points[0].size();
  if (m == 0) throw std::invalid_argument("ControlSet: points must have m >= 1");
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (points[i].size() != m) {
      throw std::invalid_argument("ControlSet: all points must have the same dimension");
    }
    for (double v : points[i]) {
      if (!std::isfinite(v)) throw std::invalid_argument("ControlSet: points must be finite");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (points[j] == points[i]) {
        throw std::invalid_argument("ControlSet: duplicate point in finite set");
      }
    }
  }
  ControlSet B;
  B.kind_ = Kind::FinitePoints;
  B.m_ = static_cast<int>(m);
  B.points_ = std::move(points);
  return B;
}

std::vector<double> ControlSet::project(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != m_) {
    throw std::invalid_argument("ControlSet::project: wrong point dimension");
  }
  if (kind_ == Kind::Box) {
    std::vector<double> out(z.begin(), z.end());
    for (int c = 0; c < m_; ++c) out[c] = std::clamp(out[c], lo_[c], hi_[c]);
    return out;
  }
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < points_.size(); ++i) {
    double d2 = 0.0;
    for (int c = 0; c < m_; ++c) {
      const double d = z[c] - points_[i][c];
      d2 += d * d;
    }
    if (d2 < best_d2) {  // strict: ties keep the lowest index
      best_d2 = d2;
      best = static_cast<int>(i);
    }
  }
  return points_[best];
}

bool ControlSet::contains(std::span<const double> z) const {
  if (static_cast<int>(z.size()) != m_) return false;
  if (kind_ == Kind::Box) {
    for (int c = 0; c < m_; ++c) {
      if (!(z[c] >= lo_[c] && z[c] <= hi_[c])) return false;
    }
    return true;
  }
  for (const auto& p : points_) {
    bool eq = true;
    for (int c = 0; c < m_; ++c) {
      if (z[c] != p[c]) eq = false;
    }
    if (eq) return true;
  }
  return false;
}

std::vector<std::vector<double>> ControlSet::extreme_points() const {
  if (kind_ == Kind::FinitePoints) return points_;
  if (m_ > 16) throw std::invalid_argument("ControlSet: too many box corners");
  std::vector<std::vector<double>> corners;
  const int total = 1 << m_;
  corners.reserve(total);
  for (int mask = 0; mask < total; ++mask) {
    std::vector<double> p(m_);
    for (int c = 0; c < m_; ++c) p[c] = (mask >> c) & 1 ? hi_[c] : lo_[c];
    corners.push_back(std::move(p));
  }
  return corners;
}

std::vector<std::vector<double>> ControlSet::probe_points(int per_axis) const {
  if (kind_ == Kind::FinitePoints) return points_;
  std::vector<std::vector<double>> pts;
  std::vector<int> levels(m_, 0);
  const int q = std::max(per_axis, 1);
  while (true) {
    std::vector<double> p(m_);
    for (int c = 0; c < m_; ++c) {
      p[c] = q == 1 ? 0.5 * (lo_[c] + hi_[c])
                    : lo_[c] + (hi_[c] - lo_[c]) * levels[c] / (q - 1);
    }
    pts.push_back(std::move(p));
    int c = 0;
    while (c < m_ && ++levels[c] == q) levels[c++] = 0;
    if (c == m_) break;
  }
  return pts;
}

ControlField::ControlField(Grid grid, int m, std::vector<double> values)
    : grid_(grid), m_(m), values_(std::move(values)) {
  if (m_ < 1) throw std::invalid_argument("ControlField: m must be >= 1");
  if (values_.size() !=
      static_cast<std::size_t>(grid_.interior_nodes()) * m_) {
    throw std::invalid_argument("ControlField: value array size mismatch");
  }
}

bool ControlField::feasible(const ControlSet& B) const {
  if (B.m() != m_) return false;
  for (int i = 0; i < grid_.interior_nodes(); ++i) {
    if (!B.contains(value(i))) return false;
  }
  return true;
}

ControlField ControlField::constant(const Grid& grid,
                                    const std::vector<double>& z) {
  const int m = static_cast<int>(z.size());
  std::vector<double> values(static_cast<std::size_t>(grid.interior_nodes()) * m);
  for (int i = 0; i < grid.interior_nodes(); ++i) {
    for (int c = 0; c < m; ++c) values[static_cast<std::size_t>(i) * m + c] = z[c];
  }
  return ControlField(grid, m, std::move(values));
}

ControlField ControlField::two_valued(const Grid& grid, const NodeMask& mask,
                                      const std::vector<double>& on,
                                      const std::vector<double>& off) {
  if (on.size() != off.size()) {
    throw std::invalid_argument("ControlField::two_valued: dimension mismatch");
  }
  const int m = static_cast<int>(on.size());
  std::vector<double> values(static_cast<std::size_t>(grid.interior_nodes()) * m);
  for (int i = 0; i < grid.interior_nodes(); ++i) {
    const auto& z = mask.contains(i) ? on : off;
    for (int c = 0; c < m; ++c) values[static_cast<std::size_t>(i) * m + c] = z[c];
  }
  return ControlField(grid, m, std::move(values));
}

bool ControlField::operator==(const ControlField& other) const {
  return m_ == other.m_ && grid_.same_spatial(other.grid_) &&
         values_ == other.values_;
}

ControlDictionary::ControlDictionary(Grid grid, ControlSet B,
                                     std::vector<ControlField> atoms)
    : grid_(grid), B_(std::move(B)), atoms_(std::move(atoms)) {
  if (atoms_.empty()) {
    throw std::invalid_argument("ControlDictionary: needs at least one atom");
  }
  for (const auto& a : atoms_) {
    if (!a.grid().same_spatial(grid_)) {
      throw std::invalid_argument("ControlDictionary: atom grid mismatch");
    }
    if (!a.feasible(B_)) {
      throw std::invalid_argument("ControlDictionary: infeasible atom");
    }
  }
}

std::vector<std::vector<double>> sample_control_points(const ControlSet& B,
                                                       int count) {
  if (count < 1) throw std::invalid_argument("sample_control_points: count >= 1");
  if (B.kind() == ControlSet::Kind::FinitePoints) {
    if (count > static_cast<int>(B.points().size())) {
      throw std::invalid_argument(
          "sample_control_points: count exceeds available distinct points");
    }
    return {B.points().begin(), B.points().begin() + count};
  }
  // Tensor lattice with q levels per component, q chosen as the smallest
  // level count whose lattice holds `count` points; vertices are the first
  // and last level. Lexicographic order, component 0 fastest.
  const int m = B.m();
  int q = 1;
  auto lattice_size = [&](int levels) {
    double s = 1.0;
    for (int c = 0; c < m; ++c) s *= levels;
    return s;
  };
  while (lattice_size(q) < count) ++q;
  std::vector<std::vector<double>> pts;
  pts.reserve(count);
  std::vector<int> idx(m, 0);
  while (static_cast<int>(pts.size()) < count) {
    std::vector<double> p(m);
    for (int c = 0; c < m; ++c) {
      p[c] = q == 1 ? 0.5 * (B.lo()[c] + B.hi()[c])
                    : B.lo()[c] + (B.hi()[c] - B.lo()[c]) * idx[c] / (q - 1);
    }
    pts.push_back(std::move(p));
    int c = 0;
    while (c < m && ++idx[c] == q) idx[c++] = 0;
  }
  return pts;
}

std::vector<ControlField> load_custom_atoms(const Grid& grid,
                                            const ControlSet& B,
                                            const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("custom atoms: cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("custom atoms: invalid JSON in " + path + ": " +
                             e.what());
  }
  if (!doc.is_array() || doc.empty()) {
    throw std::runtime_error("custom atoms: expected a nonempty array of atoms");
  }
  const int nodes = grid.interior_nodes();
  std::vector<ControlField> atoms;
  for (const auto& atom : doc) {
    if (!atom.is_array() || static_cast<int>(atom.size()) != nodes) {
      throw std::runtime_error(
          "custom atoms: each atom must list one value per interior node (" +
          std::to_string(nodes) + " nodes)");
    }
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(nodes) * B.m());
    for (const auto& node : atom) {
      if (!node.is_array() || static_cast<int>(node.size()) != B.m()) {
        throw std::runtime_error(
            "custom atoms: each node must hold m components");
      }
      std::vector<double> z;
      for (const auto& comp : node) {
        if (!comp.is_number()) {
          throw std::runtime_error("custom atoms: components must be numbers");
        }
        z.push_back(comp.get<double>());
      }
      const auto repaired = B.project(z);
      values.insert(values.end(), repaired.begin(), repaired.end());
    }
    atoms.emplace_back(grid, B.m(), std::move(values));
  }
  return atoms;
}

ControlDictionary build_dictionary(const Grid& grid, const ControlSet& B,
                                   DictionaryStrategy strategy, int count,
                                   std::uint64_t seed,
                                   const std::string& custom_path) {
  if (count < 1 && strategy != DictionaryStrategy::Custom) {
    throw std::invalid_argument("build_dictionary: count must be >= 1");
  }
  std::vector<ControlField> atoms;
  switch (strategy) {
    case DictionaryStrategy::Constants: {
      for (const auto& p : sample_control_points(B, count)) {
        atoms.push_back(ControlField::constant(grid, p));
      }
      break;
    }
    case DictionaryStrategy::Bang: {
      const auto ext = B.extreme_points();
      if (ext.size() < 2) {
        throw std::invalid_argument("build_dictionary: bang needs >= 2 extreme points");
      }
      for (int l = 0; l < count; ++l) {
        auto rng = SplitMix64::split(seed, static_cast<std::uint64_t>(l));
        const int a = static_cast<int>(rng.next_below(ext.size()));
        int b = static_cast<int>(rng.next_below(ext.size() - 1));
        if (b >= a) ++b;
        std::vector<bool> mask(grid.interior_nodes());
        for (int i = 0; i < grid.interior_nodes(); ++i) mask[i] = rng.next_bool();
        atoms.push_back(ControlField::two_valued(grid, NodeMask(std::move(mask)),
                                                 ext[a], ext[b]));
      }
      break;
    }
    case DictionaryStrategy::Custom: {
      atoms = load_custom_atoms(grid, B, custom_path);
      break;
    }
  }
  return ControlDictionary(grid, B, std::move(atoms));
}

}  // namespace relaxctrl
