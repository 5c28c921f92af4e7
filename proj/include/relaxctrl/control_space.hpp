#ifndef RELAXCTRL_CONTROL_SPACE_HPP
#define RELAXCTRL_CONTROL_SPACE_HPP

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "relaxctrl/grid.hpp"

namespace relaxctrl {

/// The control constraint set B, a bounded closed subset of R^m. Two
/// realizations are supported: an axis-aligned box and a finite point set.
class ControlSet {
 public:
  enum class Kind { Box, FinitePoints };

  static ControlSet box(std::vector<double> lo, std::vector<double> hi);
  static ControlSet finite_points(std::vector<std::vector<double>> points);

  Kind kind() const { return kind_; }
  int m() const { return m_; }

  const std::vector<double>& lo() const { return lo_; }
  const std::vector<double>& hi() const { return hi_; }
  const std::vector<std::vector<double>>& points() const { return points_; }

  /// Nearest point of B in the Euclidean norm. Box: componentwise clamp.
  /// FinitePoints: exhaustive nearest, ties resolved to the lowest index.
  std::vector<double> project(std::span<const double> z) const;

  /// Exact membership (interval check for boxes, value match for points).
  bool contains(std::span<const double> z) const;

  /// Vertices of a box (2^m corners); the points themselves for
  /// FinitePoints.
  std::vector<std::vector<double>> extreme_points() const;

  /// Deterministic sample of B used for finiteness probes of integrands:
  /// lattice with `per_axis` levels per component for boxes, the point list
  /// for finite sets.
  std::vector<std::vector<double>> probe_points(int per_axis = 3) const;

 private:
  ControlSet() = default;
  Kind kind_ = Kind::Box;
  int m_ = 1;
  std::vector<double> lo_, hi_;                 // Box
  std::vector<std::vector<double>> points_;     // FinitePoints
};

/// A grid-sampled control field: one value of B per interior spatial node.
/// Node ordering is x-fastest; values are stored node-major with the control
/// component innermost.
class ControlField {
 public:
  ControlField(Grid grid, int m, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  int m() const { return m_; }
  std::span<const double> value(int node) const {
    return {values_.data() + static_cast<std::size_t>(node) * m_,
            static_cast<std::size_t>(m_)};
  }
  const std::vector<double>& values() const { return values_; }

  bool feasible(const ControlSet& B) const;

  static ControlField constant(const Grid& grid,
                               const std::vector<double>& z);
  /// Two-valued field: value `on` where mask holds, `off` elsewhere.
  static ControlField two_valued(const Grid& grid, const NodeMask& mask,
                                 const std::vector<double>& on,
                                 const std::vector<double>& off);

  bool operator==(const ControlField& other) const;

 private:
  Grid grid_;
  int m_;
  std::vector<double> values_;
};

/// Ordered finite family of control fields; the atoms carrying the discrete
/// relaxation. Atom indices are identities and never reordered.
class ControlDictionary {
 public:
  ControlDictionary(Grid grid, ControlSet B, std::vector<ControlField> atoms);

  const Grid& grid() const { return grid_; }
  const ControlSet& control_set() const { return B_; }
  int size() const { return static_cast<int>(atoms_.size()); }
  const ControlField& atom(int l) const { return atoms_[l]; }
  const std::vector<ControlField>& atoms() const { return atoms_; }

 private:
  Grid grid_;
  ControlSet B_;
  std::vector<ControlField> atoms_;
};

using DictionaryPtr = std::shared_ptr<const ControlDictionary>;

enum class DictionaryStrategy { Constants, Bang, Custom };

/// Builds the atom family. Deterministic given (strategy, count, seed).
///  - Constants: spatially constant fields at deterministically sampled
///    points of B (boxes: tensor lattice including the vertices; finite
///    sets: the points themselves, in order).
///  - Bang: seeded two-valued spatial patterns between extreme points of B.
///  - Custom: atoms loaded from a JSON file (see load_custom_atoms);
///    ingested values are projected onto B.
ControlDictionary build_dictionary(const Grid& grid, const ControlSet& B,
                                   DictionaryStrategy strategy, int count,
                                   std::uint64_t seed = 0,
                                   const std::string& custom_path = "");

/// Parses a custom atoms file: JSON array of atoms, each an array of nodes,
/// each a array of m components (atom-major, node-minor,
/// component-innermost; nodes ordered x-fastest).
std::vector<ControlField> load_custom_atoms(const Grid& grid,
                                            const ControlSet& B,
                                            const std::string& path);

/// Deterministic sample of `count` points of B (the Constants lattice);
/// also used as the support of coarse space-time measures.
std::vector<std::vector<double>> sample_control_points(const ControlSet& B,
                                                       int count);

}  // namespace relaxctrl

#endif
