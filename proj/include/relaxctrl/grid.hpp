#ifndef RELAXCTRL_GRID_HPP
#define RELAXCTRL_GRID_HPP

#include <array>
#include <cstddef>
#include <vector>

namespace relaxctrl {

/// Uniform tensor grid on a product of intervals with homogeneous-Dirichlet
/// node layout: per axis a, cells of width dx(a) = extent(a)/nx(a) and
/// interior nodes at coordinates i*dx(a), i = 1..nx(a)-1. Time is split into
/// nt uniform steps of dt = T/nt.
///
/// Interior nodes are enumerated x-fastest: idx = i0 + (nx0-1)*i1 (0-based
/// offsets along each axis).
class Grid {
 public:
  /// Trivial 1D placeholder (nx=2, nt=1); real grids come from make().
  Grid() = default;

  static Grid make(int dim, const std::vector<int>& nx,
                   const std::vector<double>& extent, int nt, double T);

  int dim() const { return dim_; }
  int nx(int axis) const { return nx_[axis]; }
  double extent(int axis) const { return extent_[axis]; }
  int nt() const { return nt_; }
  double T() const { return T_; }

  double dx(int axis) const { return extent_[axis] / nx_[axis]; }
  double dt() const { return T_ / nt_; }
  double time(int k) const { return k * dt(); }

  int interior_per_axis(int axis) const { return nx_[axis] - 1; }
  int interior_nodes() const;

  /// Coordinates of interior node idx (x-fastest ordering).
  std::array<double, 2> node_coord(int idx) const;

  /// Quadrature weight of interior node idx. Nodal rectangle rule with the
  /// two boundary half-cells of every axis lumped into the adjacent interior
  /// node, so the weights sum exactly to the domain measure.
  double quad_weight(int idx) const;

  double domain_measure() const;

  /// Spatial-only equality; nt/T may differ (used to share dictionaries
  /// between time refinements).
  bool same_spatial(const Grid& other) const;
  bool operator==(const Grid& other) const;

  Grid with_time_steps(int new_nt) const;
  Grid refined(int space_factor_axis0, int time_factor) const;

 private:
  int dim_ = 1;
  std::array<int, 2> nx_{2, 1};
  std::array<double, 2> extent_{1.0, 1.0};
  int nt_ = 1;
  double T_ = 1.0;
};

/// Boolean mask over interior nodes (a union of node cells), used for
/// piecewise control constructions and subdomain indicators.
class NodeMask {
 public:
  NodeMask() = default;
  explicit NodeMask(std::vector<bool> inside) : inside_(std::move(inside)) {}

  /// Nodes whose coordinates lie in the half-open box [lo, hi) per axis.
  static NodeMask from_box(const Grid& grid, const std::vector<double>& lo,
                           const std::vector<double>& hi);

  bool contains(int idx) const { return inside_[idx]; }
  std::size_t size() const { return inside_.size(); }

 private:
  std::vector<bool> inside_;
};

}  // namespace relaxctrl

#endif
