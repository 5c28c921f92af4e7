#include "relaxctrl/grid.hpp"

#include <stdexcept>
#include <string>

namespace relaxctrl {

Grid Grid::make(int dim, const std::vector<int>& nx,
                const std::vector<double>& extent, int nt, double T) {
  if (dim != 1 && dim != 2) {
    throw std::invalid_argument("Grid: dim must be 1 or 2, got " +
                                std::to_string(dim));
  }
  if (static_cast<int>(nx.size()) != dim ||
      static_cast<int>(extent.size()) != dim) {
    throw std::invalid_argument("Grid: nx/extent size must match dim");
  }
  if (nt < 1) throw std::invalid_argument("Grid: nt must be >= 1");
  if (!(T > 0.0)) throw std::invalid_argument("Grid: T must be > 0");
  Grid g;
  g.dim_ = dim;
  g.nt_ = nt;
  g.T_ = T;
  for (int a = 0; a < dim; ++a) {
    if (nx[a] < 2) {
      throw std::invalid_argument("Grid: nx must be >= 2 per axis, got " +
                                  std::to_string(nx[a]));
    }
    if (!(extent[a] > 0.0)) {
      throw std::invalid_argument("Grid: extent must be > 0 per axis");
    }
    g.nx_[a] = nx[a];
    g.extent_[a] = extent[a];
  }
  return g;
}

int Grid::interior_nodes() const {
  int n = nx_[0] - 1;
  if (dim_ == 2) n *= nx_[1] - 1;
  return n;
}

std::array<double, 2> Grid::node_coord(int idx) const {
  std::array<double, 2> x{0.0, 0.0};
  const int n0 = nx_[0] - 1;
  const int i0 = idx % n0;
  x[0] = (i0 + 1) * dx(0);
  if (dim_ == 2) {
    const int i1 = idx / n0;
    x[1] = (i1 + 1) * dx(1);
  }
  return x;
}

namespace {
// Per-axis lumped weight: interior cells get dx, the two cells adjacent to
// the boundary absorb the boundary half-cells.
double axis_weight(int offset, int interior, double dx) {
  if (interior == 1) return 2.0 * dx;
  double w = dx;
  if (offset == 0 || offset == interior - 1) w = 1.5 * dx;
  return w;
}
}  // namespace

double Grid::quad_weight(int idx) const {
  const int n0 = nx_[0] - 1;
  const int i0 = idx % n0;
  double w = axis_weight(i0, n0, dx(0));
  if (dim_ == 2) {
    const int n1 = nx_[1] - 1;
    const int i1 = idx / n0;
    w *= axis_weight(i1, n1, dx(1));
  }
  return w;
}

double Grid::domain_measure() const {
  double m = extent_[0];
  if (dim_ == 2) m *= extent_[1];
  return m;
}

bool Grid::same_spatial(const Grid& other) const {
  if (dim_ != other.dim_) return false;
  for (int a = 0; a < dim_; ++a) {
    if (nx_[a] != other.nx_[a] || extent_[a] != other.extent_[a]) return false;
  }
  return true;
}

bool Grid::operator==(const Grid& other) const {
  return same_spatial(other) && nt_ == other.nt_ && T_ == other.T_;
}

Grid Grid::with_time_steps(int new_nt) const {
  std::vector<int> nx(nx_.begin(), nx_.begin() + dim_);
  std::vector<double> ext(extent_.begin(), extent_.begin() + dim_);
  return make(dim_, nx, ext, new_nt, T_);
}

Grid Grid::refined(int space_factor_axis0, int time_factor) const {
  std::vector<int> nx(nx_.begin(), nx_.begin() + dim_);
  std::vector<double> ext(extent_.begin(), extent_.begin() + dim_);
  nx[0] *= space_factor_axis0;
  return make(dim_, nx, ext, nt_ * time_factor, T_);
}

NodeMask NodeMask::from_box(const Grid& grid, const std::vector<double>& lo,
                            const std::vector<double>& hi) {
  if (static_cast<int>(lo.size()) != grid.dim() ||
      static_cast<int>(hi.size()) != grid.dim()) {
    throw std::invalid_argument("NodeMask: lo/hi size must match grid dim");
  }
  std::vector<bool> inside(grid.interior_nodes(), false);
  for (int idx = 0; idx < grid.interior_nodes(); ++idx) {
    const auto x = grid.node_coord(idx);
    bool in = true;
    for (int a = 0; a < grid.dim(); ++a) {
      if (!(x[a] >= lo[a] && x[a] < hi[a])) in = false;
    }
    inside[idx] = in;
  }
  return NodeMask(std::move(inside));
}

}  // namespace relaxctrl
