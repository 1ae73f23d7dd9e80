#ifndef LMCE_GRID_HPP
#define LMCE_GRID_HPP

#include <Eigen/Core>
#include <cmath>
#include <memory>

#include "lmce/errors.hpp"

namespace lmce {

enum class NodeKind : unsigned char { interior = 0, boundary = 1, exterior = 2 };

/// Uniform tensor grid over an axis-aligned rectangle, with a node mask that
/// carves out the active domain. Boundary nodes form a closed curve separating
/// interior nodes from exterior ones; Dirichlet data lives on boundary nodes.
struct Grid {
  int nx = 0, ny = 0;
  double hx = 0.0, hy = 0.0;
  double ox = 0.0, oy = 0.0;
  Eigen::Array<unsigned char, Eigen::Dynamic, Eigen::Dynamic> mask;

  double x1(int i) const { return ox + i * hx; }
  double x2(int j) const { return oy + j * hy; }
  double hmax() const { return hx > hy ? hx : hy; }

  NodeKind kind(int i, int j) const { return static_cast<NodeKind>(mask(i, j)); }
  bool is_interior(int i, int j) const { return mask(i, j) == 0; }
  bool is_boundary(int i, int j) const { return mask(i, j) == 1; }
  bool is_exterior(int i, int j) const { return mask(i, j) == 2; }
  bool is_active(int i, int j) const { return mask(i, j) != 2; }

  bool rectangular() const { return rectangular_; }

  /// Distance from node (i,j) to the domain boundary curve. Exact for the
  /// rectangle; for the disk it is radius - |x - c|.
  double boundary_distance(int i, int j) const {
    if (rectangular_) {
      const double dx = std::min(x1(i) - ox, ox + (nx - 1) * hx - x1(i));
      const double dy = std::min(x2(j) - oy, oy + (ny - 1) * hy - x2(j));
      return std::min(dx, dy);
    }
    const double r = std::hypot(x1(i) - cx_, x2(j) - cy_);
    return radius_ - r;
  }

  bool same_layout(const Grid& o) const {
    return nx == o.nx && ny == o.ny && hx == o.hx && hy == o.hy && ox == o.ox &&
           oy == o.oy;
  }

  bool rectangular_ = true;
  double cx_ = 0.0, cy_ = 0.0, radius_ = 0.0; // disk parameters when not rectangular
};

using GridPtr = std::shared_ptr<const Grid>;

inline GridPtr make_rectangle(int nx, int ny, double hx, double hy, double ox = 0.0,
                              double oy = 0.0) {
  if (nx < 9 || ny < 9)
    throw ValidationError("grid.too_small", "grid needs nx, ny >= 9");
  if (!(hx > 0.0) || !(hy > 0.0))
    throw ValidationError("grid.bad_spacing", "grid needs hx, hy > 0");
  auto g = std::make_shared<Grid>();
  g->nx = nx;
  g->ny = ny;
  g->hx = hx;
  g->hy = hy;
  g->ox = ox;
  g->oy = oy;
  g->mask.setZero(nx, ny);
  for (int i = 0; i < nx; ++i) {
    g->mask(i, 0) = 1;
    g->mask(i, ny - 1) = 1;
  }
  for (int j = 0; j < ny; ++j) {
    g->mask(0, j) = 1;
    g->mask(nx - 1, j) = 1;
  }
  return g;
}

/// Unit square [0,1]^2 with n nodes per side.
inline GridPtr unit_square(int n) {
  return make_rectangle(n, n, 1.0 / (n - 1), 1.0 / (n - 1));
}

/// Disk of given radius centered in [0,1]^2, on an n-by-n bounding grid.
/// A node is inside when |x - c| <= radius; inside nodes with all four
/// neighbors inside are interior, the remaining inside nodes are boundary.
inline GridPtr disk(int n, double radius = 0.45) {
  if (n < 9) throw ValidationError("grid.too_small", "grid needs n >= 9");
  if (!(radius > 0.0) || radius > 0.5)
    throw ValidationError("grid.bad_radius", "disk radius must lie in (0, 0.5]");
  auto g = std::make_shared<Grid>();
  g->nx = g->ny = n;
  g->hx = g->hy = 1.0 / (n - 1);
  g->ox = g->oy = 0.0;
  g->rectangular_ = false;
  g->cx_ = g->cy_ = 0.5;
  g->radius_ = radius;
  auto inside = [&](int i, int j) {
    if (i < 0 || j < 0 || i >= n || j >= n) return false;
    return std::hypot(g->x1(i) - 0.5, g->x2(j) - 0.5) <= radius;
  };
  g->mask.setConstant(n, n, 2);
  int interior_count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (!inside(i, j)) continue;
      const bool all_in = inside(i - 1, j) && inside(i + 1, j) && inside(i, j - 1) &&
                          inside(i, j + 1);
      g->mask(i, j) = all_in ? 0 : 1;
      if (all_in) ++interior_count;
    }
  if (interior_count < 9)
    throw ValidationError("grid.too_small", "disk mask has too few interior nodes");
  return g;
}

} // namespace lmce

#endif
