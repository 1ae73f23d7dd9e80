#ifndef LMCE_CALCULUS_HPP
#define LMCE_CALCULUS_HPP

#include "lmce/fields.hpp"

namespace lmce {

// Second-order difference stencils on the bounding rectangle: central in the
// interior, one-sided three/four point formulas on the outermost lines. Masked
// (disk) grids reuse the same stencils; consumers restrict to active nodes.

template <typename Scalar>
Plane<Scalar> dx(const Plane<Scalar>& v, double hx) {
  const int nx = int(v.rows()), ny = int(v.cols());
  Plane<Scalar> out(nx, ny);
  out.block(1, 0, nx - 2, ny) =
      (v.block(2, 0, nx - 2, ny) - v.block(0, 0, nx - 2, ny)) / (2 * hx);
  out.row(0) = (-3 * v.row(0) + 4 * v.row(1) - v.row(2)) / (2 * hx);
  out.row(nx - 1) = (3 * v.row(nx - 1) - 4 * v.row(nx - 2) + v.row(nx - 3)) / (2 * hx);
  return out;
}

template <typename Scalar>
Plane<Scalar> dy(const Plane<Scalar>& v, double hy) {
  const int nx = int(v.rows()), ny = int(v.cols());
  Plane<Scalar> out(nx, ny);
  out.block(0, 1, nx, ny - 2) =
      (v.block(0, 2, nx, ny - 2) - v.block(0, 0, nx, ny - 2)) / (2 * hy);
  out.col(0) = (-3 * v.col(0) + 4 * v.col(1) - v.col(2)) / (2 * hy);
  out.col(ny - 1) = (3 * v.col(ny - 1) - 4 * v.col(ny - 2) + v.col(ny - 3)) / (2 * hy);
  return out;
}

template <typename Scalar>
Plane<Scalar> dxx(const Plane<Scalar>& v, double hx) {
  const int nx = int(v.rows()), ny = int(v.cols());
  const double h2 = hx * hx;
  Plane<Scalar> out(nx, ny);
  out.block(1, 0, nx - 2, ny) = (v.block(2, 0, nx - 2, ny) - 2 * v.block(1, 0, nx - 2, ny) +
                                 v.block(0, 0, nx - 2, ny)) /
                                h2;
  out.row(0) = (2 * v.row(0) - 5 * v.row(1) + 4 * v.row(2) - v.row(3)) / h2;
  out.row(nx - 1) =
      (2 * v.row(nx - 1) - 5 * v.row(nx - 2) + 4 * v.row(nx - 3) - v.row(nx - 4)) / h2;
  return out;
}

template <typename Scalar>
Plane<Scalar> dyy(const Plane<Scalar>& v, double hy) {
  const int nx = int(v.rows()), ny = int(v.cols());
  const double h2 = hy * hy;
  Plane<Scalar> out(nx, ny);
  out.block(0, 1, nx, ny - 2) = (v.block(0, 2, nx, ny - 2) - 2 * v.block(0, 1, nx, ny - 2) +
                                 v.block(0, 0, nx, ny - 2)) /
                                h2;
  out.col(0) = (2 * v.col(0) - 5 * v.col(1) + 4 * v.col(2) - v.col(3)) / h2;
  out.col(ny - 1) =
      (2 * v.col(ny - 1) - 5 * v.col(ny - 2) + 4 * v.col(ny - 3) - v.col(ny - 4)) / h2;
  return out;
}

// Mixed derivative as Dx applied to Dy; reduces to the standard four-corner
// cross stencil at interior nodes and stays second order on the edges.
template <typename Scalar>
Plane<Scalar> dxy(const Plane<Scalar>& v, double hx, double hy) {
  return dx(dy(v, hy), hx);
}

template <typename Scalar>
VectorFieldT<Scalar> grad(const ScalarFieldT<Scalar>& f) {
  VectorFieldT<Scalar> out(f.grid);
  out.c1 = dx(f.values, f.grid->hx);
  out.c2 = dy(f.values, f.grid->hy);
  return out;
}

template <typename Scalar>
SymMatrixFieldT<Scalar> hessian(const ScalarFieldT<Scalar>& f) {
  SymMatrixFieldT<Scalar> out(f.grid);
  out.a11 = dxx(f.values, f.grid->hx);
  out.a12 = dxy(f.values, f.grid->hx, f.grid->hy);
  out.a22 = dyy(f.values, f.grid->hy);
  return out;
}

template <typename Scalar>
SymMatrixFieldT<Scalar> sym_grad(const VectorFieldT<Scalar>& w) {
  SymMatrixFieldT<Scalar> out(w.grid);
  const double hx = w.grid->hx, hy = w.grid->hy;
  out.a11 = dx(w.c1, hx);
  out.a22 = dy(w.c2, hy);
  out.a12 = Scalar(0.5) * (dy(w.c1, hy) + dx(w.c2, hx));
  return out;
}

/// Pointwise symmetric outer product a (x) b, symmetrised: off-diagonal is
/// (a1 b2 + a2 b1)/2 so that outer(a, a) is the plain tensor square.
template <typename Scalar>
SymMatrixFieldT<Scalar> outer(const VectorFieldT<Scalar>& a,
                              const VectorFieldT<Scalar>& b) {
  SymMatrixFieldT<Scalar> out(a.grid);
  out.a11 = a.c1 * b.c1;
  out.a22 = a.c2 * b.c2;
  out.a12 = Scalar(0.5) * (a.c1 * b.c2 + a.c2 * b.c1);
  return out;
}

/// curl curl A = d22 A11 - 2 d12 A12 + d11 A22. For A = w * Id this is the
/// five-point Laplacian of w at interior nodes.
template <typename Scalar>
ScalarFieldT<Scalar> curl_curl(const SymMatrixFieldT<Scalar>& A) {
  ScalarFieldT<Scalar> out(A.grid);
  const double hx = A.grid->hx, hy = A.grid->hy;
  out.values = dyy(A.a11, hy) - 2 * dxy(A.a12, hx, hy) + dxx(A.a22, hx);
  return out;
}

template <typename Scalar>
ScalarFieldT<Scalar> divergence(const VectorFieldT<Scalar>& w) {
  ScalarFieldT<Scalar> out(w.grid);
  out.values = dx(w.c1, w.grid->hx) + dy(w.c2, w.grid->hy);
  return out;
}

template <typename Scalar>
ScalarFieldT<Scalar> laplacian(const ScalarFieldT<Scalar>& f) {
  ScalarFieldT<Scalar> out(f.grid);
  out.values = dxx(f.values, f.grid->hx) + dyy(f.values, f.grid->hy);
  return out;
}

/// Composite trapezoid rule over active (interior + boundary) nodes. On the
/// rectangle this is the exact tensor trapezoid rule; on masked grids each
/// node carries hx*hy times the fraction of its four adjacent cells whose
/// corners are all active.
template <typename Scalar>
Scalar integrate(const ScalarFieldT<Scalar>& f) {
  const Grid& g = *f.grid;
  const double cell = g.hx * g.hy;
  long double acc = 0.0L;
  auto active = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < g.nx && j < g.ny && g.is_active(i, j);
  };
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j)) continue;
      int cells = 0;
      for (int di = -1; di <= 0; ++di)
        for (int dj = -1; dj <= 0; ++dj) {
          // cell with corners (i+di, j+dj) .. (i+di+1, j+dj+1)
          if (active(i + di, j + dj) && active(i + di + 1, j + dj) &&
              active(i + di, j + dj + 1) && active(i + di + 1, j + dj + 1))
            ++cells;
        }
      acc += static_cast<long double>(f.values(i, j)) * (cells * 0.25) * cell;
    }
  return static_cast<Scalar>(acc);
}

/// Pointwise trace of H_phi * A where H_phi = [[d22 phi, -d12 phi], [-d12 phi,
/// d11 phi]]: used by weak-form assembly. hess holds the Hessian of phi.
template <typename Scalar>
ScalarFieldT<Scalar> cofactor_pairing(const SymMatrixFieldT<Scalar>& hess,
                                      const SymMatrixFieldT<Scalar>& A) {
  ScalarFieldT<Scalar> out(hess.grid);
  out.values = hess.a22 * A.a11 - 2 * hess.a12 * A.a12 + hess.a11 * A.a22;
  return out;
}

} // namespace lmce

#endif
