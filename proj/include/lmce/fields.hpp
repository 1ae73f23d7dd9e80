#ifndef LMCE_FIELDS_HPP
#define LMCE_FIELDS_HPP

#include <Eigen/Core>
#include <cmath>
#include <functional>

#include "lmce/grid.hpp"

namespace lmce {

template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Nodal scalar samples on a Grid. values(i, j) lives at (x1(i), x2(j)).
template <typename Scalar>
struct ScalarFieldT {
  GridPtr grid;
  Plane<Scalar> values;

  ScalarFieldT() = default;
  explicit ScalarFieldT(GridPtr g) : grid(std::move(g)) {
    values.setZero(grid->nx, grid->ny);
  }
  Scalar& operator()(int i, int j) { return values(i, j); }
  Scalar operator()(int i, int j) const { return values(i, j); }
};

/// Two scalar planes (v1, v2).
template <typename Scalar>
struct VectorFieldT {
  GridPtr grid;
  Plane<Scalar> c1, c2;

  VectorFieldT() = default;
  explicit VectorFieldT(GridPtr g) : grid(std::move(g)) {
    c1.setZero(grid->nx, grid->ny);
    c2.setZero(grid->nx, grid->ny);
  }
};

/// Symmetric 2x2 matrix per node, stored as planes (a11, a12, a22).
template <typename Scalar>
struct SymMatrixFieldT {
  GridPtr grid;
  Plane<Scalar> a11, a12, a22;

  SymMatrixFieldT() = default;
  explicit SymMatrixFieldT(GridPtr g) : grid(std::move(g)) {
    a11.setZero(grid->nx, grid->ny);
    a12.setZero(grid->nx, grid->ny);
    a22.setZero(grid->nx, grid->ny);
  }
};

using ScalarField = ScalarFieldT<double>;
using VectorField = VectorFieldT<double>;
using SymMatrixField = SymMatrixFieldT<double>;

template <typename Scalar>
bool same_grid(const ScalarFieldT<Scalar>& a, const ScalarFieldT<Scalar>& b) {
  return a.grid && b.grid && a.grid->same_layout(*b.grid);
}

/// Fill a scalar field from f(x1, x2) at every node (exterior included).
template <typename Scalar = double, typename F>
ScalarFieldT<Scalar> sample(GridPtr grid, F&& f) {
  ScalarFieldT<Scalar> out(grid);
  for (int j = 0; j < grid->ny; ++j)
    for (int i = 0; i < grid->nx; ++i)
      out.values(i, j) = f(grid->x1(i), grid->x2(j));
  return out;
}

template <typename Scalar = double, typename F1, typename F2>
VectorFieldT<Scalar> sample_vector(GridPtr grid, F1&& f1, F2&& f2) {
  VectorFieldT<Scalar> out(grid);
  for (int j = 0; j < grid->ny; ++j)
    for (int i = 0; i < grid->nx; ++i) {
      out.c1(i, j) = f1(grid->x1(i), grid->x2(j));
      out.c2(i, j) = f2(grid->x1(i), grid->x2(j));
    }
  return out;
}

template <typename Scalar>
bool all_finite(const Plane<Scalar>& p) {
  return p.isFinite().all();
}

template <typename Scalar>
bool all_finite(const ScalarFieldT<Scalar>& f) {
  return all_finite(f.values);
}
template <typename Scalar>
bool all_finite(const VectorFieldT<Scalar>& f) {
  return all_finite(f.c1) && all_finite(f.c2);
}
template <typename Scalar>
bool all_finite(const SymMatrixFieldT<Scalar>& f) {
  return all_finite(f.a11) && all_finite(f.a12) && all_finite(f.a22);
}

/// Identity matrix field scaled by a nodewise factor: s * Id.
template <typename Scalar>
SymMatrixFieldT<Scalar> scalar_times_id(const ScalarFieldT<Scalar>& s) {
  SymMatrixFieldT<Scalar> out(s.grid);
  out.a11 = s.values;
  out.a22 = s.values;
  return out;
}

template <typename Scalar>
SymMatrixFieldT<Scalar> operator+(const SymMatrixFieldT<Scalar>& a,
                                  const SymMatrixFieldT<Scalar>& b) {
  SymMatrixFieldT<Scalar> out(a.grid);
  out.a11 = a.a11 + b.a11;
  out.a12 = a.a12 + b.a12;
  out.a22 = a.a22 + b.a22;
  return out;
}

template <typename Scalar>
SymMatrixFieldT<Scalar> operator-(const SymMatrixFieldT<Scalar>& a,
                                  const SymMatrixFieldT<Scalar>& b) {
  SymMatrixFieldT<Scalar> out(a.grid);
  out.a11 = a.a11 - b.a11;
  out.a12 = a.a12 - b.a12;
  out.a22 = a.a22 - b.a22;
  return out;
}

} // namespace lmce

#endif
