#ifndef LMCE_NORMS_HPP
#define LMCE_NORMS_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "lmce/calculus.hpp"
#include "lmce/rng.hpp"

namespace lmce {

/// Options for norm evaluation. `collar` drops nodes within that many node
/// layers of the rectangle edge (or of boundary/exterior nodes on masked
/// grids); probes use it to separate interior behavior from one-sided stencil
/// and reflection effects. Reports that use a collar must say so.
struct NormOptions {
  int collar = 0;
  int window = 8;               // Hoelder pairs up to this many nodes apart
  int long_range_samples = 4096; // additional seeded far pairs
  std::uint64_t seed = 12345;
};

namespace detail {

template <typename Scalar>
bool norm_node_ok(const Grid& g, int i, int j, int collar) {
  if (!g.is_active(i, j)) return false;
  if (collar <= 0) return true;
  if (g.rectangular()) {
    return i >= collar && j >= collar && i < g.nx - collar && j < g.ny - collar;
  }
  for (int di = -collar; di <= collar; ++di)
    for (int dj = -collar; dj <= collar; ++dj) {
      const int ii = i + di, jj = j + dj;
      if (ii < 0 || jj < 0 || ii >= g.nx || jj >= g.ny) return false;
      if (!g.is_interior(ii, jj)) return false;
    }
  return true;
}

template <typename Scalar>
Scalar plane_max_abs(const Grid& g, const Plane<Scalar>& p, int collar) {
  Scalar best = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (norm_node_ok<Scalar>(g, i, j, collar)) best = std::max(best, std::abs(p(i, j)));
  return best;
}

} // namespace detail

template <typename Scalar>
Scalar norm_c0(const ScalarFieldT<Scalar>& f, const NormOptions& opt = {}) {
  return detail::plane_max_abs(*f.grid, f.values, opt.collar);
}
template <typename Scalar>
Scalar norm_c0(const VectorFieldT<Scalar>& f, const NormOptions& opt = {}) {
  return std::max(detail::plane_max_abs(*f.grid, f.c1, opt.collar),
                  detail::plane_max_abs(*f.grid, f.c2, opt.collar));
}
template <typename Scalar>
Scalar norm_c0(const SymMatrixFieldT<Scalar>& f, const NormOptions& opt = {}) {
  return std::max({detail::plane_max_abs(*f.grid, f.a11, opt.collar),
                   detail::plane_max_abs(*f.grid, f.a12, opt.collar),
                   detail::plane_max_abs(*f.grid, f.a22, opt.collar)});
}

// ||f||_m = sum over derivative orders j <= m of max_{|beta| = j} ||d^beta f||_0.

template <typename Scalar>
Scalar norm_c1(const ScalarFieldT<Scalar>& f, const NormOptions& opt = {}) {
  return norm_c0(f, opt) + norm_c0(grad(f), opt);
}

template <typename Scalar>
Scalar norm_c2(const ScalarFieldT<Scalar>& f, const NormOptions& opt = {}) {
  return norm_c1(f, opt) + norm_c0(hessian(f), opt);
}

template <typename Scalar>
Scalar norm_c1(const VectorFieldT<Scalar>& f, const NormOptions& opt = {}) {
  ScalarFieldT<Scalar> u{}, v{};
  u.grid = f.grid;
  u.values = f.c1;
  v.grid = f.grid;
  v.values = f.c2;
  const Scalar d1 = std::max(norm_c0(grad(u), opt), norm_c0(grad(v), opt));
  return norm_c0(f, opt) + d1;
}

template <typename Scalar>
Scalar norm_c2(const VectorFieldT<Scalar>& f, const NormOptions& opt = {}) {
  ScalarFieldT<Scalar> u{}, v{};
  u.grid = f.grid;
  u.values = f.c1;
  v.grid = f.grid;
  v.values = f.c2;
  const Scalar d2 = std::max(norm_c0(hessian(u), opt), norm_c0(hessian(v), opt));
  return norm_c1(f, opt) + d2;
}

namespace detail {

template <typename Scalar>
std::array<ScalarFieldT<Scalar>, 3> sym_components(const SymMatrixFieldT<Scalar>& f) {
  std::array<ScalarFieldT<Scalar>, 3> out;
  for (auto& c : out) c.grid = f.grid;
  out[0].values = f.a11;
  out[1].values = f.a12;
  out[2].values = f.a22;
  return out;
}

} // namespace detail

template <typename Scalar>
Scalar norm_c1(const SymMatrixFieldT<Scalar>& f, const NormOptions& opt = {}) {
  Scalar d1 = 0;
  for (const auto& c : detail::sym_components(f))
    d1 = std::max(d1, norm_c0(grad(c), opt));
  return norm_c0(f, opt) + d1;
}

template <typename Scalar>
Scalar norm_c2(const SymMatrixFieldT<Scalar>& f, const NormOptions& opt = {}) {
  Scalar d2 = 0;
  for (const auto& c : detail::sym_components(f))
    d2 = std::max(d2, norm_c0(hessian(c), opt));
  return norm_c1(f, opt) + d2;
}

namespace detail {

/// Hoelder seminorm estimate of one plane: all node pairs up to `window`
/// nodes apart plus a seeded long-range sample. Lower bound of the true sup;
/// the short-range window dominates for the fields this library produces.
template <typename Scalar>
Scalar plane_holder(const Grid& g, const Plane<Scalar>& p, double alpha,
                    const NormOptions& opt) {
  const int w = std::max(1, opt.window);
  std::vector<std::pair<int, int>> offs;
  for (int di = 0; di <= w; ++di)
    for (int dj = (di == 0 ? 1 : -w); dj <= w; ++dj) {
      if (di * di + dj * dj > w * w) continue;
      offs.emplace_back(di, dj);
    }
  const double hx = g.hx, hy = g.hy;
  Scalar best = 0;
  for (auto [di, dj] : offs) {
    const double dist = std::pow(std::hypot(di * hx, dj * hy), alpha);
    const int i0 = std::max(0, -di), i1 = g.nx - std::max(0, di);
    const int j0 = std::max(0, -dj), j1 = g.ny - std::max(0, dj);
    for (int j = j0; j < j1; ++j)
      for (int i = i0; i < i1; ++i) {
        if (!norm_node_ok<Scalar>(g, i, j, opt.collar) ||
            !norm_node_ok<Scalar>(g, i + di, j + dj, opt.collar))
          continue;
        const Scalar q = std::abs(p(i + di, j + dj) - p(i, j)) / dist;
        if (q > best) best = q;
      }
  }
  Rng rng(opt.seed);
  for (int s = 0; s < opt.long_range_samples; ++s) {
    const int i = int(rng.integer(g.nx)), j = int(rng.integer(g.ny));
    const int k = int(rng.integer(g.nx)), l = int(rng.integer(g.ny));
    if (i == k && j == l) continue;
    if (!norm_node_ok<Scalar>(g, i, j, opt.collar) ||
        !norm_node_ok<Scalar>(g, k, l, opt.collar))
      continue;
    const double dist = std::pow(std::hypot((i - k) * hx, (j - l) * hy), alpha);
    const Scalar q = std::abs(p(i, j) - p(k, l)) / dist;
    if (q > best) best = q;
  }
  return best;
}

} // namespace detail

/// [f]_{m+alpha}: Hoelder seminorm of the order-m derivatives.
template <typename Scalar>
Scalar holder_seminorm(const ScalarFieldT<Scalar>& f, int m, double alpha,
                       const NormOptions& opt = {}) {
  const Grid& g = *f.grid;
  if (m == 0) return detail::plane_holder(g, f.values, alpha, opt);
  if (m == 1) {
    auto gf = grad(f);
    return std::max(detail::plane_holder(g, gf.c1, alpha, opt),
                    detail::plane_holder(g, gf.c2, alpha, opt));
  }
  if (m == 2) {
    auto hf = hessian(f);
    return std::max({detail::plane_holder(g, hf.a11, alpha, opt),
                     detail::plane_holder(g, hf.a12, alpha, opt),
                     detail::plane_holder(g, hf.a22, alpha, opt)});
  }
  throw ValidationError("norm.bad_order", "holder seminorm supports m in {0,1,2}");
}

template <typename Scalar>
Scalar holder_seminorm(const VectorFieldT<Scalar>& f, int m, double alpha,
                       const NormOptions& opt = {}) {
  ScalarFieldT<Scalar> u{}, v{};
  u.grid = f.grid;
  u.values = f.c1;
  v.grid = f.grid;
  v.values = f.c2;
  return std::max(holder_seminorm(u, m, alpha, opt), holder_seminorm(v, m, alpha, opt));
}

template <typename Scalar>
Scalar holder_seminorm(const SymMatrixFieldT<Scalar>& f, int m, double alpha,
                       const NormOptions& opt = {}) {
  ScalarFieldT<Scalar> u{}, v{}, w{};
  u.grid = f.grid;
  u.values = f.a11;
  v.grid = f.grid;
  v.values = f.a12;
  w.grid = f.grid;
  w.values = f.a22;
  return std::max({holder_seminorm(u, m, alpha, opt), holder_seminorm(v, m, alpha, opt),
                   holder_seminorm(w, m, alpha, opt)});
}

/// ||f||_{m+alpha} = ||f||_m + [f]_{m+alpha}.
template <typename Field>
double norm_holder(const Field& f, int m, double alpha, const NormOptions& opt = {}) {
  double base = 0.0;
  if (m == 0)
    base = norm_c0(f, opt);
  else if (m == 1)
    base = norm_c1(f, opt);
  else
    base = norm_c2(f, opt);
  return base + holder_seminorm(f, m, alpha, opt);
}

} // namespace lmce

#endif
