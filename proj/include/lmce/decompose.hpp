#ifndef LMCE_DECOMPOSE_HPP
#define LMCE_DECOMPOSE_HPP

#include <array>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lmce/norms.hpp"
#include "lmce/poisson.hpp"

namespace lmce {

/// Factorization M = a^2 (grad Phi1 (x) grad Phi1 + grad Phi2 (x) grad Phi2)
/// of a near-identity SPD matrix field on a simply connected domain, together
/// with the diagnostics the stage driver reports.
struct Decomposition {
  ScalarField a;
  ScalarField phi1, phi2;
  SymMatrixField residual;      // M - reconstruction, grid-differentiated Phi
  double residual_c0 = 0.0;     // max norm of residual two nodes into the interior
  double min_a = 0.0;
  double min_det_grad_phi = 0.0;
  std::array<double, 3> a_norms{};        // ||a||_C0..C2
  std::array<double, 3> grad_phi_norms{}; // max over i of ||grad Phi_i||_C0..C2
  int flatten_iterations = 0;
};

namespace detail {

inline void check_spd(const SymMatrixField& M) {
  const Grid& g = *M.grid;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j)) continue;
      const double det = M.a11(i, j) * M.a22(i, j) - M.a12(i, j) * M.a12(i, j);
      if (!(M.a11(i, j) > 0.0) || !(det > 0.0))
        throw ValidationError("decompose.not_spd",
                              "matrix not positive definite at node (" +
                                  std::to_string(i) + "," + std::to_string(j) +
                                  "), x=(" + std::to_string(g.x1(i)) + "," +
                                  std::to_string(g.x2(j)) + ")");
    }
}

} // namespace detail

/// Discrete Gauss curvature of the metric M via the Brioschi formula.
inline ScalarField gauss_curvature(const SymMatrixField& M) {
  detail::check_spd(M);
  const Grid& g = *M.grid;
  const double hx = g.hx, hy = g.hy;
  const Plane<double>&E = M.a11, &F = M.a12, &G = M.a22;
  Plane<double> Ex = dx(E, hx), Ey = dy(E, hy), Eyy = dyy(E, hy);
  Plane<double> Gx = dx(G, hx), Gy = dy(G, hy), Gxx = dxx(G, hx);
  Plane<double> Fx = dx(F, hx), Fy = dy(F, hy), Fxy = dxy(F, hx, hy);

  ScalarField K;
  K.grid = M.grid;
  K.values.setZero(g.nx, g.ny);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j)) continue;
      const double a11 = -0.5 * Eyy(i, j) + Fxy(i, j) - 0.5 * Gxx(i, j);
      const double a12 = 0.5 * Ex(i, j);
      const double a13 = Fx(i, j) - 0.5 * Ey(i, j);
      const double a21 = Fy(i, j) - 0.5 * Gx(i, j);
      const double a31 = 0.5 * Gy(i, j);
      const double b12 = 0.5 * Ey(i, j);
      const double b13 = 0.5 * Gx(i, j);
      const double e = E(i, j), f = F(i, j), gg = G(i, j);
      const double det1 = a11 * (e * gg - f * f) - a12 * (a21 * gg - f * a31) +
                          a13 * (a21 * f - e * a31);
      const double det2 = -b12 * (b12 * gg - f * b13) + b13 * (b12 * f - e * b13);
      const double den = e * gg - f * f;
      K.values(i, j) = (det1 - det2) / (den * den);
    }
  return K;
}

namespace detail {

inline double interior_abs_max(const ScalarField& f) {
  const Grid& g = *f.grid;
  double best = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.is_interior(i, j)) best = std::max(best, std::abs(f(i, j)));
  return best;
}

inline SymMatrixField conformal_scale(const SymMatrixField& M,
                                      const Plane<double>& factor) {
  SymMatrixField out;
  out.grid = M.grid;
  out.a11 = M.a11 * factor;
  out.a12 = M.a12 * factor;
  out.a22 = M.a22 * factor;
  return out;
}

} // namespace detail

/// Conformal factor u (zero boundary data) such that e^{-2u} M has vanishing
/// discrete Gauss curvature at interior nodes: damped fixed point moving the
/// metric correction to the right-hand side of the flat-Laplacian solve.
inline ScalarField conformal_flatten(const SymMatrixField& M, double tol = 1e-9,
                                     int cap = 100, double damping = 0.7,
                                     int* iterations_out = nullptr) {
  detail::check_spd(M);
  SymMatrixField Mid = M;
  Mid.a11 -= 1.0;
  Mid.a22 -= 1.0;
  if (norm_c0(Mid) > 0.5)
    throw ValidationError("decompose.too_far_from_identity",
                          "conformal flattening needs ||M - Id||_C0 <= 0.5, got " +
                              std::to_string(norm_c0(Mid)));
  const GridPtr grid = M.grid;
  ScalarField u(grid);
  double prev_k = -1.0;
  int rises = 0;
  for (int it = 1; it <= cap; ++it) {
    Plane<double> factor = (-2.0 * u.values).exp();
    ScalarField K = gauss_curvature(detail::conformal_scale(M, factor));
    const double kmax = detail::interior_abs_max(K);
    if (prev_k >= 0.0 && kmax > prev_k) {
      if (++rises >= 2)
        throw SolveError("decompose.flatten_diverged",
                         "flattening fixed point diverged (metric too far from "
                         "identity); interior curvature " +
                             std::to_string(kmax),
                         kmax);
    } else {
      rises = 0;
    }
    prev_k = kmax;
    K.values = -K.values;
    ScalarField du = solve_poisson(K, ScalarField(grid));
    u.values += damping * du.values;
    if (iterations_out) *iterations_out = it;
    if (damping * norm_c0(du) <= tol) return u;
  }
  throw SolveError("decompose.flatten_diverged",
                   "flattening fixed point did not settle within the iteration cap",
                   prev_k);
}

namespace detail {

/// Recover a potential for a (discretely) closed one-form: trapezoid path
/// integration around the rectangle boundary with the closure defect spread
/// along arclength, then one Dirichlet Poisson solve of Delta p = div(form).
inline ScalarField potential_from_one_form(const VectorField& form) {
  const Grid& g = *form.grid;
  if (!g.rectangular())
    throw ValidationError("decompose.rectangle_only",
                          "potential recovery needs the full rectangle");
  const int nx = g.nx, ny = g.ny;
  // boundary path, counterclockwise from (0,0)
  std::vector<std::pair<int, int>> path;
  for (int i = 0; i < nx; ++i) path.emplace_back(i, 0);
  for (int j = 1; j < ny; ++j) path.emplace_back(nx - 1, j);
  for (int i = nx - 2; i >= 0; --i) path.emplace_back(i, ny - 1);
  for (int j = ny - 2; j >= 1; --j) path.emplace_back(0, j);
  path.emplace_back(0, 0);
  const std::size_t n = path.size();
  std::vector<double> theta(n, 0.0), arc(n, 0.0);
  for (std::size_t k = 1; k < n; ++k) {
    auto [i0, j0] = path[k - 1];
    auto [i1, j1] = path[k];
    const int di = i1 - i0, dj = j1 - j0;
    const double step = di != 0 ? g.hx : g.hy;
    const double f0 = di != 0 ? di * form.c1(i0, j0) : dj * form.c2(i0, j0);
    const double f1 = di != 0 ? di * form.c1(i1, j1) : dj * form.c2(i1, j1);
    theta[k] = theta[k - 1] + 0.5 * (f0 + f1) * step;
    arc[k] = arc[k - 1] + step;
  }
  const double defect = theta[n - 1], total = arc[n - 1];
  for (std::size_t k = 0; k < n; ++k) theta[k] -= defect * arc[k] / total;

  ScalarField bound(form.grid);
  for (std::size_t k = 0; k + 1 < n; ++k) bound.values(path[k].first, path[k].second) = theta[k];
  PoissonProblem prob;
  prob.rhs = ScalarField(form.grid);
  prob.div_rhs = form;
  prob.boundary = bound;
  return solve_poisson(prob);
}

} // namespace detail

/// Developing map of a flat metric: orthonormal coframe by nodewise Cholesky,
/// rotation angle recovered as the potential of the connection form, then the
/// rotated (closed) coframe integrated to coordinates Phi. Gauges: theta = 0
/// and Phi = x at the center node.
inline std::pair<ScalarField, ScalarField> flat_coordinates(const SymMatrixField& g_flat,
                                                            double flat_tol = 1e-4) {
  detail::check_spd(g_flat);
  const Grid& g = *g_flat.grid;
  {
    auto K = gauss_curvature(g_flat);
    const double kmax = detail::interior_abs_max(K);
    if (kmax > flat_tol)
      throw ValidationError("decompose.not_flat",
                            "coframe is not integrable: interior curvature " +
                                std::to_string(kmax) + " exceeds " +
                                std::to_string(flat_tol));
  }
  const int nx = g.nx, ny = g.ny;
  // upper-triangular Cholesky rows: e1 = (c11, c12), e2 = (0, c22)
  Plane<double> c11(nx, ny), c12(nx, ny), c22(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const double E = g_flat.a11(i, j), F = g_flat.a12(i, j), G = g_flat.a22(i, j);
      c11(i, j) = std::sqrt(E);
      c12(i, j) = F / c11(i, j);
      c22(i, j) = std::sqrt((E * G - F * F) / E);
    }
  // connection: [de^i] coefficients and the nodewise 2x2 solve for grad theta
  Plane<double> A = dx(c12, g.hx) - dy(c11, g.hy);
  Plane<double> B = dx(c22, g.hx); // e2_1 = 0 identically
  VectorField zeta;
  zeta.grid = g_flat.grid;
  zeta.c1.resize(nx, ny);
  zeta.c2.resize(nx, ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      // [[e2_2, -e2_1], [-e1_2, e1_1]] (t1, t2)^T = (A, B)^T with e2_1 = 0
      const double det = c22(i, j) * c11(i, j);
      zeta.c1(i, j) = (c11(i, j) * A(i, j)) / det;
      zeta.c2(i, j) = (c12(i, j) * A(i, j) + c22(i, j) * B(i, j)) / det;
    }
  ScalarField theta = detail::potential_from_one_form(zeta);
  const int ic = (nx - 1) / 2, jc = (ny - 1) / 2;
  theta.values -= theta.values(ic, jc);

  Plane<double> ct = theta.values.cos(), st = theta.values.sin();
  VectorField e1r, e2r;
  e1r.grid = e2r.grid = g_flat.grid;
  e1r.c1 = ct * c11;            // rotated e1 = cos*e1 - sin*e2
  e1r.c2 = ct * c12 - st * c22;
  e2r.c1 = st * c11;            // rotated e2 = sin*e1 + cos*e2
  e2r.c2 = st * c12 + ct * c22;

  ScalarField phi1 = detail::potential_from_one_form(e1r);
  ScalarField phi2 = detail::potential_from_one_form(e2r);
  phi1.values += g.x1(ic) - phi1.values(ic, jc);
  phi2.values += g.x2(jc) - phi2.values(ic, jc);
  return {std::move(phi1), std::move(phi2)};
}

/// Full factorization. The overall scale of M is split off first (the
/// flattening itself is conformally invariant), so constant multiples of Id
/// decompose exactly and the near-identity gate applies to M/scale.
inline Decomposition decompose(const SymMatrixField& M) {
  detail::check_spd(M);
  const Grid& g = *M.grid;
  // nodewise smallest eigenvalue >= 1/2
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j)) continue;
      const double tr = M.a11(i, j) + M.a22(i, j);
      const double det = M.a11(i, j) * M.a22(i, j) - M.a12(i, j) * M.a12(i, j);
      const double lam_min = 0.5 * (tr - std::sqrt(std::max(tr * tr - 4 * det, 0.0)));
      if (lam_min < 0.5 - 1e-12)
        throw ValidationError("decompose.below_half_identity",
                              "matrix drops below Id/2 at node (" + std::to_string(i) +
                                  "," + std::to_string(j) + ")");
    }
  long double trace_acc = 0.0L;
  long long count = 0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.is_active(i, j)) {
        trace_acc += 0.5L * (M.a11(i, j) + M.a22(i, j));
        ++count;
      }
  const double scale = double(trace_acc / count);
  SymMatrixField Mhat = detail::conformal_scale(M, Plane<double>::Constant(g.nx, g.ny, 1.0 / scale));

  Decomposition out;
  int iters = 0;
  ScalarField u = conformal_flatten(Mhat, 1e-9, 100, 0.7, &iters);
  out.flatten_iterations = iters;
  SymMatrixField g_flat = detail::conformal_scale(Mhat, (-2.0 * u.values).exp());
  auto [phi1, phi2] = flat_coordinates(g_flat);
  out.phi1 = std::move(phi1);
  out.phi2 = std::move(phi2);
  out.a.grid = M.grid;
  out.a.values = std::sqrt(scale) * u.values.exp();

  VectorField g1 = grad(out.phi1), g2 = grad(out.phi2);
  SymMatrixField rec = outer(g1, g1) + outer(g2, g2);
  const Plane<double> a2 = out.a.values * out.a.values;
  rec.a11 *= a2;
  rec.a12 *= a2;
  rec.a22 *= a2;
  out.residual = M - rec;

  NormOptions collar2;
  collar2.collar = 2;
  out.residual_c0 = norm_c0(out.residual, collar2);
  out.min_a = out.a.values.minCoeff();
  double mind = 1e300;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      mind = std::min(mind, g1.c1(i, j) * g2.c2(i, j) - g1.c2(i, j) * g2.c1(i, j));
  out.min_det_grad_phi = mind;

  ScalarField ascalar = out.a;
  out.a_norms = {norm_c0(ascalar), norm_c1(ascalar), norm_c2(ascalar)};
  out.grad_phi_norms = {std::max(norm_c0(g1), norm_c0(g2)),
                        std::max(norm_c1(g1), norm_c1(g2)),
                        std::max(norm_c2(g1), norm_c2(g2))};
  return out;
}

} // namespace lmce

#endif
