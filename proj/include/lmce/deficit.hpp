#ifndef LMCE_DEFICIT_HPP
#define LMCE_DEFICIT_HPP

#include <cstdint>
#include <cstring>
#include <limits>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>

#include "lmce/phase.hpp"
#include "lmce/poisson.hpp"

namespace lmce {

/// Adapted subsolution (v, w) with its deficit factorization. Beyond the
/// pointwise fields, the state carries grad_v and sym_grad_w updated by exact
/// chain rule through the corrugation substeps: once the oscillation frequency
/// reaches the grid scale, stencil differentiation of v and w is meaningless
/// while the carried fields remain exact.
struct SubsolutionState {
  ScalarField v;
  VectorField w;
  ScalarField rho;
  SymMatrixField H;
  SymMatrixField A;
  int q = 0;
  ScalarField V; // cached nonlocal term for the current v

  VectorField grad_v;
  SymMatrixField sym_grad_w;
};

/// F(v) = 2 grad v . grad cot Theta + v lap cot Theta, with an explicit
/// gradient when the caller carries one.
inline ScalarField F_of_v(const ScalarField& v, const PhaseSpec& phase,
                          const VectorField* grad_override = nullptr) {
  if (!same_grid(v, phase.theta))
    throw ValidationError("deficit.grid_mismatch", "v and phase live on different grids");
  const VectorField gv = grad_override ? *grad_override : grad(v);
  ScalarField out(v.grid);
  out.values = 2.0 * (gv.c1 * phase.grad_cot.c1 + gv.c2 * phase.grad_cot.c2) +
               v.values * phase.lap_cot.values;
  return out;
}

namespace detail {

inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t h) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t plane_hash(const Plane<double>& p, std::uint64_t h) {
  const int nm[2] = {int(p.rows()), int(p.cols())};
  h = fnv1a(nm, sizeof nm, h);
  return fnv1a(p.data(), sizeof(double) * p.size(), h);
}

} // namespace detail

/// Solve lap V = F(v), V = 0 on the boundary. Identically zero F short
/// circuits to the zero field; results are cached per content hash of
/// (v, optional gradient, theta) so the stage's repeated deficit evaluations
/// do not re-solve.
inline ScalarField solve_V(const ScalarField& v, const PhaseSpec& phase,
                           const VectorField* grad_override = nullptr) {
  ScalarField F = F_of_v(v, phase, grad_override);
  if ((F.values == 0.0).all()) return ScalarField(v.grid);

  std::uint64_t h = 1469598103934665603ULL;
  h = detail::plane_hash(v.values, h);
  h = detail::plane_hash(phase.theta.values, h);
  if (grad_override) {
    h = detail::plane_hash(grad_override->c1, h);
    h = detail::plane_hash(grad_override->c2, h);
  }

  static std::mutex mu;
  static std::unordered_map<std::uint64_t, ScalarField> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(h);
    if (it != cache.end() && it->second.grid->same_layout(*v.grid)) return it->second;
  }
  ScalarField V = solve_poisson(F, ScalarField(v.grid));
  {
    std::lock_guard<std::mutex> lock(mu);
    if (cache.size() > 64) cache.clear();
    cache.emplace(h, V);
  }
  return V;
}

/// D(v, w) = sym grad w + 1/2 grad v (x) grad v - (v cot Theta) Id + V Id,
/// assembled from explicitly supplied first-derivative fields and V.
inline SymMatrixField D_from(const ScalarField& v, const VectorField& grad_v,
                             const SymMatrixField& sym_grad_w, const ScalarField& V,
                             const PhaseSpec& phase) {
  SymMatrixField out(v.grid);
  const Plane<double> diag = -v.values * phase.cot_theta.values + V.values;
  out.a11 = sym_grad_w.a11 + 0.5 * grad_v.c1 * grad_v.c1 + diag;
  out.a12 = sym_grad_w.a12 + 0.5 * grad_v.c1 * grad_v.c2;
  out.a22 = sym_grad_w.a22 + 0.5 * grad_v.c2 * grad_v.c2 + diag;
  return out;
}

/// Stencil-differentiated deficit evaluation for plain (v, w) pairs.
inline SymMatrixField D_of(const ScalarField& v, const VectorField& w,
                           const PhaseSpec& phase) {
  if (!same_grid(v, phase.theta))
    throw ValidationError("deficit.grid_mismatch", "v and phase live on different grids");
  return D_from(v, grad(v), sym_grad(w), solve_V(v, phase), phase);
}

/// Carried-gradient deficit evaluation for a state.
inline SymMatrixField D_of(const SubsolutionState& s, const PhaseSpec& phase) {
  return D_from(s.v, s.grad_v, s.sym_grad_w, s.V, phase);
}

/// Split a deficit field into rho^2 (Id + H) with tr H = 0: rho^2 is half the
/// trace, H the normalized trace-free part where rho^2 clears the guard.
struct DeficitSplit {
  ScalarField rho;
  SymMatrixField H;
  bool pd_ok = true;      // Id + H positive definite at every active node
  double min_trace = 0.0; // smallest half-trace seen (diagnostic)
};

inline DeficitSplit split_deficit(const SymMatrixField& Dq, double floor = 0.0) {
  if (floor < 0.0) throw ValidationError("deficit.bad_floor", "floor must be >= 0");
  const Grid& g = *Dq.grid;
  const double guard =
      std::max(floor, 64.0 * std::numeric_limits<double>::epsilon() * (1.0 + norm_c0(Dq)));
  const double neg_tol = std::max(guard, 1e-10);
  DeficitSplit out;
  out.rho = ScalarField(Dq.grid);
  out.H = SymMatrixField(Dq.grid);
  double min_trace = 1e300;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j)) continue;
      const double t = 0.5 * (Dq.a11(i, j) + Dq.a22(i, j));
      min_trace = std::min(min_trace, t);
      if (t < -neg_tol)
        throw SolveError("deficit.negative_trace",
                         "deficit trace " + std::to_string(2 * t) + " at node (" +
                             std::to_string(i) + "," + std::to_string(j) + ")",
                         -t);
      if (t > guard) {
        out.rho(i, j) = std::sqrt(t);
        const double h11 = Dq.a11(i, j) / t - 1.0;
        const double h12 = Dq.a12(i, j) / t;
        const double h22 = Dq.a22(i, j) / t - 1.0;
        out.H.a11(i, j) = h11;
        out.H.a12(i, j) = h12;
        out.H.a22(i, j) = h22;
        // Sylvester check of Id + H
        const double d = (1 + h11) * (1 + h22) - h12 * h12;
        if (!(1 + h11 > 0.0) || !(d > 0.0)) out.pd_ok = false;
      } else {
        out.rho(i, j) = std::sqrt(std::max(t, 0.0));
      }
    }
  out.min_trace = min_trace;
  return out;
}

/// Discrete Hessian determinant of u routed through curl curl so that deficit
/// bookkeeping telescopes at the stencil level:
/// det = -1/2 curl curl (grad u (x) grad u).
inline ScalarField hessian_determinant(const ScalarField& u) {
  const VectorField gu = grad(u);
  ScalarField out = curl_curl(outer(gu, gu));
  out.values *= -0.5;
  return out;
}

/// Initial adapted subsolution: harmonic extension u of g, torsion-type psi
/// with -lap psi = 1 - det grad^2 u, the nonlocal term U, and
/// A = psi Id + D(u, 0). The deficit is then psi Id exactly.
inline SubsolutionState initial_data(GridPtr grid, const ScalarField& g_boundary,
                                     const PhaseSpec& phase) {
  if (!g_boundary.grid || !g_boundary.grid->same_layout(*grid) ||
      !phase.theta.grid->same_layout(*grid))
    throw ValidationError("deficit.grid_mismatch", "boundary data and phase must share the grid");

  SubsolutionState s;
  s.q = 0;
  s.v = harmonic_extension(g_boundary);
  s.w = VectorField(grid);
  s.grad_v = grad(s.v);
  s.sym_grad_w = SymMatrixField(grid);

  ScalarField det_u = hessian_determinant(s.v);
  ScalarField rhs(grid);
  rhs.values = det_u.values - 1.0;
  ScalarField psi = solve_poisson(rhs, ScalarField(grid));

  const Grid& gr = *grid;
  for (int j = 0; j < gr.ny; ++j)
    for (int i = 0; i < gr.nx; ++i)
      if (gr.is_interior(i, j) && psi(i, j) <= -1e-12)
        throw SolveError("deficit.psi_not_positive",
                         "torsion-type field is not positive at interior node (" +
                             std::to_string(i) + "," + std::to_string(j) + ")",
                         -psi(i, j));
  psi.values = psi.values.max(0.0);

  s.V = solve_V(s.v, phase, &s.grad_v);
  SymMatrixField D0 = D_from(s.v, s.grad_v, s.sym_grad_w, s.V, phase);
  s.A = scalar_times_id(psi) + D0;

  s.rho = ScalarField(grid);
  s.rho.values = psi.values.sqrt();
  s.H = SymMatrixField(grid);

  // -curl curl A = 1 at interior nodes within O(h^2): the psi and det terms
  // telescope bitwise, the remaining error is the discrete product rule on
  // (v cot Theta) plus solver tolerances.
  ScalarField cc = curl_curl(s.A);
  const double tol = std::max(100.0 * gr.hmax() * gr.hmax(), 1e-8);
  for (int j = 0; j < gr.ny; ++j)
    for (int i = 0; i < gr.nx; ++i)
      if (gr.is_interior(i, j) && std::abs(cc(i, j) + 1.0) > tol)
        throw SolveError("deficit.curl_curl_residual",
                         "-curl curl A deviates from 1 by " +
                             std::to_string(std::abs(cc(i, j) + 1.0)) + " at interior node (" +
                             std::to_string(i) + "," + std::to_string(j) + ")",
                         std::abs(cc(i, j) + 1.0));
  return s;
}

} // namespace lmce

#endif
