#ifndef LMCE_VERIFY_HPP
#define LMCE_VERIFY_HPP

// Residual measurement and scaling probes. The very-weak form of the
// curvature equation is tested against a fixed family of compactly supported
// bumps so residuals stay comparable across stages; the closed-form
// corrugation bounds and the per-stage error norms get ratio and exponent-fit
// probes; convergence_report condenses a run into per-stage tables.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "lmce/classical.hpp"
#include "lmce/corrugation.hpp"

namespace lmce {

// ------------------------------------------------------------ test functions

/// One radial bump exp(-1/(1 - |(x-c)/r|^2)), identically zero outside the
/// open disk |x-c| < r, with closed-form first and second derivatives.
struct TestFunction {
  double cx = 0.0, cy = 0.0, r = 0.0;
};

/// Value and derivatives of a bump at one point; all simultaneously zero
/// outside the support (and wherever the value underflows to zero).
struct BumpJet {
  double v = 0.0, d1 = 0.0, d2 = 0.0, d11 = 0.0, d12 = 0.0, d22 = 0.0;
};

inline BumpJet bump_jet(const TestFunction& b, double x, double y) {
  BumpJet out;
  const double u1 = (x - b.cx) / b.r, u2 = (y - b.cy) / b.r;
  const double q = u1 * u1 + u2 * u2;
  if (q >= 1.0) return out;
  const double om = 1.0 - q;
  const double v = std::exp(-1.0 / om);
  if (v == 0.0) return out;
  // f(q) = exp(-1/(1-q)):  f' = -f/(1-q)^2,  f'' = f (2q-1)/(1-q)^4
  const double fq = -v / (om * om);
  const double fqq = v * (2.0 * q - 1.0) / (om * om * om * om);
  const double qx = 2.0 * u1 / b.r, qy = 2.0 * u2 / b.r, qdd = 2.0 / (b.r * b.r);
  out.v = v;
  out.d1 = fq * qx;
  out.d2 = fq * qy;
  out.d11 = fqq * qx * qx + fq * qdd;
  out.d12 = fqq * qx * qy;
  out.d22 = fqq * qy * qy + fq * qdd;
  return out;
}

/// A fixed family of bumps with their nodal samples. The profiles are
/// analytic, so integrands built from them use exact derivatives; only the
/// slowly varying phase factors ever see grid stencils.
struct TestFunctionSet {
  GridPtr grid;
  std::vector<TestFunction> bumps;
  std::vector<ScalarField> functions;
};

namespace detail {

inline void validate_support(const Grid& g, const TestFunction& b) {
  // the closed support, plus a two-node buffer, must consist of interior
  // nodes: integrands built from the bump then never touch one-sided stencils
  const double reach = b.r + 2.0 * g.hmax();
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      const double dx = g.x1(i) - b.cx, dy = g.x2(j) - b.cy;
      if (std::sqrt(dx * dx + dy * dy) >= reach) continue;
      if (!g.is_interior(i, j))
        throw ValidationError("verify.support_too_close",
                              "test function at (" + std::to_string(b.cx) + "," +
                                  std::to_string(b.cy) + ") with radius " +
                                  std::to_string(b.r) +
                                  " reaches within two nodes of the boundary near node (" +
                                  std::to_string(i) + "," + std::to_string(j) + ")");
    }
}

} // namespace detail

/// Build a test-function set from explicit centers (absolute coordinates).
inline TestFunctionSet make_test_functions(GridPtr grid,
                                           const std::vector<std::pair<double, double>>& centers,
                                           double r) {
  if (!grid) throw ValidationError("verify.no_grid", "test functions need a grid");
  if (!(r > 0.0))
    throw ValidationError("verify.bad_radius", "radius must be positive, got " + std::to_string(r));
  if (centers.empty())
    throw ValidationError("verify.no_centers", "at least one test function center is required");
  TestFunctionSet set;
  set.grid = grid;
  for (auto [cx, cy] : centers) {
    TestFunction b{cx, cy, r};
    detail::validate_support(*grid, b);
    set.bumps.push_back(b);
    ScalarField f(grid);
    for (int j = 0; j < grid->ny; ++j)
      for (int i = 0; i < grid->nx; ++i)
        f.values(i, j) = bump_jet(b, grid->x1(i), grid->x2(j)).v;
    set.functions.push_back(std::move(f));
  }
  return set;
}

/// Default family: 12 bumps on a 3 x 4 lattice of the domain bounding box
/// (x fractions 1/4, 1/2, 3/4; y fractions 0.2 .. 0.8), radius 0.18 times the
/// shorter box side. On the unit square this covers the interior evenly while
/// every support clears the boundary by a wide margin.
inline TestFunctionSet make_test_functions(GridPtr grid) {
  if (!grid) throw ValidationError("verify.no_grid", "test functions need a grid");
  const double lx = (grid->nx - 1) * grid->hx, ly = (grid->ny - 1) * grid->hy;
  std::vector<std::pair<double, double>> centers;
  for (double fy : {0.2, 0.4, 0.6, 0.8})
    for (double fx : {0.25, 0.5, 0.75})
      centers.emplace_back(grid->ox + fx * lx, grid->oy + fy * ly);
  return make_test_functions(std::move(grid), centers, 0.18 * std::min(lx, ly));
}

// ------------------------------------------------------------- weak residual

/// Signed very-weak residuals, one per test function, and their max modulus.
struct WeakResidual {
  std::vector<double> values;
  double max_abs = 0.0;
};

/// Very-weak residual of v against each bump phi: with psi = phi sin(Theta)
/// and chi = phi cos(Theta),
///   R(phi) = Int [ d1v d2v d12(psi) - 1/2 (d1v)^2 d22(psi)
///                  - 1/2 (d2v)^2 d11(psi) ] + Int v Lap(chi) - Int psi.
/// This is the curvature equation with every derivative moved off v except
/// one gradient: it is meaningful for v that are merely Lipschitz. The bump
/// derivatives are analytic; sin/cos of the phase enter through nodal values
/// and centered stencils (the supports keep one-sided stencils out of reach),
/// so smooth inputs agree with the strong residual to O(h^2).
inline WeakResidual weak_residual(const ScalarField& v, const ScalarField& theta,
                                  const TestFunctionSet& tests) {
  if (!same_grid(v, theta))
    throw ValidationError("verify.grid_mismatch", "v and theta live on different grids");
  if (!tests.grid || !tests.grid->same_layout(*v.grid))
    throw ValidationError("verify.grid_mismatch", "test functions live on a different grid");
  const Grid& g = *v.grid;

  const Plane<double> sin_t = theta.values.sin();
  const Plane<double> cos_t = theta.values.cos();
  const Plane<double> s1 = dx(sin_t, g.hx), s2 = dy(sin_t, g.hy);
  const Plane<double> s11 = dxx(sin_t, g.hx), s22 = dyy(sin_t, g.hy);
  const Plane<double> s12 = dxy(sin_t, g.hx, g.hy);
  const Plane<double> c1 = dx(cos_t, g.hx), c2 = dy(cos_t, g.hy);
  const Plane<double> lap_c = dxx(cos_t, g.hx) + dyy(cos_t, g.hy);
  const VectorField gv = grad(v);

  WeakResidual out;
  for (const TestFunction& b : tests.bumps) {
    ScalarField term(v.grid);
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i) {
        const BumpJet p = bump_jet(b, g.x1(i), g.x2(j));
        if (p.v == 0.0 && p.d11 == 0.0) continue;
        const double psi11 = p.d11 * sin_t(i, j) + 2.0 * p.d1 * s1(i, j) + p.v * s11(i, j);
        const double psi22 = p.d22 * sin_t(i, j) + 2.0 * p.d2 * s2(i, j) + p.v * s22(i, j);
        const double psi12 = p.d12 * sin_t(i, j) + p.d1 * s2(i, j) + p.d2 * s1(i, j) +
                             p.v * s12(i, j);
        const double lap_chi = (p.d11 + p.d22) * cos_t(i, j) +
                               2.0 * (p.d1 * c1(i, j) + p.d2 * c2(i, j)) +
                               p.v * lap_c(i, j);
        const double v1 = gv.c1(i, j), v2 = gv.c2(i, j);
        term.values(i, j) = v1 * v2 * psi12 - 0.5 * v1 * v1 * psi22 -
                            0.5 * v2 * v2 * psi11 + v.values(i, j) * lap_chi -
                            p.v * sin_t(i, j);
      }
    const double r = integrate(term);
    out.values.push_back(r);
    out.max_abs = std::max(out.max_abs, std::abs(r));
  }
  return out;
}

// -------------------------------------------------------- closed-form bounds

/// Max observed ratio of each corrugation quantity to its closed-form bound.
struct GammaBoundReport {
  struct Entry {
    std::string name;
    double max_ratio = 0.0;
  };
  std::vector<Entry> entries;
  double max_ratio = 0.0;
};

/// Sample random (s, t) with s in [-1, 1], t in [0, 1) and report, for every
/// bounded corrugation quantity, the largest observed |quantity| / bound with
/// unit constant. The bounds are exact, so every ratio must stay <= 1.
inline GammaBoundReport gamma_bound_probe(int samples, std::uint64_t seed = 2026) {
  if (samples < 1)
    throw ValidationError("verify.bad_samples", "samples must be >= 1, got " +
                                                    std::to_string(samples));
  constexpr double kPi = 3.14159265358979323846;
  struct Probe {
    const char* name;
    double (*value)(double, double);
    double (*bound)(double);
  };
  const Probe probes[] = {
      {"gamma1/( |s|/pi )", [](double s, double t) { return gamma1(s, t); },
       [](double s) { return std::abs(s) / kPi; }},
      {"d_t gamma1/( 2|s| )", [](double s, double t) { return gamma1_t(s, t); },
       [](double s) { return 2.0 * std::abs(s); }},
      {"d_tt gamma1/( 4pi|s| )", [](double s, double t) { return gamma1_tt(s, t); },
       [](double s) { return 4.0 * kPi * std::abs(s); }},
      {"d_s gamma1/( 1/pi )", [](double s, double t) { return gamma1_s(s, t); },
       [](double) { return 1.0 / kPi; }},
      {"d_st gamma1/( 2 )", [](double s, double t) { return gamma1_st(s, t); },
       [](double) { return 2.0; }},
      {"gamma2/( s^2/4pi )", [](double s, double t) { return gamma2(s, t); },
       [](double s) { return s * s / (4.0 * kPi); }},
      {"d_t gamma2/( s^2 )", [](double s, double t) { return gamma2_t(s, t); },
       [](double s) { return s * s; }},
      {"d_tt gamma2/( 4pi s^2 )", [](double s, double t) { return gamma2_tt(s, t); },
       [](double s) { return 4.0 * kPi * s * s; }},
      {"d_s gamma2/( |s|/2pi )", [](double s, double t) { return gamma2_s(s, t); },
       [](double s) { return std::abs(s) / (2.0 * kPi); }},
      {"d_st gamma2/( 2|s| )", [](double s, double t) { return gamma2_st(s, t); },
       [](double s) { return 2.0 * std::abs(s); }},
  };

  GammaBoundReport rep;
  for (const Probe& p : probes) rep.entries.push_back({p.name, 0.0});
  Rng rng(seed);
  for (int k = 0; k < samples; ++k) {
    const double s = rng.uniform(-1.0, 1.0);
    const double t = rng.uniform(0.0, 1.0);
    for (std::size_t e = 0; e < std::size(probes); ++e) {
      const double bound = probes[e].bound(s);
      if (bound <= 0.0) continue;
      const double ratio = std::abs(probes[e].value(s, t)) / bound;
      rep.entries[e].max_ratio = std::max(rep.entries[e].max_ratio, ratio);
    }
  }
  for (const auto& e : rep.entries) rep.max_ratio = std::max(rep.max_ratio, e.max_ratio);
  return rep;
}

// ------------------------------------------------------------- exponent fits

/// One fitted log-log slope against its predicted value. `defined` is false
/// when a tracked norm vanished at some sweep point (log undefined there).
struct ExponentFit {
  std::string name;
  double fitted = 0.0;
  double predicted = 0.0;
  bool defined = false;
};

struct StageFitReport {
  double tau = 0.0;
  std::vector<ExponentFit> fits;
};

/// Least-squares log-log slopes of the per-stage error norms across a
/// frequency sweep (>= 3 points, same tau and inputs, distinct lam), compared
/// with the predicted exponents: ||E||_0 ~ lam^(1-tau), ||v*-v||_0 ~
/// lam^(-tau), ||v*-v||_1 ~ lam^0, ||v*||_2 ~ lam^(2 tau - 1).
inline StageFitReport stage_error_probe(const std::vector<StageDiagnostics>& sweep) {
  if (sweep.size() < 3)
    throw ValidationError("verify.too_few_points",
                          "exponent fits need >= 3 sweep points, got " +
                              std::to_string(sweep.size()));
  const double tau = sweep.front().tau;
  for (const auto& d : sweep) {
    if (d.tau != tau)
      throw ValidationError("verify.mixed_sweep", "sweep points ran at different tau");
    if (!(d.lam > 1.0))
      throw ValidationError("verify.mixed_sweep",
                            "sweep point carries lam = " + std::to_string(d.lam));
  }

  auto fit = [&](const char* name, auto pick, double predicted) {
    ExponentFit f;
    f.name = name;
    f.predicted = predicted;
    std::vector<double> xs, ys;
    for (const auto& d : sweep) {
      const double y = pick(d);
      if (!(y > 0.0)) return f; // vanished norm: slope undefined
      xs.push_back(std::log(d.lam));
      ys.push_back(std::log(y));
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      mx += xs[k];
      my += ys[k];
    }
    mx /= double(xs.size());
    my /= double(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
      sxy += (xs[k] - mx) * (ys[k] - my);
      sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    if (sxx <= 0.0)
      throw ValidationError("verify.mixed_sweep", "sweep points share the same lam");
    f.fitted = sxy / sxx;
    f.defined = true;
    return f;
  };

  StageFitReport rep;
  rep.tau = tau;
  rep.fits.push_back(fit("E_c0", [](const StageDiagnostics& d) { return d.E_c0; }, 1.0 - tau));
  rep.fits.push_back(fit("dv_c0", [](const StageDiagnostics& d) { return d.dv_c0; }, -tau));
  rep.fits.push_back(fit("dv_c1", [](const StageDiagnostics& d) { return d.dv_c1; }, 0.0));
  rep.fits.push_back(
      fit("v_star_c2", [](const StageDiagnostics& d) { return d.v_star_c2; }, 2.0 * tau - 1.0));
  return rep;
}

// --------------------------------------------------------- convergence report

/// Per-stage summary row of a corrugation run.
struct StageReportRow {
  int q = 0;
  double delta_q = 0.0, lam_q = 0.0;
  double v_c0 = 0.0, v_c1 = 0.0;
  double v_seminorm_1alpha = 0.0; ///< empirical [v]_{1+alpha}
  double weak_max = 0.0;          ///< max |very-weak residual| over the test set
  double cauchy_c0 = 0.0, cauchy_c1 = 0.0; ///< norms of v_q - v_{q-1} (0 on row 0)
  double c1_over_sqrt_delta = 0.0;         ///< cauchy_c1 / sqrt(delta_q)
  double boundary_dev = 0.0;               ///< max |trace(v_q) - trace(v_0)|
};

struct RunReport {
  double alpha = 0.0;
  std::vector<StageReportRow> rows;
};

/// Condense a run into per-stage tables: C0/C1 Cauchy differences, empirical
/// C^{1,alpha} seminorms, the very-weak residual against a bump set (the
/// default 12-bump family when none is given), the C1-difference-to-
/// sqrt(delta) ratios, and boundary-trace deviation from the initial state
/// (which an honest run keeps at exactly zero). A single state yields the
/// trivial one-row table.
inline RunReport convergence_report(const std::vector<SubsolutionState>& states,
                                    const Schedule& sch, const ScalarField& theta,
                                    double alpha = 0.1,
                                    const TestFunctionSet* tests = nullptr) {
  if (states.empty())
    throw ValidationError("verify.no_states", "convergence report needs at least one state");
  if (!(alpha > 0.0 && alpha < 1.0))
    throw ValidationError("verify.bad_alpha",
                          "alpha must lie in (0, 1), got " + std::to_string(alpha));
  const GridPtr grid = states.front().v.grid;
  TestFunctionSet local;
  if (!tests) {
    local = make_test_functions(grid);
    tests = &local;
  }

  RunReport rep;
  rep.alpha = alpha;
  const Grid& g = *grid;
  for (std::size_t k = 0; k < states.size(); ++k) {
    const ScalarField& v = states[k].v;
    if (!same_grid(v, states.front().v))
      throw ValidationError("verify.grid_mismatch", "states live on different grids");
    StageReportRow row;
    row.q = states[k].q;
    const std::size_t qi = std::size_t(states[k].q);
    if (qi >= 1 && qi < sch.delta.size()) row.delta_q = sch.delta[qi];
    if (qi < sch.lam.size()) row.lam_q = sch.lam[qi];
    row.v_c0 = norm_c0(v);
    row.v_c1 = norm_c1(v);
    row.v_seminorm_1alpha = holder_seminorm(v, 1, alpha);
    row.weak_max = weak_residual(v, theta, *tests).max_abs;
    if (k > 0) {
      ScalarField d(grid);
      d.values = v.values - states[k - 1].v.values;
      row.cauchy_c0 = norm_c0(d);
      row.cauchy_c1 = norm_c1(d);
      if (row.delta_q > 0.0) row.c1_over_sqrt_delta = row.cauchy_c1 / std::sqrt(row.delta_q);
    }
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (g.is_boundary(i, j))
          row.boundary_dev = std::max(
              row.boundary_dev, std::abs(v.values(i, j) - states.front().v.values(i, j)));
    rep.rows.push_back(row);
  }
  return rep;
}

} // namespace lmce

#endif
