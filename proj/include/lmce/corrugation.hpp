#ifndef LMCE_CORRUGATION_HPP
#define LMCE_CORRUGATION_HPP

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lmce/decompose.hpp"
#include "lmce/deficit.hpp"
#include "lmce/mollify.hpp"
#include "lmce/norms.hpp"

namespace lmce {

// ----------------------------------------------------------------- profiles
//
// Oscillation profiles driving the two rank-one sub-steps:
//   gamma1(s,t) = (s/pi) sin(2 pi t)
//   gamma2(s,t) = -(s^2/(4 pi)) sin(4 pi t)
// Both are 1-periodic in t, vanish at s = 0, and cancel pointwise:
//   (1/2) (d_t gamma1)^2 + d_t gamma2 = s^2    exactly,
// which is what lets a sub-step pair deposit a clean rank-one payload
// a^2 (grad Phi (x) grad Phi) into the bookkeeping tensor. All partials are
// closed-form; nothing here is ever differenced.

inline double gamma1(double s, double t) {
  return s / M_PI * std::sin(2.0 * M_PI * t);
}
inline double gamma1_s(double /*s*/, double t) {
  return std::sin(2.0 * M_PI * t) / M_PI;
}
inline double gamma1_t(double s, double t) {
  return 2.0 * s * std::cos(2.0 * M_PI * t);
}
inline double gamma1_tt(double s, double t) {
  return -4.0 * M_PI * s * std::sin(2.0 * M_PI * t);
}
inline double gamma1_st(double /*s*/, double t) {
  return 2.0 * std::cos(2.0 * M_PI * t);
}

inline double gamma2(double s, double t) {
  return -(s * s / (4.0 * M_PI)) * std::sin(4.0 * M_PI * t);
}
inline double gamma2_s(double s, double t) {
  return -(s / (2.0 * M_PI)) * std::sin(4.0 * M_PI * t);
}
inline double gamma2_t(double s, double t) {
  return -s * s * std::cos(4.0 * M_PI * t);
}
inline double gamma2_tt(double s, double t) {
  return 4.0 * M_PI * s * s * std::sin(4.0 * M_PI * t);
}
inline double gamma2_st(double s, double t) {
  return -2.0 * s * std::cos(4.0 * M_PI * t);
}

// ---------------------------------------------------------------- parameters

/// Parameters of one corrugation stage acting at length-scale lam^(-tau).
struct StageParams {
  double gamma = 2.0; ///< C1 bound assumed of the incoming profile (>= 1)
  double delta = 0.0; ///< amplitude scale of the deficit being absorbed
  double lam = 0.0;   ///< base frequency (> 1)
  double tau = 1.5;   ///< exponent (> 1): sub-steps run at lam^tau, lam^(2tau-1)
  double alpha = 0.5; ///< Hoelder exponent carried through diagnostics
  /// When a sub-step oscillation falls under four nodes per wavelength, throw
  /// (true) or record the margin and continue (false). Carried first-order
  /// data stays exact either way; only grid-differenced views degrade.
  bool enforce_resolution = true;
};

inline void validate_stage_params(const StageParams& p) {
  if (!(p.gamma >= 1.0))
    throw ValidationError("stage.bad_params",
                          "gamma must be at least 1, got " + std::to_string(p.gamma));
  if (!(p.delta > 0.0 && p.delta < 1.0))
    throw ValidationError("stage.bad_params",
                          "delta must lie in (0,1), got " + std::to_string(p.delta));
  if (!(p.lam > 1.0))
    throw ValidationError("stage.bad_params",
                          "lam must exceed 1, got " + std::to_string(p.lam));
  if (!(p.tau > 1.0))
    throw ValidationError("stage.bad_params",
                          "tau must exceed 1, got " + std::to_string(p.tau));
  if (!(p.alpha > 0.0 && p.alpha < 1.0))
    throw ValidationError("stage.bad_params",
                          "alpha must lie in (0,1), got " + std::to_string(p.alpha));
  if (!(std::pow(p.lam, p.alpha) >= 2.0))
    throw ValidationError("stage.bad_params",
                          "lam^alpha = " + std::to_string(std::pow(p.lam, p.alpha)) +
                              " must be at least 2");
  if (!(std::sqrt(p.delta) * p.lam > 1.0))
    throw ValidationError("stage.bad_params",
                          "delta^(1/2)*lam = " +
                              std::to_string(std::sqrt(p.delta) * p.lam) +
                              " must exceed 1");
}

// ------------------------------------------------------------------ sub-step

/// Moving fields of a sub-step. grad_v and sym_grad_w are NOT grid differences
/// of v and w: they are advanced alongside by the exact chain rule, so they
/// remain meaningful at frequencies the grid cannot difference.
struct SubstepFields {
  ScalarField v;
  VectorField w;
  VectorField grad_v;
  SymMatrixField sym_grad_w;
};

/// Resolution diagnostics of one sub-step.
struct SubstepInfo {
  double freq = 0.0;         ///< oscillation frequency used
  double max_grad_phi = 0.0; ///< sup |grad Phi| over supp a
  /// (freq * max|grad Phi|)^(-1) / (4 hmax); >= 1 means the oscillation spans
  /// at least four nodes per wavelength.
  double resolution_margin = std::numeric_limits<double>::infinity();
  bool resolved = true;
};

/// One corrugation sub-step at frequency `freq`:
///   v' = v + Gamma1(a, freq*Phi)/freq
///   w' = w - Gamma1(a, freq*Phi)/freq * grad(v_tilde)
///          + Gamma2(a, freq*Phi)/freq * grad(Phi)
/// together with the exact chain-rule update of the carried first-order data.
/// Nodes with a = 0 are left bit-identical.
inline SubstepFields substep(const SubstepFields& in, const ScalarField& v_tilde,
                             const ScalarField& a, const ScalarField& Phi,
                             double freq, bool enforce_resolution = true,
                             SubstepInfo* info = nullptr) {
  const Grid& g = *in.v.grid;
  if (!same_grid(in.v, a) || !same_grid(in.v, Phi) || !same_grid(in.v, v_tilde) ||
      in.w.grid.get() != in.v.grid.get())
    throw ValidationError("corrugation.grid_mismatch",
                          "sub-step fields must share one grid");
  if (!(freq > 0.0))
    throw ValidationError("corrugation.bad_frequency",
                          "frequency must be positive, got " + std::to_string(freq));
  if ((a.values < 0.0).any()) {
    for (int j = 0; j < g.ny; ++j)
      for (int i = 0; i < g.nx; ++i)
        if (a.values(i, j) < 0.0)
          throw ValidationError("corrugation.negative_amplitude",
                                "amplitude must be nonnegative; a(" + std::to_string(i) +
                                    "," + std::to_string(j) + ") = " +
                                    std::to_string(a.values(i, j)));
  }

  // smooth-scale data, grid-differenced once
  const VectorField gphi = grad(Phi);
  const SymMatrixField hphi = hessian(Phi);
  const VectorField ga = grad(a);
  const VectorField gt = grad(v_tilde);
  const SymMatrixField ht = hessian(v_tilde);

  // resolution guard: the oscillation wavelength (freq |grad Phi|)^{-1} over
  // the support of a must span at least four nodes for any grid-side
  // consumer of the output
  double mgp = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j) || a.values(i, j) == 0.0) continue;
      mgp = std::max(mgp, std::hypot(gphi.c1(i, j), gphi.c2(i, j)));
    }
  SubstepInfo si;
  si.freq = freq;
  si.max_grad_phi = mgp;
  if (mgp > 0.0)
    si.resolution_margin = 1.0 / (freq * mgp * 4.0 * g.hmax());
  si.resolved = si.resolution_margin >= 1.0;
  if (info) *info = si;
  if (!si.resolved && enforce_resolution)
    throw StageError("corrugation.under_resolved",
                     "sub-step oscillation wavelength " +
                         std::to_string(1.0 / (freq * mgp)) +
                         " spans fewer than four nodes (margin " +
                         std::to_string(si.resolution_margin) + ")");

  SubstepFields out = in; // untouched nodes stay bit-identical
  const double pf = 1.0 / freq;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j)) continue;
      const double s = a.values(i, j);
      if (s == 0.0) continue;
      const double t = freq * Phi.values(i, j);
      const double G1 = gamma1(s, t), G1s = gamma1_s(s, t), G1t = gamma1_t(s, t);
      const double G2 = gamma2(s, t), G2s = gamma2_s(s, t), G2t = gamma2_t(s, t);
      const double gp1 = gphi.c1(i, j), gp2 = gphi.c2(i, j);
      const double gv1 = gt.c1(i, j), gv2 = gt.c2(i, j);

      out.v.values(i, j) += pf * G1;
      out.w.c1(i, j) += -pf * G1 * gv1 + pf * G2 * gp1;
      out.w.c2(i, j) += -pf * G1 * gv2 + pf * G2 * gp2;

      // grad of Gamma_k(a, freq Phi)/freq = (G_ks/freq) grad a + G_kt grad Phi
      const double p11 = pf * G1s * ga.c1(i, j) + G1t * gp1;
      const double p12 = pf * G1s * ga.c2(i, j) + G1t * gp2;
      const double p21 = pf * G2s * ga.c1(i, j) + G2t * gp1;
      const double p22 = pf * G2s * ga.c2(i, j) + G2t * gp2;
      out.grad_v.c1(i, j) += p11;
      out.grad_v.c2(i, j) += p12;

      // sym grad of the w increment:
      //   -sym(P1 (x) grad v~) - (G1/freq) Hess v~
      //   +sym(P2 (x) grad Phi) + (G2/freq) Hess Phi
      out.sym_grad_w.a11(i, j) +=
          -p11 * gv1 + p21 * gp1 - pf * G1 * ht.a11(i, j) + pf * G2 * hphi.a11(i, j);
      out.sym_grad_w.a12(i, j) += -0.5 * (p11 * gv2 + p12 * gv1) +
                                  0.5 * (p21 * gp2 + p22 * gp1) -
                                  pf * G1 * ht.a12(i, j) + pf * G2 * hphi.a12(i, j);
      out.sym_grad_w.a22(i, j) +=
          -p12 * gv2 + p22 * gp2 - pf * G1 * ht.a22(i, j) + pf * G2 * hphi.a22(i, j);
    }
  return out;
}

/// Plain-field sub-step: carried data seeded from grid stencils. Suitable when
/// the inputs are smooth relative to the grid.
inline std::pair<ScalarField, VectorField>
substep(const ScalarField& v, const VectorField& w, const ScalarField& v_tilde,
        const ScalarField& a, const ScalarField& Phi, double freq) {
  SubstepFields f{v, w, grad(v), sym_grad(w)};
  SubstepFields out = substep(f, v_tilde, a, Phi, freq);
  return {std::move(out.v), std::move(out.w)};
}

/// Assemble a SubsolutionState from plain (v, w): carried first-order data is
/// seeded from grid stencils, V from its elliptic solve; (rho, H) and the
/// bookkeeping target A are taken as given.
inline SubsolutionState make_state(const ScalarField& v, const VectorField& w,
                                   const ScalarField& rho, const SymMatrixField& H,
                                   const SymMatrixField& A, const PhaseSpec& phase,
                                   int q = 0) {
  SubsolutionState s;
  s.v = v;
  s.w = w;
  s.rho = rho;
  s.H = H;
  s.A = A;
  s.q = q;
  s.grad_v = grad(v);
  s.sym_grad_w = sym_grad(w);
  s.V = solve_V(v, phase, &s.grad_v);
  return s;
}

// --------------------------------------------------------------------- stage

/// Scalar diagnostics of one completed stage.
struct StageDiagnostics {
  /// Mollification scales actually used; 0 when the nominal scale fell below
  /// the 2h kernel bound, in which case that mollification is skipped (the
  /// identity is the closest grid representation of a sub-grid kernel, and
  /// widening the kernel instead would smear the first sub-step's carrier).
  double l1 = 0.0, l2 = 0.0;
  bool l1_subgrid = false, l2_subgrid = false;
  double lam = 0.0, tau = 0.0; ///< parameters the stage ran at
  double freq1 = 0.0, freq2 = 0.0;
  SubstepInfo sub1, sub2;
  double decompose_residual = 0.0;
  double min_a = 0.0, min_det_grad_phi = 0.0;
  double a_max = 0.0, rho_max = 0.0;
  double dv_c0 = 0.0, dv_c1 = 0.0, dv_c2 = 0.0;
  double dw_c0 = 0.0, dw_c1 = 0.0, dw_c2 = 0.0;
  double v_star_c2 = 0.0;
  double E_c0 = 0.0, E_c1 = 0.0;
  double V_mid_c0 = 0.0;          ///< interim potential after sub-step 1
  double input_mismatch_c0 = 0.0; ///< ||A - D(v,w) - rho^2(Id+H)||_0 of the input
};

struct StageResult {
  /// Advanced profile. rho/H are copied through from the input; callers that
  /// continue iterating re-split the recomputed deficit themselves.
  SubsolutionState state;
  /// E := D(v*,w*) - D(v,w) - rho^2 (Id + H), assembled directly from the
  /// carried fields (never from analytic error expansions).
  SymMatrixField E;
  StageDiagnostics diag;
};

/// One full corrugation stage: mollify the slow data at lam^(-tau), split
/// Id + H~ into a conformal amplitude and two flat coordinates, then run the
/// two rank-one sub-steps at frequencies lam^tau and lam^(2tau-1), with the
/// interim profile re-mollified at lam^(1-2tau). The amplitude a = a~ * rho~
/// confines every change to supp rho dilated by lam^(-tau).
inline StageResult stage(const SubsolutionState& in, const SymMatrixField& A,
                         const StageParams& params, const PhaseSpec& phase) {
  validate_stage_params(params);
  if (!A.grid || !A.grid->same_layout(*in.v.grid) || !same_grid(in.v, in.rho))
    throw ValidationError("stage.grid_mismatch", "state and target must share one grid");
  const GridPtr grid = in.v.grid;
  const Grid& g = *grid;

  StageResult res;
  res.diag.lam = params.lam;
  res.diag.tau = params.tau;
  res.diag.freq1 = std::pow(params.lam, params.tau);
  res.diag.freq2 = std::pow(params.lam, 2.0 * params.tau - 1.0);
  res.diag.rho_max = in.rho.values.maxCoeff();

  // mollification scales; a nominal scale below the 2h kernel bound means
  // the kernel cannot be represented on the grid, so that mollification is
  // skipped entirely rather than widened
  const double two_h = 2.0 * g.hmax() * (1.0 + 1e-12);
  double l1 = std::pow(params.lam, -params.tau);
  if (l1 < two_h) {
    l1 = 0.0;
    res.diag.l1_subgrid = true;
  }
  double l2 = std::pow(params.lam, 1.0 - 2.0 * params.tau);
  if (l2 < two_h) {
    l2 = 0.0;
    res.diag.l2_subgrid = true;
  }
  res.diag.l1 = l1;
  res.diag.l2 = l2;

  // nothing to add: the stage is the identity
  if (!(in.rho.values != 0.0).any()) {
    res.state = in;
    res.state.q = in.q + 1;
    res.E = SymMatrixField(grid);
    return res;
  }

  ScalarField rho_t = in.rho;
  SymMatrixField H_t = in.H;
  ScalarField v_t = in.v;
  if (l1 > 0.0) {
    Mollifier moll1(grid, l1);
    rho_t = moll1(in.rho);
    // the kernel is nonnegative, so the true convolution preserves sign; FFT
    // roundoff can leave O(1e-16) negatives inside the dilated support
    rho_t.values = rho_t.values.max(0.0);
    H_t = moll1(in.H);
    v_t = moll1(in.v);
  }

  SymMatrixField target(grid);
  target.a11 = 1.0 + H_t.a11;
  target.a12 = H_t.a12;
  target.a22 = 1.0 + H_t.a22;
  Decomposition dec;
  try {
    dec = decompose(target);
  } catch (const Error& err) {
    throw StageError("stage.decomposition_failed",
                     std::string("metric splitting of Id + mollified deficit "
                                 "direction failed: ") +
                         err.what());
  }
  res.diag.decompose_residual = dec.residual_c0;
  res.diag.min_a = dec.min_a;
  res.diag.min_det_grad_phi = dec.min_det_grad_phi;

  ScalarField amp(grid);
  amp.values = dec.a.values * rho_t.values; // supp amp == supp rho~ (a~ > 0)
  res.diag.a_max = amp.values.maxCoeff();

  const SubstepFields f0{in.v, in.w, in.grad_v, in.sym_grad_w};
  SubstepFields f1 = substep(f0, v_t, amp, dec.phi1, res.diag.freq1,
                             params.enforce_resolution, &res.diag.sub1);
  {
    const ScalarField V_mid = solve_V(f1.v, phase, &f1.grad_v);
    res.diag.V_mid_c0 = norm_c0(V_mid);
  }

  ScalarField v_mid_t = f1.v;
  if (l2 > 0.0) {
    Mollifier moll2(grid, l2);
    v_mid_t = moll2(f1.v);
  }
  SubstepFields f2 = substep(f1, v_mid_t, amp, dec.phi2, res.diag.freq2,
                             params.enforce_resolution, &res.diag.sub2);

  res.state.v = std::move(f2.v);
  res.state.w = std::move(f2.w);
  res.state.grad_v = std::move(f2.grad_v);
  res.state.sym_grad_w = std::move(f2.sym_grad_w);
  res.state.rho = in.rho;
  res.state.H = in.H;
  res.state.A = in.A;
  res.state.q = in.q + 1;
  res.state.V = solve_V(res.state.v, phase, &res.state.grad_v);

  const SymMatrixField D_before = D_from(in.v, in.grad_v, in.sym_grad_w, in.V, phase);
  const SymMatrixField D_after = D_from(res.state.v, res.state.grad_v,
                                        res.state.sym_grad_w, res.state.V, phase);

  SymMatrixField h_add(grid);
  h_add.a11 = in.rho.values.square() * (1.0 + in.H.a11);
  h_add.a12 = in.rho.values.square() * in.H.a12;
  h_add.a22 = in.rho.values.square() * (1.0 + in.H.a22);
  res.E = D_after - D_before - h_add;

  ScalarField dv(grid);
  dv.values = res.state.v.values - in.v.values;
  VectorField dgv(grid);
  dgv.c1 = res.state.grad_v.c1 - in.grad_v.c1;
  dgv.c2 = res.state.grad_v.c2 - in.grad_v.c2;
  VectorField dw(grid);
  dw.c1 = res.state.w.c1 - in.w.c1;
  dw.c2 = res.state.w.c2 - in.w.c2;
  res.diag.dv_c0 = norm_c0(dv);
  res.diag.dv_c1 = res.diag.dv_c0 + norm_c0(dgv); // carried first derivatives
  res.diag.dv_c2 = norm_c2(dv); // grid stencils; trust only when resolved
  res.diag.dw_c0 = norm_c0(dw);
  res.diag.dw_c1 = norm_c1(dw);
  res.diag.dw_c2 = norm_c2(dw);
  res.diag.v_star_c2 = norm_c2(res.state.v);
  res.diag.E_c0 = norm_c0(res.E);
  res.diag.E_c1 = norm_c1(res.E);
  res.diag.input_mismatch_c0 = norm_c0(A - D_before - h_add);
  return res;
}

// ------------------------------------------------------------------ schedule

/// Stage ladder: lam[q+1] = lam[q]^b with b = 1 + 9 sigma/(1 - 5 beta), and
/// delta[q] = (lam[q]/M)^(-2 beta). delta is valid for q = 1..q_max+2 and lam
/// for q = 0..q_max+2; lam[0] = lam[1]^(1/b) is the base frequency of the
/// first stage, so that with tau = b stage q runs its sub-steps at lam[q+1]
/// and lam[q+1]^2/lam[q]. tau[q] is the oscillation exponent stage q actually
/// uses; it defaults to b everywhere, but the first stage may run a larger
/// tau1: its top frequency lam[0]^(2 tau - 1) sits far below the bound that
/// pins the later stages, and a larger tau shrinks both the mollification
/// scale lam[0]^(-tau) (the dominant stage-error term on coarse ladders) and
/// the boundary collar the cutoff needs.
struct Schedule {
  double beta = 0.0, sigma = 0.0, b = 0.0, M = 0.0, r0 = 0.0;
  int q_max = 0;
  std::vector<double> delta; ///< delta[q], q = 1..q_max+2 (delta[0] unused)
  std::vector<double> lam;   ///< lam[q],  q = 0..q_max+2
  std::vector<double> tau;   ///< tau[q],  q = 1..q_max (tau[0] unused)
};

/// Build the stage ladder from (beta, sigma, M, delta1). Realistic grids need
/// M well below 1: delta1 is the measured initial deficit amplitude, and
/// lam1 = M * delta1^(-1/(2 beta)) must land in the resolvable band. Pass a
/// null grid to skip the resolvability check (pure arithmetic).
inline Schedule make_schedule(double beta, double sigma, double M, double delta1,
                              int q_max, const GridPtr& grid, double r0 = 0.18,
                              double tau1 = 0.0) {
  if (!(beta > 0.0 && beta < 0.2))
    throw ValidationError("schedule.bad_beta",
                          "beta must lie in (0, 1/5), got " + std::to_string(beta));
  if (!(sigma > 0.0 && sigma < 1.0))
    throw ValidationError("schedule.bad_sigma",
                          "sigma must lie in (0, 1), got " + std::to_string(sigma));
  if (!(M > 0.0))
    throw ValidationError("schedule.bad_m",
                          "M must be positive, got " + std::to_string(M));
  if (!(delta1 > 0.0 && delta1 < 1.0))
    throw ValidationError("schedule.bad_delta",
                          "delta1 must lie in (0, 1), got " + std::to_string(delta1));
  if (q_max < 0)
    throw ValidationError("schedule.bad_qmax", "q_max must be nonnegative");
  if (!(r0 > 0.0 && r0 < 0.5))
    throw ValidationError("schedule.bad_r0",
                          "r0 must lie in (0, 0.5), got " + std::to_string(r0));
  if (tau1 != 0.0 && !(tau1 > 1.0))
    throw ValidationError("schedule.bad_tau",
                          "tau1 must exceed 1 (or be 0 for the default b), got " +
                              std::to_string(tau1));

  Schedule s;
  s.beta = beta;
  s.sigma = sigma;
  s.M = M;
  s.r0 = r0;
  s.q_max = q_max;
  s.b = 1.0 + 9.0 * sigma / (1.0 - 5.0 * beta);
  s.delta.assign(std::size_t(q_max) + 3, 0.0);
  s.lam.assign(std::size_t(q_max) + 3, 0.0);
  s.tau.assign(std::size_t(q_max) + 1, s.b);
  if (q_max >= 1 && tau1 != 0.0) s.tau[1] = tau1;
  s.delta[1] = delta1;
  s.lam[1] = M * std::pow(delta1, -1.0 / (2.0 * beta));
  if (!(s.lam[1] > 1.0))
    throw ValidationError("schedule.bad_lambda",
                          "lam1 = M*delta1^(-1/(2 beta)) = " +
                              std::to_string(s.lam[1]) + " must exceed 1");
  s.lam[0] = std::pow(s.lam[1], 1.0 / s.b);
  for (int q = 2; q <= q_max + 2; ++q) {
    s.lam[std::size_t(q)] = std::pow(s.lam[std::size_t(q) - 1], s.b);
    s.delta[std::size_t(q)] = std::pow(s.lam[std::size_t(q)] / M, -2.0 * beta);
  }

  if (grid) {
    const double nyquist = 1.0 / (4.0 * grid->hmax());
    int feasible = 0;
    for (int q = 1; q <= q_max; ++q) {
      if (std::pow(s.lam[std::size_t(q) - 1], 2.0 * s.tau[std::size_t(q)] - 1.0) <= nyquist)
        feasible = q;
      else
        break;
    }
    if (feasible < q_max)
      throw ValidationError(
          "schedule.unresolvable",
          "stage " + std::to_string(feasible + 1) + " would oscillate at " +
              std::to_string(std::pow(s.lam[std::size_t(feasible)],
                                      2.0 * s.tau[std::size_t(feasible) + 1] - 1.0)) +
              ", beyond the grid bound " + std::to_string(nyquist) +
              "; largest feasible q_max on this grid is " + std::to_string(feasible));
  }
  return s;
}

/// Same ladder, anchored by lam1 instead of M.
inline Schedule make_schedule_lambda1(double beta, double sigma, double lambda1,
                                      double delta1, int q_max, const GridPtr& grid,
                                      double r0 = 0.18, double tau1 = 0.0) {
  if (!(lambda1 > 1.0))
    throw ValidationError("schedule.bad_lambda",
                          "lam1 must exceed 1, got " + std::to_string(lambda1));
  if (!(beta > 0.0 && beta < 0.2))
    throw ValidationError("schedule.bad_beta",
                          "beta must lie in (0, 1/5), got " + std::to_string(beta));
  if (!(delta1 > 0.0 && delta1 < 1.0))
    throw ValidationError("schedule.bad_delta",
                          "delta1 must lie in (0, 1), got " + std::to_string(delta1));
  const double M = lambda1 * std::pow(delta1, 1.0 / (2.0 * beta));
  return make_schedule(beta, sigma, M, delta1, q_max, grid, r0, tau1);
}

// ----------------------------------------------------------------- iteration

namespace detail {

/// C^2 polynomial step: 0 below 0, 1 above 1.
inline double smoothstep5(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

/// C^2 one-sided clamp: 0 for s <= 0, s - w/2 for s >= w, monotone
/// cubic-quartic blend between, so the clamped amplitude field stays C^2.
inline double soft_clamp_positive(double s, double w) {
  if (s <= 0.0) return 0.0;
  if (w <= 0.0) return s;
  const double t = s / w;
  if (t >= 1.0) return w * (t - 0.5);
  return w * t * t * t * (1.0 - 0.5 * t);
}

} // namespace detail

/// Stage-q target amplitude squared: chi(boundary distance) * clamp_+(rho^2 -
/// floor), where chi transitions smoothly over [r0 2^-(q+1), r0 2^-q] and the
/// clamp transition width is floor/2. Zero within the collar, C^2 everywhere.
inline ScalarField stage_target_sq(const ScalarField& rho, double floor_delta,
                                   double r0, int q) {
  const Grid& g = *rho.grid;
  ScalarField out(rho.grid);
  const double lo = r0 * std::pow(2.0, -(q + 1));
  const double hi = r0 * std::pow(2.0, -q);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j)) continue;
      const double chi =
          detail::smoothstep5((g.boundary_distance(i, j) - lo) / (hi - lo));
      if (chi == 0.0) continue;
      const double r = rho.values(i, j);
      out.values(i, j) =
          chi * detail::soft_clamp_positive(r * r - floor_delta, 0.5 * floor_delta);
    }
  return out;
}

/// Everything recorded about one iteration stage.
struct StageRecord {
  int q = 0; ///< index of the state this stage produced
  double delta = 0.0, lam = 0.0, tau = 0.0;
  double floor_delta = 0.0; ///< clamp floor used in the target
  double target_max = 0.0;  ///< max of the cutoff amplitude squared
  StageDiagnostics diag;
  double c1_ratio = 0.0; ///< ||v_q - v_{q-1}||_1 / delta_q^{1/2}
  double rho_next_max = 0.0;
  double H_next_c0 = 0.0;
  double H_bound = 0.0; ///< 4 lam_{q+1}^{-alpha/b}, recorded, not asserted
  bool H_bound_ok = true;
  double min_trace = 0.0; ///< min deficit trace before the split
  bool pd_ok = true;
};

struct IterateOptions {
  bool enforce_resolution = true;
};

struct IterateResult {
  std::vector<SubsolutionState> states; ///< states[0] = initial
  std::vector<StageRecord> records;     ///< one per completed stage
  /// True when every scheduled stage ran. A run that finishes all stages is
  /// completed even if the purely diagnostic split after the final stage
  /// loses positive-definiteness; stop_reason then carries the label.
  bool completed = true;
  std::string stop_reason;
};

/// Run the stage ladder: for each stage build the cutoff target from the
/// current deficit, corrugate, then recompute D = A - D(v,w) directly and
/// re-split it. Stops early with a labeled reason when positive-definiteness
/// of the split is lost while stages remain.
inline IterateResult iterate(const SubsolutionState& initial, const SymMatrixField& A,
                             const Schedule& sch, const PhaseSpec& phase,
                             const IterateOptions& opt = {}) {
  IterateResult res;
  res.states.push_back(initial);
  for (int i = 1; i <= sch.q_max; ++i) {
    const SubsolutionState& cur = res.states.back();
    const int qi = i - 1;
    const double floor_delta = sch.delta[std::size_t(qi) + 2];
    const ScalarField tgt = stage_target_sq(cur.rho, floor_delta, sch.r0, qi);

    // mollification dilates the target support by l1; the boundary collar of
    // the cutoff must stay strictly wider, or updates would reach the boundary
    // (a sub-grid scale skips the mollification, so it dilates nothing)
    const double hmax = cur.v.grid->hmax();
    const double tau_i = sch.tau[std::size_t(i)];
    double l1_q = std::pow(sch.lam[std::size_t(qi)], -tau_i);
    if (l1_q < 2.0 * hmax * (1.0 + 1e-12)) l1_q = 0.0;
    const double collar = sch.r0 * std::pow(2.0, -(qi + 1));
    if (l1_q + hmax >= collar)
      throw ValidationError("schedule.collar_too_thin",
                            "stage " + std::to_string(i) + " mollifies at scale " +
                                std::to_string(l1_q) + " but the boundary collar is only " +
                                std::to_string(collar) +
                                "; increase r0 or the base frequency");

    SubsolutionState step_in = cur;
    step_in.rho.values = tgt.values.sqrt();

    StageParams p;
    p.delta = sch.delta[std::size_t(i)];
    p.lam = sch.lam[std::size_t(i) - 1];
    p.tau = tau_i;
    p.gamma = 1.0 + norm_c0(cur.v) + norm_c0(cur.grad_v);
    p.alpha = std::min(0.95, std::max(0.5, 1.02 * std::log(2.0) / std::log(p.lam)));
    p.enforce_resolution = opt.enforce_resolution;

    StageRecord rec;
    rec.q = i;
    rec.delta = p.delta;
    rec.lam = p.lam;
    rec.tau = p.tau;
    rec.floor_delta = floor_delta;
    rec.target_max = tgt.values.maxCoeff();

    StageResult sr = stage(step_in, A, p, phase);
    rec.diag = sr.diag;
    rec.c1_ratio = sr.diag.dv_c1 / std::sqrt(p.delta);

    const SymMatrixField Dn = A - D_of(sr.state, phase);
    double min_trace = std::numeric_limits<double>::infinity();
    for (int jj = 0; jj < cur.v.grid->ny; ++jj)
      for (int ii = 0; ii < cur.v.grid->nx; ++ii)
        if (cur.v.grid->is_active(ii, jj))
          min_trace = std::min(min_trace, Dn.a11(ii, jj) + Dn.a22(ii, jj));
    rec.min_trace = min_trace;

    // Positive-definiteness loss is fatal only while stages remain: a further
    // stage would need the split. After the last stage the split is purely
    // diagnostic, so the run still counts as completed; the label is kept.
    const bool final_stage = (i == sch.q_max);
    bool split_ok = true;
    DeficitSplit sp;
    try {
      sp = split_deficit(Dn);
    } catch (const SolveError& err) {
      split_ok = false;
      rec.pd_ok = false;
      res.stop_reason = err.what();
      if (final_stage) {
        SubsolutionState next = std::move(sr.state);
        next.rho = ScalarField(next.v.grid);
        next.H = SymMatrixField(next.v.grid);
        res.states.push_back(std::move(next));
      } else {
        res.completed = false;
      }
    }
    if (split_ok) {
      rec.pd_ok = sp.pd_ok;
      rec.rho_next_max = sp.rho.values.maxCoeff();
      rec.H_next_c0 = norm_c0(sp.H);
      rec.H_bound = 4.0 * std::pow(sch.lam[std::size_t(i) + 1], -p.alpha / sch.b);
      rec.H_bound_ok = rec.H_next_c0 <= rec.H_bound;
      SubsolutionState next = std::move(sr.state);
      next.rho = std::move(sp.rho);
      next.H = std::move(sp.H);
      res.states.push_back(std::move(next));
      if (!sp.pd_ok) {
        res.stop_reason = "positive-definiteness of the deficit split lost after stage " +
                          std::to_string(i) + " (min trace " +
                          std::to_string(rec.min_trace) + ")";
        if (!final_stage) res.completed = false;
      }
    }
    res.records.push_back(rec);
    if (!res.completed) break;
  }
  return res;
}

} // namespace lmce

#endif
