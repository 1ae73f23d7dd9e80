#ifndef LMCE_POISSON_HPP
#define LMCE_POISSON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <vector>

#include "lmce/calculus.hpp"
#include "lmce/norms.hpp"
#include "lmce/rng.hpp"

namespace lmce {

/// Dirichlet problem  Delta u = f + div zeta  in the interior, u = g on the
/// boundary nodes. div zeta is discretized with the same central-difference
/// stencils as grad so discrete duality holds.
struct PoissonProblem {
  ScalarField rhs;                      // f
  std::optional<VectorField> div_rhs;   // zeta
  ScalarField boundary;                 // g, read at boundary nodes only
};

namespace detail {

// --- geometric multigrid on rectangles ------------------------------------

struct MgLevel {
  int nx = 0, ny = 0;
  double hx = 0, hy = 0;
  Plane<double> u, f, r;
};

inline void mg_smooth(MgLevel& L, int sweeps) {
  const double wx = 1.0 / (L.hx * L.hx), wy = 1.0 / (L.hy * L.hy);
  const double diag = 2.0 * (wx + wy);
  for (int s = 0; s < sweeps; ++s)
    for (int color = 0; color < 2; ++color)
      for (int j = 1; j < L.ny - 1; ++j) {
        int i = 1 + ((j + color) & 1);
        for (; i < L.nx - 1; i += 2)
          L.u(i, j) = (wx * (L.u(i + 1, j) + L.u(i - 1, j)) +
                       wy * (L.u(i, j + 1) + L.u(i, j - 1)) - L.f(i, j)) /
                      diag;
      }
}

inline void mg_residual(MgLevel& L) {
  const double wx = 1.0 / (L.hx * L.hx), wy = 1.0 / (L.hy * L.hy);
  L.r.setZero(L.nx, L.ny);
  for (int j = 1; j < L.ny - 1; ++j)
    for (int i = 1; i < L.nx - 1; ++i)
      L.r(i, j) = L.f(i, j) - (wx * (L.u(i + 1, j) - 2 * L.u(i, j) + L.u(i - 1, j)) +
                               wy * (L.u(i, j + 1) - 2 * L.u(i, j) + L.u(i, j - 1)));
}

inline void mg_restrict(const MgLevel& fine, MgLevel& coarse) {
  coarse.f.setZero(coarse.nx, coarse.ny);
  for (int J = 1; J < coarse.ny - 1; ++J)
    for (int I = 1; I < coarse.nx - 1; ++I) {
      const int i = 2 * I, j = 2 * J;
      coarse.f(I, J) =
          (4 * fine.r(i, j) +
           2 * (fine.r(i + 1, j) + fine.r(i - 1, j) + fine.r(i, j + 1) + fine.r(i, j - 1)) +
           fine.r(i + 1, j + 1) + fine.r(i - 1, j + 1) + fine.r(i + 1, j - 1) +
           fine.r(i - 1, j - 1)) /
          16.0;
    }
}

inline void mg_prolong_add(const MgLevel& coarse, MgLevel& fine) {
  for (int J = 0; J < coarse.ny - 1; ++J)
    for (int I = 0; I < coarse.nx - 1; ++I) {
      const int i = 2 * I, j = 2 * J;
      const double c00 = coarse.u(I, J), c10 = coarse.u(I + 1, J);
      const double c01 = coarse.u(I, J + 1), c11 = coarse.u(I + 1, J + 1);
      fine.u(i, j) += c00;
      fine.u(i + 1, j) += 0.5 * (c00 + c10);
      fine.u(i, j + 1) += 0.5 * (c00 + c01);
      fine.u(i + 1, j + 1) += 0.25 * (c00 + c10 + c01 + c11);
    }
  for (int J = 0; J < coarse.ny; ++J) fine.u(fine.nx - 1, 2 * J) += coarse.u(coarse.nx - 1, J);
  for (int I = 0; I < coarse.nx; ++I) fine.u(2 * I, fine.ny - 1) += coarse.u(I, coarse.ny - 1);
  for (int J = 0; J < coarse.ny - 1; ++J)
    fine.u(fine.nx - 1, 2 * J + 1) +=
        0.5 * (coarse.u(coarse.nx - 1, J) + coarse.u(coarse.nx - 1, J + 1));
  for (int I = 0; I < coarse.nx - 1; ++I)
    fine.u(2 * I + 1, fine.ny - 1) +=
        0.5 * (coarse.u(I, coarse.ny - 1) + coarse.u(I + 1, coarse.ny - 1));
}

inline void mg_coarse_solve(MgLevel& L) {
  const int m = (L.nx - 2) * (L.ny - 2);
  const double wx = 1.0 / (L.hx * L.hx), wy = 1.0 / (L.hy * L.hy);
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd b(m);
  auto id = [&](int i, int j) { return (j - 1) * (L.nx - 2) + (i - 1); };
  for (int j = 1; j < L.ny - 1; ++j)
    for (int i = 1; i < L.nx - 1; ++i) {
      const int k = id(i, j);
      A(k, k) = -2.0 * (wx + wy);
      if (i > 1) A(k, id(i - 1, j)) = wx;
      if (i < L.nx - 2) A(k, id(i + 1, j)) = wx;
      if (j > 1) A(k, id(i, j - 1)) = wy;
      if (j < L.ny - 2) A(k, id(i, j + 1)) = wy;
      b(k) = L.f(i, j); // homogeneous Dirichlet on coarse levels
    }
  Eigen::VectorXd x = A.partialPivLu().solve(b);
  L.u.setZero(L.nx, L.ny);
  for (int j = 1; j < L.ny - 1; ++j)
    for (int i = 1; i < L.nx - 1; ++i) L.u(i, j) = x(id(i, j));
}

inline void mg_vcycle(std::vector<MgLevel>& levels, std::size_t k) {
  MgLevel& L = levels[k];
  if (k + 1 == levels.size()) {
    mg_coarse_solve(L);
    return;
  }
  mg_smooth(L, 2);
  mg_residual(L);
  mg_restrict(L, levels[k + 1]);
  levels[k + 1].u.setZero(levels[k + 1].nx, levels[k + 1].ny);
  mg_vcycle(levels, k + 1);
  mg_prolong_add(levels[k + 1], L);
  mg_smooth(L, 2);
}

inline bool mg_applicable(const Grid& g) {
  if (!g.rectangular()) return false;
  // need at least one full coarsening and a small direct coarse problem
  int nx = g.nx, ny = g.ny;
  while ((nx - 1) % 2 == 0 && (ny - 1) % 2 == 0 && nx > 17 && ny > 17) {
    nx = (nx - 1) / 2 + 1;
    ny = (ny - 1) / 2 + 1;
  }
  return (nx - 2) * (ny - 2) <= 4096;
}

inline ScalarField mg_solve(const Grid& g, const Plane<double>& f,
                            const Plane<double>& gb, double tol, int max_cycles,
                            double* final_residual) {
  std::vector<MgLevel> levels;
  {
    MgLevel L;
    L.nx = g.nx;
    L.ny = g.ny;
    L.hx = g.hx;
    L.hy = g.hy;
    L.u = gb; // boundary rows carry g; interior starts at 0
    for (int j = 1; j < g.ny - 1; ++j)
      for (int i = 1; i < g.nx - 1; ++i) L.u(i, j) = 0.0;
    L.f = f;
    L.r.setZero(g.nx, g.ny);
    levels.push_back(std::move(L));
  }
  while (true) {
    const MgLevel& top = levels.back();
    if ((top.nx - 1) % 2 != 0 || (top.ny - 1) % 2 != 0 || top.nx <= 17 || top.ny <= 17)
      break;
    MgLevel C;
    C.nx = (top.nx - 1) / 2 + 1;
    C.ny = (top.ny - 1) / 2 + 1;
    C.hx = top.hx * 2;
    C.hy = top.hy * 2;
    C.u.setZero(C.nx, C.ny);
    C.f.setZero(C.nx, C.ny);
    C.r.setZero(C.nx, C.ny);
    levels.push_back(std::move(C));
  }
  double fmax = 0.0;
  for (int j = 1; j < g.ny - 1; ++j)
    for (int i = 1; i < g.nx - 1; ++i) fmax = std::max(fmax, std::abs(f(i, j)));
  const double target = tol * (1.0 + fmax);
  // evaluating Delta_h u rounds at ~eps |u| / h^2, so that is the smallest
  // residual any iteration can certify; stop once it is reached
  const double inv_h2 = 1.0 / (g.hx * g.hx) + 1.0 / (g.hy * g.hy);
  double res = 0.0;
  for (int cycle = 0; cycle <= max_cycles; ++cycle) {
    mg_residual(levels[0]);
    res = levels[0].r.abs().maxCoeff();
    const double attainable =
        16.0 * std::numeric_limits<double>::epsilon() *
        (levels[0].u.abs().maxCoeff() * inv_h2 + fmax);
    if (res <= target + attainable) {
      if (final_residual) *final_residual = res;
      ScalarField out;
      out.grid = std::shared_ptr<const Grid>(&g, [](const Grid*) {});
      out.values = std::move(levels[0].u);
      return out;
    }
    if (cycle == max_cycles) break;
    mg_vcycle(levels, 0);
  }
  throw SolveError("poisson.no_convergence",
                   "multigrid did not reach tolerance within the cycle cap", res);
}

// --- conjugate gradients on masked grids -----------------------------------

inline ScalarField cg_solve(const Grid& g, const Plane<double>& f,
                            const Plane<double>& gb, double tol, double* final_residual) {
  Eigen::ArrayXXi index = Eigen::ArrayXXi::Constant(g.nx, g.ny, -1);
  std::vector<std::pair<int, int>> nodes;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.is_interior(i, j)) {
        index(i, j) = int(nodes.size());
        nodes.emplace_back(i, j);
      }
  const int m = int(nodes.size());
  const double wx = 1.0 / (g.hx * g.hx), wy = 1.0 / (g.hy * g.hy);
  const double diag = 2.0 * (wx + wy);

  // solve (-Delta) u = -f, SPD; boundary values folded into the RHS
  Eigen::VectorXd b(m);
  for (int k = 0; k < m; ++k) {
    auto [i, j] = nodes[std::size_t(k)];
    double v = -f(i, j);
    if (index(i - 1, j) < 0) v += wx * gb(i - 1, j);
    if (index(i + 1, j) < 0) v += wx * gb(i + 1, j);
    if (index(i, j - 1) < 0) v += wy * gb(i, j - 1);
    if (index(i, j + 1) < 0) v += wy * gb(i, j + 1);
    b(k) = v;
  }
  auto apply = [&](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    for (int k = 0; k < m; ++k) {
      auto [i, j] = nodes[std::size_t(k)];
      double v = diag * x(k);
      if (int t = index(i - 1, j); t >= 0) v -= wx * x(t);
      if (int t = index(i + 1, j); t >= 0) v -= wx * x(t);
      if (int t = index(i, j - 1); t >= 0) v -= wy * x(t);
      if (int t = index(i, j + 1); t >= 0) v -= wy * x(t);
      y(k) = v;
    }
  };

  double fmax = 0.0;
  for (int k = 0; k < m; ++k) {
    auto [i, j] = nodes[std::size_t(k)];
    fmax = std::max(fmax, std::abs(f(i, j)));
  }
  const double target = tol * (1.0 + fmax);
  // same attainable-precision floor as the multigrid stop: applying the
  // operator rounds at ~eps |u| / h^2
  double gbmax = 0.0;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.is_boundary(i, j)) gbmax = std::max(gbmax, std::abs(gb(i, j)));
  auto attainable = [&](const Eigen::VectorXd& u) {
    return 16.0 * std::numeric_limits<double>::epsilon() *
           ((u.lpNorm<Eigen::Infinity>() + gbmax) * (2.0 * (wx + wy)) + fmax);
  };

  Eigen::VectorXd x = Eigen::VectorXd::Zero(m), r = b, p = b, Ap(m);
  double rr = r.squaredNorm();
  const int cap = std::max(2000, 20 * std::max(g.nx, g.ny));
  double res_inf = r.lpNorm<Eigen::Infinity>();
  for (int it = 0; it < cap && res_inf > target + attainable(x) && rr > 0.0; ++it) {
    apply(p, Ap);
    const double alpha = rr / p.dot(Ap);
    x += alpha * p;
    r -= alpha * Ap;
    const double rr2 = r.squaredNorm();
    p = r + (rr2 / rr) * p;
    rr = rr2;
    res_inf = r.lpNorm<Eigen::Infinity>();
  }
  if (res_inf > target + attainable(x))
    throw SolveError("poisson.no_convergence",
                     "conjugate gradients did not reach tolerance", res_inf);
  ScalarField out;
  out.grid = std::shared_ptr<const Grid>(&g, [](const Grid*) {});
  out.values = gb;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i)
      if (g.is_exterior(i, j)) out.values(i, j) = 0.0;
  for (int k = 0; k < m; ++k) {
    auto [i, j] = nodes[std::size_t(k)];
    out.values(i, j) = x(k);
  }
  if (final_residual) *final_residual = res_inf;
  return out;
}

} // namespace detail

/// Solve the Dirichlet problem. Converges when the interior residual
/// satisfies ||Delta_h u - f_h||_inf <= tol * (1 + ||f_h||_inf), up to the
/// floating-point floor ~eps * ||u||_inf / h^2 at which the residual itself
/// can be evaluated; throws SolveError carrying the final residual otherwise.
/// Boundary nodes return g exactly.
inline ScalarField solve_poisson(const PoissonProblem& p, double tol = 1e-10) {
  if (!p.rhs.grid) throw ValidationError("poisson.no_grid", "rhs has no grid");
  const GridPtr grid = p.rhs.grid;
  if (!(tol > 0.0)) throw ValidationError("poisson.bad_tol", "tol must be positive");
  if (p.boundary.grid && !p.boundary.grid->same_layout(*grid))
    throw ValidationError("poisson.grid_mismatch", "boundary lives on a different grid");
  Plane<double> f = p.rhs.values;
  if (p.div_rhs) {
    if (!p.div_rhs->grid->same_layout(*grid))
      throw ValidationError("poisson.grid_mismatch", "div_rhs lives on a different grid");
    f += divergence(*p.div_rhs).values;
  }
  Plane<double> gb = p.boundary.grid ? p.boundary.values
                                     : Plane<double>::Zero(grid->nx, grid->ny);
  constexpr int kMaxCycles = 200;
  double res = 0.0;
  ScalarField out;
  if (detail::mg_applicable(*grid))
    out = detail::mg_solve(*grid, f, gb, tol, kMaxCycles, &res);
  else
    out = detail::cg_solve(*grid, f, gb, tol, &res);
  out.grid = grid; // replace the non-owning alias used internally
  return out;
}

inline ScalarField solve_poisson(const ScalarField& f, const ScalarField& g,
                                 double tol = 1e-10) {
  PoissonProblem p;
  p.rhs = f;
  p.boundary = g;
  return solve_poisson(p, tol);
}

/// Harmonic extension of boundary data g.
inline ScalarField harmonic_extension(const ScalarField& g, double tol = 1e-10) {
  if (!g.grid) throw ValidationError("poisson.no_grid", "boundary field has no grid");
  PoissonProblem p;
  p.rhs = ScalarField(g.grid);
  p.boundary = g;
  return solve_poisson(p, tol);
}

struct EllipticBoundStats {
  double max_ratio = 0.0;
  double mean_ratio = 0.0;
  int trials = 0;
};

/// Seeded randomized check of the uniform bound ||u||_0 <= C (||f||_0 +
/// ||zeta||_0): for random smooth right-hand sides (finite Fourier sums with
/// wavenumbers <= 8) returns the max and mean of the observed ratios.
inline EllipticBoundStats elliptic_bound_probe(GridPtr grid, int trials,
                                               std::uint64_t seed) {
  if (trials < 1) throw ValidationError("probe.bad_trials", "trials must be >= 1");
  Rng rng(seed);
  EllipticBoundStats stats;
  stats.trials = trials;
  const double Lx = (grid->nx - 1) * grid->hx, Ly = (grid->ny - 1) * grid->hy;
  for (int t = 0; t < trials; ++t) {
    constexpr int kMax = 8;
    // random truncated Fourier data; coefficients decay ~ 1/(k+l) to keep the
    // sums smooth at every grid size
    std::vector<double> af, az1, az2, pf, pz1, pz2;
    for (int k = 1; k <= kMax; ++k)
      for (int l = 1; l <= kMax; ++l) {
        const double decay = 1.0 / (k + l);
        af.push_back(rng.uniform(-1.0, 1.0) * decay);
        az1.push_back(rng.uniform(-1.0, 1.0) * decay);
        az2.push_back(rng.uniform(-1.0, 1.0) * decay);
        pf.push_back(rng.uniform(0.0, 6.283185307179586));
        pz1.push_back(rng.uniform(0.0, 6.283185307179586));
        pz2.push_back(rng.uniform(0.0, 6.283185307179586));
      }
    auto fourier = [&](const std::vector<double>& a, const std::vector<double>& ph,
                       double x, double y) {
      double s = 0.0;
      std::size_t n = 0;
      for (int k = 1; k <= kMax; ++k)
        for (int l = 1; l <= kMax; ++l, ++n)
          s += a[n] * std::sin(M_PI * k * x / Lx + ph[n]) *
               std::sin(M_PI * l * y / Ly + ph[n] * 0.5);
      return s;
    };
    PoissonProblem p;
    p.rhs = sample(grid, [&](double x, double y) { return fourier(af, pf, x, y); });
    VectorField zeta = sample_vector(
        grid, [&](double x, double y) { return fourier(az1, pz1, x, y); },
        [&](double x, double y) { return fourier(az2, pz2, x, y); });
    p.div_rhs = zeta;
    p.boundary = ScalarField(grid);
    auto u = solve_poisson(p, 1e-10);
    const double denom = norm_c0(p.rhs) + norm_c0(zeta);
    const double ratio = denom > 0 ? norm_c0(u) / denom : 0.0;
    stats.max_ratio = std::max(stats.max_ratio, ratio);
    stats.mean_ratio += ratio / trials;
  }
  return stats;
}

} // namespace lmce

#endif
