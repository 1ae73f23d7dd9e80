#ifndef LMCE_PHASE_HPP
#define LMCE_PHASE_HPP

#include <cmath>
#include <string>

#include "lmce/calculus.hpp"
#include "lmce/expr.hpp"

namespace lmce {

/// The phase field Theta with the derived trigonometric fields the deficit
/// algebra consumes. For the analytic kind, grad_cot and lap_cot come from
/// closed-form derivatives of the expression; finite differences never touch
/// the phase.
struct PhaseSpec {
  enum class Kind { analytic_expression, gridded };

  ScalarField theta;
  ScalarField sin_theta, cos_theta, cot_theta;
  VectorField grad_cot;
  ScalarField lap_cot;
  double c2 = 0.0; // validated lower bound for |sin Theta|
  Kind kind = Kind::analytic_expression;
};

namespace detail {

inline void validate_phase_range(const ScalarField& theta, double c2) {
  const Grid& g = *theta.grid;
  constexpr double pi = 3.14159265358979323846;
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) {
      if (!g.is_active(i, j)) continue;
      const double t = theta(i, j);
      if (!(t > -pi && t < pi))
        throw ValidationError("phase.out_of_range",
                              "theta = " + std::to_string(t) + " outside (-pi, pi) at node (" +
                                  std::to_string(i) + "," + std::to_string(j) + "), x=(" +
                                  std::to_string(g.x1(i)) + "," + std::to_string(g.x2(j)) + ")");
      if (std::abs(std::sin(t)) < c2)
        throw ValidationError("phase.sin_too_small",
                              "|sin theta| = " + std::to_string(std::abs(std::sin(t))) +
                                  " < c2 = " + std::to_string(c2) + " at node (" +
                                  std::to_string(i) + "," + std::to_string(j) + "), x=(" +
                                  std::to_string(g.x1(i)) + "," + std::to_string(g.x2(j)) + ")");
    }
}

} // namespace detail

/// Build a PhaseSpec from an expression for Theta. Requires |sin Theta| >= c2
/// at every active node and -pi < Theta < pi.
inline PhaseSpec make_phase(GridPtr grid, const ExprPtr& theta_expr, double c2) {
  if (!(c2 > 0.0))
    throw ValidationError("phase.bad_c2", "c2 must be positive, got " + std::to_string(c2));
  PhaseSpec p;
  p.kind = PhaseSpec::Kind::analytic_expression;
  p.c2 = c2;
  p.theta = sample(grid, [&](double x, double y) { return theta_expr->eval(x, y); });
  detail::validate_phase_range(p.theta, c2);

  const ExprPtr t1 = derivative(theta_expr, 1), t2 = derivative(theta_expr, 2);
  const ExprPtr t11 = derivative(t1, 1), t22 = derivative(t2, 2);

  p.sin_theta = ScalarField(grid);
  p.cos_theta = ScalarField(grid);
  p.cot_theta = ScalarField(grid);
  p.grad_cot = VectorField(grid);
  p.lap_cot = ScalarField(grid);
  for (int j = 0; j < grid->ny; ++j)
    for (int i = 0; i < grid->nx; ++i) {
      const double x = grid->x1(i), y = grid->x2(j);
      const double th = p.theta(i, j);
      const double s = std::sin(th), c = std::cos(th);
      const double csc2 = 1.0 / (s * s), cot = c / s;
      const double d1 = t1->eval(x, y), d2 = t2->eval(x, y);
      const double lap = t11->eval(x, y) + t22->eval(x, y);
      p.sin_theta(i, j) = s;
      p.cos_theta(i, j) = c;
      p.cot_theta(i, j) = cot;
      // d cot = -csc^2 dTheta;  lap cot = csc^2 (2 cot |grad Theta|^2 - lap Theta)
      p.grad_cot.c1(i, j) = -csc2 * d1;
      p.grad_cot.c2(i, j) = -csc2 * d2;
      p.lap_cot(i, j) = csc2 * (2.0 * cot * (d1 * d1 + d2 * d2) - lap);
    }
  return p;
}

inline PhaseSpec make_phase(GridPtr grid, const std::string& theta_src, double c2) {
  return make_phase(std::move(grid), parse_expression(theta_src), c2);
}

/// Constant phase convenience (the Monge-Ampere regime is theta = pi/2).
inline PhaseSpec make_constant_phase(GridPtr grid, double theta0, double c2) {
  return make_phase(std::move(grid), expr_const(theta0), c2);
}

/// PhaseSpec from nodal theta values; the cot derivatives fall back to grid
/// stencils, which pollutes lap cot at O(h^2) — prefer the analytic kind.
inline PhaseSpec make_gridded_phase(const ScalarField& theta, double c2) {
  if (!(c2 > 0.0))
    throw ValidationError("phase.bad_c2", "c2 must be positive, got " + std::to_string(c2));
  detail::validate_phase_range(theta, c2);
  PhaseSpec p;
  p.kind = PhaseSpec::Kind::gridded;
  p.c2 = c2;
  p.theta = theta;
  p.sin_theta = ScalarField(theta.grid);
  p.cos_theta = ScalarField(theta.grid);
  p.cot_theta = ScalarField(theta.grid);
  p.sin_theta.values = theta.values.sin();
  p.cos_theta.values = theta.values.cos();
  p.cot_theta.values = p.cos_theta.values / p.sin_theta.values;
  p.grad_cot = grad(p.cot_theta);
  p.lap_cot = laplacian(p.cot_theta);
  return p;
}

} // namespace lmce

#endif
