#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lmce/deficit.hpp"
#include "lmce/rng.hpp"

using namespace lmce;

namespace {
constexpr double kPi = 3.14159265358979323846;

ScalarField seeded_boundary(GridPtr g, unsigned long long seed, double amp) {
  Rng rng(seed);
  double c[3][3], p[3][3];
  for (int k = 0; k < 3; ++k)
    for (int l = 0; l < 3; ++l) {
      c[k][l] = rng.uniform(-amp, amp) / (1 + k + l);
      p[k][l] = rng.uniform(0.0, 2 * kPi);
    }
  return sample(g, [&](double x, double y) {
    double v = 0;
    for (int k = 0; k < 3; ++k)
      for (int l = 0; l < 3; ++l)
        v += c[k][l] * std::cos(kPi * (k * x + l * y) + p[k][l]);
    return v;
  });
}

} // namespace

TEST_CASE("F vanishes identically for the right-angle phase") {
  auto g = unit_square(33);
  auto phase = make_constant_phase(g, kPi / 2, 0.9);
  auto v = sample(g, [](double x, double y) { return std::sin(3 * x) * y + x * x; });
  auto F = F_of_v(v, phase);
  CHECK(F.values.abs().maxCoeff() == 0.0);
}

TEST_CASE("F of a constant is the cot Laplacian") {
  auto g = unit_square(33);
  auto phase = make_phase(g, "pi/2 + 0.2*x1 + 0.1*x2^2", 0.8);
  auto one = sample(g, [](double, double) { return 1.0; });
  auto F = F_of_v(one, phase);
  CHECK((F.values - phase.lap_cot.values).abs().maxCoeff() <= 1e-15);
}

TEST_CASE("F matches the closed form for a tilted phase") {
  auto g = unit_square(65);
  auto phase = make_phase(g, "pi/2 + 0.2*x1", 0.9);
  auto v = sample(g, [](double x, double) { return x; });
  auto F = F_of_v(v, phase);
  for (int i = 2; i < g->nx - 2; i += 6) {
    const double x = g->x1(i);
    const double sec2 = 1.0 / (std::cos(0.2 * x) * std::cos(0.2 * x));
    const double expected = -0.4 * sec2 - 0.08 * x * sec2 * std::tan(0.2 * x);
    CHECK(F(i, 7) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("F is linear in v") {
  auto g = unit_square(33);
  auto phase = make_phase(g, "pi/2 + 0.15*sin(pi*x1)*x2", 0.8);
  auto v1 = sample(g, [](double x, double y) { return x * x + y; });
  auto v2 = sample(g, [](double x, double y) { return std::cos(2 * x) * y * y; });
  ScalarField comb(g);
  comb.values = 2.0 * v1.values - 3.0 * v2.values;
  auto F = F_of_v(comb, phase);
  auto F1 = F_of_v(v1, phase), F2 = F_of_v(v2, phase);
  CHECK((F.values - (2.0 * F1.values - 3.0 * F2.values)).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("V is exactly zero whenever F is") {
  auto g = unit_square(65);
  auto v = sample(g, [](double x, double y) { return x * y + std::sin(x + y); });
  for (double th : {kPi / 2, kPi / 4}) {
    auto phase = make_constant_phase(g, th, 0.5);
    auto V = solve_V(v, phase);
    CHECK(V.values.abs().maxCoeff() == 0.0);
  }
}

TEST_CASE("V solves the Poisson problem and is linear in v") {
  auto g = unit_square(65);
  auto phase = make_phase(g, "pi/2 + 0.2*x1", 0.9);
  auto v1 = sample(g, [](double x, double y) { return std::sin(kPi * x) * y; });
  auto v2 = sample(g, [](double x, double y) { return x * x * (1 - y); });
  auto V1 = solve_V(v1, phase), V2 = solve_V(v2, phase);
  // boundary identically zero
  for (int i = 0; i < g->nx; ++i) {
    CHECK(V1(i, 0) == 0.0);
    CHECK(V1(i, g->ny - 1) == 0.0);
  }
  // linearity within solver tolerance
  ScalarField comb(g);
  comb.values = v1.values + v2.values;
  auto Vc = solve_V(comb, phase);
  CHECK((Vc.values - V1.values - V2.values).abs().maxCoeff() <= 1e-8);
  // interior equation: lap V = F at interior nodes (away from the edge rows)
  auto lapV = laplacian(V1);
  auto F = F_of_v(v1, phase);
  NormOptions collar2;
  collar2.collar = 2;
  ScalarField resid(g);
  resid.values = lapV.values - F.values;
  CHECK(norm_c0(resid, collar2) <= 5e-3);
}

TEST_CASE("repeated V solves hit the cache bitwise") {
  auto g = unit_square(65);
  auto phase = make_phase(g, "pi/2 + 0.1*x1*x2", 0.9);
  auto v = seeded_boundary(g, 11, 0.5);
  auto Va = solve_V(v, phase);
  auto Vb = solve_V(v, phase);
  CHECK((Va.values == Vb.values).all());
}

TEST_CASE("V perturbations are controlled by v perturbations") {
  auto g = unit_square(65);
  auto phase = make_phase(g, "pi/2 + 0.2*x1 + 0.1*x2", 0.9);
  Rng rng(99);
  double worst = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    auto v = seeded_boundary(g, 100 + trial, 0.5);
    ScalarField vp(g);
    const double eps = rng.uniform(1e-4, 1e-2);
    auto bump = sample(g, [&](double x, double y) {
      return std::sin(kPi * (trial + 1) * x) * std::sin(kPi * y);
    });
    vp.values = v.values + eps * bump.values;
    auto dV = solve_V(vp, phase);
    auto V = solve_V(v, phase);
    ScalarField dv(g);
    dv.values = vp.values - v.values;
    const double num = (dV.values - V.values).abs().maxCoeff();
    const double den = norm_c0(dv) + norm_c0(grad(dv));
    worst = std::max(worst, num / den);
  }
  // elliptic constant times the phase coefficients; generous but finite pin
  CHECK(worst <= 0.2);
}

TEST_CASE("deficit of the zero pair vanishes") {
  auto g = unit_square(33);
  auto phase = make_phase(g, "pi/2 + 0.2*x1", 0.9);
  auto D = D_of(ScalarField(g), VectorField(g), phase);
  CHECK(norm_c0(D) == 0.0);
}

TEST_CASE("deficit of a pure gradient square") {
  auto g = unit_square(33);
  auto phase = make_constant_phase(g, kPi / 2, 0.9);
  auto v = sample(g, [](double x, double y) { return 0.5 * (x * x + y * y); });
  auto D = D_of(v, VectorField(g), phase);
  auto oracle = sample_vector(g, [](double x, double) { return x; },
                              [](double, double y) { return y; });
  SymMatrixField expected = outer(oracle, oracle);
  expected.a11 *= 0.5;
  expected.a12 *= 0.5;
  expected.a22 *= 0.5;
  CHECK(norm_c0(D - expected) <= 1e-15);
}

TEST_CASE("deficit of a symmetric shear") {
  auto g = unit_square(33);
  auto phase = make_constant_phase(g, kPi / 2, 0.9);
  auto w = sample_vector(g, [](double, double y) { return y; },
                         [](double x, double) { return x; });
  auto D = D_of(ScalarField(g), w, phase);
  CHECK((D.a11.abs().maxCoeff()) <= 1e-15);
  CHECK((D.a12 - 1.0).abs().maxCoeff() <= 1e-15);
  CHECK((D.a22.abs().maxCoeff()) <= 1e-15);
}

TEST_CASE("initial data for zero boundary and right-angle phase") {
  auto g = unit_square(129);
  auto phase = make_constant_phase(g, kPi / 2, 0.9);
  auto s = initial_data(g, ScalarField(g), phase);
  CHECK(s.q == 0);
  CHECK(s.v.values.abs().maxCoeff() == 0.0);
  CHECK(s.V.values.abs().maxCoeff() == 0.0);
  CHECK(s.w.c1.abs().maxCoeff() == 0.0);
  // A = psi Id with psi the unit-square torsion function
  CHECK(s.A.a12.abs().maxCoeff() == 0.0);
  CHECK((s.A.a11 - s.A.a22).abs().maxCoeff() == 0.0);
  const int c = (g->nx - 1) / 2;
  CHECK(s.A.a11(c, c) == doctest::Approx(0.07367135).epsilon(2e-3));
  // rho = sqrt(psi), zero on the boundary, positive inside
  CHECK(s.rho(0, 17) == 0.0);
  CHECK(s.rho(c, c) == doctest::Approx(std::sqrt(0.07367135)).epsilon(2e-3));
  CHECK(norm_c0(s.H) == 0.0);
  // Definition-style identity: A - D(v0, w0) = rho^2 (Id + H) exactly
  SymMatrixField D0 = D_of(s, phase);
  SymMatrixField lhs = s.A - D0;
  CHECK((lhs.a11 - s.rho.values * s.rho.values).abs().maxCoeff() <= 1e-15);
  CHECK(lhs.a12.abs().maxCoeff() <= 1e-15);
}

TEST_CASE("initial data for saddle boundary data scales the torsion field") {
  auto g = unit_square(129);
  auto phase = make_constant_phase(g, kPi / 2, 0.9);
  auto gb = sample(g, [](double x, double y) { return x * y; });
  auto s = initial_data(g, gb, phase);
  // u = x1 x2 discrete-exactly; det grad^2 u = -1; psi = 2 * torsion
  const int c = (g->nx - 1) / 2;
  ScalarField psi(g);
  psi.values = s.rho.values * s.rho.values;
  CHECK(psi(c, c) == doctest::Approx(2 * 0.07367135).epsilon(2e-3));
  ScalarField cc = curl_curl(s.A);
  double worst = 0.0;
  for (int j = 0; j < g->ny; ++j)
    for (int i = 0; i < g->nx; ++i)
      if (g->is_interior(i, j)) worst = std::max(worst, std::abs(cc(i, j) + 1.0));
  CHECK(worst <= 1e-8);
}

TEST_CASE("initial data satisfies the curl curl identity at second order") {
  double worst[2];
  int idx = 0;
  for (int n : {65, 129}) {
    auto g = unit_square(n);
    auto phase = make_phase(g, "pi/2 + 0.2*x1 + 0.1*x2", 0.9);
    auto gb = seeded_boundary(g, 7, 0.2);
    auto s = initial_data(g, gb, phase);
    ScalarField cc = curl_curl(s.A);
    double w = 0.0;
    for (int j = 0; j < g->ny; ++j)
      for (int i = 0; i < g->nx; ++i)
        if (g->is_interior(i, j)) w = std::max(w, std::abs(cc(i, j) + 1.0));
    worst[idx++] = w;
    // psi stays positive inside
    CHECK(s.rho.values.minCoeff() >= 0.0);
    // the factorization identity holds as assembled
    SymMatrixField lhs = s.A - D_of(s, phase);
    CHECK((lhs.a11 - s.rho.values * s.rho.values).abs().maxCoeff() <= 1e-14);
    CHECK(lhs.a12.abs().maxCoeff() <= 1e-14);
  }
  CHECK(worst[0] <= 100.0 * (1.0 / 64) * (1.0 / 64));
  CHECK(worst[0] / worst[1] >= 2.5);
  CHECK(worst[0] / worst[1] <= 6.0);
}

TEST_CASE("split recovers simple deficits") {
  auto g = unit_square(17);
  SymMatrixField D(g);
  D.a11.setConstant(0.04);
  D.a22.setConstant(0.04);
  auto s = split_deficit(D);
  CHECK((s.rho.values - 0.2).abs().maxCoeff() <= 1e-15);
  CHECK(norm_c0(s.H) <= 1e-15);
  CHECK(s.pd_ok);

  SymMatrixField D2(g);
  D2.a11.setConstant(0.03);
  D2.a22.setConstant(0.01);
  auto s2 = split_deficit(D2);
  CHECK((s2.rho.values * s2.rho.values - 0.02).abs().maxCoeff() <= 1e-16);
  CHECK((s2.H.a11 - 0.5).abs().maxCoeff() <= 1e-14);
  CHECK((s2.H.a22 + 0.5).abs().maxCoeff() <= 1e-14);
  CHECK(s2.H.a12.abs().maxCoeff() == 0.0);
  CHECK(s2.pd_ok);
}

TEST_CASE("split inverts the factorization on admissible fields") {
  auto g = unit_square(65);
  Rng rng(5);
  auto rho = sample(g, [&](double x, double y) {
    return 0.1 + 0.2 * std::sin(kPi * x) * std::sin(kPi * y);
  });
  // trace-free H with spectral radius below 1
  auto hd = sample(g, [](double x, double y) { return 0.3 * std::sin(2 * x + y); });
  auto ho = sample(g, [](double x, double y) { return 0.3 * std::cos(x - 2 * y); });
  SymMatrixField D(g);
  D.a11 = rho.values * rho.values * (1.0 + hd.values);
  D.a12 = rho.values * rho.values * ho.values;
  D.a22 = rho.values * rho.values * (1.0 - hd.values);
  auto s = split_deficit(D);
  CHECK((s.rho.values - rho.values).abs().maxCoeff() <= 1e-12);
  CHECK((s.H.a11 - hd.values).abs().maxCoeff() <= 1e-12);
  CHECK((s.H.a12 - ho.values).abs().maxCoeff() <= 1e-12);
  CHECK(s.pd_ok);
}

TEST_CASE("split flags indefinite normalized parts and rejects negative traces") {
  auto g = unit_square(17);
  SymMatrixField D(g);
  D.a11.setConstant(0.4);
  D.a22.setConstant(-0.2); // trace positive, but H = diag(3, -3) leaves Id+H indefinite
  auto s = split_deficit(D);
  CHECK_FALSE(s.pd_ok);

  SymMatrixField neg(g);
  neg.a11.setConstant(-0.1);
  neg.a22.setConstant(-0.1);
  try {
    split_deficit(neg);
    CHECK(false);
  } catch (const SolveError& e) {
    CHECK(e.code() == std::string("deficit.negative_trace"));
  }
}

TEST_CASE("split keeps tiny deficits at zero without dividing") {
  auto g = unit_square(17);
  SymMatrixField D(g);
  D.a11.setConstant(1e-18);
  D.a22.setConstant(-0.5e-18);
  auto s = split_deficit(D, 1e-12);
  CHECK(norm_c0(s.H) == 0.0);
  CHECK(s.rho.values.maxCoeff() <= 1e-9);
  CHECK(s.pd_ok);
}
