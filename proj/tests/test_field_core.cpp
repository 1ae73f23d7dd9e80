#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lmce/calculus.hpp"
#include "lmce/field_io.hpp"
#include "lmce/fields.hpp"
#include "lmce/grid.hpp"
#include "lmce/norms.hpp"
#include "lmce/rng.hpp"

using namespace lmce;

namespace {

double max_abs(const Plane<double>& p) { return p.abs().maxCoeff(); }

bool bitwise_equal(const Plane<double>& a, const Plane<double>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  return std::memcmp(a.data(), b.data(), sizeof(double) * std::size_t(a.size())) == 0;
}

} // namespace

TEST_CASE("rectangle grid basics") {
  auto g = unit_square(9);
  CHECK(g->nx == 9);
  CHECK(g->ny == 9);
  CHECK(g->hx == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(g->rectangular());
  CHECK(g->is_boundary(0, 4));
  CHECK(g->is_boundary(4, 8));
  CHECK(g->is_interior(4, 4));
  CHECK(!g->is_exterior(4, 4));
  CHECK(g->boundary_distance(4, 4) == doctest::Approx(0.5));
  CHECK(g->boundary_distance(1, 4) == doctest::Approx(0.125));
  CHECK(g->boundary_distance(0, 4) == doctest::Approx(0.0));
  CHECK(g->x1(8) == doctest::Approx(1.0));

  auto r = make_rectangle(11, 9, 0.1, 0.25, -1.0, 2.0);
  CHECK(r->x1(0) == doctest::Approx(-1.0));
  CHECK(r->x2(8) == doctest::Approx(4.0));
  CHECK(r->same_layout(*r));
  CHECK(!r->same_layout(*g));

  CHECK_THROWS_AS(make_rectangle(8, 9, 0.1, 0.1), ValidationError);
  try {
    make_rectangle(8, 9, 0.1, 0.1);
  } catch (const ValidationError& e) {
    CHECK(e.code() == "grid.too_small");
  }
  CHECK_THROWS_AS(make_rectangle(9, 9, 0.0, 0.1), ValidationError);
}

TEST_CASE("disk grid mask") {
  auto g = disk(33);
  CHECK(!g->rectangular());
  int interior = 0, boundary = 0;
  for (int i = 0; i < g->nx; ++i)
    for (int j = 0; j < g->ny; ++j) {
      if (g->is_interior(i, j)) ++interior;
      if (g->is_boundary(i, j)) ++boundary;
    }
  CHECK(interior >= 9);
  CHECK(boundary >= 8);
  // every boundary node touches some non-interior neighbor, every interior
  // node is surrounded by active nodes
  for (int i = 0; i < g->nx; ++i)
    for (int j = 0; j < g->ny; ++j) {
      if (g->is_interior(i, j)) {
        CHECK(g->is_active(i - 1, j));
        CHECK(g->is_active(i + 1, j));
        CHECK(g->is_active(i, j - 1));
        CHECK(g->is_active(i, j + 1));
      }
    }
  // corners of the bounding box are exterior
  CHECK(g->is_exterior(0, 0));
  CHECK(g->boundary_distance(16, 16) == doctest::Approx(0.45));
}

TEST_CASE("stencils are exact on quadratics") {
  auto g = make_rectangle(17, 23, 0.05, 0.04, -0.3, 0.2);
  auto f = sample(g, [](double x, double y) {
    return 1.5 - 2.25 * x + 0.5 * y + 3.0 * x * x - 1.75 * x * y + 2.5 * y * y;
  });
  auto gf = grad(f);
  auto hf = hessian(f);
  auto g1 = sample(g, [](double x, double y) { return -2.25 + 6.0 * x - 1.75 * y; });
  auto g2 = sample(g, [](double x, double y) { return 0.5 - 1.75 * x + 5.0 * y; });
  double e1 = max_abs(gf.c1 - g1.values);
  double e2 = max_abs(gf.c2 - g2.values);
  CHECK(e1 <= 1e-11);
  CHECK(e2 <= 1e-11);
  CHECK(max_abs(hf.a11 - 6.0) <= 1e-9);
  CHECK(max_abs(hf.a12 + 1.75) <= 1e-9);
  CHECK(max_abs(hf.a22 - 5.0) <= 1e-9);
}

TEST_CASE("stencils are linear") {
  auto g = unit_square(17);
  auto a = sample(g, [](double x, double y) { return std::sin(3 * x + y); });
  auto b = sample(g, [](double x, double y) { return std::exp(x - y); });
  Plane<double> combo = 2.5 * a.values - 1.25 * b.values;
  Plane<double> lhs = dx(combo, g->hx);
  Plane<double> rhs = 2.5 * dx(a.values, g->hx) - 1.25 * dx(b.values, g->hx);
  CHECK(max_abs(lhs - rhs) <= 1e-12 * max_abs(rhs));
}

TEST_CASE("curl curl annihilates symmetric gradients") {
  // Interior: O(h^2). Outermost lines: O(h) only, because composed one-sided
  // first-derivative stencils lose an order there; consumers that rely on the
  // annihilation evaluate on interior nodes.
  auto err = [](int n, int collar) {
    auto g = unit_square(n);
    auto w = sample_vector(
        g, [](double x, double y) { return std::sin(2 * x + y); },
        [](double x, double y) { return std::cos(x - 2 * y); });
    auto r = curl_curl(sym_grad(w));
    NormOptions opt;
    opt.collar = collar;
    return norm_c0(r, opt);
  };
  const double i33 = err(33, 3), i65 = err(65, 3);
  CHECK(i65 <= 5e-4);
  CHECK(i33 / i65 >= 3.3);
  CHECK(i33 / i65 <= 4.6);
  const double e33 = err(33, 0), e65 = err(65, 0);
  CHECK(e65 <= 0.05);
  CHECK(e33 / e65 >= 1.7);
  CHECK(e33 / e65 <= 2.6);
}

TEST_CASE("curl curl of w * Id is the Laplacian, exact on quadratics") {
  auto g = unit_square(17);
  auto w = sample(g, [](double x, double y) { return x * x + 3.0 * y * y; });
  auto r = curl_curl(scalar_times_id(w));
  CHECK(max_abs(r.values - 8.0) <= 1e-10);
}

TEST_CASE("trapezoid integration is exact for bilinear integrands") {
  auto g = make_rectangle(13, 19, 1.0 / 12.0, 2.0 / 18.0);
  auto f = sample(g, [](double x, double y) { return 2.0 + x - 3.0 * y + 5.0 * x * y; });
  CHECK(integrate(f) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("trapezoid integration on the disk approximates the area") {
  auto g = disk(129);
  auto one = sample(g, [](double, double) { return 1.0; });
  const double area = integrate(one);
  const double exact = M_PI * 0.45 * 0.45;
  CHECK(area <= exact + 1e-12);
  CHECK(area >= exact - 0.05);
}

TEST_CASE("cofactor pairing matches the closed form on quadratics") {
  auto g = unit_square(17);
  auto f = sample(g, [](double x, double y) {
    return 3.0 * x * x - 1.75 * x * y + 2.5 * y * y;
  });
  auto hf = hessian(f); // [[6, -1.75], [-1.75, 5]]
  SymMatrixField A(g);
  A.a11.setConstant(2.0);
  A.a12.setConstant(0.5);
  A.a22.setConstant(1.0);
  auto p = cofactor_pairing(hf, A);
  // 5*2 - 2*(-1.75)*0.5 + 6*1 = 17.75
  CHECK(max_abs(p.values - 17.75) <= 1e-9);
}

TEST_CASE("C0, C1, C2 norms on exact quadratics") {
  auto g = unit_square(33);
  auto f = sample(g, [](double x, double y) { return x * x + y; });
  CHECK(norm_c0(f) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(norm_c1(f) == doctest::Approx(4.0).epsilon(1e-11));
  CHECK(norm_c2(f) == doctest::Approx(6.0).epsilon(1e-9));

  ScalarField spike(g);
  spike.values(1, 1) = 7.0;
  CHECK(norm_c0(spike) == doctest::Approx(7.0));
  NormOptions collar2;
  collar2.collar = 2;
  CHECK(norm_c0(spike, collar2) == doctest::Approx(0.0));
}

TEST_CASE("vector and matrix norms take componentwise maxima") {
  auto g = unit_square(17);
  auto w = sample_vector(g, [](double x, double) { return 3.0 * x; },
                         [](double, double y) { return -5.0 * y; });
  CHECK(norm_c0(w) == doctest::Approx(5.0));
  CHECK(norm_c1(w) == doctest::Approx(10.0).epsilon(1e-11));
  SymMatrixField A(g);
  A.a12.setConstant(-2.5);
  CHECK(norm_c0(A) == doctest::Approx(2.5));
}

TEST_CASE("Hoelder seminorm estimate agrees with the dense pair oracle") {
  // f depends on x1 only, so the true discrete seminorm is attained on pairs
  // sharing x2 and can be enumerated densely along one row.
  auto g = unit_square(65);
  const double alpha = 0.5;
  auto oracle_1d = [&](const Plane<double>& p) {
    double best = 0.0;
    for (int i = 0; i < g->nx; ++i)
      for (int k = i + 1; k < g->nx; ++k) {
        const double q = std::abs(p(k, 3) - p(i, 3)) /
                         std::pow((k - i) * g->hx, alpha);
        best = std::max(best, q);
      }
    return best;
  };

  auto f0 = sample(g, [](double x, double) { return std::sin(4 * M_PI * x); });
  const double o0 = oracle_1d(f0.values);
  const double e0 = holder_seminorm(f0, 0, alpha);
  CHECK(e0 <= o0 * (1 + 1e-12));
  CHECK(e0 >= 0.9 * o0);

  auto f1 = sample(g, [](double x, double) { return -std::cos(4 * M_PI * x) / (4 * M_PI); });
  const double o1 = oracle_1d(dx(f1.values, g->hx));
  const double e1 = holder_seminorm(f1, 1, alpha);
  CHECK(e1 <= o1 * (1 + 1e-12));
  CHECK(e1 >= 0.9 * o1);

  auto f2 = sample(g, [](double x, double) {
    return -std::sin(4 * M_PI * x) / (16 * M_PI * M_PI);
  });
  const double o2 = oracle_1d(dxx(f2.values, g->hx));
  const double e2 = holder_seminorm(f2, 2, alpha);
  CHECK(e2 <= o2 * (1 + 1e-12));
  CHECK(e2 >= 0.9 * o2);
}

TEST_CASE("Hoelder seminorm is homogeneous and vanishes on constants") {
  auto g = unit_square(33);
  auto f = sample(g, [](double x, double y) { return std::sin(5 * x) * y; });
  ScalarField f3 = f;
  f3.values *= 3.0;
  const double a = holder_seminorm(f, 0, 0.5), b = holder_seminorm(f3, 0, 0.5);
  CHECK(b == doctest::Approx(3.0 * a).epsilon(1e-12));
  auto c = sample(g, [](double, double) { return 4.25; });
  CHECK(holder_seminorm(c, 0, 0.5) == 0.0);
  CHECK(norm_holder(c, 0, 0.5) == doctest::Approx(4.25));
}

TEST_CASE("field files round-trip bit for bit") {
  auto g = make_rectangle(11, 9, 0.1, 0.125, -1.0, 2.0);
  ScalarField f(g);
  Rng rng(2026);
  for (int j = 0; j < g->ny; ++j)
    for (int i = 0; i < g->nx; ++i) f.values(i, j) = rng.uniform(-5.0, 5.0);
  f.values(0, 0) = 0.0;
  f.values(1, 0) = -0.0;
  f.values(2, 0) = 1e-300;
  f.values(3, 0) = -1e300;
  f.values(4, 0) = 1.0 / 3.0;

  std::stringstream buf;
  write_field(buf, f);
  auto f2 = read_scalar_field(buf, "buffer");
  REQUIRE(f2.grid->same_layout(*g));
  CHECK(bitwise_equal(f.values, f2.values));
  CHECK(std::signbit(f2.values(1, 0)));

  VectorField w(g);
  for (int j = 0; j < g->ny; ++j)
    for (int i = 0; i < g->nx; ++i) {
      w.c1(i, j) = rng.normal();
      w.c2(i, j) = rng.normal();
    }
  std::stringstream bufw;
  write_field(bufw, w);
  auto w2 = read_vector_field(bufw, "buffer");
  CHECK(bitwise_equal(w.c1, w2.c1));
  CHECK(bitwise_equal(w.c2, w2.c2));

  SymMatrixField A(g);
  A.a11.setConstant(1.25);
  A.a12.setConstant(-0.125);
  A.a22.setConstant(3.5);
  std::stringstream bufA;
  write_field(bufA, A);
  auto A2 = read_sym_field(bufA, "buffer");
  CHECK(bitwise_equal(A.a11, A2.a11));
  CHECK(bitwise_equal(A.a12, A2.a12));
  CHECK(bitwise_equal(A.a22, A2.a22));
}

TEST_CASE("field files survive a disk round-trip") {
  auto g = unit_square(9);
  auto f = sample(g, [](double x, double y) { return std::sin(x) + std::cos(3 * y); });
  const std::string path = "io_roundtrip.tmp";
  save_field(path, f);
  auto f2 = load_scalar_field(path);
  CHECK(bitwise_equal(f.values, f2.values));
  std::remove(path.c_str());
}

TEST_CASE("malformed field files are rejected with stable codes") {
  std::stringstream bad1("nonsense\n");
  CHECK_THROWS_AS(read_scalar_field(bad1, "bad1"), ValidationError);
  std::stringstream bad2("# 9 9 0.125 0.125 0 0 1\n1,2,3\n");
  try {
    read_scalar_field(bad2, "bad2");
    CHECK(false);
  } catch (const ValidationError& e) {
    CHECK(e.code() == "io.short_row");
  }
  std::stringstream bad3("# 9 9 0.125 0.125 0 0 2\n");
  try {
    read_scalar_field(bad3, "bad3");
    CHECK(false);
  } catch (const ValidationError& e) {
    CHECK(e.code() == "io.short_file");
  }
}

TEST_CASE("rng is deterministic and in range") {
  Rng a(42), b(42);
  for (int k = 0; k < 100; ++k) {
    const double u = a.uniform01();
    CHECK(u == b.uniform01());
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  Rng c(7);
  for (int k = 0; k < 50; ++k) {
    const auto n = c.integer(10);
    CHECK(n < 10);
  }
  Rng d(7), e(8);
  CHECK(d.uniform01() != e.uniform01());
}

TEST_CASE("finiteness checks catch NaN") {
  auto g = unit_square(9);
  ScalarField f(g);
  CHECK(all_finite(f));
  f.values(4, 4) = std::nan("");
  CHECK(!all_finite(f));
}
