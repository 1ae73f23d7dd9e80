#ifndef LMCE_MOLLIFY_HPP
#define LMCE_MOLLIFY_HPP

#include <cmath>
#include <limits>
#include <vector>

#include "lmce/fft2.hpp"
#include "lmce/norms.hpp"

namespace lmce {

/// Discretized radial bump kernel c*exp(-1/(1-|x/l|^2)) on |x| < l, with the
/// node weights renormalized to unit mass.
struct MollifierKernel {
  double l = 0.0;
  int rx = 0, ry = 0;        // node radius per axis
  Plane<double> weights;     // (2rx+1) x (2ry+1), offset (di+rx, dj+ry)
};

namespace detail {

inline double bump_profile(double t2) { // t2 = |x/l|^2
  return t2 < 1.0 ? std::exp(-1.0 / (1.0 - t2)) : 0.0;
}

} // namespace detail

inline MollifierKernel make_mollifier(const Grid& g, double l) {
  if (!(l >= 2.0 * g.hmax()))
    throw ValidationError("mollify.scale_too_small",
                          "length-scale " + std::to_string(l) +
                              " is below the resolvability bound 2*max(hx,hy) = " +
                              std::to_string(2.0 * g.hmax()));
  MollifierKernel k;
  k.l = l;
  k.rx = int(std::floor(l / g.hx));
  k.ry = int(std::floor(l / g.hy));
  k.weights.setZero(2 * k.rx + 1, 2 * k.ry + 1);
  long double sum = 0.0L;
  for (int dj = -k.ry; dj <= k.ry; ++dj)
    for (int di = -k.rx; di <= k.rx; ++di) {
      const double t2 =
          (di * g.hx * di * g.hx + dj * g.hy * dj * g.hy) / (l * l);
      const double w = detail::bump_profile(t2);
      k.weights(di + k.rx, dj + k.ry) = w;
      sum += w;
    }
  k.weights /= double(sum);
  return k;
}

namespace detail {

/// Exact anisotropic squared Euclidean distance transform to the support of
/// `support` (Felzenszwalb-Huttenlocher parabola envelopes, one pass per
/// axis). Returns squared distances; 0 on support nodes.
inline Plane<double> distance_sq_to_support(const Grid& g,
                                            const Plane<double>& field) {
  constexpr double kInf = 1e30;
  const int nx = g.nx, ny = g.ny;
  Plane<double> d(nx, ny);
  // pass 1: per column distance along x
  const double hx2 = g.hx * g.hx;
  std::vector<double> f(std::size_t(nx), 0.0), dd(std::size_t(nx), 0.0);
  std::vector<int> v(std::size_t(nx), 0);
  std::vector<double> z(std::size_t(nx) + 1, 0.0);
  constexpr double kSentinel = std::numeric_limits<double>::infinity();
  auto envelope_1d = [&](int n, double h2) {
    int kk = 0;
    v[0] = 0;
    z[0] = -kSentinel;
    z[1] = kSentinel;
    for (int q = 1; q < n; ++q) {
      double s;
      while (true) {
        const int p = v[std::size_t(kk)];
        s = ((f[std::size_t(q)] + h2 * q * q) - (f[std::size_t(p)] + h2 * p * p)) /
            (2.0 * h2 * (q - p));
        if (s <= z[std::size_t(kk)]) {
          --kk;
          continue;
        }
        break;
      }
      ++kk;
      v[std::size_t(kk)] = q;
      z[std::size_t(kk)] = s;
      z[std::size_t(kk) + 1] = kSentinel;
    }
    kk = 0;
    for (int q = 0; q < n; ++q) {
      while (z[std::size_t(kk) + 1] < q) ++kk;
      const int p = v[std::size_t(kk)];
      dd[std::size_t(q)] = h2 * (q - p) * (q - p) + f[std::size_t(p)];
    }
  };
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) f[std::size_t(i)] = field(i, j) != 0.0 ? 0.0 : kInf;
    envelope_1d(nx, hx2);
    for (int i = 0; i < nx; ++i) d(i, j) = dd[std::size_t(i)];
  }
  // pass 2: per row envelope along y
  const double hy2 = g.hy * g.hy;
  f.resize(std::size_t(ny));
  dd.resize(std::size_t(ny));
  v.resize(std::size_t(ny));
  z.resize(std::size_t(ny) + 1);
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < ny; ++j) f[std::size_t(j)] = d(i, j);
    envelope_1d(ny, hy2);
    for (int j = 0; j < ny; ++j) d(i, j) = dd[std::size_t(j)];
  }
  return d;
}

} // namespace detail

/// Reusable mollification operator: one kernel build (and one kernel FFT, on
/// the fast path) shared by any number of plane convolutions at the same
/// scale.
class Mollifier {
public:
  Mollifier(GridPtr grid, double l)
      : grid_(std::move(grid)), kernel_(make_mollifier(*grid_, l)) {
    use_fft_ = grid_->rectangular() && std::max(kernel_.rx, kernel_.ry) > 20;
    if (use_fft_) {
      const int P = 2 * grid_->nx - 2, Q = 2 * grid_->ny - 2;
      Plane<double> kimg = Plane<double>::Zero(P, Q);
      for (int dj = -kernel_.ry; dj <= kernel_.ry; ++dj)
        for (int di = -kernel_.rx; di <= kernel_.rx; ++di) {
          const int p = ((di % P) + P) % P, q = ((dj % Q) + Q) % Q;
          kimg(p, q) += kernel_.weights(di + kernel_.rx, dj + kernel_.ry);
        }
      kernel_fft_ = fft2(kimg);
    }
  }

  const MollifierKernel& kernel() const { return kernel_; }
  double scale() const { return kernel_.l; }

  Plane<double> apply(const Plane<double>& v) const {
    return use_fft_ ? apply_fft(v) : apply_direct(v);
  }

  ScalarField operator()(const ScalarField& f) const {
    ScalarField out;
    out.grid = f.grid;
    out.values = apply(f.values);
    return out;
  }
  VectorField operator()(const VectorField& f) const {
    VectorField out;
    out.grid = f.grid;
    out.c1 = apply(f.c1);
    out.c2 = apply(f.c2);
    return out;
  }
  SymMatrixField operator()(const SymMatrixField& f) const {
    SymMatrixField out;
    out.grid = f.grid;
    out.a11 = apply(f.a11);
    out.a12 = apply(f.a12);
    out.a22 = apply(f.a22);
    return out;
  }

private:
  int reflect(int t, int n) const { // periodic index of the even extension
    const int P = 2 * n - 2;
    t = ((t % P) + P) % P;
    return t < n ? t : P - t;
  }

  Plane<double> apply_direct(const Plane<double>& v) const {
    const int nx = grid_->nx, ny = grid_->ny;
    Plane<double> out(nx, ny);
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        long double acc = 0.0L;
        for (int dj = -kernel_.ry; dj <= kernel_.ry; ++dj) {
          const int jj = reflect(j + dj, ny);
          for (int di = -kernel_.rx; di <= kernel_.rx; ++di) {
            const double w = kernel_.weights(di + kernel_.rx, dj + kernel_.ry);
            if (w == 0.0) continue;
            acc += w * static_cast<long double>(v(reflect(i + di, nx), jj));
          }
        }
        out(i, j) = double(acc);
      }
    return out;
  }

  Plane<double> apply_fft(const Plane<double>& v) const {
    const int nx = grid_->nx, ny = grid_->ny;
    const int P = 2 * nx - 2, Q = 2 * ny - 2;
    Plane<double> ext(P, Q);
    for (int q = 0; q < Q; ++q) {
      const int j = q < ny ? q : Q - q;
      for (int p = 0; p < P; ++p) ext(p, q) = v(p < nx ? p : P - p, j);
    }
    Plane<double> conv = ifft2_real(CPlane(fft2(ext) * kernel_fft_));
    Plane<double> out = conv.block(0, 0, nx, ny);
    // kill FFT roundoff outside the dilated support so that
    // supp(out) lies inside supp(v) + B_l exactly
    if ((v != 0.0).any()) {
      const Plane<double> d2 = detail::distance_sq_to_support(*grid_, v);
      const double cut = kernel_.l * kernel_.l * (1.0 + 1e-12);
      for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
          if (d2(i, j) > cut) out(i, j) = 0.0;
    } else {
      out.setZero();
    }
    return out;
  }

  GridPtr grid_;
  MollifierKernel kernel_;
  bool use_fft_ = false;
  CPlane kernel_fft_;
};

template <typename Field>
Field mollify(const Field& f, double l) {
  return Mollifier(f.grid, l)(f);
}

/// The four mollification-estimate ratios (lhs/rhs with C = 1):
///  seminorm_gain  : [f~]_{r+s}            vs  l^{-s}   [f]_r
///  approx_first   : ||f - f~||_r          vs  l^{1-r}  [f]_1   (0 <= r <= 1)
///  approx_second  : ||f - f~||_j          vs  l^{2-j}  ||f||_2 (j = round(r))
///  product_rule   : ||(f^2)~ - (f~)^2||_r vs  l^{2a-r} ||f||_a^2
/// Norms are taken a reflection collar away from the boundary, where the
/// estimates apply verbatim.
struct MollifyRatios {
  double seminorm_gain = 0.0;
  double approx_first = 0.0;
  double approx_second = 0.0;
  double product_rule = 0.0;
  int collar = 0;
};

namespace detail {

inline double seminorm_order(const ScalarField& f, double t, const NormOptions& opt) {
  const int m = int(std::floor(t + 1e-12));
  const double alpha = t - m;
  if (alpha < 1e-12) {
    if (m == 0) return norm_c0(f, opt);
    if (m == 1) return norm_c0(grad(f), opt);
    if (m == 2) return norm_c0(hessian(f), opt);
    throw ValidationError("norm.bad_order", "seminorm order must be <= 2");
  }
  return holder_seminorm(f, m, alpha, opt);
}

inline double norm_order(const ScalarField& f, double t, const NormOptions& opt) {
  const int m = int(std::floor(t + 1e-12));
  const double alpha = t - m;
  double base = m >= 2 ? norm_c2(f, opt) : (m == 1 ? norm_c1(f, opt) : norm_c0(f, opt));
  if (alpha >= 1e-12) base += holder_seminorm(f, m, alpha, opt);
  return base;
}

} // namespace detail

inline MollifyRatios mollify_probe(const ScalarField& f, double l, double r = 0.0,
                                   double s = 0.5, double alpha = 0.5) {
  if (r < 0 || r > 1) throw ValidationError("probe.bad_order", "need 0 <= r <= 1");
  Mollifier mol(f.grid, l);
  ScalarField fm = mol(f);
  NormOptions opt;
  opt.collar = int(std::ceil(l / f.grid->hmax())) + 2;
  MollifyRatios out;
  out.collar = opt.collar;

  const double sem_r = detail::seminorm_order(f, r, opt);
  const double sem_rs = detail::seminorm_order(fm, r + s, opt);
  out.seminorm_gain = sem_r > 0 ? sem_rs / (std::pow(l, -s) * sem_r) : 0.0;

  ScalarField diff;
  diff.grid = f.grid;
  diff.values = f.values - fm.values;
  const double sem1 = detail::seminorm_order(f, 1.0, opt);
  out.approx_first =
      sem1 > 0 ? detail::norm_order(diff, r, opt) / (std::pow(l, 1.0 - r) * sem1) : 0.0;

  const int j = r < 0.5 ? 0 : 1;
  const double n2 = detail::norm_order(f, 2.0, opt);
  out.approx_second =
      n2 > 0 ? detail::norm_order(diff, double(j), opt) / (std::pow(l, 2.0 - j) * n2)
             : 0.0;

  ScalarField f2;
  f2.grid = f.grid;
  f2.values = f.values * f.values;
  ScalarField prod_diff;
  prod_diff.grid = f.grid;
  prod_diff.values = mol(f2).values - fm.values * fm.values;
  const double na = detail::norm_order(f, alpha, opt);
  out.product_rule =
      na > 0
          ? detail::norm_order(prod_diff, r, opt) / (std::pow(l, 2 * alpha - r) * na * na)
          : 0.0;
  return out;
}

} // namespace lmce

#endif
