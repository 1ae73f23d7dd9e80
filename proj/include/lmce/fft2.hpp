#ifndef LMCE_FFT2_HPP
#define LMCE_FFT2_HPP

#include <complex>
#include <unsupported/Eigen/FFT>

#include "lmce/fields.hpp"

namespace lmce {

using CPlane = Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic>;

namespace detail {

// 2D FFT as column transforms plus a transpose round-trip so every 1D pass
// runs down contiguous (column-major) memory.
inline void fft_columns(CPlane& a, bool inverse) {
  Eigen::FFT<double> fft;
  const int n = int(a.rows());
  Eigen::VectorXcd in(n), out(n);
  for (int j = 0; j < a.cols(); ++j) {
    in = a.col(j).matrix();
    if (inverse)
      fft.inv(out, in);
    else
      fft.fwd(out, in);
    a.col(j) = out.array();
  }
}

} // namespace detail

inline CPlane fft2(const Plane<double>& in) {
  CPlane a = in.cast<std::complex<double>>();
  detail::fft_columns(a, false);
  CPlane t = a.transpose();
  detail::fft_columns(t, false);
  return t.transpose();
}

inline Plane<double> ifft2_real(const CPlane& in) {
  CPlane a = in;
  detail::fft_columns(a, true);
  CPlane t = a.transpose();
  detail::fft_columns(t, true);
  return t.transpose().real();
}

/// Circular convolution of two equal-size periodic planes.
inline Plane<double> convolve_periodic(const Plane<double>& a, const Plane<double>& b) {
  return ifft2_real(CPlane(fft2(a) * fft2(b)));
}

} // namespace lmce

#endif
