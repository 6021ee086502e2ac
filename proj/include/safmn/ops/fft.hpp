#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "safmn/tensor.hpp"

namespace safmn::ops {

namespace detail {

using cplx = std::complex<double>;

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform; sign = -1 forward, +1 inverse (unnormalized).
inline void fft_radix2(std::vector<cplx>& a, int sign) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
    const std::size_t half = len / 2;
    std::vector<cplx> tw(half);
    for (std::size_t k = 0; k < half; ++k) {
      tw[k] = cplx(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
    }
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const cplx u = a[i + k];
        const cplx v = a[i + k + half] * tw[k];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

// Bluestein chirp-z for arbitrary lengths, via a power-of-two convolution.
inline void fft_bluestein(std::vector<cplx>& a, int sign) {
  const std::size_t n = a.size();
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  std::vector<cplx> chirp(n);
  for (std::size_t k = 0; k < n; ++k) {
    // k^2 mod 2n keeps the angle argument small for large k
    const std::size_t k2 = (k * k) % (2 * n);
    const double ang = sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
    chirp[k] = cplx(std::cos(ang), std::sin(ang));
  }
  std::vector<cplx> x(m), y(m);
  for (std::size_t k = 0; k < n; ++k) x[k] = a[k] * chirp[k];
  y[0] = std::conj(chirp[0]);
  for (std::size_t k = 1; k < n; ++k) y[k] = y[m - k] = std::conj(chirp[k]);
  fft_radix2(x, -1);
  fft_radix2(y, -1);
  for (std::size_t i = 0; i < m; ++i) x[i] *= y[i];
  fft_radix2(x, +1);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * inv_m * chirp[k];
}

inline void fft1d(std::vector<cplx>& a, int sign) {
  if (a.size() <= 1) return;
  if (is_pow2(a.size())) {
    fft_radix2(a, sign);
  } else {
    fft_bluestein(a, sign);
  }
}

inline void transform2d(ComplexPlane& p, int sign) {
  std::vector<cplx> buf(p.w);
  for (std::size_t i = 0; i < p.h; ++i) {
    for (std::size_t j = 0; j < p.w; ++j) buf[j] = cplx(p.re[i * p.w + j], p.im[i * p.w + j]);
    fft1d(buf, sign);
    for (std::size_t j = 0; j < p.w; ++j) {
      p.re[i * p.w + j] = buf[j].real();
      p.im[i * p.w + j] = buf[j].imag();
    }
  }
  buf.resize(p.h);
  for (std::size_t j = 0; j < p.w; ++j) {
    for (std::size_t i = 0; i < p.h; ++i) buf[i] = cplx(p.re[i * p.w + j], p.im[i * p.w + j]);
    fft1d(buf, sign);
    for (std::size_t i = 0; i < p.h; ++i) {
      p.re[i * p.w + j] = buf[i].real();
      p.im[i * p.w + j] = buf[i].imag();
    }
  }
}

}  // namespace detail

/// Unnormalized forward 2-D DFT: X(u,v) = sum x(i,j) exp(-2 pi i (ui/h + vj/w)).
inline ComplexPlane fft2d(ComplexPlane plane) {
  detail::transform2d(plane, -1);
  return plane;
}

/// Inverse 2-D DFT including the 1/(h*w) normalization.
inline ComplexPlane ifft2d(ComplexPlane plane) {
  detail::transform2d(plane, +1);
  const double inv = plane.size() == 0 ? 0.0 : 1.0 / static_cast<double>(plane.size());
  for (auto& v : plane.re) v *= inv;
  for (auto& v : plane.im) v *= inv;
  return plane;
}

/// Real (n, c) plane of a tensor lifted into a ComplexPlane.
template <class T>
ComplexPlane real_plane(const Tensor<T>& t, std::size_t n, std::size_t c) {
  const Shape& s = t.shape();
  ComplexPlane p(s.h, s.w);
  const T* src = t.plane(n, c);
  for (std::size_t i = 0; i < s.plane(); ++i) p.re[i] = static_cast<double>(src[i]);
  return p;
}

}  // namespace safmn::ops
