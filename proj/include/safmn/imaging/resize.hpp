#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "safmn/error.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

inline constexpr double kCubicA = -0.5;

inline double cubic_kernel(double x) {
  const double a = kCubicA;
  const double t = std::abs(x);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

/// Contribution table for resampling a length-`in` axis to length `out`.
struct ResampleTaps {
  std::size_t taps = 0;
  std::vector<std::size_t> index;  // out * taps, clamped source indices
  std::vector<double> weight;      // out * taps, each row sums to 1
};

/// Source position of output i is (i + 0.5) / scale - 0.5. When shrinking
/// with antialiasing the kernel is stretched by 1 / scale.
inline ResampleTaps resample_taps(std::size_t in, std::size_t out, bool antialias) {
  if (in == 0 || out == 0) throw DimensionError("bicubic_resize: sizes must be positive");
  const double scale = static_cast<double>(out) / static_cast<double>(in);
  const bool widen = antialias && scale < 1.0;
  const double support = widen ? 2.0 / scale : 2.0;
  ResampleTaps t;
  t.taps = static_cast<std::size_t>(std::ceil(2.0 * support)) + 2;
  t.index.resize(out * t.taps);
  t.weight.resize(out * t.taps);
  for (std::size_t i = 0; i < out; ++i) {
    const double u = (static_cast<double>(i) + 0.5) / scale - 0.5;
    const auto left = static_cast<long>(std::floor(u - support));
    double sum = 0.0;
    for (std::size_t k = 0; k < t.taps; ++k) {
      const long j = left + static_cast<long>(k);
      const double d = u - static_cast<double>(j);
      const double wgt = widen ? scale * cubic_kernel(scale * d) : cubic_kernel(d);
      t.index[i * t.taps + k] = static_cast<std::size_t>(std::clamp<long>(j, 0, static_cast<long>(in) - 1));
      t.weight[i * t.taps + k] = wgt;
      sum += wgt;
    }
    for (std::size_t k = 0; k < t.taps; ++k) t.weight[i * t.taps + k] /= sum;
  }
  return t;
}

/// Separable bicubic resampling of every plane (height pass, then width).
template <class T>
Tensor<T> bicubic_resize(const Tensor<T>& x, std::size_t out_h, std::size_t out_w, bool antialias = true) {
  const Shape s = x.shape();
  if (out_h == 0 || out_w == 0) throw DimensionError("bicubic_resize: output size must be positive");
  if (s.h == out_h && s.w == out_w) return x;
  const ResampleTaps th = resample_taps(s.h, out_h, antialias);
  const ResampleTaps tw = resample_taps(s.w, out_w, antialias);
  Tensor<T> y(Shape{s.n, s.c, out_h, out_w});
  std::vector<double> mid(out_h * s.w);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      for (std::size_t i = 0; i < out_h; ++i) {
        for (std::size_t xcol = 0; xcol < s.w; ++xcol) {
          double acc = 0.0;
          for (std::size_t k = 0; k < th.taps; ++k) {
            acc += th.weight[i * th.taps + k] * static_cast<double>(src[th.index[i * th.taps + k] * s.w + xcol]);
          }
          mid[i * s.w + xcol] = acc;
        }
      }
      T* dst = y.plane(n, c);
      for (std::size_t i = 0; i < out_h; ++i) {
        for (std::size_t j = 0; j < out_w; ++j) {
          double acc = 0.0;
          for (std::size_t k = 0; k < tw.taps; ++k) {
            acc += tw.weight[j * tw.taps + k] * mid[i * s.w + tw.index[j * tw.taps + k]];
          }
          dst[i * out_w + j] = static_cast<T>(acc);
        }
      }
    }
  }
  return y;
}

}  // namespace safmn
