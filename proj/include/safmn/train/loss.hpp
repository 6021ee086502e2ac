#pragma once

#include <cmath>
#include <cstddef>

#include "safmn/error.hpp"
#include "safmn/ops/fft.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

// How the frequency term reduces over spectrum bins.
enum class FftReduction { mean, sum };
// component: |Re| + |Im| per bin; magnitude: |Z| per bin.
enum class FftNorm { component, magnitude };

struct LossConfig {
  double lambda = 0.05;
  FftReduction reduction = FftReduction::mean;
  FftNorm fft_norm = FftNorm::component;
};

inline void validate(const LossConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda)) {
    throw ConfigError("loss lambda must be a finite non-negative number");
  }
}

template <class T>
struct LossResult {
  double value = 0.0;  // l1 + lambda * frequency
  double l1 = 0.0;
  double frequency = 0.0;
  Tensor<T> grad;  // d value / d sr
};

namespace detail {
inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}  // namespace detail

/// Mean absolute error plus lambda times the L1 distance between the 2-D
/// spectra of every (n, c) plane. Subgradient of |.| at 0 is 0.
template <class T>
LossResult<T> sr_loss(const Tensor<T>& sr, const Tensor<T>& hr, const LossConfig& cfg = {}) {
  require_same_shape(sr.shape(), hr.shape(), "loss");
  validate(cfg);
  const Shape s = sr.shape();
  const std::size_t count = s.numel();
  LossResult<T> r;
  r.grad = Tensor<T>(s);
  if (count == 0) return r;
  const double inv_n = 1.0 / static_cast<double>(count);

  double l1 = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double d = static_cast<double>(sr[i]) - static_cast<double>(hr[i]);
    l1 += std::abs(d);
    r.grad[i] = static_cast<T>(detail::sgn(d) * inv_n);
  }
  r.l1 = l1 * inv_n;

  double freq = 0.0;
  if (cfg.lambda > 0.0) {
    const double term_scale = cfg.reduction == FftReduction::mean ? inv_n : 1.0;
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t c = 0; c < s.c; ++c) {
        ComplexPlane diff(s.h, s.w);
        const T* a = sr.plane(n, c);
        const T* b = hr.plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          diff.re[i] = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        }
        const ComplexPlane spec = ops::fft2d(std::move(diff));
        // d/dx of sum_k f(X_k) for real x is Re(IDFT_unnormalized(S)), with
        // S_k = df/dRe + i df/dIm.
        ComplexPlane dir(s.h, s.w);
        for (std::size_t k = 0; k < spec.size(); ++k) {
          const double re = spec.re[k], im = spec.im[k];
          if (cfg.fft_norm == FftNorm::component) {
            freq += std::abs(re) + std::abs(im);
            dir.re[k] = detail::sgn(re);
            dir.im[k] = detail::sgn(im);
          } else {
            const double mag = std::hypot(re, im);
            freq += mag;
            if (mag > 0.0) {
              dir.re[k] = re / mag;
              dir.im[k] = im / mag;
            }
          }
        }
        const ComplexPlane back = ops::ifft2d(std::move(dir));
        const double g_scale = cfg.lambda * term_scale * static_cast<double>(s.plane());
        T* g = r.grad.plane(n, c);
        for (std::size_t i = 0; i < s.plane(); ++i) {
          g[i] = static_cast<T>(static_cast<double>(g[i]) + g_scale * back.re[i]);
        }
      }
    }
    freq *= term_scale;
  }
  r.frequency = freq;
  r.value = r.l1 + cfg.lambda * freq;
  return r;
}

}  // namespace safmn
