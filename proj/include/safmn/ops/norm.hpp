#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "safmn/tensor.hpp"

namespace safmn::ops {

inline constexpr double kLayerNormEps = 1e-6;
inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kL2NormEps = 1e-12;

// Per-position (layer norm) or per-channel (batch norm) statistics kept for backward.
template <class T>
struct NormCache {
  std::vector<T> mean;
  std::vector<T> rstd;
  std::vector<T> var;       // biased variance (batch norm only)
  std::size_t count = 0;    // elements reduced per statistic (batch norm only)
};

template <class T>
struct AffineNormGrads {
  Tensor<T> input;
  Tensor<T> gamma;
  Tensor<T> beta;
};

namespace detail {
template <class T>
void check_affine(const Shape& x, const Tensor<T>& gamma, const Tensor<T>& beta, const char* op) {
  if (gamma.numel() != x.c || beta.numel() != x.c) {
    throw DimensionError(std::string(op) + ": affine parameters must have one entry per channel");
  }
}
}  // namespace detail

/// Normalizes the channel vector at every (n, y, x) position to zero mean and
/// unit population variance, then applies per-channel gamma/beta.
template <class T>
Tensor<T> layer_norm_channels(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                              T eps, NormCache<T>* cache = nullptr) {
  const Shape s = x.shape();
  detail::check_affine(s, gamma, beta, "layer_norm_channels");
  const std::size_t hw = s.plane();
  Tensor<T> out(s);
  if (cache != nullptr) {
    cache->mean.assign(s.n * hw, T{0});
    cache->rstd.assign(s.n * hw, T{0});
  }
  const T inv_c = T(1) / static_cast<T>(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* base = x.plane(n, 0);
    T* obase = out.plane(n, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      T mean{0};
      for (std::size_t c = 0; c < s.c; ++c) mean += base[c * hw + p];
      mean *= inv_c;
      T var{0};
      for (std::size_t c = 0; c < s.c; ++c) {
        const T d = base[c * hw + p] - mean;
        var += d * d;
      }
      var *= inv_c;
      const T rstd = T(1) / std::sqrt(var + eps);
      for (std::size_t c = 0; c < s.c; ++c) {
        obase[c * hw + p] = (base[c * hw + p] - mean) * rstd * gamma[c] + beta[c];
      }
      if (cache != nullptr) {
        cache->mean[n * hw + p] = mean;
        cache->rstd[n * hw + p] = rstd;
      }
    }
  }
  return out;
}

template <class T>
AffineNormGrads<T> layer_norm_channels_backward(const Tensor<T>& x, const Tensor<T>& gamma,
                                                const NormCache<T>& cache,
                                                const Tensor<T>& grad_out) {
  const Shape s = x.shape();
  require_same_shape(s, grad_out.shape(), "layer_norm_channels_backward");
  const std::size_t hw = s.plane();
  AffineNormGrads<T> g{Tensor<T>(s), Tensor<T>(gamma.shape()), Tensor<T>(gamma.shape())};
  const T inv_c = T(1) / static_cast<T>(s.c);
  std::vector<T> xhat(s.c), dxhat(s.c);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* xb = x.plane(n, 0);
    const T* dyb = grad_out.plane(n, 0);
    T* dxb = g.input.plane(n, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      const T mean = cache.mean[n * hw + p];
      const T rstd = cache.rstd[n * hw + p];
      T sum_d{0}, sum_dx{0};
      for (std::size_t c = 0; c < s.c; ++c) {
        xhat[c] = (xb[c * hw + p] - mean) * rstd;
        const T dy = dyb[c * hw + p];
        dxhat[c] = dy * gamma[c];
        g.gamma[c] += dy * xhat[c];
        g.beta[c] += dy;
        sum_d += dxhat[c];
        sum_dx += dxhat[c] * xhat[c];
      }
      sum_d *= inv_c;
      sum_dx *= inv_c;
      for (std::size_t c = 0; c < s.c; ++c) {
        dxb[c * hw + p] = rstd * (dxhat[c] - sum_d - xhat[c] * sum_dx);
      }
    }
  }
  return g;
}

/// Batch normalization with batch statistics (training mode).
template <class T>
Tensor<T> batch_norm_train(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                           T eps, NormCache<T>* cache = nullptr) {
  const Shape s = x.shape();
  detail::check_affine(s, gamma, beta, "batch_norm");
  const std::size_t hw = s.plane();
  const std::size_t count = s.n * hw;
  Tensor<T> out(s);
  if (cache != nullptr) {
    cache->mean.assign(s.c, T{0});
    cache->rstd.assign(s.c, T{0});
    cache->var.assign(s.c, T{0});
    cache->count = count;
  }
  for (std::size_t c = 0; c < s.c; ++c) {
    T mean{0};
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) mean += p[i];
    }
    mean /= static_cast<T>(count);
    T var{0};
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) var += (p[i] - mean) * (p[i] - mean);
    }
    const T biased = var / static_cast<T>(count);
    const T rstd = T(1) / std::sqrt(biased + eps);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      T* o = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) o[i] = (p[i] - mean) * rstd * gamma[c] + beta[c];
    }
    if (cache != nullptr) {
      cache->mean[c] = mean;
      cache->rstd[c] = rstd;
      cache->var[c] = biased;
    }
  }
  return out;
}

/// Exponential moving average of batch statistics (unbiased variance).
template <class T>
void update_running_stats(Tensor<T>& running_mean, Tensor<T>& running_var,
                          const NormCache<T>& batch) {
  const T m = static_cast<T>(kBatchNormMomentum);
  const T correction =
      batch.count > 1 ? static_cast<T>(batch.count) / static_cast<T>(batch.count - 1) : T(1);
  for (std::size_t c = 0; c < batch.mean.size(); ++c) {
    running_mean[c] = (T(1) - m) * running_mean[c] + m * batch.mean[c];
    running_var[c] = (T(1) - m) * running_var[c] + m * batch.var[c] * correction;
  }
}

template <class T>
AffineNormGrads<T> batch_norm_train_backward(const Tensor<T>& x, const Tensor<T>& gamma,
                                             const NormCache<T>& cache,
                                             const Tensor<T>& grad_out) {
  const Shape s = x.shape();
  require_same_shape(s, grad_out.shape(), "batch_norm_backward");
  const std::size_t hw = s.plane();
  const T inv_count = T(1) / static_cast<T>(s.n * hw);
  AffineNormGrads<T> g{Tensor<T>(s), Tensor<T>(gamma.shape()), Tensor<T>(gamma.shape())};
  for (std::size_t c = 0; c < s.c; ++c) {
    const T mean = cache.mean[c];
    const T rstd = cache.rstd[c];
    T sum_dy{0}, sum_dy_xhat{0};
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      const T* dy = grad_out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += dy[i] * (p[i] - mean) * rstd;
      }
    }
    g.gamma[c] = sum_dy_xhat;
    g.beta[c] = sum_dy;
    const T k = gamma[c] * rstd;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      const T* dy = grad_out.plane(n, c);
      T* dx = g.input.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) {
        const T xhat = (p[i] - mean) * rstd;
        dx[i] = k * (dy[i] - sum_dy * inv_count - xhat * sum_dy_xhat * inv_count);
      }
    }
  }
  return g;
}

/// Per-channel affine map with fixed statistics: (x - mean) / sqrt(var + eps) * w + b.
/// Used for batch norm at inference and for frozen batch norm.
template <class T>
Tensor<T> channel_affine_norm(const Tensor<T>& x, const Tensor<T>& mean, const Tensor<T>& var,
                              const Tensor<T>& weight, const Tensor<T>& bias, T eps) {
  const Shape s = x.shape();
  detail::check_affine(s, weight, bias, "channel_affine_norm");
  Tensor<T> out(s);
  const std::size_t hw = s.plane();
  for (std::size_t c = 0; c < s.c; ++c) {
    const T scale = weight[c] / std::sqrt(var[c] + eps);
    const T shift = bias[c] - mean[c] * scale;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* p = x.plane(n, c);
      T* o = out.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) o[i] = p[i] * scale + shift;
    }
  }
  return out;
}

template <class T>
Tensor<T> channel_affine_norm_backward(const Tensor<T>& var, const Tensor<T>& weight, T eps,
                                       const Tensor<T>& grad_out) {
  const Shape s = grad_out.shape();
  Tensor<T> dx(s);
  const std::size_t hw = s.plane();
  for (std::size_t c = 0; c < s.c; ++c) {
    const T scale = weight[c] / std::sqrt(var[c] + eps);
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* dy = grad_out.plane(n, c);
      T* o = dx.plane(n, c);
      for (std::size_t i = 0; i < hw; ++i) o[i] = dy[i] * scale;
    }
  }
  return dx;
}

/// Divides the channel vector at every position by max(||x||_2, eps).
template <class T>
Tensor<T> l2_normalize_channels(const Tensor<T>& x, T eps, std::vector<T>* norms = nullptr) {
  const Shape s = x.shape();
  const std::size_t hw = s.plane();
  Tensor<T> out(s);
  if (norms != nullptr) norms->assign(s.n * hw, T{0});
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* b = x.plane(n, 0);
    T* o = out.plane(n, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      T ss{0};
      for (std::size_t c = 0; c < s.c; ++c) ss += b[c * hw + p] * b[c * hw + p];
      const T denom = std::max(std::sqrt(ss), eps);
      for (std::size_t c = 0; c < s.c; ++c) o[c * hw + p] = b[c * hw + p] / denom;
      if (norms != nullptr) (*norms)[n * hw + p] = std::sqrt(ss);
    }
  }
  return out;
}

template <class T>
Tensor<T> l2_normalize_channels_backward(const Tensor<T>& x, T eps, const std::vector<T>& norms,
                                         const Tensor<T>& grad_out) {
  const Shape s = x.shape();
  require_same_shape(s, grad_out.shape(), "l2_normalize_channels_backward");
  const std::size_t hw = s.plane();
  Tensor<T> dx(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* b = x.plane(n, 0);
    const T* dy = grad_out.plane(n, 0);
    T* o = dx.plane(n, 0);
    for (std::size_t p = 0; p < hw; ++p) {
      const T norm = norms[n * hw + p];
      if (norm <= eps) {
        for (std::size_t c = 0; c < s.c; ++c) o[c * hw + p] = dy[c * hw + p] / eps;
        continue;
      }
      T dot{0};
      for (std::size_t c = 0; c < s.c; ++c) dot += b[c * hw + p] * dy[c * hw + p];
      const T inv = T(1) / norm;
      for (std::size_t c = 0; c < s.c; ++c) {
        o[c * hw + p] = (dy[c * hw + p] - b[c * hw + p] * dot * inv * inv) * inv;
      }
    }
  }
  return dx;
}

}  // namespace safmn::ops
