#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "safmn/model/config.hpp"
#include "safmn/ops/conv.hpp"
#include "safmn/ops/norm.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

template <class T>
void accumulate_grad(Tensor<T>& param, const Tensor<T>& g) {
  param.ensure_grad();
  auto dst = param.grad();
  for (std::size_t i = 0; i < g.numel(); ++i) dst[i] += g[i];
}

// Uniform draws in [lo, hi) from the top 53 bits of a 64-bit Mersenne
// twister, so initial weights do not depend on the standard library's
// distribution implementation.
class ParamRng {
 public:
  explicit ParamRng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo, double hi) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
  }

 private:
  std::mt19937_64 engine_;
};

/// Convolution layer with "same" padding (k / 2).
template <class T>
struct Conv2d {
  Tensor<T> weight;
  Tensor<T> bias;
  ops::Conv2dSpec spec{};

  Conv2d() = default;
  Conv2d(std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t groups = 1)
      : weight(Shape{c_out, c_in / groups, k, k}),
        bias(Shape{1, c_out, 1, 1}),
        spec{1, k / 2, groups} {}

  std::size_t fan_in() const { return weight.shape().c * weight.shape().h * weight.shape().w; }

  Tensor<T> forward(const Tensor<T>& x) const { return ops::conv2d(x, weight, &bias, spec); }

  // Accumulates parameter gradients and returns the input gradient.
  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy) {
    auto g = ops::conv2d_backward(x, weight, true, dy, spec);
    accumulate_grad(weight, g.weight);
    accumulate_grad(bias, g.bias);
    return std::move(g.input);
  }

  void init(ParamRng& rng) {
    const double b = std::sqrt(6.0 / static_cast<double>(fan_in()));
    for (auto& v : weight.data()) v = static_cast<T>(rng.uniform(-b, b));
    bias.fill(T{0});
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

/// Normalization in front of each residual branch.
template <class T>
struct Norm {
  NormKind kind = NormKind::layernorm;
  // Trainable affine (layernorm, batchnorm).
  Tensor<T> weight;
  Tensor<T> bias;
  // Buffers (batchnorm running stats; frozen batchnorm stores everything here).
  Tensor<T> running_mean;
  Tensor<T> running_var;

  struct Cache {
    ops::NormCache<T> stats;
    std::vector<T> norms;
    bool used_batch_stats = false;
  };

  Norm() = default;
  Norm(NormKind k, std::size_t channels) : kind(k) {
    const Shape s{1, channels, 1, 1};
    switch (kind) {
      case NormKind::layernorm:
      case NormKind::batchnorm:
        weight = Tensor<T>(s, T{1});
        bias = Tensor<T>(s, T{0});
        if (kind == NormKind::batchnorm) {
          running_mean = Tensor<T>(s, T{0});
          running_var = Tensor<T>(s, T{1});
        }
        break;
      case NormKind::frozen_batchnorm:
        weight = Tensor<T>(s, T{1});
        bias = Tensor<T>(s, T{0});
        running_mean = Tensor<T>(s, T{0});
        running_var = Tensor<T>(s, T{1});
        break;
      case NormKind::none:
      case NormKind::l2:
        break;
    }
  }

  // Const in every mode; batch-norm running statistics are folded in
  // afterwards by update_running_stats().
  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache) const {
    switch (kind) {
      case NormKind::layernorm:
        return ops::layer_norm_channels(x, weight, bias, static_cast<T>(ops::kLayerNormEps),
                                        cache ? &cache->stats : nullptr);
      case NormKind::batchnorm:
        if (mode == Mode::train) {
          if (cache) cache->used_batch_stats = true;
          return ops::batch_norm_train(x, weight, bias, static_cast<T>(ops::kBatchNormEps),
                                       cache ? &cache->stats : nullptr);
        }
        return ops::channel_affine_norm(x, running_mean, running_var, weight, bias,
                                        static_cast<T>(ops::kBatchNormEps));
      case NormKind::frozen_batchnorm:
        return ops::channel_affine_norm(x, running_mean, running_var, weight, bias,
                                        static_cast<T>(ops::kBatchNormEps));
      case NormKind::l2:
        return ops::l2_normalize_channels(x, static_cast<T>(ops::kL2NormEps),
                                          cache ? &cache->norms : nullptr);
      case NormKind::none:
        return x;
    }
    return x;
  }

  void update_running_stats(const Cache& cache) {
    if (kind == NormKind::batchnorm && cache.used_batch_stats) {
      ops::update_running_stats(running_mean, running_var, cache.stats);
    }
  }

  Tensor<T> backward(const Tensor<T>& x, const Cache& cache, const Tensor<T>& dy) {
    switch (kind) {
      case NormKind::layernorm: {
        auto g = ops::layer_norm_channels_backward(x, weight, cache.stats, dy);
        accumulate_grad(weight, g.gamma);
        accumulate_grad(bias, g.beta);
        return std::move(g.input);
      }
      case NormKind::batchnorm: {
        if (cache.used_batch_stats) {
          auto g = ops::batch_norm_train_backward(x, weight, cache.stats, dy);
          accumulate_grad(weight, g.gamma);
          accumulate_grad(bias, g.beta);
          return std::move(g.input);
        }
        // eval-mode statistics are constants
        Tensor<T> dgamma(weight.shape()), dbeta(bias.shape());
        const Shape s = x.shape();
        for (std::size_t c = 0; c < s.c; ++c) {
          const T rstd = T(1) / std::sqrt(running_var[c] + static_cast<T>(ops::kBatchNormEps));
          for (std::size_t n = 0; n < s.n; ++n) {
            const T* px = x.plane(n, c);
            const T* pd = dy.plane(n, c);
            for (std::size_t i = 0; i < s.plane(); ++i) {
              dgamma[c] += pd[i] * (px[i] - running_mean[c]) * rstd;
              dbeta[c] += pd[i];
            }
          }
        }
        accumulate_grad(weight, dgamma);
        accumulate_grad(bias, dbeta);
        return ops::channel_affine_norm_backward(running_var, weight,
                                                 static_cast<T>(ops::kBatchNormEps), dy);
      }
      case NormKind::frozen_batchnorm:
        return ops::channel_affine_norm_backward(running_var, weight,
                                                 static_cast<T>(ops::kBatchNormEps), dy);
      case NormKind::l2:
        return ops::l2_normalize_channels_backward(x, static_cast<T>(ops::kL2NormEps),
                                                   cache.norms, dy);
      case NormKind::none:
        return dy;
    }
    return dy;
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    if (kind == NormKind::layernorm || kind == NormKind::batchnorm) {
      f(prefix + ".weight", weight);
      f(prefix + ".bias", bias);
    }
  }

  template <class F>
  void visit_buffers(const std::string& prefix, F&& f) {
    if (kind == NormKind::frozen_batchnorm) {
      f(prefix + ".weight", weight);
      f(prefix + ".bias", bias);
    }
    if (kind == NormKind::batchnorm || kind == NormKind::frozen_batchnorm) {
      f(prefix + ".running_mean", running_mean);
      f(prefix + ".running_var", running_var);
    }
  }
};

}  // namespace safmn
