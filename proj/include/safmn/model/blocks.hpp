#pragma once

#include <algorithm>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "safmn/model/config.hpp"
#include "safmn/model/layers.hpp"
#include "safmn/ops/activation.hpp"
#include "safmn/ops/channel.hpp"
#include "safmn/ops/elementwise.hpp"
#include "safmn/ops/pool.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

inline constexpr std::size_t kPyramidLevels = 4;

// Level i of the pyramid works at floor(size / 2^i), never below one pixel.
inline std::size_t pyramid_size(std::size_t full, std::size_t level) {
  return std::max<std::size_t>(1, full >> level);
}

namespace detail {
template <class T>
Tensor<T> apply_attn(AttnKind k, const Tensor<T>& x) {
  switch (k) {
    case AttnKind::gelu: return ops::gelu(x);
    case AttnKind::sigmoid: return ops::sigmoid(x);
    case AttnKind::none: return x;
  }
  return x;
}

template <class T>
Tensor<T> apply_attn_backward(AttnKind k, const Tensor<T>& x, const Tensor<T>& dy) {
  switch (k) {
    case AttnKind::gelu: return ops::gelu_backward(x, dy);
    case AttnKind::sigmoid: return ops::sigmoid_backward(x, dy);
    case AttnKind::none: return dy;
  }
  return dy;
}
}  // namespace detail

/// Spatially-adaptive feature modulation.
///
/// The input is split into four channel groups. Group 0 goes through a
/// depthwise 3x3 at full resolution; group i (1..3) is pooled to 1/2^i of the
/// spatial size, convolved depthwise, and upsampled back by nearest
/// neighbour. The concatenation is aggregated by a 1x1 conv into an attention
/// map that gates the input elementwise after the nonlinearity.
template <class T>
struct Safm {
  SafmSwitches sw{};
  PoolKind pool = PoolKind::max;
  AttnKind attn = AttnKind::gelu;
  std::set<int> drop_scales;
  std::size_t channels = 0;
  std::vector<Conv2d<T>> dw;
  Conv2d<T> aggr;

  struct Cache {
    std::vector<Tensor<T>> parts;
    std::vector<Tensor<T>> conv_in;
    std::vector<std::vector<std::size_t>> argmax;
    Tensor<T> features;  // concat (or single dw output)
    Tensor<T> xhat;
    Tensor<T> attn;
  };

  Safm() = default;
  Safm(const VariantSpec& v, std::size_t c)
      : sw(v.safm), pool(v.pool), attn(v.attn), drop_scales(v.drop_scales), channels(c) {
    if (sw.multiscale) {
      const std::size_t part = c / kPyramidLevels;
      for (std::size_t i = 0; i < kPyramidLevels; ++i) dw.emplace_back(part, part, 3, part);
    } else {
      dw.emplace_back(c, c, 3, c);
    }
    if (sw.aggregation) aggr = Conv2d<T>(c, c, 1);
  }

  bool level_pooled(std::size_t level) const {
    return level > 0 && !drop_scales.contains(1 << level);
  }

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    const Shape s = x.shape();
    if (sw.multiscale) {
      c.parts = ops::split_channels(x, kPyramidLevels);
      c.conv_in.assign(kPyramidLevels, {});
      c.argmax.assign(kPyramidLevels, {});
      std::vector<Tensor<T>> levels;
      levels.reserve(kPyramidLevels);
      for (std::size_t i = 0; i < kPyramidLevels; ++i) {
        if (!level_pooled(i)) {
          c.conv_in[i] = c.parts[i];
          levels.push_back(dw[i].forward(c.parts[i]));
          continue;
        }
        const std::size_t ph = pyramid_size(s.h, i), pw = pyramid_size(s.w, i);
        switch (pool) {
          case PoolKind::max: {
            auto r = ops::adaptive_max_pool_with_indices(c.parts[i], ph, pw);
            c.conv_in[i] = std::move(r.output);
            c.argmax[i] = std::move(r.argmax);
            break;
          }
          case PoolKind::avg: c.conv_in[i] = ops::adaptive_avg_pool(c.parts[i], ph, pw); break;
          case PoolKind::nearest: c.conv_in[i] = ops::nearest_resize(c.parts[i], ph, pw); break;
        }
        levels.push_back(ops::nearest_resize(dw[i].forward(c.conv_in[i]), s.h, s.w));
      }
      c.features = ops::concat_channels(levels);
    } else {
      c.features = dw[0].forward(x);
    }
    c.xhat = sw.aggregation ? aggr.forward(c.features) : c.features;
    c.attn = detail::apply_attn(attn, c.xhat);
    return sw.modulation ? ops::mul(c.attn, x) : c.attn;
  }

  Tensor<T> backward(const Tensor<T>& x, const Cache& c, const Tensor<T>& dy) {
    const Shape s = x.shape();
    Tensor<T> dx(s);
    Tensor<T> d_attn = dy;
    if (sw.modulation) {
      d_attn = ops::mul(dy, x);
      dx = ops::mul(dy, c.attn);
    }
    Tensor<T> d_xhat = detail::apply_attn_backward(attn, c.xhat, d_attn);
    Tensor<T> d_feat = sw.aggregation ? aggr.backward(c.features, d_xhat) : std::move(d_xhat);
    if (!sw.multiscale) {
      ops::add_inplace(dx, dw[0].backward(x, d_feat));
      return dx;
    }
    auto d_levels = ops::split_channels(d_feat, kPyramidLevels);
    std::vector<Tensor<T>> d_parts;
    d_parts.reserve(kPyramidLevels);
    for (std::size_t i = 0; i < kPyramidLevels; ++i) {
      if (!level_pooled(i)) {
        d_parts.push_back(dw[i].backward(c.parts[i], d_levels[i]));
        continue;
      }
      const Tensor<T> d_conv_out = ops::nearest_resize_backward(c.conv_in[i].shape(), d_levels[i]);
      const Tensor<T> d_pooled = dw[i].backward(c.conv_in[i], d_conv_out);
      const Shape ps = c.parts[i].shape();
      switch (pool) {
        case PoolKind::max:
          d_parts.push_back(ops::adaptive_max_pool_backward(ps, c.argmax[i], d_pooled));
          break;
        case PoolKind::avg: d_parts.push_back(ops::adaptive_avg_pool_backward(ps, d_pooled)); break;
        case PoolKind::nearest: d_parts.push_back(ops::nearest_resize_backward(ps, d_pooled)); break;
      }
    }
    ops::add_inplace(dx, ops::concat_channels(d_parts));
    return dx;
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    for (std::size_t i = 0; i < dw.size(); ++i) dw[i].visit_params(prefix + ".dw." + std::to_string(i), f);
    if (sw.aggregation) aggr.visit_params(prefix + ".aggr", f);
  }

  void init(ParamRng& rng) {
    for (auto& conv : dw) conv.init(rng);
    if (sw.aggregation) aggr.init(rng);
  }
};

/// Channel mixer: the convolutional channel mixer (3x3 expand to 2C, GELU,
/// 1x1 reduce) and its ablation alternatives.
template <class T>
struct Mixer {
  MixerKind kind = MixerKind::ccm;
  Conv2d<T> expand;
  Conv2d<T> dw;         // inverted_residual only
  Conv2d<T> se_reduce;  // ccm_with_se only
  Conv2d<T> se_expand;
  Conv2d<T> project;

  struct Cache {
    Tensor<T> expanded;
    Tensor<T> hidden;      // gelu(expanded)
    Tensor<T> dw_out;      // inverted_residual
    Tensor<T> dw_act;
    Tensor<T> se_pooled;   // ccm_with_se
    Tensor<T> se_reduced;
    Tensor<T> se_act;
    Tensor<T> se_logits;
    Tensor<T> se_gate;
    Tensor<T> mixed;       // input of project
  };

  Mixer() = default;
  Mixer(MixerKind k, std::size_t c) : kind(k) {
    const std::size_t hidden = 2 * c;
    expand = Conv2d<T>(c, hidden, kind == MixerKind::channel_mlp ? 1 : 3);
    if (kind == MixerKind::inverted_residual) dw = Conv2d<T>(hidden, hidden, 3, hidden);
    if (kind == MixerKind::ccm_with_se) {
      se_reduce = Conv2d<T>(hidden, hidden / 4, 1);
      se_expand = Conv2d<T>(hidden / 4, hidden, 1);
    }
    project = Conv2d<T>(hidden, c, 1);
  }

  Tensor<T> forward(const Tensor<T>& x, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    c.expanded = expand.forward(x);
    c.hidden = ops::gelu(c.expanded);
    c.mixed = c.hidden;
    if (kind == MixerKind::inverted_residual) {
      c.dw_out = dw.forward(c.hidden);
      c.dw_act = ops::gelu(c.dw_out);
      c.mixed = c.dw_act;
    } else if (kind == MixerKind::ccm_with_se) {
      c.se_pooled = ops::global_avg_pool(c.hidden);
      c.se_reduced = se_reduce.forward(c.se_pooled);
      c.se_act = ops::gelu(c.se_reduced);
      c.se_logits = se_expand.forward(c.se_act);
      c.se_gate = ops::sigmoid(c.se_logits);
      c.mixed = ops::channel_scale(c.hidden, c.se_gate);
    }
    return project.forward(c.mixed);
  }

  Tensor<T> backward(const Tensor<T>& x, const Cache& c, const Tensor<T>& dy) {
    Tensor<T> d_mixed = project.backward(c.mixed, dy);
    Tensor<T> d_hidden;
    if (kind == MixerKind::inverted_residual) {
      d_hidden = dw.backward(c.hidden, ops::gelu_backward(c.dw_out, d_mixed));
    } else if (kind == MixerKind::ccm_with_se) {
      auto g = ops::channel_scale_backward(c.hidden, c.se_gate, d_mixed);
      const Tensor<T> d_logits = ops::sigmoid_backward(c.se_logits, g.gate);
      const Tensor<T> d_act = se_expand.backward(c.se_act, d_logits);
      const Tensor<T> d_red = ops::gelu_backward(c.se_reduced, d_act);
      const Tensor<T> d_pooled = se_reduce.backward(c.se_pooled, d_red);
      d_hidden = std::move(g.input);
      ops::add_inplace(d_hidden, ops::adaptive_avg_pool_backward(c.hidden.shape(), d_pooled));
    } else {
      d_hidden = std::move(d_mixed);
    }
    return expand.backward(x, ops::gelu_backward(c.expanded, d_hidden));
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    expand.visit_params(prefix + ".expand", f);
    if (kind == MixerKind::inverted_residual) dw.visit_params(prefix + ".dw", f);
    if (kind == MixerKind::ccm_with_se) {
      se_reduce.visit_params(prefix + ".se.reduce", f);
      se_expand.visit_params(prefix + ".se.expand", f);
    }
    project.visit_params(prefix + ".project", f);
  }

  void init(ParamRng& rng) {
    expand.init(rng);
    if (kind == MixerKind::inverted_residual) dw.init(rng);
    if (kind == MixerKind::ccm_with_se) {
      se_reduce.init(rng);
      se_expand.init(rng);
    }
    project.init(rng);
  }
};

/// Feature mixing module: Y = SAFM(norm(X)) + X, Z = mixer(norm(Y)) + Y.
/// Removing a branch removes its norm as well.
template <class T>
struct Fmm {
  bool has_safm = true;
  bool has_mixer = true;
  Norm<T> norm1;
  Safm<T> safm;
  Norm<T> norm2;
  Mixer<T> mixer;

  struct Cache {
    typename Norm<T>::Cache norm1;
    Tensor<T> safm_in;
    typename Safm<T>::Cache safm;
    Tensor<T> y;
    typename Norm<T>::Cache norm2;
    Tensor<T> mixer_in;
    typename Mixer<T>::Cache mixer;
  };

  Fmm() = default;
  Fmm(const VariantSpec& v, std::size_t c)
      : has_safm(v.safm.enabled), has_mixer(v.mixer != MixerKind::none) {
    if (has_safm) {
      norm1 = Norm<T>(v.norm, c);
      safm = Safm<T>(v, c);
    }
    if (has_mixer) {
      norm2 = Norm<T>(v.norm, c);
      mixer = Mixer<T>(v.mixer, c);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, Mode mode, Cache* cache = nullptr) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    if (has_safm) {
      c.safm_in = norm1.forward(x, mode, &c.norm1);
      c.y = ops::add(safm.forward(c.safm_in, cache ? &c.safm : nullptr), x);
    } else {
      c.y = x;
    }
    if (!has_mixer) return c.y;
    c.mixer_in = norm2.forward(c.y, mode, &c.norm2);
    return ops::add(mixer.forward(c.mixer_in, cache ? &c.mixer : nullptr), c.y);
  }

  void update_running_stats(const Cache& c) {
    if (has_safm) norm1.update_running_stats(c.norm1);
    if (has_mixer) norm2.update_running_stats(c.norm2);
  }

  Tensor<T> backward(const Tensor<T>& x, const Cache& c, const Tensor<T>& dz) {
    Tensor<T> dy = dz;
    if (has_mixer) {
      const Tensor<T> d_in = mixer.backward(c.mixer_in, c.mixer, dz);
      ops::add_inplace(dy, norm2.backward(c.y, c.norm2, d_in));
    }
    if (!has_safm) return dy;
    Tensor<T> dx = dy;
    const Tensor<T> d_in = safm.backward(c.safm_in, c.safm, dy);
    ops::add_inplace(dx, norm1.backward(x, c.norm1, d_in));
    return dx;
  }

  template <class F>
  void visit_params(const std::string& prefix, F&& f) {
    if (has_safm) {
      norm1.visit_params(prefix + ".norm1", f);
      safm.visit_params(prefix + ".safm", f);
    }
    if (has_mixer) {
      norm2.visit_params(prefix + ".norm2", f);
      mixer.visit_params(prefix + ".ccm", f);
    }
  }

  template <class F>
  void visit_buffers(const std::string& prefix, F&& f) {
    if (has_safm) norm1.visit_buffers(prefix + ".norm1", f);
    if (has_mixer) norm2.visit_buffers(prefix + ".norm2", f);
  }

  void init(ParamRng& rng) {
    if (has_safm) safm.init(rng);
    if (has_mixer) mixer.init(rng);
  }
};

}  // namespace safmn
