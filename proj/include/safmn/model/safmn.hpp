#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "safmn/model/blocks.hpp"
#include "safmn/model/config.hpp"
#include "safmn/model/layers.hpp"
#include "safmn/ops/elementwise.hpp"
#include "safmn/ops/shuffle.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

/// Full super-resolution network:
///   F0 = head(I_LR); I_SR = shuffle(tail(blocks(F0) + F0), scale).
/// Parameter shapes are a pure function of the config; parameters are
/// visited in a fixed order (head, blocks in order, tail).
template <class T>
class SafmnModel {
 public:
  struct Cache {
    Tensor<T> input;
    Tensor<T> f0;
    std::vector<Tensor<T>> block_in;
    std::vector<typename Fmm<T>::Cache> blocks;
    Tensor<T> deep;  // blocks(F0) + F0
  };

  SafmnModel() : SafmnModel(ModelConfig{}) {}

  explicit SafmnModel(const ModelConfig& cfg) : cfg_(cfg) {
    validate(cfg_);
    const std::size_t c = cfg_.channels;
    head_ = Conv2d<T>(3, c, 3);
    for (std::size_t i = 0; i < cfg_.num_blocks; ++i) blocks_.emplace_back(cfg_.variant, c);
    tail_ = Conv2d<T>(c, 3 * cfg_.scale * cfg_.scale, 3);
  }

  const ModelConfig& config() const noexcept { return cfg_; }

  Tensor<T> forward(const Tensor<T>& input, Mode mode = Mode::eval, Cache* cache = nullptr) const {
    if (input.shape().c != 3) {
      throw DimensionError("safmn_forward: expected 3 input channels, got " +
                           std::to_string(input.shape().c));
    }
    Tensor<T> f0 = head_.forward(input);
    Tensor<T> x = f0;
    if (cache != nullptr) {
      cache->input = input;
      cache->block_in.clear();
      cache->blocks.assign(blocks_.size(), {});
    }
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      if (cache != nullptr) cache->block_in.push_back(x);
      x = blocks_[i].forward(x, mode, cache ? &cache->blocks[i] : nullptr);
    }
    ops::add_inplace(x, f0);
    Tensor<T> out = ops::pixel_shuffle(tail_.forward(x), cfg_.scale);
    if (cache != nullptr) {
      cache->f0 = std::move(f0);
      cache->deep = std::move(x);
    }
    return out;
  }

  /// Accumulates parameter gradients for d(loss)/d(output) = grad_out and
  /// returns the gradient with respect to the input image.
  Tensor<T> backward(const Cache& cache, const Tensor<T>& grad_out) {
    const Tensor<T> d_tail_out = ops::pixel_shuffle_backward(grad_out, cfg_.scale);
    const Tensor<T> d_deep = tail_.backward(cache.deep, d_tail_out);
    Tensor<T> dx = d_deep;
    for (std::size_t i = blocks_.size(); i-- > 0;) {
      dx = blocks_[i].backward(cache.block_in[i], cache.blocks[i], dx);
    }
    ops::add_inplace(dx, d_deep);  // global residual
    return head_.backward(cache.input, dx);
  }

  void update_running_stats(const Cache& cache) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) blocks_[i].update_running_stats(cache.blocks[i]);
  }

  /// Kaiming-uniform weights (bound sqrt(6 / fan_in)), zero biases; norm
  /// parameters keep their identity values. Fully determined by `seed`.
  void init(std::uint64_t seed) {
    ParamRng rng(seed);
    head_.init(rng);
    for (auto& b : blocks_) b.init(rng);
    tail_.init(rng);
  }

  // f(const std::string& name, Tensor<T>& param)
  template <class F>
  void for_each_param(F&& f) {
    head_.visit_params("head", f);
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i].visit_params("blocks." + std::to_string(i), f);
    }
    tail_.visit_params("tail", f);
  }

  template <class F>
  void for_each_param(F&& f) const {
    const_cast<SafmnModel*>(this)->for_each_param(
        [&f](const std::string& name, Tensor<T>& t) { f(name, static_cast<const Tensor<T>&>(t)); });
  }

  // Non-trainable state (batch-norm statistics, frozen batch-norm affine).
  template <class F>
  void for_each_buffer(F&& f) {
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
      blocks_[i].visit_buffers("blocks." + std::to_string(i), f);
    }
  }

  template <class F>
  void for_each_buffer(F&& f) const {
    const_cast<SafmnModel*>(this)->for_each_buffer(
        [&f](const std::string& name, Tensor<T>& t) { f(name, static_cast<const Tensor<T>&>(t)); });
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each_param([&n](const std::string&, const Tensor<T>& t) { n += t.numel(); });
    return n;
  }

  void zero_grad() {
    for_each_param([](const std::string&, Tensor<T>& t) { t.zero_grad(); });
  }

  template <class U>
  SafmnModel<U> cast() const {
    SafmnModel<U> out(cfg_);
    std::vector<const Tensor<T>*> src;
    for_each_param([&src](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
    for_each_buffer([&src](const std::string&, const Tensor<T>& t) { src.push_back(&t); });
    std::size_t i = 0;
    auto copy = [&](const std::string&, Tensor<U>& t) { t = src[i++]->template cast<U>(); };
    out.for_each_param(copy);
    out.for_each_buffer(copy);
    return out;
  }

  Conv2d<T>& head() { return head_; }
  Conv2d<T>& tail() { return tail_; }
  std::vector<Fmm<T>>& blocks() { return blocks_; }

 private:
  ModelConfig cfg_;
  Conv2d<T> head_;
  std::vector<Fmm<T>> blocks_;
  Conv2d<T> tail_;
};

template <class T>
SafmnModel<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  SafmnModel<T> m(cfg);
  m.init(seed);
  return m;
}

}  // namespace safmn
