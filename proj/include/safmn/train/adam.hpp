#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "safmn/error.hpp"
#include "safmn/model/checkpoint.hpp"
#include "safmn/model/safmn.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Bias-corrected Adam without weight decay. Moment buffers follow the
/// model's parameter visiting order.
template <class T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  std::uint64_t step_count() const noexcept { return step_; }
  const AdamConfig& config() const noexcept { return cfg_; }

  /// Applies one update from the gradient slots of `model`. Throws
  /// TrainingError and leaves parameters and state untouched if any
  /// gradient is non-finite.
  void step(SafmnModel<T>& model, double lr) {
    std::vector<Tensor<T>*> params;
    model.for_each_param([&params](const std::string& name, Tensor<T>& p) {
      if (!p.has_grad()) throw TrainingError("parameter " + name + " has no gradient");
      for (T g : p.grad()) {
        if (!std::isfinite(g)) throw TrainingError("non-finite gradient in " + name);
      }
      params.push_back(&p);
    });
    if (first_.empty()) {
      for (auto* p : params) {
        first_.emplace_back(p->shape());
        second_.emplace_back(p->shape());
      }
    }
    if (first_.size() != params.size()) throw TrainingError("optimizer state does not match model");

    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    for (std::size_t k = 0; k < params.size(); ++k) {
      Tensor<T>& p = *params[k];
      auto g = p.grad();
      Tensor<T>& m = first_[k];
      Tensor<T>& v = second_[k];
      for (std::size_t i = 0; i < p.numel(); ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = cfg_.beta1 * static_cast<double>(m[i]) + (1.0 - cfg_.beta1) * gi;
        const double vi = cfg_.beta2 * static_cast<double>(v[i]) + (1.0 - cfg_.beta2) * gi * gi;
        m[i] = static_cast<T>(mi);
        v[i] = static_cast<T>(vi);
        const double update = lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
        p[i] = static_cast<T>(static_cast<double>(p[i]) - update);
      }
    }
  }

  OptimizerBlob to_blob(const SafmnModel<T>& model) const {
    OptimizerBlob o;
    o.step = step_;
    std::size_t k = 0;
    model.for_each_param([&](const std::string& name, const Tensor<T>&) {
      if (k < first_.size()) {
        o.first_moment.push_back(detail::to_blob(name, first_[k]));
        o.second_moment.push_back(detail::to_blob(name, second_[k]));
      }
      ++k;
    });
    return o;
  }

  void load_blob(const OptimizerBlob& o, SafmnModel<T>& model) {
    step_ = o.step;
    first_.clear();
    second_.clear();
    if (o.first_moment.empty()) return;
    std::size_t k = 0;
    model.for_each_param([&](const std::string& name, const Tensor<T>& p) {
      if (k >= o.first_moment.size() || k >= o.second_moment.size()) {
        throw FormatError("optimizer state is missing " + name, 0);
      }
      first_.emplace_back(p.shape());
      second_.emplace_back(p.shape());
      detail::from_blob(o.first_moment[k], name, first_.back());
      detail::from_blob(o.second_moment[k], name, second_.back());
      ++k;
    });
  }

 private:
  AdamConfig cfg_;
  std::uint64_t step_ = 0;
  std::vector<Tensor<T>> first_;
  std::vector<Tensor<T>> second_;
};

}  // namespace safmn
