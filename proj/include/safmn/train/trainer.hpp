#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "safmn/error.hpp"
#include "safmn/imaging/sampler.hpp"
#include "safmn/model/checkpoint.hpp"
#include "safmn/model/safmn.hpp"
#include "safmn/train/adam.hpp"
#include "safmn/train/loss.hpp"
#include "safmn/train/schedule.hpp"

namespace safmn {

struct TrainConfig {
  ModelConfig model{};
  LossConfig loss{};
  AdamConfig adam{};
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  PatchSampler sampler{};
  std::uint64_t iters = 1000;
  std::uint64_t seed = 0;
  std::uint64_t log_every = 10;
  std::uint64_t checkpoint_every = 0;  // 0: final checkpoint only
  std::optional<std::filesystem::path> checkpoint;
};

inline void validate(const TrainConfig& cfg) {
  validate(cfg.model);
  validate(cfg.loss);
  if (cfg.iters < 1) throw ConfigError("iters must be >= 1");
  if (cfg.log_every < 1) throw ConfigError("log_every must be >= 1");
  if (cfg.sampler.patch_size == 0 || cfg.sampler.batch_size == 0) {
    throw ConfigError("patch_size and batch_size must be positive");
  }
  validate(CosineSchedule{cfg.lr_max, cfg.lr_min, cfg.iters});
}

struct StepStats {
  std::uint64_t iter = 0;
  double lr = 0.0;
  double loss = 0.0;
  double l1 = 0.0;
  double frequency = 0.0;
};

inline std::string to_json_line(const StepStats& s) {
  nlohmann::ordered_json j;
  j["iter"] = s.iter;
  j["lr"] = s.lr;
  j["loss"] = s.loss;
  j["l1"] = s.l1;
  j["freq"] = s.frequency;
  return j.dump();
}

/// Sequential training loop: sample a batch, forward, loss, backward, Adam
/// step at the cosine learning rate. Weights are initialised from `seed` and
/// batches are drawn from an engine seeded from `seed` as well, so a run is
/// a pure function of (config, data).
template <class T>
class Trainer {
 public:
  Trainer(TrainConfig cfg, std::vector<TrainingPair> data)
      : cfg_(std::move(cfg)),
        data_(std::move(data)),
        model_(init_model<T>(cfg_.model, cfg_.seed)),
        adam_(cfg_.adam),
        rng_(cfg_.seed ^ 0x9E3779B97F4A7C15ull) {
    validate(cfg_);
    if (data_.empty()) throw DataError("no training images");
    cfg_.sampler.seed = cfg_.seed;
  }

  const SafmnModel<T>& model() const noexcept { return model_; }
  SafmnModel<T>& model() noexcept { return model_; }
  const Adam<T>& optimizer() const noexcept { return adam_; }
  std::uint64_t iteration() const noexcept { return iter_; }
  const TrainConfig& config() const noexcept { return cfg_; }

  /// One iteration. Throws TrainingError on a non-finite loss or gradient;
  /// the model is left as it was before the step in that case.
  StepStats step() {
    if (iter_ >= cfg_.iters) throw TrainingError("training already finished");
    StepStats st;
    st.iter = iter_;
    st.lr = lr_at(CosineSchedule{cfg_.lr_max, cfg_.lr_min, cfg_.iters}, iter_);
    const Batch<T> batch = sample_batch<T>(data_, cfg_.model.scale, cfg_.sampler, rng_);
    typename SafmnModel<T>::Cache cache;
    const Tensor<T> sr = model_.forward(batch.lr, Mode::train, &cache);
    const LossResult<T> loss = sr_loss(sr, batch.hr, cfg_.loss);
    if (!std::isfinite(loss.value)) {
      throw TrainingError("non-finite loss at iteration " + std::to_string(iter_));
    }
    model_.zero_grad();
    model_.backward(cache, loss.grad);
    adam_.step(model_, st.lr);
    model_.update_running_stats(cache);
    st.loss = loss.value;
    st.l1 = loss.l1;
    st.frequency = loss.frequency;
    ++iter_;
    return st;
  }

  Checkpoint checkpoint() const {
    Checkpoint ck = make_checkpoint(model_, iter_, cfg_.seed);
    ck.optimizer = adam_.to_blob(model_);
    return ck;
  }

  /// Runs the remaining iterations. Logs every `log_every` iterations plus
  /// the first and last; writes periodic and final checkpoints when a path
  /// is configured. On failure the previously written checkpoint is kept.
  std::vector<StepStats> run(std::ostream* log = nullptr) {
    std::vector<StepStats> logged;
    while (iter_ < cfg_.iters) {
      const StepStats st = step();
      const bool last = iter_ == cfg_.iters;
      if (st.iter % cfg_.log_every == 0 || last) {
        logged.push_back(st);
        if (log != nullptr) *log << to_json_line(st) << '\n' << std::flush;
      }
      if (cfg_.checkpoint && cfg_.checkpoint_every > 0 && iter_ % cfg_.checkpoint_every == 0 && !last) {
        write_checkpoint_file(checkpoint(), *cfg_.checkpoint);
      }
    }
    if (cfg_.checkpoint) write_checkpoint_file(checkpoint(), *cfg_.checkpoint);
    return logged;
  }

 private:
  TrainConfig cfg_;
  std::vector<TrainingPair> data_;
  SafmnModel<T> model_;
  Adam<T> adam_;
  std::mt19937_64 rng_;
  std::uint64_t iter_ = 0;
};

}  // namespace safmn
