#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <limits>
#include <numbers>
#include <random>

#include "safmn/train/adam.hpp"
#include "safmn/train/loss.hpp"
#include "safmn/imaging/synthetic.hpp"
#include "safmn/train/schedule.hpp"
#include "safmn/train/trainer.hpp"
#include "json.hpp"
#include "support/tmpdir.hpp"
#include <sstream>
#include "support/fd.hpp"

using namespace safmn;
using safmn::testing::random_tensor;

namespace {

// Direct-DFT evaluation of the composite loss, independent of the FFT code.
double loss_oracle(const Tensor<double>& a, const Tensor<double>& b, double lambda) {
  const Shape s = a.shape();
  double l1 = 0.0, freq = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) l1 += std::abs(a[i] - b[i]);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t u = 0; u < s.h; ++u)
        for (std::size_t v = 0; v < s.w; ++v) {
          std::complex<double> acc{};
          for (std::size_t i = 0; i < s.h; ++i)
            for (std::size_t j = 0; j < s.w; ++j) {
              const double th = -2.0 * std::numbers::pi *
                                (static_cast<double>(u * i) / s.h + static_cast<double>(v * j) / s.w);
              acc += (a.at(n, c, i, j) - b.at(n, c, i, j)) * std::complex<double>(std::cos(th), std::sin(th));
            }
          freq += std::abs(acc.real()) + std::abs(acc.imag());
        }
  const double count = static_cast<double>(a.numel());
  return l1 / count + lambda * freq / count;
}

SafmnModel<double> tiny_model(std::uint64_t seed) { return init_model<double>(ModelConfig{1, 4, 2, {}}, seed); }

void set_grads(SafmnModel<double>& m, double g) {
  m.for_each_param([&](const std::string&, Tensor<double>& p) {
    p.ensure_grad();
    for (auto& v : p.grad()) v = g;
  });
}

std::vector<double> flat_params(const SafmnModel<double>& m) {
  std::vector<double> out;
  m.for_each_param([&](const std::string&, const Tensor<double>& p) {
    out.insert(out.end(), p.data().begin(), p.data().end());
  });
  return out;
}

}  // namespace

// --- loss ---------------------------------------------------------------------------

TEST(Loss, DefaultLambda) { EXPECT_EQ(LossConfig{}.lambda, 0.05); }

TEST(Loss, HandComputedTwoByTwo) {
  const Tensor<double> hr(Shape{1, 1, 2, 2}, {0.1, 0.2, 0.3, 0.4});
  Tensor<double> sr = hr;
  for (auto& v : sr.data()) v += 1.0;
  const auto r = sr_loss(sr, hr);
  EXPECT_NEAR(r.l1, 1.0, 1e-12);
  EXPECT_NEAR(r.frequency, 1.0, 1e-12);
  EXPECT_NEAR(r.value, 1.05, 1e-9);
}

TEST(Loss, IdenticalIsZeroAndLambdaZeroIsMae) {
  std::mt19937_64 rng(1);
  const auto a = random_tensor(Shape{2, 3, 5, 4}, rng);
  const auto b = random_tensor(a.shape(), rng);
  EXPECT_EQ(sr_loss(a, a).value, 0.0);
  double mae = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) mae += std::abs(a[i] - b[i]);
  EXPECT_NEAR(sr_loss(a, b, LossConfig{0.0}).value, mae / a.numel(), 1e-15);
}

TEST(Loss, MatchesDirectDftOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 10; ++t) {
    const auto a = random_tensor(Shape{2, 3, 5, 6}, rng);
    const auto b = random_tensor(a.shape(), rng);
    EXPECT_NEAR(sr_loss(a, b).value, loss_oracle(a, b, 0.05), 1e-10);
  }
}

TEST(Loss, NonNegativeAndZeroOnlyWhenEqual) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_tensor(Shape{1, 3, 4, 4}, rng);
    auto b = a;
    b[static_cast<std::size_t>(t) % b.numel()] += 1e-3;
    EXPECT_GT(sr_loss(a, b).value, 0.0);
    EXPECT_GE(sr_loss(a, random_tensor(a.shape(), rng)).value, 0.0);
  }
}

TEST(Loss, ShapeMismatchThrows) {
  EXPECT_THROW(sr_loss(Tensor<double>(Shape{1, 3, 4, 4}), Tensor<double>(Shape{1, 3, 4, 5})), DimensionError);
  EXPECT_THROW(sr_loss(Tensor<double>(Shape{1, 1, 1, 1}), Tensor<double>(Shape{1, 1, 1, 1}), LossConfig{-1.0}),
               ConfigError);
}

TEST(Loss, AlternativeReductions) {
  const Tensor<double> hr(Shape{1, 1, 2, 2});
  const Tensor<double> sr(Shape{1, 1, 2, 2}, 1.0);
  EXPECT_NEAR(sr_loss(sr, hr, {0.05, FftReduction::sum, FftNorm::component}).frequency, 4.0, 1e-12);
  // spectrum (4, 0, 0, 0): magnitude and component norms agree here
  EXPECT_NEAR(sr_loss(sr, hr, {0.05, FftReduction::mean, FftNorm::magnitude}).frequency, 1.0, 1e-12);
}

// --- adam --------------------------------------------------------------------------

TEST(Adam, FirstStepIsSignTimesLr) {
  for (double g : {1e-3, 0.5, -7.0, 300.0}) {
    auto m = tiny_model(1);
    const auto before = flat_params(m);
    set_grads(m, g);
    Adam<double> opt;
    opt.step(m, 1e-3);
    const auto after = flat_params(m);
    for (std::size_t i = 0; i < before.size(); ++i) {
      // bias-corrected first step is lr * g / (|g| + eps)
      const double delta = after[i] - before[i];
      EXPECT_NEAR(delta, -1e-3 * (g > 0 ? 1.0 : -1.0), 1e-6);
      EXPECT_NEAR(delta, -1e-3 * g / (std::abs(g) + 1e-8), 1e-15);
    }
  }
}

TEST(Adam, FirstStepScaleInvariant) {
  auto a = tiny_model(2), b = tiny_model(2);
  set_grads(a, 0.01);
  set_grads(b, 10.0);
  Adam<double> oa, ob;
  oa.step(a, 1e-3);
  ob.step(b, 1e-3);
  const auto pa = flat_params(a), pb = flat_params(b), p0 = flat_params(tiny_model(2));
  for (std::size_t i = 0; i < pa.size(); ++i) {
    EXPECT_NEAR((pa[i] - p0[i]) / (pb[i] - p0[i]), 1.0, 1e-5);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  auto m = tiny_model(3);
  const auto before = flat_params(m);
  Adam<double> opt;
  for (int i = 0; i < 20; ++i) {
    set_grads(m, 0.0);
    opt.step(m, 1e-3);
  }
  EXPECT_EQ(flat_params(m), before);
  EXPECT_EQ(opt.step_count(), 20u);
}

TEST(Adam, NonFiniteGradientRefusesStep) {
  auto m = tiny_model(4);
  set_grads(m, 0.1);
  Adam<double> opt;
  opt.step(m, 1e-3);
  const auto before = flat_params(m);
  const auto state = opt.to_blob(m);
  m.for_each_param([](const std::string& name, Tensor<double>& p) {
    if (name == "tail.bias") p.grad()[0] = std::numeric_limits<double>::quiet_NaN();
  });
  EXPECT_THROW(opt.step(m, 1e-3), TrainingError);
  EXPECT_EQ(flat_params(m), before);
  EXPECT_EQ(opt.to_blob(m), state);
}

TEST(Adam, DeterministicAcrossRuns) {
  auto run = [] {
    auto m = tiny_model(5);
    Adam<double> opt;
    std::mt19937_64 rng(9);
    for (int it = 0; it < 10; ++it) {
      m.for_each_param([&](const std::string&, Tensor<double>& p) {
        p.ensure_grad();
        for (auto& v : p.grad()) v = std::uniform_real_distribution<double>(-1, 1)(rng);
      });
      opt.step(m, 1e-3);
    }
    return flat_params(m);
  };
  EXPECT_EQ(run(), run());
}

TEST(Adam, StateRoundTripsThroughBlob) {
  auto m = tiny_model(6);
  set_grads(m, 0.3);
  Adam<double> a;
  a.step(m, 1e-3);
  Adam<double> b;
  b.load_blob(a.to_blob(m), m);
  EXPECT_EQ(b.to_blob(m), a.to_blob(m));
}

// --- schedule ------------------------------------------------------------------------

TEST(Schedule, EndpointsAndMidpoint) {
  const CosineSchedule s{1e-3, 1e-5, 1000};
  EXPECT_DOUBLE_EQ(lr_at(s, 0), 1e-3);
  EXPECT_DOUBLE_EQ(lr_at(s, 1000), 1e-5);
  EXPECT_NEAR(lr_at(s, 500), 5.05e-4, 1e-15);
}

TEST(Schedule, MonotoneNonIncreasing) {
  const CosineSchedule s{1e-3, 1e-5, 777};
  for (std::uint64_t t = 1; t <= 777; ++t) EXPECT_LE(lr_at(s, t), lr_at(s, t - 1));
}

TEST(Schedule, OutOfRangeAndInvalid) {
  EXPECT_THROW(lr_at(CosineSchedule{1e-3, 1e-5, 10}, 11), ConfigError);
  EXPECT_THROW(lr_at(CosineSchedule{1e-3, 1e-5, 0}, 0), ConfigError);
  EXPECT_THROW(lr_at(CosineSchedule{1e-5, 1e-3, 10}, 0), ConfigError);
}

// --- trainer -------------------------------------------------------------------------

namespace {

TrainConfig small_run(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.model = ModelConfig{1, 8, 2, {}};
  cfg.sampler = PatchSampler{8, 2, 0, true};
  cfg.iters = 6;
  cfg.seed = seed;
  cfg.log_every = 2;
  return cfg;
}

std::vector<TrainingPair> small_data() {
  return {make_training_pair(to_tensor<double>(synthetic_image(48, 2)), 2)};
}

}  // namespace

TEST(Trainer, BitIdenticalRuns) {
  auto once = [](std::uint64_t seed) {
    Trainer<double> t(small_run(seed), small_data());
    std::ostringstream log;
    t.run(&log);
    return std::make_pair(encode_checkpoint(t.checkpoint()), log.str());
  };
  const auto a = once(3), b = once(3), c = once(4);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  EXPECT_NE(a.first, c.first);
}

TEST(Trainer, LogLinesAndSchedule) {
  Trainer<float> t(small_run(1), small_data());
  std::ostringstream log;
  const auto stats = t.run(&log);
  ASSERT_EQ(stats.size(), 4u);  // iterations 0, 2, 4 and the last one
  std::istringstream in(log.str());
  std::string line;
  std::vector<std::uint64_t> iters;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    iters.push_back(j["iter"].get<std::uint64_t>());
    EXPECT_NEAR(j["loss"].get<double>(), j["l1"].get<double>() + 0.05 * j["freq"].get<double>(), 1e-6);
  }
  EXPECT_EQ(iters, (std::vector<std::uint64_t>{0, 2, 4, 5}));
  EXPECT_DOUBLE_EQ(stats.front().lr, 1e-3);
  EXPECT_EQ(t.iteration(), 6u);
  EXPECT_THROW(t.step(), TrainingError);
}

TEST(Trainer, WritesLoadableCheckpoint) {
  safmn::testing::TempDir dir;
  auto cfg = small_run(2);
  cfg.checkpoint = dir.path() / "ck.bin";
  cfg.checkpoint_every = 2;
  Trainer<double> t(cfg, small_data());
  t.run();
  const auto ck = read_checkpoint_file(*cfg.checkpoint);
  EXPECT_EQ(ck.iteration, 6u);
  ASSERT_TRUE(ck.optimizer.has_value());
  EXPECT_EQ(ck.optimizer->step, 6u);
  const auto m = model_from_checkpoint<double>(ck);
  const Tensor<double> x(Shape{1, 3, 5, 5}, 0.4);
  EXPECT_EQ(m.forward(x, Mode::eval), t.model().forward(x, Mode::eval));
}

TEST(Trainer, RejectsBadConfigAndData) {
  auto cfg = small_run(1);
  cfg.iters = 0;
  EXPECT_THROW(Trainer<float>(cfg, small_data()), ConfigError);
  EXPECT_THROW(Trainer<float>(small_run(1), {}), DataError);
  auto big = small_run(1);
  big.sampler.patch_size = 64;
  Trainer<float> t(big, small_data());
  EXPECT_THROW(t.step(), DataError);
}
