#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "safmn/error.hpp"
#include "safmn/imaging/resize.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

// --- dihedral group of the square -------------------------------------------
//
// Transform d in [0, 8) is rot90^(d % 4) applied after a horizontal flip when
// d >= 4. rot90 is counter-clockwise.

inline constexpr int kDihedralOrder = 8;

template <class T>
Tensor<T> dihedral(const Tensor<T>& x, int d) {
  if (d < 0 || d >= kDihedralOrder) throw DimensionError("dihedral: index must be in [0, 8)");
  const Shape s = x.shape();
  const bool flip = d >= 4;
  const int rot = d % 4;
  const bool swap = rot % 2 == 1;
  Tensor<T> y(Shape{s.n, s.c, swap ? s.w : s.h, swap ? s.h : s.w});
  const std::size_t oh = y.shape().h, ow = y.shape().w;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t i = 0; i < oh; ++i) {
        for (std::size_t j = 0; j < ow; ++j) {
          // Map output (i, j) back through the rotation, then the flip.
          std::size_t r = 0, q = 0;
          switch (rot) {
            case 0: r = i; q = j; break;
            case 1: r = j; q = s.w - 1 - i; break;
            case 2: r = s.h - 1 - i; q = s.w - 1 - j; break;
            default: r = s.h - 1 - j; q = i; break;
          }
          if (flip) q = s.w - 1 - q;
          dst[i * ow + j] = src[r * s.w + q];
        }
      }
    }
  }
  return y;
}

// --- degradation ---------------------------------------------------------------

/// Center crop so both sides are multiples of `scale`.
template <class T>
Tensor<T> crop_to_multiple(const Tensor<T>& x, std::size_t scale) {
  const Shape s = x.shape();
  const std::size_t h = s.h - s.h % scale, w = s.w - s.w % scale;
  if (h == 0 || w == 0) throw DataError("image " + to_string(s) + " is smaller than the scale factor");
  if (h == s.h && w == s.w) return x;
  const std::size_t top = (s.h - h) / 2, left = (s.w - w) / 2;
  Tensor<T> y(Shape{s.n, s.c, h, w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      for (std::size_t i = 0; i < h; ++i) {
        for (std::size_t j = 0; j < w; ++j) dst[i * w + j] = src[(i + top) * s.w + j + left];
      }
    }
  }
  return y;
}

/// Antialiased bicubic downscale by `scale`; HR sides must already divide.
template <class T>
Tensor<T> degrade(const Tensor<T>& hr, std::size_t scale) {
  const Shape s = hr.shape();
  if (scale < 1 || s.h % scale != 0 || s.w % scale != 0) {
    throw DataError("degrade: " + to_string(s) + " is not divisible by scale " + std::to_string(scale));
  }
  return bicubic_resize(hr, s.h / scale, s.w / scale, true);
}

// --- patch sampling ------------------------------------------------------------

struct PatchSampler {
  std::size_t patch_size = 64;  // LR side
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  bool augment = true;
};

/// Aligned LR/HR planes of one training image, each (1, 3, h, w).
struct TrainingPair {
  Tensor<double> lr;
  Tensor<double> hr;
};

inline TrainingPair make_training_pair(const Tensor<double>& hr, std::size_t scale) {
  TrainingPair p;
  p.hr = crop_to_multiple(hr, scale);
  p.lr = degrade(p.hr, scale);
  return p;
}

template <class T>
struct Batch {
  Tensor<T> lr;
  Tensor<T> hr;
};

namespace detail {
template <class T>
void copy_patch(const Tensor<double>& src, std::size_t top, std::size_t left, std::size_t size,
                int d, Tensor<T>& dst, std::size_t index) {
  Tensor<double> patch(Shape{1, src.shape().c, size, size});
  const std::size_t w = src.shape().w;
  for (std::size_t c = 0; c < src.shape().c; ++c) {
    const double* s = src.plane(0, c);
    double* p = patch.plane(0, c);
    for (std::size_t i = 0; i < size; ++i) {
      for (std::size_t j = 0; j < size; ++j) p[i * size + j] = s[(top + i) * w + left + j];
    }
  }
  if (d != 0) patch = dihedral(patch, d);
  for (std::size_t c = 0; c < src.shape().c; ++c) {
    const double* p = patch.plane(0, c);
    T* out = dst.plane(index, c);
    for (std::size_t i = 0; i < size * size; ++i) out[i] = static_cast<T>(p[i]);
  }
}
}  // namespace detail

/// Draws `batch_size` aligned patch pairs. Per patch: image index, LR top,
/// LR left and (if enabled) the dihedral index, each taken as one 64-bit draw
/// reduced modulo the range, so a given engine state fixes the batch.
template <class T>
Batch<T> sample_batch(const std::vector<TrainingPair>& pairs, std::size_t scale,
                      const PatchSampler& cfg, std::mt19937_64& rng) {
  if (pairs.empty()) throw DataError("sample_batch: no training images");
  if (cfg.patch_size == 0 || cfg.batch_size == 0) throw ConfigError("patch and batch size must be positive");
  const std::size_t p = cfg.patch_size, hp = p * scale;
  for (const auto& pair : pairs) {
    const Shape s = pair.lr.shape();
    if (s.h < p || s.w < p) {
      throw DataError("LR image " + std::to_string(s.h) + "x" + std::to_string(s.w) +
                      " is smaller than patch size " + std::to_string(p));
    }
    if (pair.hr.shape().h != s.h * scale || pair.hr.shape().w != s.w * scale) {
      throw DataError("HR image is not aligned with its LR image at scale " + std::to_string(scale));
    }
  }
  Batch<T> b{Tensor<T>(Shape{cfg.batch_size, 3, p, p}), Tensor<T>(Shape{cfg.batch_size, 3, hp, hp})};
  for (std::size_t k = 0; k < cfg.batch_size; ++k) {
    const TrainingPair& pair = pairs[rng() % pairs.size()];
    const Shape s = pair.lr.shape();
    const std::size_t top = rng() % (s.h - p + 1);
    const std::size_t left = rng() % (s.w - p + 1);
    const int d = cfg.augment ? static_cast<int>(rng() % kDihedralOrder) : 0;
    detail::copy_patch(pair.lr, top, left, p, d, b.lr, k);
    detail::copy_patch(pair.hr, top * scale, left * scale, hp, d, b.hr, k);
  }
  return b;
}

/// One-shot form: degrades `hr` and samples with an engine seeded from cfg.seed.
template <class T>
Batch<T> sample_batch(const Tensor<double>& hr, std::size_t scale, const PatchSampler& cfg) {
  std::mt19937_64 rng(cfg.seed);
  return sample_batch<T>(std::vector<TrainingPair>{make_training_pair(hr, scale)}, scale, cfg, rng);
}

}  // namespace safmn
