#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>

#include "safmn/error.hpp"

namespace safmn {

/// Single-cycle cosine annealing from lr_max (t = 0) to lr_min (t = T).
struct CosineSchedule {
  double lr_max = 1e-3;
  double lr_min = 1e-5;
  std::uint64_t total_iters = 1;
};

inline void validate(const CosineSchedule& s) {
  if (s.total_iters < 1) throw ConfigError("schedule total_iters must be >= 1");
  if (!(s.lr_min <= s.lr_max) || s.lr_min < 0.0) {
    throw ConfigError("schedule requires 0 <= lr_min <= lr_max");
  }
}

inline double lr_at(const CosineSchedule& s, std::uint64_t t) {
  validate(s);
  if (t > s.total_iters) {
    throw ConfigError("lr_at: iteration " + std::to_string(t) + " outside [0, " +
                      std::to_string(s.total_iters) + "]");
  }
  const double progress = static_cast<double>(t) / static_cast<double>(s.total_iters);
  return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(std::numbers::pi * progress));
}

}  // namespace safmn
