#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "safmn/imaging/image.hpp"

namespace safmn {

/// Deterministic test picture: a smooth colour gradient overlaid with
/// sharp-edged discs, rings, rotated rectangles, triangles and striped
/// patches, rendered with 4x4 supersampling. Content is spread evenly so
/// every quadrant carries similar statistics.
inline ImageBuffer synthetic_image(std::size_t size = 256, std::uint64_t seed = 1) {
  struct Shape2d {
    int kind;
    double cx, cy, r, angle, period;
    std::array<double, 3> color;
  };
  std::mt19937_64 rng(seed);
  auto uni = [&rng](double lo, double hi) {
    return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  const double S = static_cast<double>(size);
  std::vector<Shape2d> shapes;
  const std::size_t cells = 6;  // jittered grid keeps the layout even
  for (std::size_t gy = 0; gy < cells; ++gy) {
    for (std::size_t gx = 0; gx < cells; ++gx) {
      for (int rep = 0; rep < 2; ++rep) {
        Shape2d s{};
        s.kind = static_cast<int>(rng() % 5);
        s.cx = (static_cast<double>(gx) + uni(0.1, 0.9)) * S / cells;
        s.cy = (static_cast<double>(gy) + uni(0.1, 0.9)) * S / cells;
        s.r = uni(0.05, 0.12) * S;
        s.angle = uni(0.0, std::numbers::pi);
        s.period = uni(2.5, 7.0);
        s.color = {uni(0.0, 1.0), uni(0.0, 1.0), uni(0.0, 1.0)};
        shapes.push_back(s);
      }
    }
  }
  auto inside = [](const Shape2d& s, double x, double y) {
    const double dx = x - s.cx, dy = y - s.cy;
    const double ca = std::cos(s.angle), sa = std::sin(s.angle);
    const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
    switch (s.kind) {
      case 0: return dx * dx + dy * dy <= s.r * s.r;
      case 1: {
        const double d2 = dx * dx + dy * dy;
        return d2 <= s.r * s.r && d2 >= 0.45 * s.r * s.r;
      }
      case 2: return std::abs(u) <= s.r && std::abs(v) <= 0.5 * s.r;
      case 3: return v >= -0.5 * s.r && v <= s.r - 1.7 * std::abs(u);
      default:
        return std::abs(u) <= s.r && std::abs(v) <= s.r &&
               std::fmod(u + 4.0 * s.r, 2.0 * s.period) < s.period;
    }
  };
  ImageBuffer img(size, size);
  constexpr int kSub = 4;
  for (std::size_t py = 0; py < size; ++py) {
    for (std::size_t px = 0; px < size; ++px) {
      std::array<double, 3> acc{};
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double x = static_cast<double>(px) + (sx + 0.5) / kSub;
          const double y = static_cast<double>(py) + (sy + 0.5) / kSub;
          std::array<double, 3> c{0.25 + 0.5 * x / S, 0.3 + 0.4 * y / S,
                                  0.5 + 0.25 * std::sin(6.0 * (x + y) / S)};
          for (const auto& s : shapes) {
            if (inside(s, x, y)) c = s.color;
          }
          for (int k = 0; k < 3; ++k) acc[k] += c[k];
        }
      }
      for (std::size_t k = 0; k < 3; ++k) img.at(px, py, k) = to_u8(acc[k] / (kSub * kSub));
    }
  }
  return img;
}

}  // namespace safmn
