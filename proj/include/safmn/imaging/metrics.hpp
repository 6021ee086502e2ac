#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "safmn/error.hpp"
#include "safmn/imaging/color.hpp"
#include "safmn/imaging/image.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

inline constexpr double kPeak = 255.0;

namespace detail {

// Checks two single-plane tensors and returns the cropped extent.
inline void check_planes(const Tensor<double>& a, const Tensor<double>& b, std::size_t crop,
                         const char* op) {
  require_same_shape(a.shape(), b.shape(), op);
  if (a.shape().n != 1 || a.shape().c != 1) {
    throw DimensionError(std::string(op) + ": expected a single plane, got " + to_string(a.shape()));
  }
  if (2 * crop >= a.shape().h || 2 * crop >= a.shape().w) {
    throw DimensionError(std::string(op) + ": border crop " + std::to_string(crop) +
                         " leaves no pixels of " + to_string(a.shape()));
  }
}

}  // namespace detail

/// 10 log10(255^2 / MSE) over the plane minus `crop` pixels on each side.
/// Identical planes give +infinity.
inline double psnr_plane(const Tensor<double>& a, const Tensor<double>& b, std::size_t crop = 0) {
  detail::check_planes(a, b, crop, "psnr");
  const std::size_t h = a.shape().h, w = a.shape().w;
  double sse = 0.0;
  for (std::size_t y = crop; y < h - crop; ++y) {
    for (std::size_t x = crop; x < w - crop; ++x) {
      const double d = a[y * w + x] - b[y * w + x];
      sse += d * d;
    }
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = sse / static_cast<double>((h - 2 * crop) * (w - 2 * crop));
  return 10.0 * std::log10(kPeak * kPeak / mse);
}

inline double psnr_y(const ImageBuffer& a, const ImageBuffer& b, std::size_t crop = 0) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionError("psnr_y: image sizes differ");
  }
  return psnr_plane(rgb_to_y(a), rgb_to_y(b), crop);
}

inline std::vector<double> gaussian_window(std::size_t size = 11, double sigma = 1.5) {
  std::vector<double> g(size * size);
  const double c = (static_cast<double>(size) - 1.0) / 2.0;
  double sum = 0.0;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      const double dy = static_cast<double>(y) - c, dx = static_cast<double>(x) - c;
      g[y * size + x] = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
      sum += g[y * size + x];
    }
  }
  for (auto& v : g) v /= sum;
  return g;
}

/// Mean SSIM over all fully contained 11x11 Gaussian windows (sigma 1.5),
/// K1 = 0.01, K2 = 0.03, dynamic range 255.
inline double ssim_plane(const Tensor<double>& a, const Tensor<double>& b, std::size_t crop = 0) {
  constexpr std::size_t kWin = 11;
  require_same_shape(a.shape(), b.shape(), "ssim");
  if (a.shape().n != 1 || a.shape().c != 1) throw DimensionError("ssim: expected a single plane");
  const std::size_t h = a.shape().h, w = a.shape().w;
  if (h < 2 * crop + kWin || w < 2 * crop + kWin) {
    throw DimensionError("ssim: image must be at least 11x11 after cropping, got " +
                         std::to_string(h) + "x" + std::to_string(w) + " with crop " +
                         std::to_string(crop));
  }
  const double c1 = (0.01 * kPeak) * (0.01 * kPeak);
  const double c2 = (0.03 * kPeak) * (0.03 * kPeak);
  const auto g = gaussian_window(kWin, 1.5);
  const std::size_t y0 = crop, x0 = crop, ny = h - 2 * crop - kWin + 1, nx = w - 2 * crop - kWin + 1;
  double total = 0.0;
  for (std::size_t wy = 0; wy < ny; ++wy) {
    for (std::size_t wx = 0; wx < nx; ++wx) {
      double mu_a = 0.0, mu_b = 0.0;
      for (std::size_t ky = 0; ky < kWin; ++ky) {
        for (std::size_t kx = 0; kx < kWin; ++kx) {
          const std::size_t i = (y0 + wy + ky) * w + x0 + wx + kx;
          mu_a += g[ky * kWin + kx] * a[i];
          mu_b += g[ky * kWin + kx] * b[i];
        }
      }
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (std::size_t ky = 0; ky < kWin; ++ky) {
        for (std::size_t kx = 0; kx < kWin; ++kx) {
          const std::size_t i = (y0 + wy + ky) * w + x0 + wx + kx;
          const double da = a[i] - mu_a, db = b[i] - mu_b;
          va += g[ky * kWin + kx] * da * da;
          vb += g[ky * kWin + kx] * db * db;
          cov += g[ky * kWin + kx] * da * db;
        }
      }
      total += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
               ((mu_a * mu_a + mu_b * mu_b + c1) * (va + vb + c2));
    }
  }
  return total / static_cast<double>(ny * nx);
}

inline double ssim_y(const ImageBuffer& a, const ImageBuffer& b, std::size_t crop = 0) {
  if (a.width != b.width || a.height != b.height) throw DimensionError("ssim_y: image sizes differ");
  return ssim_plane(rgb_to_y(a), rgb_to_y(b), crop);
}

}  // namespace safmn
