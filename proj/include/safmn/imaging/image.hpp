#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "safmn/error.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

/// 8-bit RGB raster, interleaved row-major (r, g, b per pixel).
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> data;

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h, std::uint8_t fill = 0)
      : width(w), height(h), data(3 * w * h, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c) { return data[3 * (y * width + x) + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c) const {
    return data[3 * (y * width + x) + c];
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

inline std::uint8_t to_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v * 255.0), 0.0, 255.0));
}

/// (1, 3, h, w) planes with values v / 255.
template <class T = double>
Tensor<T> to_tensor(const ImageBuffer& img) {
  Tensor<T> t(Shape{1, 3, img.height, img.width});
  for (std::size_t c = 0; c < 3; ++c) {
    T* p = t.plane(0, c);
    for (std::size_t i = 0; i < img.width * img.height; ++i) {
      p[i] = static_cast<T>(img.data[3 * i + c] / 255.0);
    }
  }
  return t;
}

/// Batch item `n` of a 3-channel tensor, clamped to [0, 1] and rounded.
template <class T>
ImageBuffer to_image(const Tensor<T>& t, std::size_t n = 0) {
  const Shape s = t.shape();
  if (s.c != 3 || n >= s.n) {
    throw DimensionError("to_image: expected a 3-channel tensor, got " + to_string(s));
  }
  ImageBuffer img(s.w, s.h);
  for (std::size_t c = 0; c < 3; ++c) {
    const T* p = t.plane(n, c);
    for (std::size_t i = 0; i < s.plane(); ++i) img.data[3 * i + c] = to_u8(static_cast<double>(p[i]));
  }
  return img;
}

}  // namespace safmn
