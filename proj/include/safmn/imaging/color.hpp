#pragma once

#include <cstddef>

#include "safmn/error.hpp"
#include "safmn/imaging/image.hpp"
#include "safmn/tensor.hpp"

namespace safmn {

// BT.601 studio-range luma for RGB in [0, 1]; result in [16, 235].
inline double luma(double r, double g, double b) { return 16.0 + 65.481 * r + 128.553 * g + 24.966 * b; }

/// (n, 3, h, w) RGB planes in [0, 1] -> (n, 1, h, w) Y planes in [0, 255].
template <class T>
Tensor<double> rgb_to_y(const Tensor<T>& rgb) {
  const Shape s = rgb.shape();
  if (s.c != 3) throw DimensionError("rgb_to_y: expected 3 channels, got " + to_string(s));
  Tensor<double> y(Shape{s.n, 1, s.h, s.w});
  for (std::size_t n = 0; n < s.n; ++n) {
    const T* r = rgb.plane(n, 0);
    const T* g = rgb.plane(n, 1);
    const T* b = rgb.plane(n, 2);
    double* out = y.plane(n, 0);
    for (std::size_t i = 0; i < s.plane(); ++i) {
      out[i] = luma(static_cast<double>(r[i]), static_cast<double>(g[i]), static_cast<double>(b[i]));
    }
  }
  return y;
}

inline Tensor<double> rgb_to_y(const ImageBuffer& img) { return rgb_to_y(to_tensor<double>(img)); }

}  // namespace safmn
