#pragma once

#include <cstddef>

#include "safmn/tensor.hpp"

namespace safmn::ops {

/// Sub-pixel rearrangement: (n, c*r*r, h, w) -> (n, c, h*r, w*r) with
/// out(co, i*r+di, j*r+dj) = in(co*r*r + di*r + dj, i, j).
template <class T>
Tensor<T> pixel_shuffle(const Tensor<T>& input, std::size_t r) {
  const Shape s = input.shape();
  if (r == 0 || s.c % (r * r) != 0) {
    throw DimensionError("pixel_shuffle: channel count " + std::to_string(s.c) +
                         " not divisible by r^2 = " + std::to_string(r * r));
  }
  const std::size_t co_n = s.c / (r * r);
  Tensor<T> out(Shape{s.n, co_n, s.h * r, s.w * r});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t co = 0; co < co_n; ++co) {
      T* dst = out.plane(n, co);
      for (std::size_t di = 0; di < r; ++di) {
        for (std::size_t dj = 0; dj < r; ++dj) {
          const T* src = input.plane(n, co * r * r + di * r + dj);
          for (std::size_t i = 0; i < s.h; ++i) {
            T* row = dst + (i * r + di) * s.w * r + dj;
            for (std::size_t j = 0; j < s.w; ++j) row[j * r] = src[i * s.w + j];
          }
        }
      }
    }
  }
  return out;
}

/// Inverse rearrangement; also the exact gradient of pixel_shuffle.
template <class T>
Tensor<T> pixel_unshuffle(const Tensor<T>& input, std::size_t r) {
  const Shape s = input.shape();
  if (r == 0 || s.h % r != 0 || s.w % r != 0) {
    throw DimensionError("pixel_unshuffle: spatial size not divisible by r");
  }
  const std::size_t h = s.h / r, w = s.w / r;
  Tensor<T> out(Shape{s.n, s.c * r * r, h, w});
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t co = 0; co < s.c; ++co) {
      const T* src = input.plane(n, co);
      for (std::size_t di = 0; di < r; ++di) {
        for (std::size_t dj = 0; dj < r; ++dj) {
          T* dst = out.plane(n, co * r * r + di * r + dj);
          for (std::size_t i = 0; i < h; ++i) {
            const T* row = src + (i * r + di) * s.w + dj;
            for (std::size_t j = 0; j < w; ++j) dst[i * w + j] = row[j * r];
          }
        }
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> pixel_shuffle_backward(const Tensor<T>& grad_out, std::size_t r) {
  return pixel_unshuffle(grad_out, r);
}

}  // namespace safmn::ops
