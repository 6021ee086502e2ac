#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "safmn/tensor.hpp"

namespace safmn::ops {

/// Splits into `parts` contiguous, equally sized channel ranges.
template <class T>
std::vector<Tensor<T>> split_channels(const Tensor<T>& input, std::size_t parts) {
  const Shape s = input.shape();
  if (parts == 0 || s.c % parts != 0) {
    throw DimensionError("split_channels: " + std::to_string(s.c) + " channels not divisible by " +
                         std::to_string(parts));
  }
  const std::size_t cp = s.c / parts;
  std::vector<Tensor<T>> out;
  out.reserve(parts);
  for (std::size_t p = 0; p < parts; ++p) {
    Tensor<T> t(Shape{s.n, cp, s.h, s.w});
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* src = input.plane(n, p * cp);
      std::copy(src, src + cp * s.plane(), t.plane(n, 0));
    }
    out.push_back(std::move(t));
  }
  return out;
}

template <class T>
Tensor<T> concat_channels(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: empty list");
  const Shape s0 = parts.front().shape();
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    if (s.n != s0.n || s.h != s0.h || s.w != s0.w) {
      throw DimensionError("concat_channels: mismatched n/h/w " + to_string(s) + " vs " +
                           to_string(s0));
    }
    total += s.c;
  }
  Tensor<T> out(Shape{s0.n, total, s0.h, s0.w});
  for (std::size_t n = 0; n < s0.n; ++n) {
    std::size_t c0 = 0;
    for (const auto& p : parts) {
      const std::size_t len = p.shape().c * s0.plane();
      std::copy(p.plane(n, 0), p.plane(n, 0) + len, out.plane(n, c0));
      c0 += p.shape().c;
    }
  }
  return out;
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& parts) {
  return concat_channels(std::span<const Tensor<T>>(parts));
}

}  // namespace safmn::ops
