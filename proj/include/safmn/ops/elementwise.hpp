#pragma once

#include <cstddef>

#include "safmn/tensor.hpp"

namespace safmn::ops {

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <class T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "add_inplace");
  for (std::size_t i = 0; i < a.numel(); ++i) a[i] += b[i];
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& a, T s) {
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.numel(); ++i) out[i] = a[i] * s;
  return out;
}

/// Multiplies every (n, c) plane of `x` by gate(n, c); gate is (n, c, 1, 1).
template <class T>
Tensor<T> channel_scale(const Tensor<T>& x, const Tensor<T>& gate) {
  const Shape s = x.shape();
  if (gate.shape() != Shape{s.n, s.c, 1, 1}) {
    throw DimensionError("channel_scale: gate must be (n, c, 1, 1)");
  }
  Tensor<T> out(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T g = gate.at(n, c, 0, 0);
      const T* src = x.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::size_t i = 0; i < s.plane(); ++i) dst[i] = src[i] * g;
    }
  }
  return out;
}

template <class T>
struct ChannelScaleGrads {
  Tensor<T> input;
  Tensor<T> gate;
};

template <class T>
ChannelScaleGrads<T> channel_scale_backward(const Tensor<T>& x, const Tensor<T>& gate,
                                            const Tensor<T>& grad_out) {
  const Shape s = x.shape();
  ChannelScaleGrads<T> g{Tensor<T>(s), Tensor<T>(gate.shape())};
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T gv = gate.at(n, c, 0, 0);
      const T* src = x.plane(n, c);
      const T* dy = grad_out.plane(n, c);
      T* dx = g.input.plane(n, c);
      T acc{0};
      for (std::size_t i = 0; i < s.plane(); ++i) {
        dx[i] = dy[i] * gv;
        acc += dy[i] * src[i];
      }
      g.gate.at(n, c, 0, 0) = acc;
    }
  }
  return g;
}

}  // namespace safmn::ops
