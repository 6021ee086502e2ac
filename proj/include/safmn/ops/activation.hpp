#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include "safmn/tensor.hpp"

namespace safmn::ops {

// Exact erf-based GELU: x * Phi(x).
template <class T>
T gelu_scalar(T x) {
  return x * T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
}

// d/dx [x Phi(x)] = Phi(x) + x phi(x)
template <class T>
T gelu_grad_scalar(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x / std::numbers::sqrt2_v<T>));
  const T pdf = std::exp(T(-0.5) * x * x) * std::numbers::inv_sqrtpi_v<T> /
                std::numbers::sqrt2_v<T>;
  return cdf + x * pdf;
}

template <class T>
T sigmoid_scalar(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T, class F>
Tensor<T> map(const Tensor<T>& x, F f) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = f(x[i]);
  return out;
}

template <class T>
Tensor<T> gelu(const Tensor<T>& x) {
  return map(x, [](T v) { return gelu_scalar(v); });
}

template <class T>
Tensor<T> gelu_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  require_same_shape(x.shape(), grad_out.shape(), "gelu_backward");
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = grad_out[i] * gelu_grad_scalar(x[i]);
  return dx;
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return map(x, [](T v) { return sigmoid_scalar(v); });
}

template <class T>
Tensor<T> sigmoid_backward(const Tensor<T>& x, const Tensor<T>& grad_out) {
  require_same_shape(x.shape(), grad_out.shape(), "sigmoid_backward");
  Tensor<T> dx(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) {
    const T s = sigmoid_scalar(x[i]);
    dx[i] = grad_out[i] * s * (T(1) - s);
  }
  return dx;
}

}  // namespace safmn::ops
