#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "safmn/tensor.hpp"

namespace safmn::ops {

// Adaptive pooling region along one axis: [floor(i*in/out), ceil((i+1)*in/out)).
inline std::size_t pool_begin(std::size_t i, std::size_t in, std::size_t out) {
  return (i * in) / out;
}
inline std::size_t pool_end(std::size_t i, std::size_t in, std::size_t out) {
  return ((i + 1) * in + out - 1) / out;
}

inline void check_pool_size(const Shape& s, std::size_t out_h, std::size_t out_w, const char* op) {
  if (out_h == 0 || out_w == 0 || out_h > s.h || out_w > s.w) {
    throw DimensionError(std::string(op) + ": output " + std::to_string(out_h) + "x" +
                         std::to_string(out_w) + " invalid for input " + to_string(s));
  }
}

template <class T>
struct MaxPoolResult {
  Tensor<T> output;
  // Flat input offset of the selected element for every output element.
  std::vector<std::size_t> argmax;
};

template <class T>
MaxPoolResult<T> adaptive_max_pool_with_indices(const Tensor<T>& input, std::size_t out_h,
                                                std::size_t out_w) {
  const Shape s = input.shape();
  check_pool_size(s, out_h, out_w, "adaptive_max_pool");
  MaxPoolResult<T> r{Tensor<T>(Shape{s.n, s.c, out_h, out_w}), {}};
  r.argmax.resize(r.output.numel());
  std::size_t o = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const std::size_t base = input.offset(n, c, 0, 0);
      for (std::size_t i = 0; i < out_h; ++i) {
        const std::size_t y0 = pool_begin(i, s.h, out_h), y1 = pool_end(i, s.h, out_h);
        for (std::size_t j = 0; j < out_w; ++j, ++o) {
          const std::size_t x0 = pool_begin(j, s.w, out_w), x1 = pool_end(j, s.w, out_w);
          std::size_t best = base + y0 * s.w + x0;
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t x = x0; x < x1; ++x) {
              const std::size_t idx = base + y * s.w + x;
              // strict comparison keeps the first maximum in row-major order
              if (input[idx] > input[best]) best = idx;
            }
          }
          r.output[o] = input[best];
          r.argmax[o] = best;
        }
      }
    }
  }
  return r;
}

template <class T>
Tensor<T> adaptive_max_pool(const Tensor<T>& input, std::size_t out_h, std::size_t out_w) {
  return adaptive_max_pool_with_indices(input, out_h, out_w).output;
}

template <class T>
Tensor<T> adaptive_max_pool_backward(const Shape& input_shape,
                                     const std::vector<std::size_t>& argmax,
                                     const Tensor<T>& grad_out) {
  if (argmax.size() != grad_out.numel()) {
    throw DimensionError("adaptive_max_pool_backward: index/gradient size mismatch");
  }
  Tensor<T> dx(input_shape);
  for (std::size_t o = 0; o < argmax.size(); ++o) dx[argmax[o]] += grad_out[o];
  return dx;
}

template <class T>
Tensor<T> adaptive_avg_pool(const Tensor<T>& input, std::size_t out_h, std::size_t out_w) {
  const Shape s = input.shape();
  check_pool_size(s, out_h, out_w, "adaptive_avg_pool");
  Tensor<T> out(Shape{s.n, s.c, out_h, out_w});
  std::size_t o = 0;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = input.plane(n, c);
      for (std::size_t i = 0; i < out_h; ++i) {
        const std::size_t y0 = pool_begin(i, s.h, out_h), y1 = pool_end(i, s.h, out_h);
        for (std::size_t j = 0; j < out_w; ++j, ++o) {
          const std::size_t x0 = pool_begin(j, s.w, out_w), x1 = pool_end(j, s.w, out_w);
          T acc{0};
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t x = x0; x < x1; ++x) acc += src[y * s.w + x];
          }
          out[o] = acc / static_cast<T>((y1 - y0) * (x1 - x0));
        }
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> adaptive_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  const Shape& so = grad_out.shape();
  Tensor<T> dx(input_shape);
  std::size_t o = 0;
  for (std::size_t n = 0; n < so.n; ++n) {
    for (std::size_t c = 0; c < so.c; ++c) {
      T* dst = dx.plane(n, c);
      for (std::size_t i = 0; i < so.h; ++i) {
        const std::size_t y0 = pool_begin(i, input_shape.h, so.h);
        const std::size_t y1 = pool_end(i, input_shape.h, so.h);
        for (std::size_t j = 0; j < so.w; ++j, ++o) {
          const std::size_t x0 = pool_begin(j, input_shape.w, so.w);
          const std::size_t x1 = pool_end(j, input_shape.w, so.w);
          const T share = grad_out[o] / static_cast<T>((y1 - y0) * (x1 - x0));
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t x = x0; x < x1; ++x) dst[y * input_shape.w + x] += share;
          }
        }
      }
    }
  }
  return dx;
}

/// Nearest-neighbour resampling; output (i, j) copies input
/// (floor(i*h/out_h), floor(j*w/out_w)). Serves both as the pyramid upsampler
/// and as the "nearest" downsampling variant.
template <class T>
Tensor<T> nearest_resize(const Tensor<T>& input, std::size_t out_h, std::size_t out_w) {
  const Shape s = input.shape();
  if (out_h == 0 || out_w == 0) throw DimensionError("nearest_resize: zero output size");
  Tensor<T> out(Shape{s.n, s.c, out_h, out_w});
  std::vector<std::size_t> xs(out_w);
  for (std::size_t j = 0; j < out_w; ++j) xs[j] = (j * s.w) / out_w;
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t c = 0; c < s.c; ++c) {
      const T* src = input.plane(n, c);
      T* dst = out.plane(n, c);
      for (std::size_t i = 0; i < out_h; ++i) {
        const T* row = src + ((i * s.h) / out_h) * s.w;
        for (std::size_t j = 0; j < out_w; ++j) dst[i * out_w + j] = row[xs[j]];
      }
    }
  }
  return out;
}

template <class T>
Tensor<T> nearest_resize_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
  const Shape& so = grad_out.shape();
  Tensor<T> dx(input_shape);
  for (std::size_t n = 0; n < so.n; ++n) {
    for (std::size_t c = 0; c < so.c; ++c) {
      const T* dy = grad_out.plane(n, c);
      T* dst = dx.plane(n, c);
      for (std::size_t i = 0; i < so.h; ++i) {
        T* row = dst + ((i * input_shape.h) / so.h) * input_shape.w;
        for (std::size_t j = 0; j < so.w; ++j) row[(j * input_shape.w) / so.w] += dy[i * so.w + j];
      }
    }
  }
  return dx;
}

/// Global average over each (n, c) plane; output (n, c, 1, 1).
template <class T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
  return adaptive_avg_pool(input, 1, 1);
}

}  // namespace safmn::ops
