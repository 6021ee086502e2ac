#pragma once

#include <algorithm>
#include <cstddef>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "safmn/tensor.hpp"

namespace safmn::ops {

struct Conv2dSpec {
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t groups = 1;
};

// direct: fixed accumulation order (bias, then input channel, ky, kx) per
// output element, bit-reproducible. gemm: im2col + Eigen product, used in
// fast mode; results agree with direct to rounding.
enum class ConvAlgo { direct, gemm };

template <class T>
constexpr ConvAlgo default_conv_algo() {
  return std::is_same_v<T, float> ? ConvAlgo::gemm : ConvAlgo::direct;
}

inline std::size_t conv_out_size(std::size_t in, std::size_t k, std::size_t stride,
                                 std::size_t pad) {
  if (in + 2 * pad < k) throw DimensionError("conv2d: kernel larger than padded input");
  return (in + 2 * pad - k) / stride + 1;
}

namespace detail {

struct ConvGeometry {
  std::size_t n, c_in, h, w;
  std::size_t c_out, k, oh, ow;
  std::size_t stride, pad, groups;
  std::size_t cin_g, cout_g;
};

template <class T>
ConvGeometry check_conv(const Shape& x, const Shape& wt, const Conv2dSpec& spec) {
  if (spec.groups == 0 || spec.stride == 0) throw DimensionError("conv2d: zero groups or stride");
  if (x.c % spec.groups != 0 || wt.n % spec.groups != 0) {
    throw DimensionError("conv2d: channels not divisible by groups");
  }
  if (wt.c * spec.groups != x.c) {
    throw DimensionError("conv2d: weight expects " + std::to_string(wt.c * spec.groups) +
                         " input channels, got " + std::to_string(x.c));
  }
  if (wt.h != wt.w) throw DimensionError("conv2d: only square kernels are supported");
  ConvGeometry g{};
  g.n = x.n;
  g.c_in = x.c;
  g.h = x.h;
  g.w = x.w;
  g.c_out = wt.n;
  g.k = wt.h;
  g.stride = spec.stride;
  g.pad = spec.padding;
  g.groups = spec.groups;
  g.oh = conv_out_size(x.h, g.k, g.stride, g.pad);
  g.ow = conv_out_size(x.w, g.k, g.stride, g.pad);
  g.cin_g = x.c / spec.groups;
  g.cout_g = wt.n / spec.groups;
  return g;
}

// Range of output columns whose tap `kx` lands inside the input row.
inline void valid_cols(const ConvGeometry& g, std::size_t kx, std::size_t& lo, std::size_t& hi) {
  // need 0 <= ox*s + kx - pad < w
  lo = 0;
  if (kx < g.pad) lo = (g.pad - kx + g.stride - 1) / g.stride;
  const std::ptrdiff_t last = static_cast<std::ptrdiff_t>(g.w) + static_cast<std::ptrdiff_t>(g.pad) -
                              static_cast<std::ptrdiff_t>(kx) - 1;
  if (last < 0) {
    hi = 0;
    return;
  }
  hi = std::min(g.ow, static_cast<std::size_t>(last) / g.stride + 1);
  if (hi < lo) hi = lo;
}

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Unfolds one batch item / group into a (cin_g*k*k, oh*ow) matrix.
template <class T>
void im2col(const ConvGeometry& g, const T* src, RowMat<T>& col) {
  const std::size_t kk = g.k * g.k;
  col.setZero(static_cast<Eigen::Index>(g.cin_g * kk), static_cast<Eigen::Index>(g.oh * g.ow));
  for (std::size_t ci = 0; ci < g.cin_g; ++ci) {
    const T* in = src + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = col.data() + (ci * kk + ky * g.k + kx) * g.oh * g.ow;
        std::size_t lo, hi;
        valid_cols(g, kx, lo, hi);
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          const T* in_row = in + static_cast<std::size_t>(iy) * g.w;
          T* out_row = row + oy * g.ow;
          for (std::size_t ox = lo; ox < hi; ++ox) out_row[ox] = in_row[ox * g.stride + kx - g.pad];
        }
      }
    }
  }
}

template <class T>
void col2im_add(const ConvGeometry& g, const RowMat<T>& col, T* dst) {
  const std::size_t kk = g.k * g.k;
  for (std::size_t ci = 0; ci < g.cin_g; ++ci) {
    T* out = dst + ci * g.h * g.w;
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = col.data() + (ci * kk + ky * g.k + kx) * g.oh * g.ow;
        std::size_t lo, hi;
        valid_cols(g, kx, lo, hi);
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                    static_cast<std::ptrdiff_t>(g.pad);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          T* out_row = out + static_cast<std::size_t>(iy) * g.w;
          const T* in_row = row + oy * g.ow;
          for (std::size_t ox = lo; ox < hi; ++ox) out_row[ox * g.stride + kx - g.pad] += in_row[ox];
        }
      }
    }
  }
}

}  // namespace detail

/// 2-D cross-correlation with zero padding. `weight` is (c_out, c_in/groups, k, k);
/// `bias` may be null.
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                 const Conv2dSpec& spec, ConvAlgo algo = default_conv_algo<T>()) {
  const auto g = detail::check_conv<T>(input.shape(), weight.shape(), spec);
  if (bias != nullptr && bias->numel() != g.c_out) {
    throw DimensionError("conv2d: bias length does not match output channels");
  }
  Tensor<T> out(Shape{g.n, g.c_out, g.oh, g.ow});
  const std::size_t kk = g.k * g.k;
  const std::size_t out_plane = g.oh * g.ow;

  const bool gemm = algo == ConvAlgo::gemm && g.cin_g * kk > 1;
  if (gemm) {
    detail::RowMat<T> col;
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        detail::im2col(g, input.plane(n, grp * g.cin_g), col);
        Eigen::Map<const detail::RowMat<T>> wmat(
            weight.data().data() + grp * g.cout_g * g.cin_g * kk,
            static_cast<Eigen::Index>(g.cout_g), static_cast<Eigen::Index>(g.cin_g * kk));
        Eigen::Map<detail::RowMat<T>> omat(out.plane(n, grp * g.cout_g),
                                           static_cast<Eigen::Index>(g.cout_g),
                                           static_cast<Eigen::Index>(out_plane));
        omat.noalias() = wmat * col;
        if (bias != nullptr) {
          for (std::size_t co = 0; co < g.cout_g; ++co) {
            omat.row(static_cast<Eigen::Index>(co)).array() += (*bias)[grp * g.cout_g + co];
          }
        }
      }
    }
    return out;
  }

  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t co = 0; co < g.c_out; ++co) {
      const std::size_t grp = co / g.cout_g;
      T* dst = out.plane(n, co);
      std::fill(dst, dst + out_plane, bias != nullptr ? (*bias)[co] : T{0});
      for (std::size_t cig = 0; cig < g.cin_g; ++cig) {
        const T* src = input.plane(n, grp * g.cin_g + cig);
        const T* wk = weight.data().data() + (co * g.cin_g + cig) * kk;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          for (std::size_t kx = 0; kx < g.k; ++kx) {
            const T wv = wk[ky * g.k + kx];
            std::size_t lo, hi;
            detail::valid_cols(g, kx, lo, hi);
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
              const T* in_row = src + static_cast<std::size_t>(iy) * g.w;
              T* out_row = dst + oy * g.ow;
              if (g.stride == 1) {
                for (std::size_t ox = lo; ox < hi; ++ox) out_row[ox] += wv * in_row[ox + kx - g.pad];
              } else {
                for (std::size_t ox = lo; ox < hi; ++ox) {
                  out_row[ox] += wv * in_row[ox * g.stride + kx - g.pad];
                }
              }
            }
          }
        }
      }
    }
  }
  return out;
}

// Bias-free form.
template <class T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, std::nullptr_t,
                 const Conv2dSpec& spec, ConvAlgo algo = default_conv_algo<T>()) {
  return conv2d(input, weight, static_cast<const Tensor<T>*>(nullptr), spec, algo);
}

template <class T>
struct Conv2dGrads {
  Tensor<T> input;
  Tensor<T> weight;
  Tensor<T> bias;  // empty when the layer has no bias
};

/// Vector-Jacobian product of conv2d with respect to input, weight and bias.
template <class T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& input, const Tensor<T>& weight, bool has_bias,
                               const Tensor<T>& grad_out, const Conv2dSpec& spec,
                               ConvAlgo algo = default_conv_algo<T>()) {
  const auto g = detail::check_conv<T>(input.shape(), weight.shape(), spec);
  require_same_shape(grad_out.shape(), Shape{g.n, g.c_out, g.oh, g.ow}, "conv2d_backward");
  const std::size_t kk = g.k * g.k;
  const std::size_t out_plane = g.oh * g.ow;

  Conv2dGrads<T> r;
  r.input = Tensor<T>(input.shape());
  r.weight = Tensor<T>(weight.shape());
  if (has_bias) {
    r.bias = Tensor<T>(Shape{1, g.c_out, 1, 1});
    for (std::size_t co = 0; co < g.c_out; ++co) {
      T acc{0};
      for (std::size_t n = 0; n < g.n; ++n) {
        const T* dy = grad_out.plane(n, co);
        for (std::size_t i = 0; i < out_plane; ++i) acc += dy[i];
      }
      r.bias[co] = acc;
    }
  }

  const bool gemm = algo == ConvAlgo::gemm && g.cin_g * kk > 1;
  if (gemm) {
    detail::RowMat<T> col;
    detail::RowMat<T> dcol;
    for (std::size_t n = 0; n < g.n; ++n) {
      for (std::size_t grp = 0; grp < g.groups; ++grp) {
        detail::im2col(g, input.plane(n, grp * g.cin_g), col);
        const auto rows = static_cast<Eigen::Index>(g.cout_g);
        const auto cols = static_cast<Eigen::Index>(g.cin_g * kk);
        Eigen::Map<const detail::RowMat<T>> wmat(
            weight.data().data() + grp * g.cout_g * g.cin_g * kk, rows, cols);
        Eigen::Map<detail::RowMat<T>> dwmat(r.weight.data().data() + grp * g.cout_g * g.cin_g * kk,
                                            rows, cols);
        Eigen::Map<const detail::RowMat<T>> dy(grad_out.plane(n, grp * g.cout_g), rows,
                                               static_cast<Eigen::Index>(out_plane));
        dwmat.noalias() += dy * col.transpose();
        dcol.noalias() = wmat.transpose() * dy;
        detail::col2im_add(g, dcol, r.input.plane(n, grp * g.cin_g));
      }
    }
    return r;
  }

  // weight gradient: per (co, ci, ky, kx), sum over n, oy, ox in order
  for (std::size_t co = 0; co < g.c_out; ++co) {
    const std::size_t grp = co / g.cout_g;
    for (std::size_t cig = 0; cig < g.cin_g; ++cig) {
      T* dwk = r.weight.data().data() + (co * g.cin_g + cig) * kk;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          std::size_t lo, hi;
          detail::valid_cols(g, kx, lo, hi);
          T acc{0};
          for (std::size_t n = 0; n < g.n; ++n) {
            const T* src = input.plane(n, grp * g.cin_g + cig);
            const T* dy = grad_out.plane(n, co);
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
              const T* in_row = src + static_cast<std::size_t>(iy) * g.w;
              const T* dy_row = dy + oy * g.ow;
              for (std::size_t ox = lo; ox < hi; ++ox) {
                acc += dy_row[ox] * in_row[ox * g.stride + kx - g.pad];
              }
            }
          }
          dwk[ky * g.k + kx] = acc;
        }
      }
    }
  }

  // input gradient: per input plane, scatter over (co, ky, kx) in order
  for (std::size_t n = 0; n < g.n; ++n) {
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      const std::size_t grp = ci / g.cin_g;
      const std::size_t cig = ci % g.cin_g;
      T* dx = r.input.plane(n, ci);
      for (std::size_t cog = 0; cog < g.cout_g; ++cog) {
        const std::size_t co = grp * g.cout_g + cog;
        const T* dy = grad_out.plane(n, co);
        const T* wk = weight.data().data() + (co * g.cin_g + cig) * kk;
        for (std::size_t ky = 0; ky < g.k; ++ky) {
          for (std::size_t kx = 0; kx < g.k; ++kx) {
            const T wv = wk[ky * g.k + kx];
            std::size_t lo, hi;
            detail::valid_cols(g, kx, lo, hi);
            for (std::size_t oy = 0; oy < g.oh; ++oy) {
              const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                                        static_cast<std::ptrdiff_t>(g.pad);
              if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
              T* dx_row = dx + static_cast<std::size_t>(iy) * g.w;
              const T* dy_row = dy + oy * g.ow;
              for (std::size_t ox = lo; ox < hi; ++ox) {
                dx_row[ox * g.stride + kx - g.pad] += wv * dy_row[ox];
              }
            }
          }
        }
      }
    }
  }
  return r;
}

}  // namespace safmn::ops
