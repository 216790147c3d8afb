#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "labnet/tensor.hpp"

// Numeric kernels behind the differentiable ops. `kernels` holds the
// OpenMP-parallel versions used by the graph; `reference` holds serial direct
// loops that exist to check them (tests, benchmarks).
namespace labnet {

enum class ResizeMode { kBilinear, kNearest };

using Stencil3x3 = std::array<double, 9>;

namespace kernels {

// Cross-correlation, stride 1, "same" zero padding of dilation*(k-1)/2.
// weight: (out, in, k, k); bias: one value per output channel (may be empty).
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                         int64_t dilation);

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                int64_t dilation, const Shape& input_shape);

// Accumulates into grad_weight / grad_bias (grad_bias may be empty).
template <typename T>
void conv2d_backward_params(const Tensor<T>& input, const Tensor<T>& grad_out, int64_t dilation,
                            Tensor<T>& grad_weight, std::span<T> grad_bias);

// Per-channel fixed 3x3 stencil, zero padding.
template <typename T>
Tensor<T> stencil3x3_forward(const Tensor<T>& input, const Stencil3x3& k);
template <typename T>
Tensor<T> stencil3x3_backward(const Tensor<T>& grad_out, const Stencil3x3& k);

// Bilinear uses the align-corners-false convention with negative source
// coordinates clamped to zero; nearest picks floor(dst * in / out).
template <typename T>
Tensor<T> resize_forward(const Tensor<T>& input, int64_t out_h, int64_t out_w, ResizeMode mode);
template <typename T>
Tensor<T> resize_backward(const Tensor<T>& grad_out, const Shape& input_shape, ResizeMode mode);

// Row-major GEMM: c = alpha * op(a) * op(b) + beta * c.
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha,
          const float* a, int64_t lda, const float* b, int64_t ldb, float beta, float* c,
          int64_t ldc);
void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc);

}  // namespace kernels

namespace reference {

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                         int64_t dilation);
template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                int64_t dilation, const Shape& input_shape);
template <typename T>
void conv2d_backward_params(const Tensor<T>& input, const Tensor<T>& grad_out, int64_t dilation,
                            Tensor<T>& grad_weight, std::span<T> grad_bias);
template <typename T>
Tensor<T> stencil3x3_forward(const Tensor<T>& input, const Stencil3x3& k);
template <typename T>
Tensor<T> resize_forward(const Tensor<T>& input, int64_t out_h, int64_t out_w, ResizeMode mode);

}  // namespace reference

// Source coordinate helpers shared by both kernel families.
struct BilinearTap {
  int64_t i0;
  int64_t i1;
  double frac;
};
BilinearTap bilinear_tap(int64_t dst, int64_t in_size, int64_t out_size);
int64_t nearest_index(int64_t dst, int64_t in_size, int64_t out_size);

}  // namespace labnet
