#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "labnet/graph.hpp"
#include "labnet/kernels.hpp"

// Differentiable operators recorded on a Graph. Every op returns a fresh node
// and registers the exact vector-Jacobian product for its inputs.
namespace labnet::ops {

inline constexpr double kLeakySlope = 0.2;

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var weight, Var bias, int64_t dilation);
template <typename T>
Var conv2d(Graph<T>& g, Var x, ConvWeight<T>& w);

template <typename T>
Var stencil3x3(Graph<T>& g, Var x, const Stencil3x3& k);

template <typename T>
Var leaky_relu(Graph<T>& g, Var x, double slope = kLeakySlope);
template <typename T>
Var sigmoid(Graph<T>& g, Var x);

template <typename T>
Var concat_channels(Graph<T>& g, std::span<const Var> parts);
template <typename T>
Var concat_channels(Graph<T>& g, std::initializer_list<Var> parts) {
  const std::vector<Var> v(parts);
  return concat_channels(g, std::span<const Var>(v));
}
template <typename T>
Var slice_channels(Graph<T>& g, Var x, int64_t begin, int64_t count);

template <typename T>
Var resize(Graph<T>& g, Var x, int64_t out_h, int64_t out_w, ResizeMode mode);

// Matrices are (1, 1, rows, cols) tensors.
template <typename T>
Var matmul(Graph<T>& g, Var a, Var b);
template <typename T>
Var transpose(Graph<T>& g, Var a);
// Softmax over each row, max-subtracted.
template <typename T>
Var row_softmax(Graph<T>& g, Var m);

// Population standard deviation over h*w per (n, c); output (n, c, 1, 1).
template <typename T>
Var spatial_std(Graph<T>& g, Var x);
template <typename T>
Var spatial_mean(Graph<T>& g, Var x);
// x (n, c, h, w) times gate (n, c, 1, 1).
template <typename T>
Var scale_channels(Graph<T>& g, Var x, Var gate);

template <typename T>
Var add(Graph<T>& g, Var a, Var b);
template <typename T>
Var sub(Graph<T>& g, Var a, Var b);
template <typename T>
Var scale(Graph<T>& g, Var a, double s);
template <typename T>
Var square(Graph<T>& g, Var a);
template <typename T>
Var abs(Graph<T>& g, Var a);
// sqrt(a + eps); a must be >= 0.
template <typename T>
Var sqrt(Graph<T>& g, Var a, double eps);

// Scalar reductions, output (1, 1, 1, 1).
template <typename T>
Var sum(Graph<T>& g, Var a);
template <typename T>
Var mean(Graph<T>& g, Var a);

// Forward differences, last column / row set to zero.
template <typename T>
Var diff_x(Graph<T>& g, Var a);
template <typename T>
Var diff_y(Graph<T>& g, Var a);

// Rows of the (1, C, H, W) map at flat pixel indices, as an (N, C) matrix.
template <typename T>
Var gather_pixels(Graph<T>& g, Var x, std::vector<int64_t> pixels);
// Copy of base with pixels[i] overwritten by row i of rows.
template <typename T>
Var scatter_pixels(Graph<T>& g, Var base, Var rows, std::vector<int64_t> pixels);

}  // namespace labnet::ops
