#include "labnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace labnet::ops {

namespace {

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  auto d = dst.values();
  auto s = src.values();
  for (size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

template <typename T>
Tensor<T> elementwise(const Tensor<T>& a, auto&& fn) {
  Tensor<T> out(a.shape());
  auto src = a.values();
  auto dst = out.values();
#pragma omp parallel for schedule(static)
  for (size_t i = 0; i < src.size(); ++i) dst[i] = fn(src[i]);
  return out;
}

void require_matrix(const Shape& s, const char* what) {
  require_shape(s.n == 1 && s.c == 1, std::string(what) + ": expected a (1,1,rows,cols) matrix, got " +
                                          s.str());
}

}  // namespace

template <typename T>
Var conv2d(Graph<T>& g, Var x, Var weight, Var bias, int64_t dilation) {
  const Tensor<T>& in = g.value(x);
  if (!in.all_finite()) throw NumericError("conv2d: non-finite input " + in.shape().str());
  const Tensor<T>& w = g.value(weight);
  std::span<const T> b;
  if (bias.valid()) b = g.value(bias).values();
  Tensor<T> out = kernels::conv2d_forward(in, w, b, dilation);
  std::vector<Var> inputs{x, weight};
  if (bias.valid()) inputs.push_back(bias);
  return g.record(std::move(out), inputs, [x, weight, bias, dilation](Graph<T>& gr, const Tensor<T>& dy) {
    const Tensor<T>& w = gr.value(weight);
    if (gr.requires_grad(x)) {
      add_into(gr.grad_slot(x), kernels::conv2d_backward_input(dy, w, dilation, gr.value(x).shape()));
    }
    const bool want_w = gr.requires_grad(weight);
    const bool want_b = bias.valid() && gr.requires_grad(bias);
    if (want_w || want_b) {
      Tensor<T> dw(w.shape());
      std::span<T> db;
      if (want_b) db = gr.grad_slot(bias).values();
      kernels::conv2d_backward_params(gr.value(x), dy, dilation, dw, db);
      if (want_w) add_into(gr.grad_slot(weight), dw);
    }
  });
}

template <typename T>
Var conv2d(Graph<T>& g, Var x, ConvWeight<T>& w) {
  return conv2d(g, x, g.param(w.weight), g.param(w.bias), w.dilation);
}

template <typename T>
Var stencil3x3(Graph<T>& g, Var x, const Stencil3x3& k) {
  return g.record(kernels::stencil3x3_forward(g.value(x), k), {x},
                  [x, k](Graph<T>& gr, const Tensor<T>& dy) {
                    add_into(gr.grad_slot(x), kernels::stencil3x3_backward(dy, k));
                  });
}

template <typename T>
Var leaky_relu(Graph<T>& g, Var x, double slope) {
  const T s = static_cast<T>(slope);
  return g.record(elementwise(g.value(x), [s](T v) { return v >= T(0) ? v : s * v; }), {x},
                  [x, s](Graph<T>& gr, const Tensor<T>& dy) {
                    auto in = gr.value(x).values();
                    auto d = dy.values();
                    auto dst = gr.grad_slot(x).values();
                    for (size_t i = 0; i < d.size(); ++i) dst[i] += in[i] >= T(0) ? d[i] : s * d[i];
                  });
}

template <typename T>
Var sigmoid(Graph<T>& g, Var x) {
  Tensor<T> out = elementwise(g.value(x), [](T v) {
    // Branches keep exp() from overflowing for large |v|.
    if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
    const T e = std::exp(v);
    return e / (T(1) + e);
  });
  return g.record(std::move(out), {x}, [x](Graph<T>& gr, const Tensor<T>& dy) {
    auto in = gr.value(x).values();
    auto d = dy.values();
    auto dst = gr.grad_slot(x).values();
    for (size_t i = 0; i < d.size(); ++i) {
      const T v = in[i];
      const T s = v >= T(0) ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
      dst[i] += d[i] * s * (T(1) - s);
    }
  });
}

template <typename T>
Var concat_channels(Graph<T>& g, std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_channels: no parts");
  const Shape first = g.value(parts[0]).shape();
  int64_t channels = 0;
  for (Var p : parts) {
    const Shape& s = g.value(p).shape();
    require_shape(s.n == first.n && s.h == first.h && s.w == first.w,
                  "concat_channels: spatial mismatch " + first.str() + " vs " + s.str());
    channels += s.c;
  }
  Tensor<T> out(Shape{first.n, channels, first.h, first.w});
  const int64_t hw = first.plane();
  int64_t offset = 0;
  for (Var p : parts) {
    const Tensor<T>& src = g.value(p);
    for (int64_t n = 0; n < first.n; ++n) {
      std::copy(src.plane(n, 0), src.plane(n, 0) + src.shape().c * hw, out.plane(n, offset));
    }
    offset += src.shape().c;
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return g.record(std::move(out), inputs, [inputs](Graph<T>& gr, const Tensor<T>& dy) {
    const int64_t hw = dy.shape().plane();
    int64_t off = 0;
    for (Var p : inputs) {
      const int64_t c = gr.value(p).shape().c;
      if (gr.requires_grad(p)) {
        Tensor<T>& dst = gr.grad_slot(p);
        for (int64_t n = 0; n < dy.shape().n; ++n) {
          const T* s = dy.plane(n, off);
          T* d = dst.plane(n, 0);
          for (int64_t i = 0; i < c * hw; ++i) d[i] += s[i];
        }
      }
      off += c;
    }
  });
}

template <typename T>
Var slice_channels(Graph<T>& g, Var x, int64_t begin, int64_t count) {
  const Shape& s = g.value(x).shape();
  if (begin < 0 || count < 1 || begin + count > s.c) {
    throw ShapeError("slice_channels: range out of bounds for " + s.str());
  }
  Tensor<T> out(Shape{s.n, count, s.h, s.w});
  for (int64_t n = 0; n < s.n; ++n) {
    std::copy(g.value(x).plane(n, begin), g.value(x).plane(n, begin) + count * s.plane(),
              out.plane(n, 0));
  }
  return g.record(std::move(out), {x}, [x, begin, count](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dst = gr.grad_slot(x);
    const int64_t hw = dy.shape().plane();
    for (int64_t n = 0; n < dy.shape().n; ++n) {
      const T* s = dy.plane(n, 0);
      T* d = dst.plane(n, begin);
      for (int64_t i = 0; i < count * hw; ++i) d[i] += s[i];
    }
  });
}

template <typename T>
Var resize(Graph<T>& g, Var x, int64_t out_h, int64_t out_w, ResizeMode mode) {
  return g.record(kernels::resize_forward(g.value(x), out_h, out_w, mode), {x},
                  [x, mode](Graph<T>& gr, const Tensor<T>& dy) {
                    add_into(gr.grad_slot(x),
                             kernels::resize_backward(dy, gr.value(x).shape(), mode));
                  });
}

template <typename T>
Var matmul(Graph<T>& g, Var a, Var b) {
  const Shape& sa = g.value(a).shape();
  const Shape& sb = g.value(b).shape();
  require_matrix(sa, "matmul");
  require_matrix(sb, "matmul");
  require_shape(sa.w == sb.h, "matmul: inner dims differ " + sa.str() + " x " + sb.str());
  const int64_t m = sa.h, k = sa.w, n = sb.w;
  Tensor<T> out(matrix_shape(m, n));
  if (m > 0 && n > 0 && k > 0) {
    kernels::gemm(false, false, m, n, k, T(1), g.value(a).data(), k, g.value(b).data(), n, T(0),
                  out.data(), n);
  }
  return g.record(std::move(out), {a, b}, [a, b, m, k, n](Graph<T>& gr, const Tensor<T>& dy) {
    if (m == 0 || n == 0 || k == 0) return;
    if (gr.requires_grad(a)) {
      // dA = dY * B^T
      kernels::gemm(false, true, m, k, n, T(1), dy.data(), n, gr.value(b).data(), n, T(1),
                    gr.grad_slot(a).data(), k);
    }
    if (gr.requires_grad(b)) {
      // dB = A^T * dY
      kernels::gemm(true, false, k, n, m, T(1), gr.value(a).data(), k, dy.data(), n, T(1),
                    gr.grad_slot(b).data(), n);
    }
  });
}

template <typename T>
Var transpose(Graph<T>& g, Var a) {
  const Tensor<T>& src = g.value(a);
  require_matrix(src.shape(), "transpose");
  const int64_t rows = src.shape().h, cols = src.shape().w;
  Tensor<T> out(matrix_shape(cols, rows));
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  }
  return g.record(std::move(out), {a}, [a, rows, cols](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dst = gr.grad_slot(a);
    for (int64_t r = 0; r < rows; ++r) {
      for (int64_t c = 0; c < cols; ++c) dst[r * cols + c] += dy[c * rows + r];
    }
  });
}

template <typename T>
Var row_softmax(Graph<T>& g, Var m) {
  const Tensor<T>& src = g.value(m);
  require_matrix(src.shape(), "row_softmax");
  if (!src.all_finite()) throw NumericError("row_softmax: non-finite input");
  const int64_t rows = src.shape().h, cols = src.shape().w;
  Tensor<T> out(src.shape());
#pragma omp parallel for schedule(static)
  for (int64_t r = 0; r < rows; ++r) {
    const T* in = src.data() + r * cols;
    T* dst = out.data() + r * cols;
    const T mx = *std::max_element(in, in + cols);
    T total = 0;
    for (int64_t c = 0; c < cols; ++c) {
      dst[c] = std::exp(in[c] - mx);
      total += dst[c];
    }
    for (int64_t c = 0; c < cols; ++c) dst[c] /= total;
  }
  Tensor<T> probs = out;
  return g.record(std::move(out), {m},
                  [m, rows, cols, probs = std::move(probs)](Graph<T>& gr, const Tensor<T>& dy) {
                    Tensor<T>& dst = gr.grad_slot(m);
#pragma omp parallel for schedule(static)
                    for (int64_t r = 0; r < rows; ++r) {
                      const T* p = probs.data() + r * cols;
                      const T* d = dy.data() + r * cols;
                      T dot = 0;
                      for (int64_t c = 0; c < cols; ++c) dot += p[c] * d[c];
                      T* out = dst.data() + r * cols;
                      for (int64_t c = 0; c < cols; ++c) out[c] += p[c] * (d[c] - dot);
                    }
                  });
}

template <typename T>
Var spatial_mean(Graph<T>& g, Var x) {
  const Tensor<T>& src = g.value(x);
  const Shape& s = src.shape();
  require_shape(s.plane() >= 1, "spatial_mean: empty plane");
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    const T* v = src.data() + p * s.plane();
    double acc = 0;
    for (int64_t i = 0; i < s.plane(); ++i) acc += v[i];
    out[p] = static_cast<T>(acc / static_cast<double>(s.plane()));
  }
  return g.record(std::move(out), {x}, [x](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dst = gr.grad_slot(x);
    const Shape& s = dst.shape();
    const T inv = T(1) / static_cast<T>(s.plane());
    for (int64_t p = 0; p < s.n * s.c; ++p) {
      T* d = dst.data() + p * s.plane();
      for (int64_t i = 0; i < s.plane(); ++i) d[i] += dy[p] * inv;
    }
  });
}

template <typename T>
Var spatial_std(Graph<T>& g, Var x) {
  const Tensor<T>& src = g.value(x);
  const Shape& s = src.shape();
  require_shape(s.plane() >= 1, "spatial_std: empty plane");
  const int64_t planes = s.n * s.c;
  Tensor<T> out(Shape{s.n, s.c, 1, 1});
  std::vector<T> means(static_cast<size_t>(planes));
  for (int64_t p = 0; p < planes; ++p) {
    const T* v = src.data() + p * s.plane();
    double mu = 0;
    for (int64_t i = 0; i < s.plane(); ++i) mu += v[i];
    mu /= static_cast<double>(s.plane());
    double var = 0;
    for (int64_t i = 0; i < s.plane(); ++i) var += (v[i] - mu) * (v[i] - mu);
    var /= static_cast<double>(s.plane());
    means[static_cast<size_t>(p)] = static_cast<T>(mu);
    out[p] = static_cast<T>(std::sqrt(var));
  }
  Tensor<T> stds = out;
  return g.record(std::move(out), {x},
                  [x, means = std::move(means), stds = std::move(stds)](Graph<T>& gr,
                                                                       const Tensor<T>& dy) {
                    const Tensor<T>& in = gr.value(x);
                    Tensor<T>& dst = gr.grad_slot(x);
                    const Shape& s = in.shape();
                    const T count = static_cast<T>(s.plane());
                    for (int64_t p = 0; p < s.n * s.c; ++p) {
                      // d std / d x_i = (x_i - mean) / (N std); zero on flat planes.
                      const T sd = stds[p];
                      if (sd <= T(0)) continue;
                      const T mu = means[static_cast<size_t>(p)];
                      const T coef = dy[p] / (count * sd);
                      const T* v = in.data() + p * s.plane();
                      T* d = dst.data() + p * s.plane();
                      for (int64_t i = 0; i < s.plane(); ++i) d[i] += coef * (v[i] - mu);
                    }
                  });
}

template <typename T>
Var scale_channels(Graph<T>& g, Var x, Var gate) {
  const Tensor<T>& src = g.value(x);
  const Tensor<T>& gt = g.value(gate);
  const Shape& s = src.shape();
  require_shape(gt.shape() == (Shape{s.n, s.c, 1, 1}),
                "scale_channels: gate " + gt.shape().str() + " for input " + s.str());
  Tensor<T> out(s);
  const int64_t hw = s.plane();
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    const T k = gt[p];
    const T* a = src.data() + p * hw;
    T* d = out.data() + p * hw;
    for (int64_t i = 0; i < hw; ++i) d[i] = a[i] * k;
  }
  return g.record(std::move(out), {x, gate}, [x, gate](Graph<T>& gr, const Tensor<T>& dy) {
    const Tensor<T>& src = gr.value(x);
    const Tensor<T>& gt = gr.value(gate);
    const Shape& s = src.shape();
    const int64_t hw = s.plane();
    if (gr.requires_grad(x)) {
      Tensor<T>& dx = gr.grad_slot(x);
      for (int64_t p = 0; p < s.n * s.c; ++p) {
        const T* d = dy.data() + p * hw;
        T* o = dx.data() + p * hw;
        for (int64_t i = 0; i < hw; ++i) o[i] += d[i] * gt[p];
      }
    }
    if (gr.requires_grad(gate)) {
      Tensor<T>& dg = gr.grad_slot(gate);
      for (int64_t p = 0; p < s.n * s.c; ++p) {
        const T* d = dy.data() + p * hw;
        const T* a = src.data() + p * hw;
        T acc = 0;
        for (int64_t i = 0; i < hw; ++i) acc += d[i] * a[i];
        dg[p] += acc;
      }
    }
  });
}

template <typename T>
Var add(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require_shape(x.shape() == y.shape(), "add: " + x.shape().str() + " vs " + y.shape().str());
  Tensor<T> out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] + y[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    if (gr.requires_grad(a)) add_into(gr.grad_slot(a), dy);
    if (gr.requires_grad(b)) add_into(gr.grad_slot(b), dy);
  });
}

template <typename T>
Var sub(Graph<T>& g, Var a, Var b) {
  const Tensor<T>& x = g.value(a);
  const Tensor<T>& y = g.value(b);
  require_shape(x.shape() == y.shape(), "sub: " + x.shape().str() + " vs " + y.shape().str());
  Tensor<T> out(x.shape());
  for (int64_t i = 0; i < x.numel(); ++i) out[i] = x[i] - y[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>& dy) {
    if (gr.requires_grad(a)) add_into(gr.grad_slot(a), dy);
    if (gr.requires_grad(b)) {
      Tensor<T>& d = gr.grad_slot(b);
      for (int64_t i = 0; i < d.numel(); ++i) d[i] -= dy[i];
    }
  });
}

template <typename T>
Var scale(Graph<T>& g, Var a, double s) {
  const T k = static_cast<T>(s);
  return g.record(elementwise(g.value(a), [k](T v) { return v * k; }), {a},
                  [a, k](Graph<T>& gr, const Tensor<T>& dy) {
                    Tensor<T>& d = gr.grad_slot(a);
                    for (int64_t i = 0; i < d.numel(); ++i) d[i] += k * dy[i];
                  });
}

template <typename T>
Var square(Graph<T>& g, Var a) {
  return g.record(elementwise(g.value(a), [](T v) { return v * v; }), {a},
                  [a](Graph<T>& gr, const Tensor<T>& dy) {
                    const Tensor<T>& x = gr.value(a);
                    Tensor<T>& d = gr.grad_slot(a);
                    for (int64_t i = 0; i < d.numel(); ++i) d[i] += T(2) * x[i] * dy[i];
                  });
}

template <typename T>
Var abs(Graph<T>& g, Var a) {
  return g.record(elementwise(g.value(a), [](T v) { return std::abs(v); }), {a},
                  [a](Graph<T>& gr, const Tensor<T>& dy) {
                    const Tensor<T>& x = gr.value(a);
                    Tensor<T>& d = gr.grad_slot(a);
                    for (int64_t i = 0; i < d.numel(); ++i) {
                      const T sgn = x[i] > T(0) ? T(1) : (x[i] < T(0) ? T(-1) : T(0));
                      d[i] += sgn * dy[i];
                    }
                  });
}

template <typename T>
Var sqrt(Graph<T>& g, Var a, double eps) {
  const T e = static_cast<T>(eps);
  return g.record(elementwise(g.value(a), [e](T v) { return std::sqrt(v + e); }), {a},
                  [a, e](Graph<T>& gr, const Tensor<T>& dy) {
                    const Tensor<T>& x = gr.value(a);
                    Tensor<T>& d = gr.grad_slot(a);
                    for (int64_t i = 0; i < d.numel(); ++i) {
                      d[i] += dy[i] / (T(2) * std::sqrt(x[i] + e));
                    }
                  });
}

template <typename T>
Var sum(Graph<T>& g, Var a) {
  double acc = 0;
  for (T v : g.value(a).values()) acc += v;
  return g.record(Tensor<T>(Shape{1, 1, 1, 1}, static_cast<T>(acc)), {a},
                  [a](Graph<T>& gr, const Tensor<T>& dy) {
                    Tensor<T>& d = gr.grad_slot(a);
                    for (int64_t i = 0; i < d.numel(); ++i) d[i] += dy[0];
                  });
}

template <typename T>
Var mean(Graph<T>& g, Var a) {
  const int64_t count = g.value(a).numel();
  if (count == 0) throw ArgumentError("mean of an empty tensor");
  double acc = 0;
  for (T v : g.value(a).values()) acc += v;
  return g.record(Tensor<T>(Shape{1, 1, 1, 1}, static_cast<T>(acc / static_cast<double>(count))),
                  {a}, [a, count](Graph<T>& gr, const Tensor<T>& dy) {
                    Tensor<T>& d = gr.grad_slot(a);
                    const T k = dy[0] / static_cast<T>(count);
                    for (int64_t i = 0; i < d.numel(); ++i) d[i] += k;
                  });
}

namespace {

template <typename T>
Var forward_diff(Graph<T>& g, Var a, bool along_x) {
  const Tensor<T>& src = g.value(a);
  const Shape& s = src.shape();
  const int64_t step = along_x ? 1 : s.w;
  Tensor<T> out(s);
  for (int64_t p = 0; p < s.n * s.c; ++p) {
    const T* v = src.data() + p * s.plane();
    T* d = out.data() + p * s.plane();
    for (int64_t y = 0; y < s.h; ++y) {
      for (int64_t x = 0; x < s.w; ++x) {
        const bool last = along_x ? x == s.w - 1 : y == s.h - 1;
        const int64_t i = y * s.w + x;
        d[i] = last ? T(0) : v[i + step] - v[i];
      }
    }
  }
  return g.record(std::move(out), {a}, [a, along_x, step](Graph<T>& gr, const Tensor<T>& dy) {
    Tensor<T>& dst = gr.grad_slot(a);
    const Shape& s = dst.shape();
    for (int64_t p = 0; p < s.n * s.c; ++p) {
      const T* g = dy.data() + p * s.plane();
      T* d = dst.data() + p * s.plane();
      for (int64_t y = 0; y < s.h; ++y) {
        for (int64_t x = 0; x < s.w; ++x) {
          const bool last = along_x ? x == s.w - 1 : y == s.h - 1;
          if (last) continue;
          const int64_t i = y * s.w + x;
          d[i + step] += g[i];
          d[i] -= g[i];
        }
      }
    }
  });
}

}  // namespace

template <typename T>
Var diff_x(Graph<T>& g, Var a) {
  return forward_diff(g, a, true);
}

template <typename T>
Var diff_y(Graph<T>& g, Var a) {
  return forward_diff(g, a, false);
}

template <typename T>
Var gather_pixels(Graph<T>& g, Var x, std::vector<int64_t> pixels) {
  const Tensor<T>& src = g.value(x);
  const Shape& s = src.shape();
  require_shape(s.n == 1, "gather_pixels: batch must be 1, got " + s.str());
  const int64_t rows = static_cast<int64_t>(pixels.size());
  Tensor<T> out(matrix_shape(rows, s.c));
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t p = pixels[static_cast<size_t>(r)];
    if (p < 0 || p >= s.plane()) throw ArgumentError("gather_pixels: pixel index out of range");
    for (int64_t c = 0; c < s.c; ++c) out[r * s.c + c] = src.plane(0, c)[p];
  }
  return g.record(std::move(out), {x}, [x, pixels = std::move(pixels)](Graph<T>& gr,
                                                                       const Tensor<T>& dy) {
    Tensor<T>& dst = gr.grad_slot(x);
    const int64_t channels = dst.shape().c;
    for (size_t r = 0; r < pixels.size(); ++r) {
      for (int64_t c = 0; c < channels; ++c) {
        dst.plane(0, c)[pixels[r]] += dy[static_cast<int64_t>(r) * channels + c];
      }
    }
  });
}

template <typename T>
Var scatter_pixels(Graph<T>& g, Var base, Var rows, std::vector<int64_t> pixels) {
  const Tensor<T>& b = g.value(base);
  const Tensor<T>& r = g.value(rows);
  const Shape& s = b.shape();
  require_shape(s.n == 1, "scatter_pixels: batch must be 1");
  require_shape(r.shape() == matrix_shape(static_cast<int64_t>(pixels.size()), s.c),
                "scatter_pixels: rows " + r.shape().str() + " for base " + s.str());
  Tensor<T> out = b;
  for (size_t i = 0; i < pixels.size(); ++i) {
    const int64_t p = pixels[i];
    if (p < 0 || p >= s.plane()) throw ArgumentError("scatter_pixels: pixel index out of range");
    for (int64_t c = 0; c < s.c; ++c) out.plane(0, c)[p] = r[static_cast<int64_t>(i) * s.c + c];
  }
  return g.record(std::move(out), {base, rows},
                  [base, rows, pixels = std::move(pixels)](Graph<T>& gr, const Tensor<T>& dy) {
                    const int64_t channels = dy.shape().c;
                    if (gr.requires_grad(base)) {
                      Tensor<T> masked = dy;
                      for (int64_t p : pixels) {
                        for (int64_t c = 0; c < channels; ++c) masked.plane(0, c)[p] = T(0);
                      }
                      add_into(gr.grad_slot(base), masked);
                    }
                    if (gr.requires_grad(rows)) {
                      Tensor<T>& dr = gr.grad_slot(rows);
                      for (size_t i = 0; i < pixels.size(); ++i) {
                        for (int64_t c = 0; c < channels; ++c) {
                          dr[static_cast<int64_t>(i) * channels + c] += dy.plane(0, c)[pixels[i]];
                        }
                      }
                    }
                  });
}

#define LABNET_INSTANTIATE_OPS(T)                                                        \
  template Var conv2d(Graph<T>&, Var, Var, Var, int64_t);                                \
  template Var conv2d(Graph<T>&, Var, ConvWeight<T>&);                                   \
  template Var stencil3x3(Graph<T>&, Var, const Stencil3x3&);                            \
  template Var leaky_relu(Graph<T>&, Var, double);                                       \
  template Var sigmoid(Graph<T>&, Var);                                                  \
  template Var concat_channels(Graph<T>&, std::span<const Var>);                         \
  template Var slice_channels(Graph<T>&, Var, int64_t, int64_t);                         \
  template Var resize(Graph<T>&, Var, int64_t, int64_t, ResizeMode);                     \
  template Var matmul(Graph<T>&, Var, Var);                                              \
  template Var transpose(Graph<T>&, Var);                                                \
  template Var row_softmax(Graph<T>&, Var);                                              \
  template Var spatial_std(Graph<T>&, Var);                                              \
  template Var spatial_mean(Graph<T>&, Var);                                             \
  template Var scale_channels(Graph<T>&, Var, Var);                                      \
  template Var add(Graph<T>&, Var, Var);                                                 \
  template Var sub(Graph<T>&, Var, Var);                                                 \
  template Var scale(Graph<T>&, Var, double);                                            \
  template Var square(Graph<T>&, Var);                                                   \
  template Var abs(Graph<T>&, Var);                                                      \
  template Var sqrt(Graph<T>&, Var, double);                                             \
  template Var sum(Graph<T>&, Var);                                                      \
  template Var mean(Graph<T>&, Var);                                                     \
  template Var diff_x(Graph<T>&, Var);                                                   \
  template Var diff_y(Graph<T>&, Var);                                                   \
  template Var gather_pixels(Graph<T>&, Var, std::vector<int64_t>);                      \
  template Var scatter_pixels(Graph<T>&, Var, Var, std::vector<int64_t>);

LABNET_INSTANTIATE_OPS(float)
LABNET_INSTANTIATE_OPS(double)

}  // namespace labnet::ops
