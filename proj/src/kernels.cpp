#include "labnet/kernels.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>
#include <vector>

namespace labnet {

BilinearTap bilinear_tap(int64_t dst, int64_t in_size, int64_t out_size) {
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  double src = (static_cast<double>(dst) + 0.5) * scale - 0.5;
  if (src < 0.0) src = 0.0;
  int64_t i0 = static_cast<int64_t>(std::floor(src));
  if (i0 > in_size - 1) i0 = in_size - 1;
  const int64_t i1 = std::min(i0 + 1, in_size - 1);
  return {i0, i1, src - static_cast<double>(i0)};
}

int64_t nearest_index(int64_t dst, int64_t in_size, int64_t out_size) {
  const int64_t i = (dst * in_size) / out_size;
  return std::min(i, in_size - 1);
}

namespace kernels {

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, float alpha, const float* a,
          int64_t lda, const float* b, int64_t ldb, float beta, float* c, int64_t ldc) {
  cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb), beta,
              c, static_cast<int>(ldc));
}

void gemm(bool trans_a, bool trans_b, int64_t m, int64_t n, int64_t k, double alpha,
          const double* a, int64_t lda, const double* b, int64_t ldb, double beta, double* c,
          int64_t ldc) {
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, static_cast<int>(m), static_cast<int>(n),
              static_cast<int>(k), alpha, a, static_cast<int>(lda), b, static_cast<int>(ldb), beta,
              c, static_cast<int>(ldc));
}

namespace {

struct Tap {
  int64_t index;  // ky * k + kx
  int64_t dy;
  int64_t dx;
};

// Taps whose offset lands inside the image for at least one output pixel.
// Large dilations on small planes leave only the centre tap.
std::vector<Tap> live_taps(int64_t kernel, int64_t dilation, int64_t h, int64_t w) {
  std::vector<Tap> taps;
  const int64_t half = (kernel - 1) / 2;
  for (int64_t ky = 0; ky < kernel; ++ky) {
    for (int64_t kx = 0; kx < kernel; ++kx) {
      const int64_t dy = (ky - half) * dilation;
      const int64_t dx = (kx - half) * dilation;
      if (std::abs(dy) < h && std::abs(dx) < w) taps.push_back({ky * kernel + kx, dy, dx});
    }
  }
  return taps;
}

template <typename T>
void validate_conv(const Shape& in, const Shape& wshape, int64_t dilation) {
  require_shape(wshape.h == wshape.w && (wshape.h == 1 || wshape.h == 3),
                "conv kernel must be 1x1 or 3x3, got " + wshape.str());
  if (dilation < 1) throw ArgumentError("conv dilation must be >= 1");
  if (wshape.h == 1 && dilation != 1) throw ArgumentError("1x1 conv requires dilation 1");
  require_shape(in.c == wshape.c, "conv channel mismatch: input " + in.str() + " weight " +
                                      wshape.str());
}

// col[(ic * taps + t), y * w + x] = input[ic, y + dy_t, x + dx_t] (zero outside).
template <typename T>
void im2col(const T* input, int64_t channels, int64_t h, int64_t w, const std::vector<Tap>& taps,
            T* col) {
  const int64_t nt = static_cast<int64_t>(taps.size());
  const int64_t hw = h * w;
#pragma omp parallel for schedule(static)
  for (int64_t row = 0; row < channels * nt; ++row) {
    const int64_t ic = row / nt;
    const Tap& tap = taps[static_cast<size_t>(row % nt)];
    const T* src = input + ic * hw;
    T* dst = col + row * hw;
    const int64_t x_lo = std::max<int64_t>(0, -tap.dx);
    const int64_t x_hi = std::min<int64_t>(w, w - tap.dx);
    for (int64_t y = 0; y < h; ++y) {
      T* drow = dst + y * w;
      const int64_t sy = y + tap.dy;
      if (sy < 0 || sy >= h) {
        std::fill(drow, drow + w, T(0));
        continue;
      }
      const T* srow = src + sy * w + tap.dx;
      std::fill(drow, drow + x_lo, T(0));
      for (int64_t x = x_lo; x < x_hi; ++x) drow[x] = srow[x];
      std::fill(drow + x_hi, drow + w, T(0));
    }
  }
}

// Inverse scatter of im2col, accumulating into grad_input.
template <typename T>
void col2im(const T* col, int64_t channels, int64_t h, int64_t w, const std::vector<Tap>& taps,
            T* grad_input) {
  const int64_t nt = static_cast<int64_t>(taps.size());
  const int64_t hw = h * w;
#pragma omp parallel for schedule(static)
  for (int64_t ic = 0; ic < channels; ++ic) {
    T* dst = grad_input + ic * hw;
    for (int64_t t = 0; t < nt; ++t) {
      const Tap& tap = taps[static_cast<size_t>(t)];
      const T* src = col + (ic * nt + t) * hw;
      const int64_t x_lo = std::max<int64_t>(0, -tap.dx);
      const int64_t x_hi = std::min<int64_t>(w, w - tap.dx);
      for (int64_t y = 0; y < h; ++y) {
        const int64_t sy = y + tap.dy;
        if (sy < 0 || sy >= h) continue;
        const T* srow = src + y * w;
        T* drow = dst + sy * w + tap.dx;
        for (int64_t x = x_lo; x < x_hi; ++x) drow[x] += srow[x];
      }
    }
  }
}

// Weight matrix restricted to live taps: (out, in * taps).
template <typename T>
std::vector<T> pack_weight(const Tensor<T>& weight, const std::vector<Tap>& taps) {
  const Shape& ws = weight.shape();
  const int64_t kk = ws.h * ws.w;
  const int64_t nt = static_cast<int64_t>(taps.size());
  std::vector<T> packed(static_cast<size_t>(ws.n * ws.c * nt));
  for (int64_t o = 0; o < ws.n; ++o) {
    for (int64_t i = 0; i < ws.c; ++i) {
      for (int64_t t = 0; t < nt; ++t) {
        packed[static_cast<size_t>((o * ws.c + i) * nt + t)] =
            weight[(o * ws.c + i) * kk + taps[static_cast<size_t>(t)].index];
      }
    }
  }
  return packed;
}

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                         int64_t dilation) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  validate_conv<T>(in, ws, dilation);
  require_shape(bias.empty() || static_cast<int64_t>(bias.size()) == ws.n, "conv bias size");

  Tensor<T> out(Shape{in.n, ws.n, in.h, in.w});
  const int64_t hw = in.plane();
  const auto taps = live_taps(ws.h, dilation, in.h, in.w);
  const int64_t kdim = ws.c * static_cast<int64_t>(taps.size());
  const auto packed = pack_weight(weight, taps);
  const bool pointwise = ws.h == 1;
  std::vector<T> col(pointwise ? 0 : static_cast<size_t>(kdim * hw));

  for (int64_t n = 0; n < in.n; ++n) {
    T* y = out.plane(n, 0);
    if (!bias.empty()) {
#pragma omp parallel for schedule(static)
      for (int64_t o = 0; o < ws.n; ++o) std::fill(y + o * hw, y + (o + 1) * hw, bias[o]);
    }
    const T* cols = input.plane(n, 0);
    if (!pointwise) {
      im2col(input.plane(n, 0), in.c, in.h, in.w, taps, col.data());
      cols = col.data();
    }
    gemm(false, false, ws.n, hw, kdim, T(1), packed.data(), kdim, cols, hw, T(1), y, hw);
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                int64_t dilation, const Shape& input_shape) {
  const Shape& ws = weight.shape();
  validate_conv<T>(input_shape, ws, dilation);
  const Shape& gs = grad_out.shape();
  require_shape(gs.n == input_shape.n && gs.c == ws.n && gs.h == input_shape.h &&
                    gs.w == input_shape.w,
                "conv backward: grad shape " + gs.str());

  Tensor<T> grad_in(input_shape);
  const int64_t hw = input_shape.plane();
  const auto taps = live_taps(ws.h, dilation, input_shape.h, input_shape.w);
  const int64_t kdim = ws.c * static_cast<int64_t>(taps.size());
  const auto packed = pack_weight(weight, taps);
  const bool pointwise = ws.h == 1;
  std::vector<T> col(pointwise ? 0 : static_cast<size_t>(kdim * hw));

  for (int64_t n = 0; n < gs.n; ++n) {
    if (pointwise) {
      gemm(true, false, kdim, hw, ws.n, T(1), packed.data(), kdim, grad_out.plane(n, 0), hw, T(0),
           grad_in.plane(n, 0), hw);
    } else {
      gemm(true, false, kdim, hw, ws.n, T(1), packed.data(), kdim, grad_out.plane(n, 0), hw, T(0),
           col.data(), hw);
      col2im(col.data(), ws.c, input_shape.h, input_shape.w, taps, grad_in.plane(n, 0));
    }
  }
  return grad_in;
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& input, const Tensor<T>& grad_out, int64_t dilation,
                            Tensor<T>& grad_weight, std::span<T> grad_bias) {
  const Shape& in = input.shape();
  const Shape& ws = grad_weight.shape();
  validate_conv<T>(in, ws, dilation);
  const int64_t hw = in.plane();
  const auto taps = live_taps(ws.h, dilation, in.h, in.w);
  const int64_t nt = static_cast<int64_t>(taps.size());
  const int64_t kdim = ws.c * nt;
  const bool pointwise = ws.h == 1;
  std::vector<T> col(pointwise ? 0 : static_cast<size_t>(kdim * hw));
  std::vector<T> packed_grad(static_cast<size_t>(ws.n * kdim), T(0));

  for (int64_t n = 0; n < in.n; ++n) {
    const T* cols = input.plane(n, 0);
    if (!pointwise) {
      im2col(input.plane(n, 0), in.c, in.h, in.w, taps, col.data());
      cols = col.data();
    }
    gemm(false, true, ws.n, kdim, hw, T(1), grad_out.plane(n, 0), hw, cols, hw, T(1),
         packed_grad.data(), kdim);
    if (!grad_bias.empty()) {
      for (int64_t o = 0; o < ws.n; ++o) {
        const T* g = grad_out.plane(n, o);
        T acc = 0;
        for (int64_t i = 0; i < hw; ++i) acc += g[i];
        grad_bias[static_cast<size_t>(o)] += acc;
      }
    }
  }
  const int64_t kk = ws.h * ws.w;
  for (int64_t o = 0; o < ws.n; ++o) {
    for (int64_t i = 0; i < ws.c; ++i) {
      for (int64_t t = 0; t < nt; ++t) {
        grad_weight[(o * ws.c + i) * kk + taps[static_cast<size_t>(t)].index] +=
            packed_grad[static_cast<size_t>((o * ws.c + i) * nt + t)];
      }
    }
  }
}

template <typename T>
Tensor<T> stencil3x3_forward(const Tensor<T>& input, const Stencil3x3& k) {
  const Shape& s = input.shape();
  Tensor<T> out(s);
  const int64_t planes = s.n * s.c;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = input.data() + p * s.plane();
    T* dst = out.data() + p * s.plane();
    for (int64_t ky = -1; ky <= 1; ++ky) {
      for (int64_t kx = -1; kx <= 1; ++kx) {
        const T wt = static_cast<T>(k[static_cast<size_t>((ky + 1) * 3 + kx + 1)]);
        if (wt == T(0)) continue;
        const int64_t x_lo = std::max<int64_t>(0, -kx);
        const int64_t x_hi = std::min<int64_t>(s.w, s.w - kx);
        for (int64_t y = 0; y < s.h; ++y) {
          const int64_t sy = y + ky;
          if (sy < 0 || sy >= s.h) continue;
          const T* srow = src + sy * s.w + kx;
          T* drow = dst + y * s.w;
          for (int64_t x = x_lo; x < x_hi; ++x) drow[x] += wt * srow[x];
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> stencil3x3_backward(const Tensor<T>& grad_out, const Stencil3x3& k) {
  // Adjoint of a zero-padded correlation is correlation with the flipped stencil.
  Stencil3x3 flipped{};
  for (size_t i = 0; i < 9; ++i) flipped[i] = k[8 - i];
  return stencil3x3_forward(grad_out, flipped);
}

template <typename T>
Tensor<T> resize_forward(const Tensor<T>& input, int64_t out_h, int64_t out_w, ResizeMode mode) {
  if (out_h < 1 || out_w < 1) throw ArgumentError("resize target dims must be >= 1");
  const Shape& s = input.shape();
  Tensor<T> out(Shape{s.n, s.c, out_h, out_w});
  const int64_t planes = s.n * s.c;
  if (mode == ResizeMode::kNearest) {
    std::vector<int64_t> ys(static_cast<size_t>(out_h)), xs(static_cast<size_t>(out_w));
    for (int64_t y = 0; y < out_h; ++y) ys[static_cast<size_t>(y)] = nearest_index(y, s.h, out_h);
    for (int64_t x = 0; x < out_w; ++x) xs[static_cast<size_t>(x)] = nearest_index(x, s.w, out_w);
#pragma omp parallel for schedule(static)
    for (int64_t p = 0; p < planes; ++p) {
      const T* src = input.data() + p * s.plane();
      T* dst = out.data() + p * out_h * out_w;
      for (int64_t y = 0; y < out_h; ++y) {
        for (int64_t x = 0; x < out_w; ++x) {
          dst[y * out_w + x] = src[ys[static_cast<size_t>(y)] * s.w + xs[static_cast<size_t>(x)]];
        }
      }
    }
    return out;
  }
  std::vector<BilinearTap> ty(static_cast<size_t>(out_h)), tx(static_cast<size_t>(out_w));
  for (int64_t y = 0; y < out_h; ++y) ty[static_cast<size_t>(y)] = bilinear_tap(y, s.h, out_h);
  for (int64_t x = 0; x < out_w; ++x) tx[static_cast<size_t>(x)] = bilinear_tap(x, s.w, out_w);
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = input.data() + p * s.plane();
    T* dst = out.data() + p * out_h * out_w;
    for (int64_t y = 0; y < out_h; ++y) {
      const BilinearTap& a = ty[static_cast<size_t>(y)];
      const T fy = static_cast<T>(a.frac);
      for (int64_t x = 0; x < out_w; ++x) {
        const BilinearTap& b = tx[static_cast<size_t>(x)];
        const T fx = static_cast<T>(b.frac);
        const T top = src[a.i0 * s.w + b.i0] * (T(1) - fx) + src[a.i0 * s.w + b.i1] * fx;
        const T bot = src[a.i1 * s.w + b.i0] * (T(1) - fx) + src[a.i1 * s.w + b.i1] * fx;
        dst[y * out_w + x] = top * (T(1) - fy) + bot * fy;
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> resize_backward(const Tensor<T>& grad_out, const Shape& input_shape, ResizeMode mode) {
  const Shape& g = grad_out.shape();
  Tensor<T> grad_in(input_shape);
  const int64_t planes = g.n * g.c;
  const int64_t in_w = input_shape.w;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const T* src = grad_out.data() + p * g.plane();
    T* dst = grad_in.data() + p * input_shape.plane();
    for (int64_t y = 0; y < g.h; ++y) {
      for (int64_t x = 0; x < g.w; ++x) {
        const T v = src[y * g.w + x];
        if (mode == ResizeMode::kNearest) {
          dst[nearest_index(y, input_shape.h, g.h) * in_w + nearest_index(x, in_w, g.w)] += v;
          continue;
        }
        const BilinearTap a = bilinear_tap(y, input_shape.h, g.h);
        const BilinearTap b = bilinear_tap(x, in_w, g.w);
        const T fy = static_cast<T>(a.frac);
        const T fx = static_cast<T>(b.frac);
        dst[a.i0 * in_w + b.i0] += v * (T(1) - fy) * (T(1) - fx);
        dst[a.i0 * in_w + b.i1] += v * (T(1) - fy) * fx;
        dst[a.i1 * in_w + b.i0] += v * fy * (T(1) - fx);
        dst[a.i1 * in_w + b.i1] += v * fy * fx;
      }
    }
  }
  return grad_in;
}

#define LABNET_INSTANTIATE_KERNELS(T)                                                        \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>, \
                                    int64_t);                                                \
  template Tensor<T> conv2d_backward_input(const Tensor<T>&, const Tensor<T>&, int64_t,     \
                                           const Shape&);                                    \
  template void conv2d_backward_params(const Tensor<T>&, const Tensor<T>&, int64_t,         \
                                       Tensor<T>&, std::span<T>);                            \
  template Tensor<T> stencil3x3_forward(const Tensor<T>&, const Stencil3x3&);                \
  template Tensor<T> stencil3x3_backward(const Tensor<T>&, const Stencil3x3&);               \
  template Tensor<T> resize_forward(const Tensor<T>&, int64_t, int64_t, ResizeMode);         \
  template Tensor<T> resize_backward(const Tensor<T>&, const Shape&, ResizeMode);

LABNET_INSTANTIATE_KERNELS(float)
LABNET_INSTANTIATE_KERNELS(double)

}  // namespace kernels
}  // namespace labnet
