// Serial direct-summation kernels. Deliberately naive: they are the oracle the
// parallel kernels are tested and benchmarked against.
#include <algorithm>
#include <cmath>

#include "labnet/kernels.hpp"

namespace labnet::reference {

namespace {

bool inside(int64_t y, int64_t x, int64_t h, int64_t w) { return y >= 0 && y < h && x >= 0 && x < w; }

}  // namespace

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const Tensor<T>& weight, std::span<const T> bias,
                         int64_t dilation) {
  const Shape& in = input.shape();
  const Shape& ws = weight.shape();
  require_shape(in.c == ws.c, "reference conv channel mismatch");
  const int64_t half = (ws.h - 1) / 2;
  Tensor<T> out(Shape{in.n, ws.n, in.h, in.w});
  for (int64_t n = 0; n < in.n; ++n) {
    for (int64_t o = 0; o < ws.n; ++o) {
      for (int64_t y = 0; y < in.h; ++y) {
        for (int64_t x = 0; x < in.w; ++x) {
          double acc = bias.empty() ? 0.0 : static_cast<double>(bias[static_cast<size_t>(o)]);
          for (int64_t i = 0; i < in.c; ++i) {
            for (int64_t ky = 0; ky < ws.h; ++ky) {
              for (int64_t kx = 0; kx < ws.w; ++kx) {
                const int64_t sy = y + (ky - half) * dilation;
                const int64_t sx = x + (kx - half) * dilation;
                if (!inside(sy, sx, in.h, in.w)) continue;
                acc += static_cast<double>(weight.at(o, i, ky, kx)) *
                       static_cast<double>(input.at(n, i, sy, sx));
              }
            }
          }
          out.at(n, o, y, x) = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv2d_backward_input(const Tensor<T>& grad_out, const Tensor<T>& weight,
                                int64_t dilation, const Shape& input_shape) {
  const Shape& ws = weight.shape();
  const int64_t half = (ws.h - 1) / 2;
  Tensor<T> grad_in(input_shape);
  for (int64_t n = 0; n < input_shape.n; ++n) {
    for (int64_t o = 0; o < ws.n; ++o) {
      for (int64_t y = 0; y < input_shape.h; ++y) {
        for (int64_t x = 0; x < input_shape.w; ++x) {
          const T g = grad_out.at(n, o, y, x);
          for (int64_t i = 0; i < ws.c; ++i) {
            for (int64_t ky = 0; ky < ws.h; ++ky) {
              for (int64_t kx = 0; kx < ws.w; ++kx) {
                const int64_t sy = y + (ky - half) * dilation;
                const int64_t sx = x + (kx - half) * dilation;
                if (!inside(sy, sx, input_shape.h, input_shape.w)) continue;
                grad_in.at(n, i, sy, sx) += g * weight.at(o, i, ky, kx);
              }
            }
          }
        }
      }
    }
  }
  return grad_in;
}

template <typename T>
void conv2d_backward_params(const Tensor<T>& input, const Tensor<T>& grad_out, int64_t dilation,
                            Tensor<T>& grad_weight, std::span<T> grad_bias) {
  const Shape& in = input.shape();
  const Shape& ws = grad_weight.shape();
  const int64_t half = (ws.h - 1) / 2;
  for (int64_t n = 0; n < in.n; ++n) {
    for (int64_t o = 0; o < ws.n; ++o) {
      for (int64_t y = 0; y < in.h; ++y) {
        for (int64_t x = 0; x < in.w; ++x) {
          const T g = grad_out.at(n, o, y, x);
          if (!grad_bias.empty()) grad_bias[static_cast<size_t>(o)] += g;
          for (int64_t i = 0; i < in.c; ++i) {
            for (int64_t ky = 0; ky < ws.h; ++ky) {
              for (int64_t kx = 0; kx < ws.w; ++kx) {
                const int64_t sy = y + (ky - half) * dilation;
                const int64_t sx = x + (kx - half) * dilation;
                if (!inside(sy, sx, in.h, in.w)) continue;
                grad_weight.at(o, i, ky, kx) += g * input.at(n, i, sy, sx);
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> stencil3x3_forward(const Tensor<T>& input, const Stencil3x3& k) {
  const Shape& s = input.shape();
  Tensor<T> out(s);
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      for (int64_t y = 0; y < s.h; ++y) {
        for (int64_t x = 0; x < s.w; ++x) {
          double acc = 0.0;
          for (int64_t ky = -1; ky <= 1; ++ky) {
            for (int64_t kx = -1; kx <= 1; ++kx) {
              if (!inside(y + ky, x + kx, s.h, s.w)) continue;
              acc += k[static_cast<size_t>((ky + 1) * 3 + kx + 1)] *
                     static_cast<double>(input.at(n, c, y + ky, x + kx));
            }
          }
          out.at(n, c, y, x) = static_cast<T>(acc);
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> resize_forward(const Tensor<T>& input, int64_t out_h, int64_t out_w, ResizeMode mode) {
  if (out_h < 1 || out_w < 1) throw ArgumentError("resize target dims must be >= 1");
  const Shape& s = input.shape();
  Tensor<T> out(Shape{s.n, s.c, out_h, out_w});
  for (int64_t n = 0; n < s.n; ++n) {
    for (int64_t c = 0; c < s.c; ++c) {
      for (int64_t y = 0; y < out_h; ++y) {
        for (int64_t x = 0; x < out_w; ++x) {
          if (mode == ResizeMode::kNearest) {
            out.at(n, c, y, x) =
                input.at(n, c, nearest_index(y, s.h, out_h), nearest_index(x, s.w, out_w));
            continue;
          }
          const BilinearTap a = bilinear_tap(y, s.h, out_h);
          const BilinearTap b = bilinear_tap(x, s.w, out_w);
          const double v00 = input.at(n, c, a.i0, b.i0), v01 = input.at(n, c, a.i0, b.i1);
          const double v10 = input.at(n, c, a.i1, b.i0), v11 = input.at(n, c, a.i1, b.i1);
          out.at(n, c, y, x) = static_cast<T>((1 - a.frac) * ((1 - b.frac) * v00 + b.frac * v01) +
                                              a.frac * ((1 - b.frac) * v10 + b.frac * v11));
        }
      }
    }
  }
  return out;
}

#define LABNET_INSTANTIATE_REFERENCE(T)                                                      \
  template Tensor<T> conv2d_forward(const Tensor<T>&, const Tensor<T>&, std::span<const T>, \
                                    int64_t);                                                \
  template Tensor<T> conv2d_backward_input(const Tensor<T>&, const Tensor<T>&, int64_t,     \
                                           const Shape&);                                    \
  template void conv2d_backward_params(const Tensor<T>&, const Tensor<T>&, int64_t,         \
                                       Tensor<T>&, std::span<T>);                            \
  template Tensor<T> stencil3x3_forward(const Tensor<T>&, const Stencil3x3&);                \
  template Tensor<T> resize_forward(const Tensor<T>&, int64_t, int64_t, ResizeMode);

LABNET_INSTANTIATE_REFERENCE(float)
LABNET_INSTANTIATE_REFERENCE(double)

}  // namespace labnet::reference
