#include "labnet/blocks.hpp"

#include <algorithm>

namespace labnet {

template <typename T>
ElementaryUnitWeights<T>::ElementaryUnitWeights(const std::string& name, int64_t in_channels,
                                                const ElementaryUnitConfig& cfg)
    : activation(cfg.activation) {
  int64_t channels = in_channels;
  for (size_t s = 0; s < 3; ++s) {
    for (size_t b = 0; b < 3; ++b) {
      dilated[s][b] = ConvWeight<T>(
          name + ".stage" + std::to_string(s + 1) + ".dconv" + std::to_string(b + 1),
          cfg.stage_channels[b], channels, 3, cfg.rates[s][b]);
    }
    merge[s] = ConvWeight<T>(name + ".stage" + std::to_string(s + 1) + ".merge", cfg.merge_channels,
                             cfg.stage_width(), 1);
    channels = cfg.merge_channels;
  }
}

template <typename T>
ElementaryUnitOutput elementary_unit(Graph<T>& g, Var input, ElementaryUnitWeights<T>& w) {
  require_shape(g.shape(input).c == w.dilated[0][0].in_channels(),
                "elementary_unit: input has " + std::to_string(g.shape(input).c) +
                    " channels, unit expects " + std::to_string(w.dilated[0][0].in_channels()));
  ElementaryUnitOutput out;
  Var x = input;
  for (size_t s = 0; s < 3; ++s) {
    std::array<Var, 3> branches;
    for (size_t b = 0; b < 3; ++b) {
      branches[b] = ops::conv2d(g, x, w.dilated[s][b]);
      if (w.activation) branches[b] = ops::leaky_relu(g, branches[b]);
    }
    x = ops::conv2d(g, ops::concat_channels(g, std::span<const Var>(branches)), w.merge[s]);
    out.stages[s] = x;
  }
  out.concat = ops::concat_channels(g, std::span<const Var>(out.stages));
  return out;
}

template <typename T>
EcaWeights<T>::EcaWeights(const std::string& name, int64_t channels, int64_t ratio) {
  if (ratio < 1 || channels % ratio != 0) {
    throw ArgumentError(name + ": reduction ratio must divide the channel count");
  }
  fc1 = ConvWeight<T>(name + ".fc1", channels / ratio, channels, 1);
  fc2 = ConvWeight<T>(name + ".fc2", channels, channels / ratio, 1);
}

Stencil3x3 laplacian_stencil(LaplacianKind kind) {
  if (kind == LaplacianKind::kEightNeighbor) return {1, 1, 1, 1, -8, 1, 1, 1, 1};
  return {0, 1, 0, 1, -4, 1, 0, 1, 0};
}

template <typename T>
Var laplacian_filter(Graph<T>& g, Var x, LaplacianKind kind) {
  return ops::stencil3x3(g, x, laplacian_stencil(kind));
}

template <typename T>
Var eca_descriptor(Graph<T>& g, Var x, const EcaConfig& cfg) {
  switch (cfg.mode) {
    case EcaMode::kLaplacian:
      return ops::spatial_std(g, laplacian_filter(g, x, cfg.laplacian));
    case EcaMode::kSobel: {
      static constexpr Stencil3x3 kSobelX{-1, 0, 1, -2, 0, 2, -1, 0, 1};
      static constexpr Stencil3x3 kSobelY{-1, -2, -1, 0, 0, 0, 1, 2, 1};
      Var gx = ops::square(g, ops::stencil3x3(g, x, kSobelX));
      Var gy = ops::square(g, ops::stencil3x3(g, x, kSobelY));
      return ops::spatial_std(g, ops::sqrt(g, ops::add(g, gx, gy), 1e-6));
    }
    case EcaMode::kGap:
      return ops::spatial_mean(g, x);
    case EcaMode::kOff:
      break;
  }
  throw ArgumentError("eca_descriptor: ECA is switched off");
}

template <typename T>
Var eca_gate(Graph<T>& g, Var descriptor, EcaWeights<T>& w) {
  Var hidden = ops::leaky_relu(g, ops::conv2d(g, descriptor, w.fc1));
  return ops::sigmoid(g, ops::conv2d(g, hidden, w.fc2));
}

template <typename T>
Var eca(Graph<T>& g, Var x, EcaWeights<T>& w, const EcaConfig& cfg) {
  require_shape(g.shape(x).c == w.fc1.in_channels(),
                "eca: input channels " + std::to_string(g.shape(x).c) + " vs " +
                    std::to_string(w.fc1.in_channels()));
  if (cfg.mode == EcaMode::kOff) return x;
  return ops::scale_channels(g, x, eca_gate(g, eca_descriptor(g, x, cfg), w));
}

template <typename T>
Tensor<T> dilate_mask(const Tensor<T>& mask, int64_t kernel) {
  if (kernel < 1 || kernel % 2 == 0) {
    throw ArgumentError("dilate_mask: kernel must be a positive odd size, got " +
                        std::to_string(kernel));
  }
  const Shape& s = mask.shape();
  require_shape(s.n == 1 && s.c == 1, "dilate_mask: expected (1,1,h,w), got " + s.str());
  const int64_t r = kernel / 2;
  // Square element is separable: horizontal max, then vertical max.
  Tensor<T> rows(s);
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      T v = 0;
      for (int64_t dx = std::max<int64_t>(0, x - r); dx <= std::min(s.w - 1, x + r); ++dx) {
        v = std::max(v, mask.at(0, 0, y, dx) > T(0.5) ? T(1) : T(0));
      }
      rows.at(0, 0, y, x) = v;
    }
  }
  Tensor<T> out(s);
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      T v = 0;
      for (int64_t dy = std::max<int64_t>(0, y - r); dy <= std::min(s.h - 1, y + r); ++dy) {
        v = std::max(v, rows.at(0, 0, dy, x));
      }
      out.at(0, 0, y, x) = v;
    }
  }
  return out;
}

template <typename T>
Tensor<T> boundary_mask(const Tensor<T>& mask, int64_t kernel) {
  Tensor<T> out = dilate_mask(mask, kernel);
  for (int64_t i = 0; i < out.numel(); ++i) {
    if (mask[i] > T(0.5)) out[i] = T(0);
  }
  return out;
}

template <typename T>
LsaWeights<T>::LsaWeights(const std::string& name, int64_t channels, const LsaConfig& cfg) {
  if (cfg.m < 8) throw ArgumentError(name + ": downsample size M must be >= 8");
  if (cfg.k < 1) throw ArgumentError(name + ": feature width K must be >= 1");
  conv_s = ConvWeight<T>(name + ".conv_s", cfg.k, channels, 3);
  conv_ns = ConvWeight<T>(name + ".conv_ns", cfg.k, channels, 3);
  merge = ConvWeight<T>(name + ".merge", channels, channels + cfg.k, 1);
}

std::pair<int64_t, int64_t> lsa_resolution(const LsaConfig& cfg, int64_t h, int64_t w) {
  if (!cfg.downsample) return {h, w};
  return {std::min(cfg.m, h), std::min(cfg.m, w)};
}

template <typename T>
Tensor<T> downsample_mask(const Tensor<T>& mask, int64_t h, int64_t w) {
  Tensor<T> small = kernels::resize_forward(mask, h, w, ResizeMode::kNearest);
  for (T& v : small.values()) v = v >= T(0.5) ? T(1) : T(0);
  return small;
}

template <typename T>
std::pair<std::vector<int64_t>, std::vector<int64_t>> lsa_pixel_sets(const Tensor<T>& mask_small,
                                                                     const LsaConfig& cfg) {
  std::vector<int64_t> shadow, keys;
  const Tensor<T> ring = cfg.mode == LsaMode::kWhole ? Tensor<T>() : boundary_mask(mask_small, cfg.dilate_kernel);
  for (int64_t i = 0; i < mask_small.numel(); ++i) {
    const bool in_shadow = mask_small[i] > T(0.5);
    if (in_shadow) {
      shadow.push_back(i);
    } else if (cfg.mode == LsaMode::kWhole || ring[i] > T(0.5)) {
      keys.push_back(i);
    }
  }
  return {std::move(shadow), std::move(keys)};
}

template <typename T>
LsaTrace lsa(Graph<T>& g, Var input, const Tensor<T>& mask, LsaWeights<T>& w,
             const LsaConfig& cfg) {
  const Shape in = g.shape(input);
  require_shape(in.n == 1, "lsa: batch must be 1, got " + in.str());
  require_shape(mask.shape() == (Shape{1, 1, in.h, in.w}),
                "lsa: mask " + mask.shape().str() + " for input " + in.str());
  for (T v : mask.values()) {
    if (v != T(0) && v != T(1)) throw ArgumentError("lsa: mask must be binary");
  }

  LsaTrace trace;
  const auto [mh, mw] = lsa_resolution(cfg, in.h, in.w);
  trace.attn_h = mh;
  trace.attn_w = mw;
  const bool resized = mh != in.h || mw != in.w;
  Var small = resized ? ops::resize(g, input, mh, mw, ResizeMode::kBilinear) : input;
  const Tensor<T> mask_small = resized ? downsample_mask(mask, mh, mw) : mask;

  trace.ns_features = ops::conv2d(g, small, w.conv_ns);
  auto [shadow, keys] = lsa_pixel_sets(mask_small, cfg);
  trace.shadow_pixels = shadow;
  trace.key_pixels = keys;

  trace.base = trace.ns_features;
  if (cfg.mode != LsaMode::kOff && !shadow.empty() && !keys.empty()) {
    Var s_features = ops::conv2d(g, small, w.conv_s);
    Var queries = ops::gather_pixels(g, s_features, shadow);
    Var values = ops::gather_pixels(g, trace.ns_features, keys);
    Var attention = ops::row_softmax(g, ops::matmul(g, queries, ops::transpose(g, values)));
    Var transferred = ops::matmul(g, attention, values);
    trace.attention = attention;
    trace.base = ops::scatter_pixels(g, trace.ns_features, transferred, std::move(shadow));
  }

  Var up = resized ? ops::resize(g, trace.base, in.h, in.w, ResizeMode::kBilinear) : trace.base;
  trace.output = ops::conv2d(g, ops::concat_channels(g, {input, up}), w.merge);
  return trace;
}

#define LABNET_INSTANTIATE_BLOCKS(T)                                                           \
  template struct ElementaryUnitWeights<T>;                                                    \
  template struct EcaWeights<T>;                                                               \
  template struct LsaWeights<T>;                                                               \
  template ElementaryUnitOutput elementary_unit(Graph<T>&, Var, ElementaryUnitWeights<T>&);    \
  template Var laplacian_filter(Graph<T>&, Var, LaplacianKind);                                \
  template Var eca_descriptor(Graph<T>&, Var, const EcaConfig&);                               \
  template Var eca_gate(Graph<T>&, Var, EcaWeights<T>&);                                       \
  template Var eca(Graph<T>&, Var, EcaWeights<T>&, const EcaConfig&);                          \
  template Tensor<T> dilate_mask(const Tensor<T>&, int64_t);                                   \
  template Tensor<T> boundary_mask(const Tensor<T>&, int64_t);                                 \
  template Tensor<T> downsample_mask(const Tensor<T>&, int64_t, int64_t);                      \
  template std::pair<std::vector<int64_t>, std::vector<int64_t>> lsa_pixel_sets(               \
      const Tensor<T>&, const LsaConfig&);                                                     \
  template LsaTrace lsa(Graph<T>&, Var, const Tensor<T>&, LsaWeights<T>&, const LsaConfig&);

LABNET_INSTANTIATE_BLOCKS(float)
LABNET_INSTANTIATE_BLOCKS(double)

}  // namespace labnet
