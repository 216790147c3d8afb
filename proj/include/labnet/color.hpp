#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "labnet/tensor.hpp"

namespace labnet {

// Interleaved 8-bit sRGB, row-major (R, G, B per pixel).
struct RgbImage {
  int64_t h = 0;
  int64_t w = 0;
  std::vector<uint8_t> data;

  RgbImage() = default;
  RgbImage(int64_t height, int64_t width, uint8_t fill = 0)
      : h(height), w(width), data(static_cast<size_t>(height * width * 3), fill) {}

  uint8_t& at(int64_t y, int64_t x, int ch) { return data[static_cast<size_t>((y * w + x) * 3 + ch)]; }
  uint8_t at(int64_t y, int64_t x, int ch) const {
    return data[static_cast<size_t>((y * w + x) * 3 + ch)];
  }
  bool operator==(const RgbImage&) const = default;
};

// Interleaved CIELAB (L, a, b per pixel). L in [0, 100]; a, b in [-127, 128].
struct LabImage {
  int64_t h = 0;
  int64_t w = 0;
  std::vector<double> data;

  LabImage() = default;
  LabImage(int64_t height, int64_t width)
      : h(height), w(width), data(static_cast<size_t>(height * width * 3), 0.0) {}

  double& at(int64_t y, int64_t x, int ch) { return data[static_cast<size_t>((y * w + x) * 3 + ch)]; }
  double at(int64_t y, int64_t x, int ch) const {
    return data[static_cast<size_t>((y * w + x) * 3 + ch)];
  }
};

using Lab = std::array<double, 3>;

inline constexpr double kLabLMax = 100.0;
inline constexpr double kLabAbMin = -127.0;
inline constexpr double kLabAbMax = 128.0;
// Normalisation divisors for the network encoding.
inline constexpr double kNetLScale = 100.0;
inline constexpr double kNetAbScale = 128.0;

// D65 white, 2 degree observer.
Lab srgb_to_lab(uint8_t r, uint8_t g, uint8_t b);
std::array<uint8_t, 3> lab_to_srgb(const Lab& lab);

LabImage srgb_to_lab(const RgbImage& img);
RgbImage lab_to_srgb(const LabImage& img);

// The network sees (a', b', L') = (a/128, b/128, L/100), so the AB branch
// output and the L branch output line up with the residual channelwise.
template <typename T>
Tensor<T> lab_to_net(const LabImage& img);
template <typename T>
LabImage net_to_lab(const Tensor<T>& t);

enum class ColorSpace { kLab, kRgb };

// Full image <-> network tensor pipeline. kRgb encodes R/255, G/255, B/255
// (used only by the rgb-together ablation).
template <typename T>
Tensor<T> encode_image(const RgbImage& img, ColorSpace space);
template <typename T>
RgbImage decode_image(const Tensor<T>& t, ColorSpace space);

}  // namespace labnet
