#include "labnet/color.hpp"

#include <algorithm>
#include <cmath>

namespace labnet {

namespace {

constexpr double kWhiteX = 0.95047;
constexpr double kWhiteY = 1.0;
constexpr double kWhiteZ = 1.08883;
constexpr double kDelta = 6.0 / 29.0;

double srgb_decode(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

double srgb_encode(double v) {
  return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

double lab_f(double t) {
  return t > kDelta * kDelta * kDelta ? std::cbrt(t) : t / (3.0 * kDelta * kDelta) + 4.0 / 29.0;
}

double lab_f_inv(double f) {
  return f > kDelta ? f * f * f : 3.0 * kDelta * kDelta * (f - 4.0 / 29.0);
}

uint8_t to_u8(double v) {
  return static_cast<uint8_t>(std::clamp(std::lround(v * 255.0), 0L, 255L));
}

Lab clamp_lab(Lab lab) {
  lab[0] = std::clamp(lab[0], 0.0, kLabLMax);
  lab[1] = std::clamp(lab[1], kLabAbMin, kLabAbMax);
  lab[2] = std::clamp(lab[2], kLabAbMin, kLabAbMax);
  return lab;
}

}  // namespace

Lab srgb_to_lab(uint8_t r8, uint8_t g8, uint8_t b8) {
  const double r = srgb_decode(r8 / 255.0);
  const double g = srgb_decode(g8 / 255.0);
  const double b = srgb_decode(b8 / 255.0);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double fx = lab_f(x / kWhiteX);
  const double fy = lab_f(y / kWhiteY);
  const double fz = lab_f(z / kWhiteZ);
  return clamp_lab({116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)});
}

std::array<uint8_t, 3> lab_to_srgb(const Lab& in) {
  const Lab lab = clamp_lab(in);
  const double fy = (lab[0] + 16.0) / 116.0;
  const double fx = fy + lab[1] / 500.0;
  const double fz = fy - lab[2] / 200.0;
  const double x = kWhiteX * lab_f_inv(fx);
  const double y = kWhiteY * lab_f_inv(fy);
  const double z = kWhiteZ * lab_f_inv(fz);
  const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
  const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
  const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
  return {to_u8(srgb_encode(std::clamp(r, 0.0, 1.0))), to_u8(srgb_encode(std::clamp(g, 0.0, 1.0))),
          to_u8(srgb_encode(std::clamp(b, 0.0, 1.0)))};
}

LabImage srgb_to_lab(const RgbImage& img) {
  LabImage out(img.h, img.w);
  const int64_t n = img.h * img.w;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const Lab lab = srgb_to_lab(img.data[static_cast<size_t>(3 * i)],
                                img.data[static_cast<size_t>(3 * i + 1)],
                                img.data[static_cast<size_t>(3 * i + 2)]);
    std::copy(lab.begin(), lab.end(), out.data.begin() + 3 * i);
  }
  return out;
}

RgbImage lab_to_srgb(const LabImage& img) {
  RgbImage out(img.h, img.w);
  const int64_t n = img.h * img.w;
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) {
    const auto rgb = lab_to_srgb(Lab{img.data[static_cast<size_t>(3 * i)],
                                     img.data[static_cast<size_t>(3 * i + 1)],
                                     img.data[static_cast<size_t>(3 * i + 2)]});
    std::copy(rgb.begin(), rgb.end(), out.data.begin() + 3 * i);
  }
  return out;
}

template <typename T>
Tensor<T> lab_to_net(const LabImage& img) {
  Tensor<T> t(Shape{1, 3, img.h, img.w});
  for (int64_t y = 0; y < img.h; ++y) {
    for (int64_t x = 0; x < img.w; ++x) {
      t.at(0, 0, y, x) = static_cast<T>(img.at(y, x, 1) / kNetAbScale);
      t.at(0, 1, y, x) = static_cast<T>(img.at(y, x, 2) / kNetAbScale);
      t.at(0, 2, y, x) = static_cast<T>(img.at(y, x, 0) / kNetLScale);
    }
  }
  return t;
}

template <typename T>
LabImage net_to_lab(const Tensor<T>& t) {
  const Shape& s = t.shape();
  require_shape(s.n == 1 && s.c == 3, "net_to_lab: expected (1,3,h,w), got " + s.str());
  LabImage img(s.h, s.w);
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      img.at(y, x, 0) = std::clamp(static_cast<double>(t.at(0, 2, y, x)) * kNetLScale, 0.0, kLabLMax);
      img.at(y, x, 1) =
          std::clamp(static_cast<double>(t.at(0, 0, y, x)) * kNetAbScale, kLabAbMin, kLabAbMax);
      img.at(y, x, 2) =
          std::clamp(static_cast<double>(t.at(0, 1, y, x)) * kNetAbScale, kLabAbMin, kLabAbMax);
    }
  }
  return img;
}

template <typename T>
Tensor<T> encode_image(const RgbImage& img, ColorSpace space) {
  if (space == ColorSpace::kLab) return lab_to_net<T>(srgb_to_lab(img));
  Tensor<T> t(Shape{1, 3, img.h, img.w});
  for (int64_t y = 0; y < img.h; ++y) {
    for (int64_t x = 0; x < img.w; ++x) {
      for (int ch = 0; ch < 3; ++ch) t.at(0, ch, y, x) = static_cast<T>(img.at(y, x, ch) / 255.0);
    }
  }
  return t;
}

template <typename T>
RgbImage decode_image(const Tensor<T>& t, ColorSpace space) {
  if (space == ColorSpace::kLab) return lab_to_srgb(net_to_lab(t));
  const Shape& s = t.shape();
  require_shape(s.n == 1 && s.c == 3, "decode_image: expected (1,3,h,w), got " + s.str());
  RgbImage img(s.h, s.w);
  for (int64_t y = 0; y < s.h; ++y) {
    for (int64_t x = 0; x < s.w; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        img.at(y, x, ch) = to_u8(std::clamp(static_cast<double>(t.at(0, ch, y, x)), 0.0, 1.0));
      }
    }
  }
  return img;
}

template Tensor<float> lab_to_net(const LabImage&);
template Tensor<double> lab_to_net(const LabImage&);
template LabImage net_to_lab(const Tensor<float>&);
template LabImage net_to_lab(const Tensor<double>&);
template Tensor<float> encode_image(const RgbImage&, ColorSpace);
template Tensor<double> encode_image(const RgbImage&, ColorSpace);
template RgbImage decode_image(const Tensor<float>&, ColorSpace);
template RgbImage decode_image(const Tensor<double>&, ColorSpace);

}  // namespace labnet
