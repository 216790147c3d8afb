#include <gtest/gtest.h>

#include <cmath>

#include "labnet/color.hpp"

using namespace labnet;

TEST(Color, WhiteAndBlack) {
  const Lab white = srgb_to_lab(255, 255, 255);
  EXPECT_NEAR(white[0], 100.0, 0.01);
  EXPECT_NEAR(white[1], 0.0, 0.01);
  EXPECT_NEAR(white[2], 0.0, 0.01);
  const Lab black = srgb_to_lab(0, 0, 0);
  EXPECT_NEAR(black[0], 0.0, 1e-9);
  EXPECT_NEAR(black[1], 0.0, 1e-9);
  EXPECT_NEAR(black[2], 0.0, 1e-9);
}

TEST(Color, MidGrayMatchesCieFormula) {
  // 116 f(Y) - 16 with Y the linearised gray, computed independently. The
  // matrix Y row sums to 1 + 1e-7, hence the looser bound.
  const Lab gray = srgb_to_lab(119, 119, 119);
  EXPECT_NEAR(gray[0], 50.0344387925, 1e-5);
  EXPECT_NEAR(gray[1], 0.0, 1e-3);
  EXPECT_NEAR(gray[2], 0.0, 1e-3);
}

TEST(Color, InverseEndpoints) {
  EXPECT_EQ(lab_to_srgb(Lab{100, 0, 0}), (std::array<uint8_t, 3>{255, 255, 255}));
  EXPECT_EQ(lab_to_srgb(Lab{0, 0, 0}), (std::array<uint8_t, 3>{0, 0, 0}));
}

TEST(Color, LatticeRoundTrip) {
  int worst = 0;
  for (int r = 0; r < 8; ++r) {
    for (int g = 0; g < 8; ++g) {
      for (int b = 0; b < 8; ++b) {
        const std::array<uint8_t, 3> rgb{static_cast<uint8_t>(r * 255 / 7),
                                         static_cast<uint8_t>(g * 255 / 7),
                                         static_cast<uint8_t>(b * 255 / 7)};
        const auto back = lab_to_srgb(srgb_to_lab(rgb[0], rgb[1], rgb[2]));
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(int(back[c]) - int(rgb[c])));
      }
    }
  }
  EXPECT_LE(worst, 1);
}

TEST(Color, LabRangesClamped) {
  for (int v = 0; v < 256; v += 5) {
    for (const auto& rgb : {std::array<int, 3>{v, 0, 255 - v}, std::array<int, 3>{255, v, 0}}) {
      const Lab lab = srgb_to_lab(rgb[0], rgb[1], rgb[2]);
      EXPECT_GE(lab[0], 0.0);
      EXPECT_LE(lab[0], 100.0);
      for (int c = 1; c < 3; ++c) {
        EXPECT_GE(lab[c], kLabAbMin);
        EXPECT_LE(lab[c], kLabAbMax);
      }
    }
  }
}

TEST(Color, LightnessMonotoneInGray) {
  double prev = -1;
  for (int v = 0; v < 256; ++v) {
    const double l = srgb_to_lab(v, v, v)[0];
    EXPECT_GT(l, prev);
    prev = l;
  }
}

TEST(Color, NetEncodingChannelOrder) {
  LabImage img(2, 3);
  for (int64_t i = 0; i < 6; ++i) {
    img.data[i * 3] = 100.0;
    img.data[i * 3 + 1] = 0.0;
    img.data[i * 3 + 2] = 0.0;
  }
  const auto t = lab_to_net<double>(img);
  EXPECT_EQ(t.shape(), (Shape{1, 3, 2, 3}));
  for (int64_t i = 0; i < 6; ++i) {
    EXPECT_EQ(t.plane(0, 0)[i], 0.0);
    EXPECT_EQ(t.plane(0, 1)[i], 0.0);
    EXPECT_EQ(t.plane(0, 2)[i], 1.0);
  }
  LabImage a(1, 1);
  a.data = {50.0, 128.0, -64.0};
  const auto ta = lab_to_net<double>(a);
  EXPECT_EQ(ta[0], 1.0);
  EXPECT_EQ(ta[1], -0.5);
  EXPECT_EQ(ta[2], 0.5);
}

TEST(Color, NetRoundTripAndClamp) {
  LabImage img(1, 2);
  img.data = {37.5, -20.25, 99.0, 88.0, 1.5, -127.0};
  const LabImage back = net_to_lab(lab_to_net<double>(img));
  for (size_t i = 0; i < img.data.size(); ++i) EXPECT_NEAR(back.data[i], img.data[i], 1e-12);

  Tensor<double> t(Shape{1, 3, 1, 1}, std::vector<double>{2.0, -2.0, 1.5});
  const LabImage clamped = net_to_lab(t);
  EXPECT_EQ(clamped.data[0], 100.0);
  EXPECT_EQ(clamped.data[1], 128.0);
  EXPECT_EQ(clamped.data[2], -127.0);

  // Identity on tensors already in range.
  Tensor<double> in(Shape{1, 3, 1, 2}, std::vector<double>{0.25, -0.5, 0.1, 0.2, 0.75, 0.33});
  const auto again = lab_to_net<double>(net_to_lab(in));
  for (int64_t i = 0; i < in.numel(); ++i) EXPECT_NEAR(again[i], in[i], 1e-12);

  EXPECT_THROW(net_to_lab(Tensor<double>(Shape{1, 2, 1, 1})), ShapeError);
}

TEST(Color, EncodeDecodeImage) {
  RgbImage img(4, 5);
  for (size_t i = 0; i < img.data.size(); ++i) img.data[i] = static_cast<uint8_t>((i * 37) % 256);
  for (ColorSpace space : {ColorSpace::kLab, ColorSpace::kRgb}) {
    const RgbImage back = decode_image(encode_image<double>(img, space), space);
    for (size_t i = 0; i < img.data.size(); ++i) {
      EXPECT_LE(std::abs(int(back.data[i]) - int(img.data[i])), 1);
    }
  }
  EXPECT_EQ(decode_image(encode_image<double>(img, ColorSpace::kRgb), ColorSpace::kRgb), img);
}
