// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pstyle/color.hpp"
#include "pstyle/error.hpp"

namespace pstyle {
namespace {

Image pixel(double r, double g, double b) { return testing::solid(1, 1, r, g, b); }

TEST(Yiq, WhiteAndGray) {
  const YiqImage w = rgb_to_yiq(pixel(1, 1, 1));
  EXPECT_NEAR(w.planes.at(0, 0, 0), 1.0, 1e-12);
  EXPECT_NEAR(w.planes.at(0, 0, 1), 0.0, 1e-12);
  EXPECT_NEAR(w.planes.at(0, 0, 2), 0.0, 1e-12);
  for (double g : {0.0, 0.13, 0.5, 0.77}) {
    const YiqImage y = rgb_to_yiq(pixel(g, g, g));
    EXPECT_NEAR(y.planes.at(0, 0, 0), g, 1e-12);
    EXPECT_NEAR(y.planes.at(0, 0, 1), 0.0, 1e-12);
    EXPECT_NEAR(y.planes.at(0, 0, 2), 0.0, 1e-12);
  }
}

TEST(Yiq, RedLuminance) { EXPECT_DOUBLE_EQ(rgb_to_yiq(pixel(1, 0, 0)).planes.at(0, 0, 0), 0.299); }

TEST(Yiq, RoundTrip) {
  const Image img = testing::random_image(9, 11, 3, 1);
  const Image back = yiq_to_rgb(rgb_to_yiq(img));
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.data()[i], img.data()[i], 1e-6);
}

TEST(Yiq, InverseExamples) {
  YiqImage white{Image(1, 1, 3, 0.0)};
  white.planes.at(0, 0, 0) = 1.0;
  const Image w = yiq_to_rgb(white);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(w.at(0, 0, c), 1.0, 1e-6);
  const Image red = yiq_to_rgb(rgb_to_yiq(pixel(1, 0, 0)));
  EXPECT_NEAR(red.at(0, 0, 0), 1.0, 1e-6);
  EXPECT_NEAR(red.at(0, 0, 1), 0.0, 1e-6);
  EXPECT_NEAR(red.at(0, 0, 2), 0.0, 1e-6);
}

TEST(Yiq, RejectsNonRgb) { EXPECT_THROW(rgb_to_yiq(Image(2, 2, 1)), ValidationError); }

TEST(Luminance, GrayIsFixedPointAndRedIsConstant) {
  const Image gray = testing::solid(3, 3, 0.4, 0.4, 0.4);
  const Image t = luminance_triplicate(gray);
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_NEAR(t.data()[i], 0.4, 1e-6);
  const Image r = luminance_triplicate(testing::solid(2, 2, 1, 0, 0));
  for (double v : r.data()) EXPECT_NEAR(v, 0.299, 1e-12);
}

TEST(Luminance, ChromaEditLeavesOutputUnchanged) {
  const Image img = testing::random_image(5, 5, 3, 2, 0.2, 0.8);
  YiqImage yiq = rgb_to_yiq(img);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) {
      yiq.planes.at(y, x, 1) += 0.05;
      yiq.planes.at(y, x, 2) -= 0.03;
    }
  }
  const Image a = luminance_triplicate(img);
  const Image b = luminance_triplicate(yiq_to_rgb(yiq));
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
}

TEST(Luminance, BackwardIsAdjoint) {
  const Image x = testing::random_image(4, 4, 3, 3);
  const Image g = testing::random_image(4, 4, 3, 4, -1, 1);
  const Image fwd = luminance_triplicate(x);
  const Image back = luminance_triplicate_backward(g);
  double lhs = 0.0;
  double rhs = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    lhs += fwd.data()[i] * g.data()[i];
    rhs += x.data()[i] * back.data()[i];
  }
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(HistogramMatch, SelfMatchIsIdentity) {
  const Image img = testing::random_image(8, 8, 3, 5);
  const Image out = histogram_match_linear(img, img);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(out.data()[i], img.data()[i], 1e-5);
}

TEST(HistogramMatch, GraySpreadHalves) {
  Image style(1, 2, 3);
  Image content(1, 2, 3);
  for (int c = 0; c < 3; ++c) {
    style.at(0, 0, c) = 0.0;
    style.at(0, 1, c) = 1.0;
    content.at(0, 0, c) = 0.0;
    content.at(0, 1, c) = 0.5;
  }
  const Image out = histogram_match_linear(style, content);
  for (int c = 0; c < 3; ++c) {
    EXPECT_NEAR(out.at(0, 0, c), 0.0, 1e-4);
    EXPECT_NEAR(out.at(0, 1, c), 0.5, 1e-4);
  }
}

TEST(HistogramMatch, MomentsMatchTarget) {
  const Image source = testing::random_image(16, 16, 3, 6, 0.3, 0.7);
  Image target = testing::random_image(16, 16, 3, 7, 0.0, 0.4);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) target.at(y, x, 1) = 0.5 * target.at(y, x, 0) + 0.3;
  ColorMatchOptions o;
  o.clamp = false;
  const ColorStats t = color_stats(target);
  const ColorStats out = color_stats(histogram_match_linear(source, target, o));
  EXPECT_LT((out.mean - t.mean).cwiseAbs().maxCoeff(), 1e-5);
  EXPECT_LT((out.covariance - t.covariance).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(HistogramMatch, MeanOnlyShiftsColors) {
  const Image source = testing::random_image(6, 6, 3, 8);
  const Image target = testing::random_image(6, 6, 3, 9);
  ColorMatchOptions o;
  o.mode = ColorMatchMode::kMeanOnly;
  o.clamp = false;
  const Image out = histogram_match_linear(source, target, o);
  const ColorStats s = color_stats(source);
  const ColorStats t = color_stats(target);
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(out.at(2, 3, c), source.at(2, 3, c) - s.mean[c] + t.mean[c], 1e-12);
}

TEST(Recolor, DisabledIsPassthrough) {
  const std::vector<Image> renders = {testing::random_image(4, 4, 3, 1), testing::random_image(4, 4, 3, 2)};
  const auto out = recolor(renders, testing::random_image(4, 4, 3, 3), false);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], renders[0]);
  EXPECT_EQ(out[1], renders[1]);
}

TEST(Recolor, PaletteOfItselfIsIdentity) {
  const Image render = testing::random_image(8, 8, 3, 4);
  const Image out = recolor({render}, render, true)[0];
  for (std::size_t i = 0; i < render.size(); ++i) EXPECT_NEAR(out.data()[i], render.data()[i], 1e-5);
}

TEST(Recolor, GrayToRedPaletteTakesPaletteMean) {
  Image gray(4, 4, 3);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x)
      for (int c = 0; c < 3; ++c) gray.at(y, x, c) = 0.2 + 0.1 * ((x + y) % 3);
  const Image red = testing::solid(4, 4, 1.0, 0.0, 0.0);
  const ColorStats s = color_stats(recolor({gray}, red, true)[0]);
  EXPECT_NEAR(s.mean[0], 1.0, 1e-5);
  EXPECT_NEAR(s.mean[1], 0.0, 1e-5);
  EXPECT_NEAR(s.mean[2], 0.0, 1e-5);
}

}  // namespace
}  // namespace pstyle
