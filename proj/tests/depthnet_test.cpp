// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pstyle/depthnet.hpp"
#include "pstyle/error.hpp"

namespace pstyle {
namespace {

double weighted_sum(const Image& map, const Image& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < map.size(); ++i) s += map.data()[i] * w.data()[i];
  return s;
}

nn::Network depth_network() {
  nn::Network net;
  nn::Stage stage;
  stage.layers.push_back(nn::seeded_layer(3, 8, true, 7, 0.3));
  stage.layers.push_back(nn::seeded_layer(8, 8, true, 8, 0.3));
  stage.layers.push_back(nn::seeded_layer(8, 1, false, 9, 0.3));
  net.stages.push_back(stage);
  return net;
}

TEST(DepthStub, ConstantImageGivesConstantMap) {
  for (bool normalize : {true, false}) {
    const DepthEstimator d = DepthEstimator::stub({normalize});
    const Image map = d.estimate(testing::solid(12, 10, 0.3, 0.6, 0.1));
    ASSERT_EQ(map.channels(), 1);
    for (double v : map.data()) EXPECT_EQ(v, map.data()[0]);
  }
}

TEST(DepthStub, IdenticalInputsGiveIdenticalMaps) {
  const Image img = testing::random_image(16, 16, 3, 1);
  const Image copy = img;
  EXPECT_EQ(DepthEstimator::stub().estimate(img), DepthEstimator::stub().estimate(copy));
}

TEST(DepthStub, MatchesScalarLoop) {
  const Image img = testing::random_image(16, 16, 3, 2);
  const Image map = DepthEstimator::stub().estimate(img);
  const double k[3] = {0.25, 0.5, 0.25};
  Image ref(16, 16, 1);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int sy = std::clamp(y + dy, 0, 15);
          const int sx = std::clamp(x + dx, 0, 15);
          const double lum = 0.299 * img.at(sy, sx, 0) + 0.587 * img.at(sy, sx, 1) + 0.114 * img.at(sy, sx, 2);
          acc += k[dy + 1] * k[dx + 1] * (1.0 - lum);
        }
      }
      ref.at(y, x, 0) = acc;
    }
  }
  const auto [lo, hi] = std::minmax_element(ref.data().begin(), ref.data().end());
  const double mn = *lo;
  const double span = *hi - *lo;
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(map.data()[i], (ref.data()[i] - mn) / span, 1e-6);
}

TEST(DepthStub, ZeroUpstreamGivesZeroGradient) {
  const Image img = testing::random_image(8, 8, 3, 3);
  const Image g = DepthEstimator::stub().depth_grad(img, Image(8, 8, 1));
  ASSERT_EQ(g.channels(), 3);
  for (double v : g.data()) EXPECT_EQ(v, 0.0);
}

TEST(DepthStub, GradientMatchesFiniteDifferences) {
  const Image img = testing::random_image(8, 8, 3, 4);
  const Image w = testing::random_image(8, 8, 1, 5, -1, 1);
  for (bool normalize : {true, false}) {
    const DepthEstimator d = DepthEstimator::stub({normalize});
    const Image grad = d.depth_grad(img, w);
    const testing::FdOracle fd = testing::fd_oracle([&](const Image& x) { return weighted_sum(d.estimate(x), w); },
                                                    img);
    EXPECT_LT(testing::normwise_rel_error(grad.data(), fd.grad.data()), 1e-3) << "normalize=" << normalize;
  }
}

TEST(DepthStub, RejectsMismatchedUpstream) {
  EXPECT_THROW(DepthEstimator::stub().depth_grad(Image(4, 4, 3), Image(4, 5, 1)), ValidationError);
  EXPECT_THROW(DepthEstimator::stub().estimate(Image(4, 4, 1)), ValidationError);
}

TEST(DepthPretrained, FiniteBoundedGradients) {
  const DepthEstimator d = DepthEstimator::from_network(depth_network(), "toy");
  EXPECT_EQ(d.backend(), DepthBackend::kPretrained);
  const Image img = testing::random_image(64, 64, 3, 6);
  const Image map = d.estimate(img);
  EXPECT_EQ(map.height(), 64);
  EXPECT_EQ(map.channels(), 1);
  const Image g = d.depth_grad(img, testing::random_image(64, 64, 1, 7, -1, 1));
  double mx = 0.0;
  for (double v : g.data()) {
    ASSERT_TRUE(std::isfinite(v));
    mx = std::max(mx, std::abs(v));
  }
  EXPECT_LE(mx, 1e3);
  EXPECT_GT(mx, 0.0);
}

TEST(DepthPretrained, GradientMatchesFiniteDifferences) {
  const DepthEstimator d = DepthEstimator::from_network(depth_network(), "toy", {false});
  const Image img = testing::random_image(8, 8, 3, 8);
  const Image w = testing::random_image(8, 8, 1, 9, -1, 1);
  const Image grad = d.depth_grad(img, w);
  const Image fd = testing::finite_difference([&](const Image& x) { return weighted_sum(d.estimate(x), w); }, img, 1e-5);
  EXPECT_LT(testing::normwise_rel_error(grad.data(), fd.data()), 1e-6);
}

TEST(DepthPretrained, RejectsPoolingOrMultiChannelNetworks) {
  nn::Network pooled = depth_network();
  pooled.stages[0].pool = nn::Pool::kAverage;
  EXPECT_THROW(DepthEstimator::from_network(pooled, "p"), ConfigError);
  nn::Network wide = depth_network();
  wide.stages[0].layers.back() = nn::seeded_layer(8, 2, false, 9, 0.3);
  EXPECT_THROW(DepthEstimator::from_network(wide, "w"), ConfigError);
}

TEST(DepthBackends, MissingWeightsFallBackToStub) {
  const DepthEstimator d = DepthEstimator::from_environment(std::filesystem::path("/nonexistent/depth.psnn"));
  EXPECT_EQ(d.backend(), DepthBackend::kLuminanceStub);
}

}  // namespace
}  // namespace pstyle
