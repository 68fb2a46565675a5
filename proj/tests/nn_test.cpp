// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pstyle/error.hpp"
#include "pstyle/nn.hpp"

namespace pstyle::nn {
namespace {

double dot(const Image& a, const Image& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

TEST(Conv, MatchesBruteForce) {
  for (bool relu : {false, true}) {
    const ConvLayer layer = seeded_layer(3, 5, relu, 11, 0.1);
    const Image in = testing::random_image(7, 6, 3, 12, -1.0, 1.0);
    const Image fast = conv3x3(layer, in);
    const Image slow = testing::conv_brute_force(layer, in);
    ASSERT_TRUE(fast.same_shape(slow));
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast.data()[i], slow.data()[i], 1e-12);
  }
}

TEST(Conv, BackwardIsAdjointOfLinearConv) {
  const ConvLayer layer = seeded_layer(4, 3, false, 5);
  const Image x = testing::random_image(5, 6, 4, 1, -1.0, 1.0);
  const Image g = testing::random_image(5, 6, 3, 2, -1.0, 1.0);
  EXPECT_NEAR(dot(conv3x3(layer, x), g), dot(x, conv3x3_backward(layer, g)), 1e-10);
}

TEST(Pool, AverageAndMaxCeilMode) {
  Image in(3, 3, 1);
  for (int i = 0; i < 9; ++i) in.data()[i] = i;
  std::vector<std::uint32_t> argmax;
  const Image avg = pool2(Pool::kAverage, in, nullptr);
  const Image mx = pool2(Pool::kMax, in, &argmax);
  ASSERT_EQ(avg.height(), 2);
  EXPECT_DOUBLE_EQ(avg.at(0, 0, 0), 2.0);
  EXPECT_DOUBLE_EQ(avg.at(1, 1, 0), 8.0);
  EXPECT_DOUBLE_EQ(mx.at(0, 0, 0), 4.0);
  EXPECT_DOUBLE_EQ(mx.at(0, 1, 0), 5.0);
  const Image g(2, 2, 1, 1.0);
  const Image back = pool2_backward(Pool::kMax, g, 3, 3, argmax);
  EXPECT_DOUBLE_EQ(back.at(1, 1, 0), 1.0);
  EXPECT_DOUBLE_EQ(back.at(0, 0, 0), 0.0);
}

Network small_network() {
  Network net;
  Stage s1;
  s1.layers.push_back(seeded_layer(3, 4, true, 1, 0.1));
  Stage s2;
  s2.pool = Pool::kAverage;
  s2.layers.push_back(seeded_layer(4, 4, true, 2, 0.1));
  s2.layers.push_back(seeded_layer(4, 2, false, 3, 0.1));
  net.stages = {s1, s2};
  return net;
}

TEST(Network, BackwardMatchesFiniteDifferences) {
  const Network net = small_network();
  const Image x = testing::random_image(6, 6, 3, 9);
  const Image w1 = testing::random_image(6, 6, 4, 10, -1.0, 1.0);
  const Image w2 = testing::random_image(3, 3, 2, 11, -1.0, 1.0);
  auto f = [&](const Image& in) {
    const auto outs = forward(net, in, 1);
    return dot(outs[0], w1) + dot(outs[1], w2);
  };
  Tape tape;
  forward(net, x, 1, &tape);
  const Image grad = backward(net, tape, {w1, w2});
  const Image fd = testing::finite_difference(f, x, 1e-5);
  EXPECT_LT(testing::normwise_rel_error(grad.data(), fd.data()), 1e-6);
}

TEST(Network, SaveLoadRoundTrip) {
  Network net = small_network();
  net.normalization.enabled = true;
  net.normalization.mean = {0.4, 0.5, 0.6};
  net.normalization.stddev = {0.2, 0.25, 0.3};
  const auto path = std::filesystem::temp_directory_path() / "pstyle_nn_test.psnn";
  save_network(net, path);
  const Network back = load_network(path);
  ASSERT_EQ(back.stages.size(), 2u);
  const Image x = testing::random_image(8, 8, 3, 4);
  const auto a = forward(net, x, 1);
  const auto b = forward(back, x, 1);
  // Weights are stored as float32.
  for (std::size_t i = 0; i < a[1].size(); ++i) EXPECT_NEAR(a[1].data()[i], b[1].data()[i], 1e-5);
}

TEST(Network, RejectsMalformedFiles) {
  const auto path = std::filesystem::temp_directory_path() / "pstyle_nn_bad.psnn";
  {
    std::ofstream out(path, std::ios::binary);
    out << "garbage";
  }
  EXPECT_THROW(load_network(path), IoError);
}

TEST(Network, ValidateRejectsChannelMismatch) {
  Network net;
  Stage s;
  s.layers.push_back(seeded_layer(3, 4, true, 1));
  s.layers.push_back(seeded_layer(5, 4, true, 2));
  net.stages = {s};
  EXPECT_THROW(net.validate(), ConfigError);
}

}  // namespace
}  // namespace pstyle::nn
