// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pstyle/error.hpp"
#include "pstyle/features.hpp"

namespace pstyle {
namespace {

const FeatureExtractor& fx() {
  static const FeatureExtractor e = FeatureExtractor::deterministic();
  return e;
}

TEST(Features, Deterministic) {
  const Image img = testing::random_image(32, 32, 3, 1);
  const Image copy = img;
  const FeatureSet a = fx().extract(img, {Block::kL2, Block::kL4});
  const FeatureSet b = FeatureExtractor::deterministic().extract(copy, {Block::kL2, Block::kL4});
  EXPECT_EQ(a.at(Block::kL2), b.at(Block::kL2));
  EXPECT_EQ(a.at(Block::kL4), b.at(Block::kL4));
}

TEST(Features, BlockResolutionFollowsDownsampleSchedule) {
  const FeatureSet f = fx().extract(testing::random_image(64, 64, 3, 2), {Block::kL1, Block::kL3, Block::kL5});
  EXPECT_EQ(f.at(Block::kL3).height(), 16);
  EXPECT_EQ(f.at(Block::kL3).width(), 16);
  EXPECT_EQ(f.at(Block::kL1).height(), 64);
  EXPECT_EQ(f.at(Block::kL5).height(), 4);
  EXPECT_EQ(f.at(Block::kL1).channels(), 16);
  EXPECT_EQ(f.at(Block::kL5).channels(), 32);
  EXPECT_EQ(f.size(), 3u);
}

TEST(Features, ZeroImageGivesZeroFeatures) {
  const FeatureSet f = fx().extract(Image(16, 16, 3, 0.0), {Block::kL1, Block::kL2, Block::kL3, Block::kL4, Block::kL5});
  for (const auto& [b, map] : f) {
    for (double v : map.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Features, TooSmallImageRaisesSizingError) {
  EXPECT_THROW(fx().extract(Image(8, 8, 3), {Block::kL5}), SizingError);
  EXPECT_NO_THROW(fx().extract(Image(8, 8, 3), {Block::kL4}));
  EXPECT_THROW(fx().extract(Image(8, 8, 1), {Block::kL1}), ValidationError);
}

TEST(Features, BackwardMatchesFiniteDifferences) {
  const Image img = testing::random_image(12, 12, 3, 3);
  const FeatureSet w{{Block::kL2, testing::random_image(6, 6, 16, 4, -1, 1)},
                     {Block::kL3, testing::random_image(3, 3, 32, 5, -1, 1)}};
  auto f = [&](const Image& x) {
    const FeatureSet fs = fx().extract(x, {Block::kL2, Block::kL3});
    double s = 0.0;
    for (const auto& [b, map] : fs) {
      for (std::size_t i = 0; i < map.size(); ++i) s += map.data()[i] * w.at(b).data()[i];
    }
    return s;
  };
  FeatureTape tape;
  fx().extract(img, {Block::kL2, Block::kL3}, &tape);
  const Image grad = fx().backward(tape, w);
  const Image fd = testing::finite_difference(f, img, 1e-5);
  EXPECT_LT(testing::normwise_rel_error(grad.data(), fd.data()), 1e-6);
}

TEST(Features, BatchMatchesPerImage) {
  const std::vector<Image> images = {testing::random_image(16, 16, 3, 7), testing::random_image(24, 20, 3, 8),
                                     testing::random_image(16, 16, 3, 9)};
  const BlockSet blocks{Block::kL1, Block::kL3};
  const std::vector<FeatureSet> batch = fx().extract_batch(images, blocks);
  ASSERT_EQ(batch.size(), images.size());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const FeatureSet one = fx().extract(images[i], blocks);
    for (Block b : blocks) {
      const FeatureMap& a = batch[i].at(b);
      const FeatureMap& r = one.at(b);
      ASSERT_EQ(a.size(), r.size());
      for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.data()[k], r.data()[k], 1e-6);
    }
  }
}

TEST(FeatureConfig, DefaultAndOverrides) {
  EXPECT_EQ(content_block(), Block::kL3);
  EXPECT_EQ(FeatureConfig{}.content_block, Block::kL3);
  EXPECT_EQ(make_feature_config("l2").content_block, Block::kL2);
  EXPECT_EQ(make_feature_config("conv4").content_block, Block::kL4);
  EXPECT_THROW(make_feature_config("l9"), ConfigError);
  EXPECT_THROW(parse_block("pool3"), ConfigError);
  EXPECT_EQ(to_string(Block::kL5), "l5");
}

TEST(Audit, RecordsBlocksAndImages) {
  FeatureExtractor e = FeatureExtractor::deterministic();
  auto audit = std::make_shared<ExtractionAudit>();
  e.attach_audit(audit);
  const Image img = testing::random_image(16, 16, 3, 6);
  e.extract(img, {Block::kL1, Block::kL2});
  EXPECT_EQ(audit->blocks_touched(), (BlockSet{Block::kL1, Block::kL2}));
  EXPECT_TRUE(audit->touched_image(content_hash(img)));
  EXPECT_FALSE(audit->touched_image(content_hash(Image(16, 16, 3))));
  audit->clear();
  EXPECT_TRUE(audit->records().empty());
}

TEST(Backends, FromWeightsAndFallback) {
  nn::Network net;
  int in = 3;
  for (int s = 0; s < 5; ++s) {
    nn::Stage stage;
    stage.pool = s == 0 ? nn::Pool::kNone : nn::Pool::kMax;
    stage.layers.push_back(nn::seeded_layer(in, 4, true, 100 + s, 0.05));
    in = 4;
    net.stages.push_back(stage);
  }
  net.normalization.enabled = true;
  net.normalization.mean = {0.485, 0.456, 0.406};
  net.normalization.stddev = {0.229, 0.224, 0.225};
  const auto path = std::filesystem::temp_directory_path() / "pstyle_features_test.psnn";
  nn::save_network(net, path);
  const FeatureExtractor e = FeatureExtractor::from_environment(path);
  EXPECT_EQ(e.backend(), FeatureBackend::kPretrained);
  EXPECT_EQ(e.extract(Image(16, 16, 3, 0.5), {Block::kL5}).at(Block::kL5).channels(), 4);

  const FeatureExtractor missing = FeatureExtractor::from_environment(std::filesystem::path("/nonexistent/w.psnn"));
  EXPECT_EQ(missing.backend(), FeatureBackend::kDeterministic);

  net.stages.pop_back();
  EXPECT_THROW(FeatureExtractor::from_network(net, "short"), ConfigError);
}

}  // namespace
}  // namespace pstyle
