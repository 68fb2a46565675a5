// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pstyle/error.hpp"
#include "pstyle/stylize.hpp"
#include "scene.hpp"

namespace pstyle {
namespace {

constexpr int kFitIterations = 2000;

const FeatureExtractor& fx() {
  static const FeatureExtractor e = FeatureExtractor::deterministic();
  return e;
}

StylizeConfig baseline_config() {
  StylizeConfig cfg;
  StyleSpec s;
  s.image = testing::diagonal_stripes();
  s.name = "stripes";
  cfg.specs = {s};
  apply_weight_presets(cfg, SceneKind::kForwardFacing);
  return cfg;
}

double mean_abs_outside(const Image& a, const Image& b, const Image& mask) {
  double sum = 0.0;
  long n = 0;
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      if (mask.at(y, x, 0) != 0.0) continue;
      for (int c = 0; c < 3; ++c) sum += std::abs(a.at(y, x, c) - b.at(y, x, c));
      n += 3;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

TEST(Schedule, EndpointsAndMidpoint) {
  const StylizeConfig cfg;
  EXPECT_EQ(lr_at(0, 100, cfg), 0.1);
  EXPECT_EQ(lr_at(100, 100, cfg), 0.01);
  EXPECT_NEAR(lr_at(50, 100, cfg), std::sqrt(0.1 * 0.01), 1e-6);
  EXPECT_NEAR(lr_at(50, 100, cfg), 0.031623, 1e-6);
  EXPECT_THROW(lr_at(101, 100, cfg), ArgumentError);
  EXPECT_THROW(lr_at(0, 0, cfg), ArgumentError);
}

TEST(Schedule, MonotoneDecreasing) {
  const StylizeConfig cfg;
  for (long s = 1; s <= 40; ++s) EXPECT_LT(lr_at(s, 40, cfg), lr_at(s - 1, 40, cfg));
}

TEST(Presets, PerControlAndSceneKind) {
  StylizeConfig cfg = baseline_config();
  EXPECT_EQ(cfg.weights.content, 0.001);
  apply_weight_presets(cfg, SceneKind::k360);
  EXPECT_EQ(cfg.weights.content, 0.005);
  cfg.color_preserve = true;
  apply_weight_presets(cfg, SceneKind::kForwardFacing);
  EXPECT_EQ(cfg.weights.content, 0.0001);
  cfg.color_preserve = false;
  cfg.spatial = true;
  apply_weight_presets(cfg, SceneKind::k360);
  EXPECT_EQ(cfg.weights.content, 0.0005);
  cfg.depth = true;
  apply_weight_presets(cfg, SceneKind::kForwardFacing);
  EXPECT_EQ(cfg.weights.depth, 0.003);
}

TEST(Controls, ColorPreservationSetsLuminanceAndDisablesRecolor) {
  StylizeConfig cfg = baseline_config();
  cfg.color_preserve = true;
  cfg.recolor_enabled = true;
  const auto notices = resolve_controls(cfg);
  EXPECT_TRUE(cfg.specs[0].luminance_only);
  EXPECT_FALSE(cfg.recolor_enabled);
  ASSERT_EQ(notices.size(), 1u);
  EXPECT_NE(notices[0].find("recolor"), std::string::npos);
}

TEST(Controls, RecolorKeptForSingleStyleBaseline) {
  StylizeConfig cfg = baseline_config();
  cfg.recolor_enabled = true;
  EXPECT_TRUE(resolve_controls(cfg).empty());
  EXPECT_TRUE(cfg.recolor_enabled);
}

TEST(Config, Validation) {
  StylizeConfig cfg = baseline_config();
  EXPECT_NO_THROW(cfg.validate(4));
  cfg.epochs = 0;
  EXPECT_THROW(cfg.validate(4), ConfigError);
  cfg = baseline_config();
  cfg.spatial = true;
  EXPECT_THROW(cfg.validate(4), ConfigError);
  cfg.regions = {{"object0", 1}};
  EXPECT_THROW(cfg.validate(4), ConfigError);
  cfg = baseline_config();
  cfg.validation_views = {4};
  EXPECT_THROW(cfg.validate(4), ConfigError);
  cfg = baseline_config();
  cfg.specs.clear();
  EXPECT_THROW(cfg.validate(4), ConfigError);
}

TEST(Snapshot, ReducesStyleImagesToHashes) {
  const nlohmann::json j = config_snapshot(baseline_config());
  EXPECT_EQ(j["epochs"], 10);
  EXPECT_EQ(j["specs"][0]["name"], "stripes");
  EXPECT_EQ(j["specs"][0]["content_hash"].get<std::string>().size(), 16u);
  EXPECT_FALSE(j["specs"][0].contains("image"));
}

TEST(Recolor, FieldTakesPaletteMean) {
  VoxelField field = testing::random_field(3, 1);
  const Image render = testing::random_image(8, 8, 3, 2, 0.2, 0.8);
  recolor_field(field, {render}, testing::solid(4, 4, 0.5, 0.5, 0.5));
  for (std::size_t v = 0; v < field.shape.count(); ++v) {
    for (int k = 0; k < 3; ++k) EXPECT_TRUE(std::isfinite(field.color[3 * v + k]));
  }
  EXPECT_THROW(recolor_field(field, {}, render), ArgumentError);
}

class StylizeScene : public ::testing::Test {
 protected:
  const testing::FittedScene& fs = testing::fitted_scene(kFitIterations);
  const ViewSet& views = fs.scene.bundle;
};

TEST_F(StylizeScene, ZeroWeightsLeaveFieldUnchanged) {
  StylizeConfig cfg = baseline_config();
  cfg.weights = LossWeights{0.0, 0.0, 0.0, 0.0};
  cfg.epochs = 2;
  const StylizeResult r = run_stylization(fs.photoreal, views, cfg, {fx()});
  EXPECT_EQ(r.field.density, fs.photoreal.density);
  EXPECT_EQ(r.field.color, fs.photoreal.color);
  EXPECT_TRUE(r.field.density_frozen);
}

TEST_F(StylizeScene, EpochZeroHasNoContentLoss) {
  std::vector<Image> content;
  for (const Camera& cam : views.cameras) content.push_back(render_view(fs.photoreal, cam, views.render));
  const EpochRecord rec = validate_epoch(fs.photoreal, views, baseline_config(), {fx()}, content, 0);
  EXPECT_EQ(rec.epoch, 0);
  EXPECT_EQ(rec.loss.content, 0.0);
  EXPECT_GT(rec.loss.style, 0.0);
}

TEST_F(StylizeScene, BaselineReducesStyleLoss) {
  const StylizeResult r = run_stylization(fs.photoreal, views, baseline_config(), {fx()});
  const auto& recs = r.state.records;
  ASSERT_EQ(recs.size(), 10u);
  EXPECT_EQ(r.state.history.size(), 10u * views.size());
  EXPECT_LE(recs.back().loss.style, 0.7 * recs.front().loss.style);
  EXPECT_LE(recs.back().train_style, 0.7 * recs.front().train_style);
  for (const EpochRecord& rec : recs) {
    const LossBreakdown& b = rec.loss;
    EXPECT_NEAR(b.weighted_style + b.weighted_content + b.weighted_tv + b.weighted_depth, b.total, 1e-9);
    EXPECT_NEAR(b.weighted_style, b.style * 1.0, 1e-12);
  }
  EXPECT_EQ(r.field.density, fs.photoreal.density);
}

TEST_F(StylizeScene, SpatialOneRegionLeavesOutsideUnchanged) {
  StylizeConfig cfg = baseline_config();
  cfg.spatial = true;
  cfg.regions = {{"object0", 0}};
  apply_weight_presets(cfg, views.kind);
  const StylizeResult r = run_stylization(fs.photoreal, views, cfg, {fx()});
  ASSERT_EQ(r.state.records.size(), 10u);
  const Image before = render_view(fs.photoreal, fs.scene.held_out, views.render);
  const Image after = render_view(r.field, fs.scene.held_out, views.render);
  EXPECT_LE(mean_abs_outside(after, before, fs.scene.held_out_masks.at("object0")), 2.0 / 255.0);
  ASSERT_TRUE(r.state.records.front().in_mask_style.has_value());
  EXPECT_LT(*r.state.records.back().in_mask_style, *r.state.records.front().in_mask_style);
}

TEST_F(StylizeScene, DepthControlNeedsEstimator) {
  StylizeConfig cfg = baseline_config();
  cfg.depth = true;
  cfg.epochs = 1;
  EXPECT_THROW(run_stylization(fs.photoreal, views, cfg, {fx()}), ConfigError);
}

}  // namespace
}  // namespace pstyle
