// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pstyle/depthnet.hpp"
#include "pstyle/features.hpp"
#include "pstyle/field.hpp"
#include "pstyle/gradrouter.hpp"
#include "pstyle/losses.hpp"
#include "pstyle/optim.hpp"
#include "pstyle/view_set.hpp"

namespace pstyle {

/// Mask region `region` of the scene is stylized with specs[style].
struct RegionBinding {
  std::string region;
  std::size_t style = 0;
};

struct StylizeConfig {
  int epochs = 10;
  double lr_start = 1e-1;
  double lr_end = 1e-2;
  LossWeights weights;
  bool color_preserve = false;
  bool scale = false;
  bool spatial = false;
  bool depth = false;
  std::vector<StyleSpec> specs;
  std::vector<RegionBinding> regions;
  bool recolor_enabled = false;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  /// Adam denominator floor. At 1e-8 parameters with vanishing gradients
  /// (voxels grazed by masked rays) still move by about lr per step, which
  /// leaks style outside spatial regions.
  double adam_epsilon = 1e-5;
  std::uint64_t seed = 0;
  Block content_block = Block::kL3;
  int patch = kDefaultPatchSize;
  /// Views rendered by validate_epoch; empty means every view.
  std::vector<std::size_t> validation_views;
  /// Where the config snapshot, metrics, validation images and final
  /// checkpoint go. Nothing is written when unset.
  std::optional<std::filesystem::path> run_dir;

  bool multi_style() const { return specs.size() > 1; }
  /// Throws ConfigError on invalid settings.
  void validate(std::size_t n_views) const;
};

/// Content-weight presets per scene kind.
struct Presets {
  static constexpr double kBetaForward = 0.001;
  static constexpr double kBeta360 = 0.005;
  static constexpr double kBetaColorForward = 0.0001;
  static constexpr double kBetaColor360 = 0.0005;
  static constexpr double kBetaSpatialForward = 0.001;
  static constexpr double kBetaSpatial360 = 0.0005;
  static constexpr double kDepthWeight = 0.003;
};

/// Sets beta (and delta when depth control is on) from the enabled controls
/// and the scene kind. Color preservation takes precedence over spatial.
void apply_weight_presets(StylizeConfig& cfg, SceneKind kind);

/// Enforces control side effects: color preservation turns on luminance_only
/// for every spec, and recolor is switched off (with a logged notice) under
/// color preservation, spatial control or multiple styles. Returns the notices.
std::vector<std::string> resolve_controls(StylizeConfig& cfg);

/// lr_start * (lr_end / lr_start)^(step / total_steps); the endpoints are
/// returned exactly.
double lr_at(long step, long total_steps, const StylizeConfig& cfg);

/// Per-term losses of one validation pass. Terms are means over the
/// validation views; weighted terms sum to `total`.
struct EpochRecord {
  int epoch = 0;
  long step = 0;
  double lr = 0.0;
  LossBreakdown loss;
  /// Mean style term of the optimization steps taken during this epoch.
  double train_style = 0.0;
  double train_total = 0.0;
  /// Style distance restricted to feature positions inside the bound
  /// regions (spatial control only).
  std::optional<double> in_mask_style;
  std::vector<std::string> images;
};

nlohmann::json to_json(const EpochRecord& rec);

struct TrainState {
  int epoch = 0;
  long step = 0;
  double lr = 0.0;
  std::vector<LossBreakdown> history;  // one entry per step, before the update
  std::mt19937_64 rng;
  std::vector<EpochRecord> records;
};

/// Everything a run needs besides the field and views.
struct StylizeBackends {
  const FeatureExtractor& features;
  const DepthEstimator* depth = nullptr;  // required when cfg.depth is set
};

/// Renders the validation views of `field`, evaluates the configured
/// objective against the photo-real renders `content` (one per view), and
/// writes images to `image_dir` when given.
EpochRecord validate_epoch(const VoxelField& field, const ViewSet& views, const StylizeConfig& cfg,
                           const StylizeBackends& backends, const std::vector<Image>& content, int epoch,
                           const std::optional<std::filesystem::path>& image_dir = {});

struct StylizeResult {
  VoxelField field;
  TrainState state;
  std::vector<std::string> notices;
};

/// Stylizes `photoreal` with frozen density. Each epoch visits every view
/// once in a seeded shuffled order and takes one step per view.
StylizeResult run_stylization(const VoxelField& photoreal, const ViewSet& views, StylizeConfig cfg,
                              const StylizeBackends& backends);

/// Recolors voxel colors with the linear transfer that maps the pixel
/// statistics of `renders` onto those of `palette`.
void recolor_field(VoxelField& field, const std::vector<Image>& renders, const Image& palette);

/// Serializable view of a config (style images reduced to name, size and
/// content hash).
nlohmann::json config_snapshot(const StylizeConfig& cfg);

}  // namespace pstyle
