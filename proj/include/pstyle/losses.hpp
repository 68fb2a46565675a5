// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "pstyle/depthnet.hpp"
#include "pstyle/features.hpp"
#include "pstyle/image.hpp"

namespace pstyle {

/// One style image with its per-block receptive-field weights w_l, per-block
/// style-image resize factors T_S^l, blend weight lambda and the
/// luminance-only (color preservation) switch.
struct StyleSpec {
  Image image;
  std::array<double, 5> block_weights{0.0, 0.0, 1.0, 0.0, 0.0};
  std::array<double, 5> block_scales{1.0, 1.0, 1.0, 1.0, 1.0};
  double blend_weight = 1.0;
  bool luminance_only = false;
  std::string name;

  double weight(Block b) const { return block_weights[block_number(b) - 1]; }
  double scale(Block b) const { return block_scales[block_number(b) - 1]; }
  /// Blocks with a strictly positive weight.
  BlockSet active_blocks() const;

  /// Weights >= 0 with at least one positive, scales in [1/8, 8], lambda >= 0,
  /// and every resized style image large enough for its block (SizingError
  /// names the block).
  void validate() const;
};

struct LossWeights {
  double style = 1.0;      // alpha
  double content = 0.001;  // beta
  double tv = 0.0;         // gamma
  double depth = 0.0;      // delta

  void validate() const;
};

/// Nearest-neighbour feature matching: mean over render vectors u of
/// min_v (1 - cos(u, v)), cos = u.v / (|u||v| + 1e-8). Ties pick the first
/// style vector in row-major order.
double nnfm_loss(const FeatureMap& render, const FeatureMap& style, FeatureMap* grad = nullptr);

/// Same distance averaged with per-position weights (a single-channel plane
/// at the render feature resolution). Returns 0 when all weights are 0.
double nnfm_loss_weighted(const FeatureMap& render, const FeatureMap& style, const Image& weights);

/// Mean squared difference of content-block features.
double content_loss(const Image& render, const Image& content, const FeatureExtractor& fx,
                    Image* grad = nullptr, Block block = Block::kL3);

/// Mean of squared horizontal and vertical neighbour differences over all
/// channels (one term per neighbour pair).
double tv_loss(const Image& x, Image* grad = nullptr);

/// The style image resized by T_S^l for `block` (identity when T = 1),
/// luminance-triplicated first when the style spec asks for it.
Image style_input_for_block(const StyleSpec& spec, Block block);

/// Style features per active block, extracted once and reused across steps.
struct StyleTarget {
  FeatureSet features;
};
StyleTarget prepare_style_target(const StyleSpec& spec, const FeatureExtractor& fx);

/// sum_l w_l * NNFM(F_l(render'), F_l(R(style', T_S^l))) where ' marks the
/// luminance triplicate when spec.luminance_only is set.
double scaled_style_loss(const Image& render, const StyleSpec& spec, const FeatureExtractor& fx,
                         Image* grad = nullptr);
double scaled_style_loss(const Image& render, const StyleSpec& spec, const StyleTarget& target,
                         const FeatureExtractor& fx, Image* grad = nullptr);

/// sum_i lambda_i * scaled_style_loss(render, spec_i). Zero-lambda specs are
/// skipped entirely (their images are never extracted).
double blended_style_loss(const Image& render, const std::vector<StyleSpec>& specs,
                          const FeatureExtractor& fx, Image* grad = nullptr);

/// ||phi(render) - phi(content)||^2 divided by the depth-map element count.
/// `view` names the view in the NumericError raised on non-finite estimates.
double depth_loss(const Image& render, const Image& content, const DepthEstimator& depth,
                  Image* grad = nullptr, const std::string& view = "");

struct LossBreakdown {
  // Unweighted terms.
  double style = 0.0;
  double content = 0.0;
  double tv = 0.0;
  double depth = 0.0;
  // Weighted contributions; they sum to `total`.
  double weighted_style = 0.0;
  double weighted_content = 0.0;
  double weighted_tv = 0.0;
  double weighted_depth = 0.0;
  double total = 0.0;
  bool has_depth = false;
};

/// alpha * style + beta * content + gamma * tv (+ delta * depth when a depth
/// estimator is supplied). Style targets are prepared at construction.
class Objective {
 public:
  Objective(const FeatureExtractor& fx, std::vector<StyleSpec> specs, LossWeights weights,
            const DepthEstimator* depth = nullptr, Block content_block = Block::kL3);

  /// Evaluates all terms; fills `grad` with d total / d render when given.
  /// Non-finite terms raise NumericError naming `view` and the term.
  LossBreakdown evaluate(const Image& render, const Image& content, Image* grad = nullptr,
                         const std::string& view = "") const;

  const std::vector<StyleSpec>& specs() const { return specs_; }
  const std::vector<StyleTarget>& targets() const { return targets_; }
  const LossWeights& weights() const { return weights_; }
  const FeatureExtractor& extractor() const { return fx_; }

 private:
  const FeatureExtractor& fx_;
  std::vector<StyleSpec> specs_;
  std::vector<StyleTarget> targets_;  // empty entries for skipped specs
  LossWeights weights_;
  const DepthEstimator* depth_;
  Block content_block_;
};

LossBreakdown total_loss(const Image& render, const Image& content, const std::vector<StyleSpec>& specs,
                         const LossWeights& weights, const DepthEstimator* depth,
                         const FeatureExtractor& fx, Image* grad = nullptr,
                         Block content_block = Block::kL3);

}  // namespace pstyle
