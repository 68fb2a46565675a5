// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pstyle/field.hpp"
#include "pstyle/image.hpp"
#include "pstyle/losses.hpp"

namespace pstyle {

/// Image-space loss gradient for one view, held between the loss phase and
/// the patchwise re-render.
struct CachedGradMap {
  std::string view;
  Image grad;  // H x W x 3
};

/// Binary region mask for one view. `style` optionally names the StyleSpec
/// bound to the region.
struct RegionMask {
  std::string region;
  std::string view;
  Image plane;  // H x W x 1, values exactly 0 or 1
  std::optional<std::string> style;

  void validate() const;
  bool empty() const;  // all zeros
};

/// Scalar image loss; fills `grad` (same shape as the input) when non-null.
using ImageLossFn = std::function<double(const Image& render, Image* grad)>;

/// Evaluates `loss` at `render` and caches d loss / d render. The field is
/// not involved. Throws NumericError naming `view` on non-finite values.
CachedGradMap compute_cached_grads(const Image& render, const ImageLossFn& loss, const std::string& view,
                                   double* loss_value = nullptr);

/// Zeroes entries where the mask is 0; others are copied bit-for-bit.
CachedGradMap apply_mask(const CachedGradMap& g, const RegionMask& m);

/// Sum of masked maps. Masks must be pairwise disjoint; the ValidationError
/// for an overlap reports how many pixels are shared.
CachedGradMap combine_region_grads(const std::vector<std::pair<RegionMask, CachedGradMap>>& pairs);

/// Loss of one region: the objective evaluated on T o render against
/// T o content with the region's style. The gradient (when requested) is
/// with respect to the unmasked render, so it is already zero outside T.
/// An all-zero mask logs a warning; the style term is then the distance of a
/// black image to the style.
LossBreakdown region_loss(const Image& render, const Image& content, const RegionMask& m,
                          const Objective& objective, Image* grad = nullptr);
LossBreakdown region_loss(const Image& render, const Image& content, const RegionMask& m, const StyleSpec& spec,
                          const LossWeights& weights, const FeatureExtractor& fx, Image* grad = nullptr);

/// Default square patch edge for the re-render.
constexpr int kDefaultPatchSize = 64;

/// Re-renders the view patch by patch (row-major, patch edge clamped to the
/// image) and accumulates <g, render_view(field)> into parameter gradients.
/// Throws ArgumentError for patch <= 0 and ValidationError when g does not
/// match the camera's image size.
FieldGrad deferred_backprop(const VoxelField& field, const Camera& cam, const RenderSettings& settings,
                            const CachedGradMap& g, int patch = kDefaultPatchSize);

}  // namespace pstyle
