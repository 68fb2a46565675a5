// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/gradrouter.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "pstyle/error.hpp"
#include "pstyle/view_set.hpp"

namespace pstyle {

void RegionMask::validate() const {
  require_binary_mask(plane, plane.height(), plane.width(), "mask '" + region + "' for view '" + view + "'");
}

bool RegionMask::empty() const {
  return std::all_of(plane.data().begin(), plane.data().end(), [](double v) { return v == 0.0; });
}

CachedGradMap compute_cached_grads(const Image& render, const ImageLossFn& loss, const std::string& view,
                                   double* loss_value) {
  CachedGradMap out{view, Image(render.height(), render.width(), render.channels())};
  const double value = loss(render, &out.grad);
  if (!std::isfinite(value)) throw NumericError("non-finite loss on view " + view);
  require_same_shape(out.grad, render, "cached gradient of view " + view);
  if (!all_finite(out.grad)) throw NumericError("non-finite cached gradient on view " + view);
  if (loss_value) *loss_value = value;
  return out;
}

CachedGradMap apply_mask(const CachedGradMap& g, const RegionMask& m) {
  if (m.plane.height() != g.grad.height() || m.plane.width() != g.grad.width() || m.plane.channels() != 1) {
    throw ValidationError("mask '" + m.region + "' " + shape_string(m.plane) + " does not match gradient " +
                          shape_string(g.grad) + " of view " + g.view);
  }
  return CachedGradMap{g.view, multiply_plane(g.grad, m.plane)};
}

CachedGradMap combine_region_grads(const std::vector<std::pair<RegionMask, CachedGradMap>>& pairs) {
  if (pairs.empty()) throw ArgumentError("combine_region_grads needs at least one region");
  const Image& first = pairs.front().second.grad;
  Image coverage(first.height(), first.width(), 1);
  for (const auto& [mask, g] : pairs) {
    require_same_shape(g.grad, first, "combine_region_grads");
    if (mask.plane.height() != first.height() || mask.plane.width() != first.width()) {
      throw ValidationError("mask '" + mask.region + "' " + shape_string(mask.plane) + " does not match " +
                            shape_string(first));
    }
    coverage += mask.plane;
  }
  const auto overlap = std::count_if(coverage.data().begin(), coverage.data().end(), [](double v) { return v > 1.0; });
  if (overlap > 0) {
    throw ValidationError("region masks overlap on " + std::to_string(overlap) + " pixels");
  }
  // With disjoint supports every output entry receives at most one nonzero
  // term, so selecting instead of summing is exact and order independent.
  CachedGradMap out{pairs.front().second.view, Image(first.height(), first.width(), first.channels())};
  for (const auto& [mask, g] : pairs) {
    for (int y = 0; y < first.height(); ++y) {
      for (int x = 0; x < first.width(); ++x) {
        if (mask.plane.at(y, x, 0) == 0.0) continue;
        for (int c = 0; c < first.channels(); ++c) out.grad.at(y, x, c) = g.grad.at(y, x, c);
      }
    }
  }
  return out;
}

LossBreakdown region_loss(const Image& render, const Image& content, const RegionMask& m,
                          const Objective& objective, Image* grad) {
  m.validate();
  if (m.plane.height() != render.height() || m.plane.width() != render.width()) {
    throw ValidationError("mask '" + m.region + "' " + shape_string(m.plane) + " does not match render " +
                          shape_string(render));
  }
  if (m.empty()) spdlog::warn("region '{}' is empty on view '{}'", m.region, m.view);
  const Image masked_render = multiply_plane(render, m.plane);
  const Image masked_content = multiply_plane(content, m.plane);
  Image g;
  LossBreakdown out = objective.evaluate(masked_render, masked_content, grad ? &g : nullptr, m.view);
  if (grad) *grad = multiply_plane(g, m.plane);
  return out;
}

LossBreakdown region_loss(const Image& render, const Image& content, const RegionMask& m, const StyleSpec& spec,
                          const LossWeights& weights, const FeatureExtractor& fx, Image* grad) {
  const Objective objective(fx, {spec}, weights);
  return region_loss(render, content, m, objective, grad);
}

FieldGrad deferred_backprop(const VoxelField& field, const Camera& cam, const RenderSettings& settings,
                            const CachedGradMap& g, int patch) {
  if (patch <= 0) throw ArgumentError("patch size must be positive, got " + std::to_string(patch));
  if (g.grad.height() != cam.height || g.grad.width() != cam.width || g.grad.channels() != 3) {
    throw ValidationError("cached gradient " + shape_string(g.grad) + " of view " + g.view +
                          " does not match camera size " + std::to_string(cam.height) + "x" +
                          std::to_string(cam.width));
  }
  const int ph = std::min(patch, cam.height);
  const int pw = std::min(patch, cam.width);
  FieldGrad acc(field);
  for (int y0 = 0; y0 < cam.height; y0 += ph) {
    for (int x0 = 0; x0 < cam.width; x0 += pw) {
      const PixelRect rect{x0, y0, std::min(x0 + pw, cam.width), std::min(y0 + ph, cam.height)};
      render_backward(field, cam, settings, g.grad, rect, acc);
    }
  }
  return acc;
}

}  // namespace pstyle
