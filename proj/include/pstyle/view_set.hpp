// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "pstyle/camera.hpp"
#include "pstyle/image.hpp"

namespace pstyle {

enum class SceneKind { kForwardFacing, k360 };

SceneKind parse_scene_kind(const std::string& name);
std::string to_string(SceneKind kind);

/// Posed views with ground-truth images and optional per-region binary
/// masks. Views are ordered; masks[region][v] pairs with view v, and an
/// empty Image marks a view without a mask for that region.
struct ViewSet {
  SceneKind kind = SceneKind::kForwardFacing;
  RenderSettings render;
  std::vector<std::string> names;
  std::vector<Camera> cameras;
  std::vector<Image> images;
  std::map<std::string, std::vector<Image>> masks;

  std::size_t size() const { return cameras.size(); }

  /// Mask plane of `region` for view `v`, or nullptr if absent.
  const Image* mask(const std::string& region, std::size_t v) const;

  /// Enforces: camera count equals image count, image dims match cameras,
  /// masks are single-channel, binary, sized like their view.
  void validate() const;
};

/// Throws ValidationError unless `plane` is H x W x 1 with values exactly 0
/// or 1.
void require_binary_mask(const Image& plane, int height, int width, const std::string& what);

}  // namespace pstyle
