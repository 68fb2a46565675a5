// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/view_set.hpp"

#include "pstyle/error.hpp"

namespace pstyle {

SceneKind parse_scene_kind(const std::string& name) {
  if (name == "forward-facing" || name == "forward") return SceneKind::kForwardFacing;
  if (name == "360") return SceneKind::k360;
  throw ConfigError("unknown scene kind '" + name + "' (expected forward-facing or 360)");
}

std::string to_string(SceneKind kind) {
  return kind == SceneKind::k360 ? "360" : "forward-facing";
}

const Image* ViewSet::mask(const std::string& region, std::size_t v) const {
  auto it = masks.find(region);
  if (it == masks.end() || v >= it->second.size() || it->second[v].empty()) return nullptr;
  return &it->second[v];
}

void require_binary_mask(const Image& plane, int height, int width, const std::string& what) {
  if (plane.channels() != 1 || plane.height() != height || plane.width() != width) {
    throw ValidationError(what + ": mask is " + shape_string(plane) + ", expected " +
                          std::to_string(height) + "x" + std::to_string(width) + "x1");
  }
  for (double v : plane.data()) {
    if (v != 0.0 && v != 1.0) {
      throw ValidationError(what + ": mask is not binary (value " + std::to_string(v) + ")");
    }
  }
}

void ViewSet::validate() const {
  render.validate();
  if (cameras.size() != images.size()) {
    throw ValidationError("camera count (" + std::to_string(cameras.size()) +
                          ") does not equal image count (" + std::to_string(images.size()) + ")");
  }
  if (!names.empty() && names.size() != cameras.size()) {
    throw ValidationError("view name count does not match camera count");
  }
  for (std::size_t v = 0; v < cameras.size(); ++v) {
    cameras[v].validate();
    const Image& img = images[v];
    if (img.height() != cameras[v].height || img.width() != cameras[v].width || img.channels() != 3) {
      throw ValidationError("view " + std::to_string(v) + ": image " + shape_string(img) +
                            " does not match camera " + std::to_string(cameras[v].height) + "x" +
                            std::to_string(cameras[v].width) + "x3");
    }
  }
  for (const auto& [region, planes] : masks) {
    if (planes.size() > cameras.size()) {
      throw ValidationError("region '" + region + "' has masks for views that do not exist");
    }
    for (std::size_t v = 0; v < planes.size(); ++v) {
      if (planes[v].empty()) continue;
      require_binary_mask(planes[v], cameras[v].height, cameras[v].width,
                          "region '" + region + "' view " + std::to_string(v));
    }
  }
}

}  // namespace pstyle
