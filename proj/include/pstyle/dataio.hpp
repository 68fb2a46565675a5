// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pstyle/field.hpp"
#include "pstyle/view_set.hpp"

namespace pstyle {

/// On-disk scene layout:
///   images/*.png                      8-bit RGB, lexicographic view order
///   cameras.json                      {"format": "pstyle-cameras", "version": 1, ...}
///   masks/<region>/<image name>.png   optional, pixels 0 or 255
using SceneBundle = ViewSet;

constexpr int kCameraFormatVersion = 1;
constexpr int kCheckpointVersion = 1;

SceneBundle load_scene(const std::filesystem::path& dir);
void save_scene(const SceneBundle& scene, const std::filesystem::path& dir);

/// Text header (format, version, resolution, bbox, frozen flag, byte counts)
/// followed by the density and color grids as little-endian float32.
void save_checkpoint(const VoxelField& field, const std::filesystem::path& path);
VoxelField load_checkpoint(const std::filesystem::path& path);

struct SyntheticOptions {
  std::uint64_t seed = 7;
  int resolution = 24;  // voxels per axis
  int n_views = 8;
  int image_size = 32;  // square views
  int primitives = 3;   // 2 or 3 spheres
  double fov_y_deg = 20.0;
  SceneKind kind = SceneKind::kForwardFacing;
};

struct SyntheticScene {
  SceneBundle bundle;
  VoxelField truth;
  /// A pose on the capture arc between two training cameras, with its
  /// ground-truth image and masks (same region names as the bundle).
  Camera held_out;
  Image held_out_image;
  std::map<std::string, Image> held_out_masks;
  /// Occupied voxels of each region's primitive.
  std::map<std::string, std::vector<bool>> region_support;
};

/// Colored opaque spheres on a contrasting background, viewed from an arc.
/// Region "object<k>" marks the pixels whose rays touch voxels of sphere k;
/// the spheres are far enough apart that these ray supports are disjoint.
SyntheticScene make_synthetic(const SyntheticOptions& options);

/// Pixels of `cam` whose ray samples touch any voxel with `support` set.
Image ray_support_mask(const VoxelField& field, const Camera& cam, const RenderSettings& settings,
                       const std::vector<bool>& support);

enum class PathKind { kArc, kKeyframes };

struct PathSpec {
  PathKind kind = PathKind::kArc;
  int frames = 0;  // 0: 120 forward-facing, 200 for 360 scenes
  // Arc: cameras at `radius` around `target`, sweeping [start, end] degrees
  // of azimuth at fixed `height`.
  Eigen::Vector3d target = Eigen::Vector3d::Zero();
  double radius = 3.0;
  double height = 0.0;
  double start_deg = -30.0;
  double end_deg = 30.0;
  double fov_y_deg = 40.0;
  int width = 32;
  int height_px = 32;
  // Keyframes: positions interpolate linearly, rotations by slerp.
  std::vector<Camera> keyframes;
};

int default_frame_count(SceneKind kind);
std::vector<Camera> path_cameras(const PathSpec& spec, SceneKind kind);

/// Renders every path pose to out_dir/frame_0000.png, ... and returns the
/// frame paths.
std::vector<std::filesystem::path> render_path(const VoxelField& field, const PathSpec& spec, SceneKind kind,
                                               const RenderSettings& settings,
                                               const std::filesystem::path& out_dir);

/// Provenance of one CLI run, written before any work starts.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string version;
  std::string started_at;  // ISO-8601 UTC
  std::filesystem::path run_dir;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const;
  void write() const;  // run_dir/manifest.json
};

std::string library_version();

}  // namespace pstyle
