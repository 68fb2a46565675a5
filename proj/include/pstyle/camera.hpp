// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace pstyle {

/// Pinhole camera. Camera space follows the computer-vision convention:
/// +z forward, +x right, +y down. Pixel (x, y) spans [x, x+1) x [y, y+1) and
/// rays pass through pixel centers.
struct Camera {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();  // world-from-camera
  Eigen::Vector3d position = Eigen::Vector3d::Zero();       // camera center, world

  /// Throws ValidationError when focal lengths are non-positive, the image is
  /// empty, or the rotation is not orthonormal to 1e-6.
  void validate() const;

  Eigen::Matrix4d world_from_camera() const;
  static Camera from_matrix(const Eigen::Matrix4d& world_from_camera, double fx, double fy,
                            double cx, double cy, int width, int height);

  /// Unit world-space direction through the center of pixel (x, y).
  Eigen::Vector3d ray_direction(int x, int y) const;

  /// Camera at `eye` looking at `target`; `up` is the world up hint.
  static Camera look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                        const Eigen::Vector3d& up, double fov_y_degrees, int width, int height);
};

struct RenderSettings {
  int samples_per_ray = 64;
  double near = 2.0;
  double far = 4.0;
  Eigen::Vector3d background = Eigen::Vector3d::Zero();
  /// Seeded per-pixel stratified offsets. Off by default so renders are
  /// byte-reproducible.
  bool jitter = false;
  std::uint64_t jitter_seed = 0;

  void validate() const;

  /// Distance between consecutive samples along a unit-length ray.
  double step() const;
  /// Distance of sample `i` along the ray for pixel (x, y).
  double sample_distance(int i, int x, int y) const;
};

}  // namespace pstyle
