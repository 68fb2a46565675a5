// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/camera.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "pstyle/error.hpp"

namespace pstyle {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

void Camera::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw ValidationError("camera focal lengths must be positive (fx=" + std::to_string(fx) +
                          ", fy=" + std::to_string(fy) + ")");
  }
  if (width <= 0 || height <= 0) throw ValidationError("camera image size must be positive");
  const double err = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  if (!(err <= 1e-6)) {
    throw ValidationError("camera rotation is not orthonormal (max |R^T R - I| = " +
                          std::to_string(err) + ")");
  }
  if (!position.allFinite()) throw ValidationError("camera position is not finite");
}

Eigen::Matrix4d Camera::world_from_camera() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = position;
  return m;
}

Camera Camera::from_matrix(const Eigen::Matrix4d& world_from_camera, double fx, double fy,
                           double cx, double cy, int width, int height) {
  Camera cam;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  cam.width = width;
  cam.height = height;
  cam.rotation = world_from_camera.topLeftCorner<3, 3>();
  cam.position = world_from_camera.topRightCorner<3, 1>();
  return cam;
}

Eigen::Vector3d Camera::ray_direction(int x, int y) const {
  const Eigen::Vector3d d((x + 0.5 - cx) / fx, (y + 0.5 - cy) / fy, 1.0);
  return (rotation * d).normalized();
}

Camera Camera::look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up, double fov_y_degrees, int width, int height) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-12) throw ValidationError("look_at: up vector parallel to view direction");
  right.normalize();
  // Image y grows downward, so camera +y is world "down".
  const Eigen::Vector3d down = forward.cross(right);
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fy = 0.5 * height / std::tan(0.5 * fov_y_degrees * std::numbers::pi / 180.0);
  cam.fx = cam.fy;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = down;
  cam.rotation.col(2) = forward;
  cam.position = eye;
  return cam;
}

void RenderSettings::validate() const {
  if (samples_per_ray < 2) {
    throw ValidationError("samples_per_ray must be >= 2, got " + std::to_string(samples_per_ray));
  }
  if (!(near > 0.0) || !(far > near)) {
    throw ValidationError("render range requires 0 < near < far (near=" + std::to_string(near) +
                          ", far=" + std::to_string(far) + ")");
  }
  for (int c = 0; c < 3; ++c) {
    if (!(background[c] >= 0.0 && background[c] <= 1.0)) {
      throw ValidationError("background color must lie in [0, 1]");
    }
  }
}

double RenderSettings::step() const {
  return jitter ? (far - near) / samples_per_ray : (far - near) / (samples_per_ray - 1);
}

double RenderSettings::sample_distance(int i, int x, int y) const {
  if (!jitter) return near + i * step();
  const std::uint64_t key = jitter_seed ^ (static_cast<std::uint64_t>(y) << 32) ^
                            static_cast<std::uint64_t>(static_cast<std::uint32_t>(x));
  const double u = static_cast<double>(splitmix64(key) >> 11) * 0x1.0p-53;
  return near + (i + u) * step();
}

}  // namespace pstyle
