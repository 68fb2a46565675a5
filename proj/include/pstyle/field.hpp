// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "pstyle/camera.hpp"
#include "pstyle/image.hpp"
#include "pstyle/optim.hpp"

namespace pstyle {

struct ViewSet;

struct GridShape {
  int nx = 0;
  int ny = 0;
  int nz = 0;

  std::size_t count() const { return static_cast<std::size_t>(nx) * ny * nz; }
  bool operator==(const GridShape&) const = default;
};

/// Dense voxel radiance field with view-independent color.
///
/// Voxel (i, j, k) is centered at bbox_min + (i + 0.5, j + 0.5, k + 0.5) *
/// voxel_size. Density is stored directly (non-negative, per world unit);
/// colors are stored as unbounded logits and squashed with the logistic
/// function after trilinear interpolation.
struct VoxelField {
  GridShape shape;
  Eigen::Vector3d bbox_min = Eigen::Vector3d::Constant(-1.0);
  Eigen::Vector3d bbox_max = Eigen::Vector3d::Constant(1.0);
  std::vector<float> density;  // shape.count()
  std::vector<float> color;    // 3 * shape.count(), voxel-major
  bool density_frozen = false;

  VoxelField() = default;
  VoxelField(GridShape shape, const Eigen::Vector3d& bbox_min, const Eigen::Vector3d& bbox_max);

  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * shape.ny + j) * shape.nx + i;
  }
  Eigen::Vector3d voxel_size() const;
  Eigen::Vector3d voxel_center(int i, int j, int k) const;

  /// Throws ValidationError on size mismatches, inverted bounds, negative or
  /// non-finite densities, or non-finite colors.
  void validate() const;

  bool operator==(const VoxelField&) const = default;
};

/// Trilinear interpolation weights for one world point.
struct Stencil {
  std::array<std::uint32_t, 8> voxel{};
  std::array<double, 8> weight{};
};

/// False when `p` lies outside the bounding box (zero density there).
/// Points inside the box but beyond the outermost voxel centers clamp to the
/// boundary voxels.
bool make_stencil(const VoxelField& field, const Eigen::Vector3d& p, Stencil& out);

struct FieldSample {
  double density = 0.0;
  Eigen::Vector3d rgb = Eigen::Vector3d::Constant(0.5);
};

FieldSample trilinear_sample(const VoxelField& field, const Eigen::Vector3d& p);

double sigmoid(double z);

Image render_view(const VoxelField& field, const Camera& cam, const RenderSettings& settings);

/// Parameter gradients in double precision, laid out like the field.
struct FieldGrad {
  std::vector<double> density;
  std::vector<double> color;

  FieldGrad() = default;
  explicit FieldGrad(const VoxelField& field);
  FieldGrad& operator+=(const FieldGrad& other);
  bool is_zero() const;
};

struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;  // exclusive
  int y1 = 0;  // exclusive
};

/// Re-renders the pixels of `rect` and accumulates the vector-Jacobian
/// product <grad_image, render_view(field)> into `acc`. Density gradients
/// stay zero when the field's density is frozen. Pixels are visited in
/// row-major order.
void render_backward(const VoxelField& field, const Camera& cam, const RenderSettings& settings,
                     const Image& grad_image, const PixelRect& rect, FieldGrad& acc);

/// Applies one optimizer step. Density is skipped when frozen and clamped to
/// be non-negative otherwise.
void apply_field_step(VoxelField& field, const FieldGrad& grad, Optimizer& color_opt,
                      Optimizer* density_opt, double color_lr, double density_lr);

struct FitOptions {
  int iterations = 2000;
  double lr = 0.1;          // color logits; decays 10x over the run
  double density_lr = 5.0;  // density units per step; same decay
  OptimizerKind optimizer = OptimizerKind::kAdam;
  std::uint64_t seed = 0;
};

struct FitResult {
  VoxelField field;
  std::vector<double> losses;  // per iteration, before the step
};

/// Photometric reconstruction: minimizes the mean squared pixel error of
/// render_view against the view images, one view per iteration in a seeded
/// shuffled order. Throws NumericError with diagnostics on a non-finite loss.
FitResult fit_photoreal(const VoxelField& init, const ViewSet& views, const FitOptions& options);

}  // namespace pstyle
