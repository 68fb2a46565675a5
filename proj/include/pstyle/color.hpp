// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <Eigen/Core>

#include "pstyle/image.hpp"

namespace pstyle {

/// NTSC YIQ planes stored as channels (Y, I, Q) of one image.
struct YiqImage {
  Image planes;

  int height() const { return planes.height(); }
  int width() const { return planes.width(); }
};

/// RGB -> YIQ rows: (0.299, 0.587, 0.114), (0.595716, -0.274453, -0.321263),
/// (0.211456, -0.522591, 0.311135).
const Eigen::Matrix3d& rgb_to_yiq_matrix();
const Eigen::Matrix3d& yiq_to_rgb_matrix();

YiqImage rgb_to_yiq(const Image& rgb);
Image yiq_to_rgb(const YiqImage& yiq);

/// Y replicated into three channels, ready for an RGB feature extractor.
Image luminance_triplicate(const Image& rgb);
/// Gradient of luminance_triplicate with respect to its RGB input.
Image luminance_triplicate_backward(const Image& grad_out);

enum class ColorMatchMode { kFull, kMeanOnly };

struct ColorMatchOptions {
  ColorMatchMode mode = ColorMatchMode::kFull;
  double epsilon = 1e-5;  // ridge added to a near-singular source covariance
  bool clamp = true;      // clamp output to [0, 1]
};

/// Affine color map x' = A (x - source_mean) + target_mean.
struct ColorTransfer {
  Eigen::Matrix3d a = Eigen::Matrix3d::Identity();
  Eigen::Vector3d source_mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d target_mean = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return a * (x - source_mean) + target_mean; }
};

/// Fits the map used by histogram_match_linear from pixel statistics.
ColorTransfer fit_color_transfer(const Image& source, const Image& target, const ColorMatchOptions& options = {});

/// Linear color transfer: x' = A (x - mu_s) + mu_t with
/// A = Sigma_t^{1/2} Sigma_s^{-1/2} (symmetric roots), so the output pixel
/// mean and covariance match `target`'s. In mean-only mode A = I.
Image histogram_match_linear(const Image& source, const Image& target,
                             const ColorMatchOptions& options = {});

struct ColorStats {
  Eigen::Vector3d mean;
  Eigen::Matrix3d covariance;  // population covariance
};
ColorStats color_stats(const Image& rgb);

/// Applies histogram_match_linear(render, palette_source) to every render.
/// With `enabled` false the renders come back untouched.
std::vector<Image> recolor(const std::vector<Image>& renders, const Image& palette_source,
                           bool enabled, const ColorMatchOptions& options = {});

}  // namespace pstyle
