// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pstyle {

/// Dense H x W x C buffer in row-major, channel-interleaved order.
///
/// Used for RGB renders, single-channel masks and depth maps, multi-channel
/// feature maps and image-shaped gradient buffers alike. Values are doubles so
/// finite-difference oracles stay meaningful; storage on disk is 8-bit.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  double* pixel(int y, int x) { return data_.data() + index(y, x, 0); }
  const double* pixel(int y, int x) const { return data_.data() + index(y, x, 0); }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  void fill(double v);
  Image& operator+=(const Image& other);
  Image& operator*=(double s);

  bool operator==(const Image& other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

std::string shape_string(const Image& img);

/// Throws ValidationError naming `what` unless both images share a shape.
void require_same_shape(const Image& a, const Image& b, const std::string& what);

/// Multiplies every channel of `img` by the single-channel `plane`.
Image multiply_plane(const Image& img, const Image& plane);

/// Bilinear resize with half-pixel centers and edge clamping.
Image resize_bilinear(const Image& img, int height, int width);

/// Area downsample by an integer factor; partial windows average the valid
/// pixels only (so output extent is ceil(extent / factor)).
Image downsample_area(const Image& img, int factor);

double mean_value(const Image& img);
double mean_abs_difference(const Image& a, const Image& b);
bool all_finite(const Image& img);

/// Order-dependent FNV-1a hash of the raw value bits; used by extraction
/// audits to identify which image was fed to an extractor.
std::uint64_t content_hash(const Image& img);

/// Copy with values clamped to [0, 1].
Image clamp01(const Image& img);

}  // namespace pstyle
