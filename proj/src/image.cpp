// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/image.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "pstyle/error.hpp"

namespace pstyle {

Image::Image(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    throw ArgumentError("negative image dimension");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

void Image::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Image& Image::operator+=(const Image& other) {
  require_same_shape(*this, other, "image sum");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Image& Image::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

std::string shape_string(const Image& img) {
  return std::to_string(img.height()) + "x" + std::to_string(img.width()) + "x" +
         std::to_string(img.channels());
}

void require_same_shape(const Image& a, const Image& b, const std::string& what) {
  if (!a.same_shape(b)) {
    throw ValidationError(what + ": shape mismatch " + shape_string(a) + " vs " + shape_string(b));
  }
}

Image multiply_plane(const Image& img, const Image& plane) {
  if (plane.channels() != 1 || plane.height() != img.height() || plane.width() != img.width()) {
    throw ValidationError("mask plane " + shape_string(plane) + " does not match image " +
                          shape_string(img));
  }
  Image out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      const double m = plane.at(y, x, 0);
      double* px = out.pixel(y, x);
      for (int c = 0; c < img.channels(); ++c) px[c] *= m;
    }
  }
  return out;
}

Image resize_bilinear(const Image& img, int height, int width) {
  if (height <= 0 || width <= 0) throw SizingError("resize target must be positive");
  if (height == img.height() && width == img.width()) return img;
  Image out(height, width, img.channels());
  const double sy = static_cast<double>(img.height()) / height;
  const double sx = static_cast<double>(img.width()) / width;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, img.height() - 1.0);
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height() - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, img.width() - 1.0);
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width() - 1);
      const double tx = fx - x0;
      for (int c = 0; c < img.channels(); ++c) {
        const double top = (1 - tx) * img.at(y0, x0, c) + tx * img.at(y0, x1, c);
        const double bot = (1 - tx) * img.at(y1, x0, c) + tx * img.at(y1, x1, c);
        out.at(y, x, c) = (1 - ty) * top + ty * bot;
      }
    }
  }
  return out;
}

Image downsample_area(const Image& img, int factor) {
  if (factor <= 1) return img;
  const int h = (img.height() + factor - 1) / factor;
  const int w = (img.width() + factor - 1) / factor;
  Image out(h, w, img.channels());
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int y_end = std::min((y + 1) * factor, img.height());
      const int x_end = std::min((x + 1) * factor, img.width());
      const double count = static_cast<double>((y_end - y * factor) * (x_end - x * factor));
      for (int c = 0; c < img.channels(); ++c) {
        double sum = 0.0;
        for (int yy = y * factor; yy < y_end; ++yy) {
          for (int xx = x * factor; xx < x_end; ++xx) sum += img.at(yy, xx, c);
        }
        out.at(y, x, c) = sum / count;
      }
    }
  }
  return out;
}

double mean_value(const Image& img) {
  if (img.empty()) return 0.0;
  double sum = 0.0;
  for (double v : img.data()) sum += v;
  return sum / static_cast<double>(img.size());
}

double mean_abs_difference(const Image& a, const Image& b) {
  require_same_shape(a, b, "mean_abs_difference");
  if (a.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.data()[i] - b.data()[i]);
  return sum / static_cast<double>(a.size());
}

bool all_finite(const Image& img) {
  return std::all_of(img.data().begin(), img.data().end(), [](double v) { return std::isfinite(v); });
}

std::uint64_t content_hash(const Image& img) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  mix(static_cast<std::uint64_t>(img.height()));
  mix(static_cast<std::uint64_t>(img.width()));
  mix(static_cast<std::uint64_t>(img.channels()));
  for (double v : img.data()) mix(std::bit_cast<std::uint64_t>(v));
  return h;
}

Image clamp01(const Image& img) {
  Image out = img;
  for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
  return out;
}

}  // namespace pstyle
