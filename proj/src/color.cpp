// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/color.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <spdlog/spdlog.h>

#include "pstyle/error.hpp"

namespace pstyle {
namespace {

void require_rgb(const Image& img, const char* what) {
  if (img.channels() != 3) throw ValidationError(std::string(what) + " expects 3 channels, got " + shape_string(img));
}

Image apply_matrix(const Image& in, const Eigen::Matrix3d& m) {
  Image out(in.height(), in.width(), 3);
  for (int y = 0; y < in.height(); ++y) {
    for (int x = 0; x < in.width(); ++x) {
      const double* s = in.pixel(y, x);
      double* d = out.pixel(y, x);
      for (int r = 0; r < 3; ++r) d[r] = m(r, 0) * s[0] + m(r, 1) * s[1] + m(r, 2) * s[2];
    }
  }
  return out;
}

// Symmetric square root (power = 0.5) or inverse square root (power = -0.5).
Eigen::Matrix3d symmetric_power(const Eigen::Matrix3d& m, double power) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(0.5 * (m + m.transpose()));
  Eigen::Vector3d ev = es.eigenvalues().cwiseMax(0.0);
  for (int i = 0; i < 3; ++i) ev[i] = ev[i] > 0.0 ? std::pow(ev[i], power) : 0.0;
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

const Eigen::Matrix3d& rgb_to_yiq_matrix() {
  static const Eigen::Matrix3d m = [] {
    Eigen::Matrix3d r;
    r << 0.299, 0.587, 0.114,
         0.595716, -0.274453, -0.321263,
         0.211456, -0.522591, 0.311135;
    return r;
  }();
  return m;
}

const Eigen::Matrix3d& yiq_to_rgb_matrix() {
  static const Eigen::Matrix3d m = rgb_to_yiq_matrix().inverse();
  return m;
}

YiqImage rgb_to_yiq(const Image& rgb) {
  require_rgb(rgb, "rgb_to_yiq");
  return YiqImage{apply_matrix(rgb, rgb_to_yiq_matrix())};
}

Image yiq_to_rgb(const YiqImage& yiq) {
  require_rgb(yiq.planes, "yiq_to_rgb");
  return apply_matrix(yiq.planes, yiq_to_rgb_matrix());
}

Image luminance_triplicate(const Image& rgb) {
  require_rgb(rgb, "luminance_triplicate");
  const Eigen::Matrix3d& m = rgb_to_yiq_matrix();
  Image out(rgb.height(), rgb.width(), 3);
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const double* s = rgb.pixel(y, x);
      const double lum = m(0, 0) * s[0] + m(0, 1) * s[1] + m(0, 2) * s[2];
      double* d = out.pixel(y, x);
      d[0] = d[1] = d[2] = lum;
    }
  }
  return out;
}

Image luminance_triplicate_backward(const Image& grad_out) {
  require_rgb(grad_out, "luminance_triplicate_backward");
  const Eigen::Matrix3d& m = rgb_to_yiq_matrix();
  Image out(grad_out.height(), grad_out.width(), 3);
  for (int y = 0; y < grad_out.height(); ++y) {
    for (int x = 0; x < grad_out.width(); ++x) {
      const double* g = grad_out.pixel(y, x);
      const double sum = g[0] + g[1] + g[2];
      double* d = out.pixel(y, x);
      for (int c = 0; c < 3; ++c) d[c] = m(0, c) * sum;
    }
  }
  return out;
}

ColorStats color_stats(const Image& rgb) {
  require_rgb(rgb, "color_stats");
  const double n = static_cast<double>(rgb.height()) * rgb.width();
  if (n == 0) throw ValidationError("color statistics of an empty image");
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) mean += Eigen::Map<const Eigen::Vector3d>(rgb.pixel(y, x));
  }
  mean /= n;
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int y = 0; y < rgb.height(); ++y) {
    for (int x = 0; x < rgb.width(); ++x) {
      const Eigen::Vector3d d = Eigen::Map<const Eigen::Vector3d>(rgb.pixel(y, x)) - mean;
      cov += d * d.transpose();
    }
  }
  return {mean, cov / n};
}

ColorTransfer fit_color_transfer(const Image& source, const Image& target, const ColorMatchOptions& options) {
  const ColorStats s = color_stats(source);
  const ColorStats t = color_stats(target);
  ColorTransfer out;
  out.source_mean = s.mean;
  out.target_mean = t.mean;
  if (options.mode == ColorMatchMode::kFull) {
    Eigen::Matrix3d cov_s = s.covariance;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov_s);
    if (es.eigenvalues().minCoeff() < options.epsilon) {
      spdlog::warn("source color covariance is near-singular (min eigenvalue {:.3g}); adding {:.1g} I",
                   es.eigenvalues().minCoeff(), options.epsilon);
      cov_s += options.epsilon * Eigen::Matrix3d::Identity();
    }
    out.a = symmetric_power(t.covariance, 0.5) * symmetric_power(cov_s, -0.5);
  }
  return out;
}

Image histogram_match_linear(const Image& source, const Image& target, const ColorMatchOptions& options) {
  const ColorTransfer map = fit_color_transfer(source, target, options);
  Image out(source.height(), source.width(), 3);
  for (int y = 0; y < source.height(); ++y) {
    for (int x = 0; x < source.width(); ++x) {
      const Eigen::Vector3d q = map.apply(Eigen::Map<const Eigen::Vector3d>(source.pixel(y, x)));
      double* d = out.pixel(y, x);
      for (int c = 0; c < 3; ++c) d[c] = options.clamp ? std::clamp(q[c], 0.0, 1.0) : q[c];
    }
  }
  return out;
}

std::vector<Image> recolor(const std::vector<Image>& renders, const Image& palette_source, bool enabled,
                           const ColorMatchOptions& options) {
  if (!enabled) return renders;
  std::vector<Image> out;
  out.reserve(renders.size());
  for (const Image& r : renders) out.push_back(histogram_match_linear(r, palette_source, options));
  return out;
}

}  // namespace pstyle
