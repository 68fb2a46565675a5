// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/depthnet.hpp"

#include <algorithm>
#include <cstdlib>

#include <spdlog/spdlog.h>

#include "pstyle/color.hpp"
#include "pstyle/error.hpp"

namespace pstyle {
namespace {

constexpr double kBinomial[3] = {0.25, 0.5, 0.25};
constexpr double kFlatRange = 1e-12;

Image smooth_replicate(const Image& plane) {
  const int h = plane.height();
  const int w = plane.width();
  Image out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int dy = -1; dy <= 1; ++dy) {
        const int sy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = std::clamp(x + dx, 0, w - 1);
          acc += kBinomial[dy + 1] * kBinomial[dx + 1] * plane.at(sy, sx, 0);
        }
      }
      out.at(y, x, 0) = acc;
    }
  }
  return out;
}

Image smooth_replicate_backward(const Image& grad) {
  const int h = grad.height();
  const int w = grad.width();
  Image out(h, w, 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double g = grad.at(y, x, 0);
      for (int dy = -1; dy <= 1; ++dy) {
        const int sy = std::clamp(y + dy, 0, h - 1);
        for (int dx = -1; dx <= 1; ++dx) {
          const int sx = std::clamp(x + dx, 0, w - 1);
          out.at(sy, sx, 0) += kBinomial[dy + 1] * kBinomial[dx + 1] * g;
        }
      }
    }
  }
  return out;
}

struct Range {
  std::size_t argmin = 0;
  std::size_t argmax = 0;
  double min = 0.0;
  double max = 0.0;
};

Range range_of(const Image& plane) {
  Range r;
  const auto data = plane.data();
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  r.argmin = static_cast<std::size_t>(lo - data.begin());
  r.argmax = static_cast<std::size_t>(hi - data.begin());
  r.min = *lo;
  r.max = *hi;
  return r;
}

}  // namespace

DepthEstimator::DepthEstimator(DepthBackend backend, std::shared_ptr<const nn::Network> net,
                               std::string name, DepthOptions options)
    : backend_(backend), net_(std::move(net)), name_(std::move(name)), options_(options) {}

DepthEstimator DepthEstimator::stub(DepthOptions options) {
  return DepthEstimator(DepthBackend::kLuminanceStub, nullptr, "luminance-gradient-stub", options);
}

DepthEstimator DepthEstimator::from_network(nn::Network net, std::string name, DepthOptions options) {
  net.validate();
  for (const nn::Stage& s : net.stages) {
    if (s.pool != nn::Pool::kNone) throw ConfigError("depth network must not pool (output must match input size)");
  }
  if (net.input_channels() != 3) throw ConfigError("depth network must take RGB input");
  if (net.stages.back().layers.back().out_channels != 1) {
    throw ConfigError("depth network must end in a single output channel");
  }
  return DepthEstimator(DepthBackend::kPretrained, std::make_shared<const nn::Network>(std::move(net)),
                        std::move(name), options);
}

DepthEstimator DepthEstimator::from_weights(const std::filesystem::path& path, DepthOptions options) {
  return from_network(nn::load_network(path), "pretrained:" + path.filename().string(), options);
}

DepthEstimator DepthEstimator::from_environment(const std::optional<std::filesystem::path>& path,
                                                DepthOptions options) {
  std::optional<std::filesystem::path> source = path;
  if (!source) {
    if (const char* env = std::getenv("PSTYLE_DEPTH_WEIGHTS"); env && *env) source = env;
  }
  if (!source || !std::filesystem::exists(*source)) {
    spdlog::warn("depth weights {}; using the luminance stub estimator",
                 source ? "'" + source->string() + "' not found" : std::string("not configured"));
    return stub(options);
  }
  return from_weights(*source, options);
}

Image DepthEstimator::raw(const Image& rgb, nn::Tape* tape) const {
  if (rgb.channels() != 3) throw ValidationError("depth estimation expects RGB input, got " + shape_string(rgb));
  if (backend_ == DepthBackend::kLuminanceStub) {
    const Image lum = luminance_triplicate(rgb);
    Image inv(rgb.height(), rgb.width(), 1);
    for (int y = 0; y < rgb.height(); ++y) {
      for (int x = 0; x < rgb.width(); ++x) inv.at(y, x, 0) = 1.0 - lum.at(y, x, 0);
    }
    return smooth_replicate(inv);
  }
  std::vector<Image> outs = nn::forward(*net_, rgb, static_cast<int>(net_->stages.size()) - 1, tape);
  return std::move(outs.back());
}

Image DepthEstimator::raw_backward(const Image& rgb, const nn::Tape& tape, const Image& grad) const {
  if (backend_ == DepthBackend::kLuminanceStub) {
    const Image g_inv = smooth_replicate_backward(grad);
    Image g_trip(rgb.height(), rgb.width(), 3);
    for (int y = 0; y < rgb.height(); ++y) {
      for (int x = 0; x < rgb.width(); ++x) {
        // d(1 - Y)/dY = -1; route the scalar through one channel of the triplicate.
        g_trip.at(y, x, 0) = -g_inv.at(y, x, 0);
      }
    }
    return luminance_triplicate_backward(g_trip);
  }
  std::vector<Image> stage_grads(net_->stages.size());
  stage_grads.back() = grad;
  return nn::backward(*net_, tape, stage_grads);
}

Image DepthEstimator::estimate(const Image& rgb) const {
  Image map = raw(rgb, nullptr);
  if (!options_.normalize) return map;
  const Range r = range_of(map);
  const double span = r.max - r.min;
  if (!(span > kFlatRange)) {
    map.fill(0.0);
    return map;
  }
  for (double& v : map.data()) v = (v - r.min) / span;
  return map;
}

Image DepthEstimator::depth_grad(const Image& rgb, const Image& upstream) const {
  if (upstream.height() != rgb.height() || upstream.width() != rgb.width() || upstream.channels() != 1) {
    throw ValidationError("depth upstream gradient " + shape_string(upstream) + " does not match input " +
                          shape_string(rgb));
  }
  nn::Tape tape;
  const Image map = raw(rgb, backend_ == DepthBackend::kPretrained ? &tape : nullptr);
  Image g_raw = upstream;
  if (options_.normalize) {
    const Range r = range_of(map);
    const double span = r.max - r.min;
    if (!(span > kFlatRange)) {
      return Image(rgb.height(), rgb.width(), 3);
    }
    // n_i = (s_i - min) / span: direct term plus the dependence of min/max on
    // their arg-elements.
    double d_min = 0.0;
    double d_max = 0.0;
    for (std::size_t i = 0; i < map.size(); ++i) {
      const double g = upstream.data()[i];
      const double rel = (map.data()[i] - r.min) / span;
      g_raw.data()[i] = g / span;
      d_min += g * (rel - 1.0) / span;
      d_max -= g * rel / span;
    }
    g_raw.data()[r.argmin] += d_min;
    g_raw.data()[r.argmax] += d_max;
  }
  return raw_backward(rgb, tape, g_raw);
}

}  // namespace pstyle
