// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "pstyle/image.hpp"
#include "pstyle/nn.hpp"

namespace pstyle {

enum class DepthBackend { kLuminanceStub, kPretrained };

struct DepthOptions {
  /// Per-image min-max normalization to [0, 1]. Monocular estimators predict
  /// relative depth, so this is on by default.
  bool normalize = true;
};

/// Perceived-depth estimator phi_1 producing an H x W x 1 map.
///
/// The stub backend computes 1 - Y (NTSC luminance), smooths it with a fixed
/// 3x3 binomial kernel using edge-replicated borders, then normalizes. The
/// pretrained backend runs a pooling-free PSNN conv stack whose last layer
/// has a single output channel.
class DepthEstimator {
 public:
  static DepthEstimator stub(DepthOptions options = {});
  static DepthEstimator from_network(nn::Network net, std::string name, DepthOptions options = {});
  static DepthEstimator from_weights(const std::filesystem::path& path, DepthOptions options = {});
  /// Weights from `path` or $PSTYLE_DEPTH_WEIGHTS; downgrades to the stub with
  /// a logged warning when none are available.
  static DepthEstimator from_environment(const std::optional<std::filesystem::path>& path = {},
                                         DepthOptions options = {});

  DepthBackend backend() const { return backend_; }
  const std::string& name() const { return name_; }
  const DepthOptions& options() const { return options_; }

  Image estimate(const Image& rgb) const;

  /// Vector-Jacobian product of estimate() at `rgb`.
  Image depth_grad(const Image& rgb, const Image& upstream) const;

 private:
  DepthEstimator(DepthBackend backend, std::shared_ptr<const nn::Network> net, std::string name,
                 DepthOptions options);

  Image raw(const Image& rgb, nn::Tape* tape) const;
  Image raw_backward(const Image& rgb, const nn::Tape& tape, const Image& grad) const;

  DepthBackend backend_;
  std::shared_ptr<const nn::Network> net_;
  std::string name_;
  DepthOptions options_;
};

}  // namespace pstyle
