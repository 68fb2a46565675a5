// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "pstyle/image.hpp"

// Minimal inference-only convolution stack with a reverse pass for the
// input. Backs both the feature extractor and the learned depth backend.
// Weights are frozen; only gradients with respect to the input image are
// produced.

namespace pstyle::nn {

enum class Pool : std::uint8_t { kNone = 0, kAverage = 1, kMax = 2 };

/// 3x3 convolution, stride 1, zero padding 1.
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  bool relu = true;
  /// Laid out [ky][kx][out][in] so the inner loop runs over input channels.
  std::vector<double> weight;
  std::vector<double> bias;

  double& w(int ky, int kx, int o, int i) {
    return weight[((static_cast<std::size_t>(ky) * 3 + kx) * out_channels + o) * in_channels + i];
  }
  double w(int ky, int kx, int o, int i) const {
    return weight[((static_cast<std::size_t>(ky) * 3 + kx) * out_channels + o) * in_channels + i];
  }
};

/// Optional 2x2 pooling (ceil mode) on the stage input, then the conv layers.
/// The stage output is one feature block.
struct Stage {
  Pool pool = Pool::kNone;
  std::vector<ConvLayer> layers;
};

struct Normalization {
  bool enabled = false;
  std::array<double, 3> mean{0.0, 0.0, 0.0};
  std::array<double, 3> stddev{1.0, 1.0, 1.0};
};

struct Network {
  std::vector<Stage> stages;
  Normalization normalization;

  int input_channels() const;
  /// Throws ConfigError on inconsistent channel counts or empty stages.
  void validate() const;
};

/// Intermediate values recorded by forward() for the reverse pass.
struct Tape {
  struct StageRecord {
    int in_height = 0;
    int in_width = 0;
    std::vector<std::uint32_t> argmax;  // max pooling only
    std::vector<Image> layer_inputs;
    std::vector<Image> layer_outputs;
  };
  std::vector<StageRecord> stages;
};

/// Runs stages 0..last_stage and returns each stage output.
std::vector<Image> forward(const Network& net, const Image& input, int last_stage,
                           Tape* tape = nullptr);

/// Gradient with respect to the network input given gradients on stage
/// outputs. Entries of `stage_grads` may be empty (treated as zero); the
/// vector may be shorter than the tape.
Image backward(const Network& net, const Tape& tape, const std::vector<Image>& stage_grads);

Image conv3x3(const ConvLayer& layer, const Image& input);
Image conv3x3_backward(const ConvLayer& layer, const Image& grad_out);
Image pool2(Pool kind, const Image& input, std::vector<std::uint32_t>* argmax);
Image pool2_backward(Pool kind, const Image& grad_out, int in_height, int in_width,
                     const std::vector<std::uint32_t>& argmax);

/// Binary weight container ("PSNN" v1, little-endian). Conv weights are stored
/// in [out][in][ky][kx] order as exported by common frameworks.
Network load_network(const std::filesystem::path& path);
void save_network(const Network& net, const std::filesystem::path& path);

/// Uniform He-style initialization from a fixed-seed Mersenne Twister; the
/// raw 32-bit engine output is platform-independent, so the weights are too.
ConvLayer seeded_layer(int in_channels, int out_channels, bool relu, std::uint32_t seed,
                       double bias_scale = 0.0);

}  // namespace pstyle::nn
