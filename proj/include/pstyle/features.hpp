// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pstyle/image.hpp"
#include "pstyle/nn.hpp"

namespace pstyle {

/// One of the five convolutional feature blocks. Block l_k downsamples its
/// input by 2^(k-1).
enum class Block : int { kL1 = 1, kL2 = 2, kL3 = 3, kL4 = 4, kL5 = 5 };

constexpr std::array<Block, 5> kAllBlocks = {Block::kL1, Block::kL2, Block::kL3, Block::kL4,
                                             Block::kL5};

inline int block_number(Block b) { return static_cast<int>(b); }
inline int downsample_factor(Block b) { return 1 << (block_number(b) - 1); }

/// Parses "l1".."l5" (also "conv1".."conv5"). Throws ConfigError otherwise.
Block parse_block(const std::string& name);
std::string to_string(Block b);

using BlockSet = std::set<Block>;
using FeatureMap = Image;
using FeatureSet = std::map<Block, FeatureMap>;

enum class FeatureBackend { kPretrained, kDeterministic };

/// Content-block selection. The pretrained literature default is mid-depth.
struct FeatureConfig {
  Block content_block = Block::kL3;
};

/// Parses a block id from configuration; throws ConfigError when invalid.
FeatureConfig make_feature_config(const std::string& content_block);
Block content_block(const FeatureConfig& config = {});

/// Record of one extract() call, kept when an audit is attached.
struct ExtractionRecord {
  BlockSet blocks;
  int height = 0;
  int width = 0;
  std::uint64_t image_hash = 0;
};

/// Thread-safe log of extraction calls. Tests attach one to confirm which
/// blocks (and which images) an objective actually touched.
class ExtractionAudit {
 public:
  void record(ExtractionRecord rec);
  std::vector<ExtractionRecord> records() const;
  /// Union of all blocks requested so far.
  BlockSet blocks_touched() const;
  bool touched_image(std::uint64_t hash) const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::vector<ExtractionRecord> records_;
};

/// Reverse-pass state of one extraction.
struct FeatureTape {
  nn::Tape net;
  int height = 0;
  int width = 0;
};

/// Multi-block convolutional feature extractor F_l.
///
/// The deterministic backend is five conv(3x3) + ReLU stages with average
/// pooling in between, channel widths 16-16-32-32-32, zero biases, and
/// weights drawn once from a fixed seed; it consumes raw [0, 1] pixels. The
/// pretrained backend loads a PSNN weight file (for example an exported
/// VGG-16 with max pooling) and applies its input normalization.
///
/// Immutable after construction apart from the optional audit sink.
class FeatureExtractor {
 public:
  static FeatureExtractor deterministic();
  static FeatureExtractor from_network(nn::Network net, std::string name);
  static FeatureExtractor from_weights(const std::filesystem::path& path);
  /// Pretrained weights from `path` when given, else from $PSTYLE_FEATURE_WEIGHTS;
  /// falls back to the deterministic backend with a logged warning.
  static FeatureExtractor from_environment(const std::optional<std::filesystem::path>& path = {});

  FeatureBackend backend() const { return backend_; }
  const std::string& name() const { return name_; }
  const nn::Network& network() const { return *net_; }

  /// Smallest input extent accepted when `deepest` is the deepest block.
  static int min_extent(Block deepest) { return downsample_factor(deepest); }

  /// One feature map per requested block. Throws SizingError when the image
  /// is too small for the deepest requested block.
  FeatureSet extract(const Image& image, const BlockSet& blocks, FeatureTape* tape = nullptr) const;
  std::vector<FeatureSet> extract_batch(const std::vector<Image>& images, const BlockSet& blocks) const;

  /// Vector-Jacobian product: gradient with respect to the input image given
  /// gradients on (a subset of) the extracted blocks.
  Image backward(const FeatureTape& tape, const FeatureSet& grads) const;

  void attach_audit(std::shared_ptr<ExtractionAudit> audit) { audit_ = std::move(audit); }

 private:
  FeatureExtractor(FeatureBackend backend, std::shared_ptr<const nn::Network> net, std::string name);

  FeatureBackend backend_;
  std::shared_ptr<const nn::Network> net_;
  std::string name_;
  std::shared_ptr<ExtractionAudit> audit_;
};

}  // namespace pstyle
