// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/features.hpp"

#include <cstdlib>

#include <spdlog/spdlog.h>

#include "pstyle/error.hpp"

namespace pstyle {
namespace {

constexpr std::array<int, 5> kTestWidths = {16, 16, 32, 32, 32};
constexpr std::uint32_t kTestSeed = 0x5EED0001U;

std::shared_ptr<const nn::Network> build_test_network() {
  auto net = std::make_shared<nn::Network>();
  int in = 3;
  for (int s = 0; s < 5; ++s) {
    nn::Stage stage;
    stage.pool = s == 0 ? nn::Pool::kNone : nn::Pool::kAverage;
    stage.layers.push_back(nn::seeded_layer(in, kTestWidths[s], true, kTestSeed + s));
    net->stages.push_back(std::move(stage));
    in = kTestWidths[s];
  }
  net->validate();
  return net;
}

}  // namespace

Block parse_block(const std::string& name) {
  static const std::map<std::string, Block> kNames = {
      {"l1", Block::kL1},    {"l2", Block::kL2},    {"l3", Block::kL3},    {"l4", Block::kL4},
      {"l5", Block::kL5},    {"conv1", Block::kL1}, {"conv2", Block::kL2}, {"conv3", Block::kL3},
      {"conv4", Block::kL4}, {"conv5", Block::kL5}};
  auto it = kNames.find(name);
  if (it == kNames.end()) throw ConfigError("invalid feature block id '" + name + "' (expected l1..l5)");
  return it->second;
}

std::string to_string(Block b) { return "l" + std::to_string(block_number(b)); }

FeatureConfig make_feature_config(const std::string& block) { return FeatureConfig{parse_block(block)}; }

Block content_block(const FeatureConfig& config) { return config.content_block; }

void ExtractionAudit::record(ExtractionRecord rec) {
  std::lock_guard lock(mutex_);
  records_.push_back(std::move(rec));
}

std::vector<ExtractionRecord> ExtractionAudit::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

BlockSet ExtractionAudit::blocks_touched() const {
  std::lock_guard lock(mutex_);
  BlockSet out;
  for (const auto& r : records_) out.insert(r.blocks.begin(), r.blocks.end());
  return out;
}

bool ExtractionAudit::touched_image(std::uint64_t hash) const {
  std::lock_guard lock(mutex_);
  for (const auto& r : records_) {
    if (r.image_hash == hash) return true;
  }
  return false;
}

void ExtractionAudit::clear() {
  std::lock_guard lock(mutex_);
  records_.clear();
}

FeatureExtractor::FeatureExtractor(FeatureBackend backend, std::shared_ptr<const nn::Network> net,
                                   std::string name)
    : backend_(backend), net_(std::move(net)), name_(std::move(name)) {}

FeatureExtractor FeatureExtractor::deterministic() {
  static const std::shared_ptr<const nn::Network> net = build_test_network();
  return FeatureExtractor(FeatureBackend::kDeterministic, net, "deterministic-test");
}

FeatureExtractor FeatureExtractor::from_network(nn::Network net, std::string name) {
  net.validate();
  if (net.stages.size() < 5) {
    throw ConfigError("feature network needs 5 stages (one per block), got " +
                      std::to_string(net.stages.size()));
  }
  if (net.input_channels() != 3) throw ConfigError("feature network must take RGB input");
  return FeatureExtractor(FeatureBackend::kPretrained,
                          std::make_shared<const nn::Network>(std::move(net)), std::move(name));
}

FeatureExtractor FeatureExtractor::from_weights(const std::filesystem::path& path) {
  return from_network(nn::load_network(path), "pretrained:" + path.filename().string());
}

FeatureExtractor FeatureExtractor::from_environment(const std::optional<std::filesystem::path>& path) {
  std::optional<std::filesystem::path> source = path;
  if (!source) {
    if (const char* env = std::getenv("PSTYLE_FEATURE_WEIGHTS"); env && *env) source = env;
  }
  if (!source) {
    spdlog::warn("no feature weights configured; using the deterministic test backbone");
    return deterministic();
  }
  if (!std::filesystem::exists(*source)) {
    spdlog::warn("feature weights '{}' not found; using the deterministic test backbone",
                 source->string());
    return deterministic();
  }
  return from_weights(*source);
}

FeatureSet FeatureExtractor::extract(const Image& image, const BlockSet& blocks, FeatureTape* tape) const {
  if (blocks.empty()) return {};
  if (image.channels() != 3) {
    throw ValidationError("feature extraction expects RGB input, got " + shape_string(image));
  }
  const Block deepest = *blocks.rbegin();
  const int min = min_extent(deepest);
  if (image.height() < min || image.width() < min) {
    throw SizingError("image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                      " is too small for block " + to_string(deepest) + " (needs at least " +
                      std::to_string(min) + "x" + std::to_string(min) + ")");
  }
  if (audit_) audit_->record({blocks, image.height(), image.width(), content_hash(image)});

  std::vector<Image> outputs =
      nn::forward(*net_, image, block_number(deepest) - 1, tape ? &tape->net : nullptr);
  if (tape) {
    tape->height = image.height();
    tape->width = image.width();
  }
  FeatureSet out;
  for (Block b : blocks) out.emplace(b, std::move(outputs[block_number(b) - 1]));
  return out;
}

std::vector<FeatureSet> FeatureExtractor::extract_batch(const std::vector<Image>& images,
                                                        const BlockSet& blocks) const {
  std::vector<FeatureSet> out;
  out.reserve(images.size());
  for (const Image& img : images) out.push_back(extract(img, blocks));
  return out;
}

Image FeatureExtractor::backward(const FeatureTape& tape, const FeatureSet& grads) const {
  std::vector<Image> stage_grads(tape.net.stages.size());
  for (const auto& [block, g] : grads) {
    const std::size_t s = static_cast<std::size_t>(block_number(block) - 1);
    if (s >= stage_grads.size()) {
      throw ArgumentError("gradient for block " + to_string(block) + " that was not extracted");
    }
    stage_grads[s] = g;
  }
  Image grad = nn::backward(*net_, tape.net, stage_grads);
  if (grad.height() != tape.height || grad.width() != tape.width) {
    throw ArgumentError("feature backward produced a mis-sized gradient");
  }
  return grad;
}

}  // namespace pstyle
