// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/losses.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Core>

#include "pstyle/color.hpp"
#include "pstyle/error.hpp"

namespace pstyle {
namespace {

constexpr double kCosineEps = 1e-8;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

ConstRowMap as_matrix(const FeatureMap& f) {
  return ConstRowMap(f.data().data(), static_cast<Eigen::Index>(f.height()) * f.width(), f.channels());
}

struct Matches {
  std::vector<Eigen::Index> nearest;
  std::vector<double> distance;
  Eigen::VectorXd render_norm;
  Eigen::VectorXd style_norm;
  RowMatrix dots;
};

Matches match_features(const FeatureMap& render, const FeatureMap& style) {
  if (render.channels() != style.channels()) {
    throw ValidationError("NNFM channel mismatch: " + std::to_string(render.channels()) + " vs " +
                          std::to_string(style.channels()));
  }
  if (render.empty() || style.empty()) throw ValidationError("NNFM on an empty feature map");
  const auto u = as_matrix(render);
  const auto v = as_matrix(style);
  Matches m;
  m.render_norm = u.rowwise().norm();
  m.style_norm = v.rowwise().norm();
  m.dots = u * v.transpose();
  m.nearest.resize(u.rows());
  m.distance.resize(u.rows());
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index best_j = 0;
    for (Eigen::Index j = 0; j < v.rows(); ++j) {
      const double cos = m.dots(i, j) / (m.render_norm[i] * m.style_norm[j] + kCosineEps);
      if (cos > best) {
        best = cos;
        best_j = j;
      }
    }
    m.nearest[i] = best_j;
    m.distance[i] = 1.0 - best;
  }
  return m;
}

void check_finite(double value, const std::string& term, const std::string& view) {
  if (!std::isfinite(value)) {
    throw NumericError("non-finite " + term + " loss" + (view.empty() ? "" : " on view " + view));
  }
}

}  // namespace

BlockSet StyleSpec::active_blocks() const {
  BlockSet out;
  for (Block b : kAllBlocks) {
    if (weight(b) > 0.0) out.insert(b);
  }
  return out;
}

void StyleSpec::validate() const {
  if (image.empty() || image.channels() != 3) {
    throw ConfigError("style '" + name + "' needs an RGB image, got " + shape_string(image));
  }
  for (Block b : kAllBlocks) {
    if (!(weight(b) >= 0.0) || !std::isfinite(weight(b))) {
      throw ConfigError("style '" + name + "': block weight for " + to_string(b) + " must be finite and >= 0");
    }
    if (!(scale(b) >= 0.125 && scale(b) <= 8.0)) {
      throw ConfigError("style '" + name + "': block scale for " + to_string(b) + " must lie in [1/8, 8]");
    }
  }
  if (active_blocks().empty()) throw ConfigError("style '" + name + "': at least one block weight must be > 0");
  if (!(blend_weight >= 0.0) || !std::isfinite(blend_weight)) {
    throw ConfigError("style '" + name + "': blend weight must be finite and >= 0");
  }
  for (Block b : active_blocks()) {
    const int h = std::max(1, static_cast<int>(std::lround(image.height() * scale(b))));
    const int w = std::max(1, static_cast<int>(std::lround(image.width() * scale(b))));
    const int min = FeatureExtractor::min_extent(b);
    if (h < min || w < min) {
      throw SizingError("style '" + name + "' resized by " + std::to_string(scale(b)) + " to " +
                        std::to_string(h) + "x" + std::to_string(w) + " is too small for block " +
                        to_string(b) + " (needs " + std::to_string(min) + "x" + std::to_string(min) + ")");
    }
  }
}

void LossWeights::validate() const {
  for (double w : {style, content, tv, depth}) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and non-negative");
  }
}

double nnfm_loss(const FeatureMap& render, const FeatureMap& style, FeatureMap* grad) {
  const Matches m = match_features(render, style);
  const Eigen::Index rows = static_cast<Eigen::Index>(m.nearest.size());
  double sum = 0.0;
  for (double d : m.distance) sum += d;
  const double loss = sum / static_cast<double>(rows);
  if (grad) {
    *grad = Image(render.height(), render.width(), render.channels());
    const auto u = as_matrix(render);
    const auto v = as_matrix(style);
    const int c = render.channels();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Eigen::Index j = m.nearest[i];
      const double n = m.render_norm[i];
      const double s = m.style_norm[j];
      const double denom = n * s + kCosineEps;
      const double dot = m.dots(i, j);
      // d/du [u.v / (|u||v| + eps)] = v / D - (u.v) |v| u / (|u| D^2)
      const double radial = n > 0.0 ? dot * s / (n * denom * denom) : 0.0;
      double* g = grad->data().data() + i * c;
      for (int k = 0; k < c; ++k) {
        g[k] = -(v(j, k) / denom - radial * u(i, k)) / static_cast<double>(rows);
      }
    }
  }
  return loss;
}

double nnfm_loss_weighted(const FeatureMap& render, const FeatureMap& style, const Image& weights) {
  if (weights.height() != render.height() || weights.width() != render.width() || weights.channels() != 1) {
    throw ValidationError("NNFM weight plane " + shape_string(weights) + " does not match features " +
                          shape_string(render));
  }
  const Matches m = match_features(render, style);
  double sum = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < m.distance.size(); ++i) {
    sum += weights.data()[i] * m.distance[i];
    total += weights.data()[i];
  }
  return total > 0.0 ? sum / total : 0.0;
}

double content_loss(const Image& render, const Image& content, const FeatureExtractor& fx, Image* grad,
                    Block block) {
  require_same_shape(render, content, "content_loss");
  FeatureTape tape;
  const FeatureSet fr = fx.extract(render, {block}, grad ? &tape : nullptr);
  const FeatureSet fc = fx.extract(content, {block});
  const FeatureMap& a = fr.at(block);
  const FeatureMap& b = fc.at(block);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    sum += d * d;
  }
  const double n = static_cast<double>(a.size());
  if (grad) {
    FeatureMap g(a.height(), a.width(), a.channels());
    for (std::size_t i = 0; i < a.size(); ++i) g.data()[i] = 2.0 * (a.data()[i] - b.data()[i]) / n;
    *grad = fx.backward(tape, {{block, std::move(g)}});
  }
  return sum / n;
}

double tv_loss(const Image& x, Image* grad) {
  const int h = x.height();
  const int w = x.width();
  const int c = x.channels();
  const double pairs = static_cast<double>(c) * (static_cast<double>(h) * (w - 1) + static_cast<double>(h - 1) * w);
  if (!(pairs > 0.0)) throw ValidationError("tv_loss needs at least two neighbouring pixels");
  if (grad) *grad = Image(h, w, c);
  double sum = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      for (int ch = 0; ch < c; ++ch) {
        const double v = x.at(y, xx, ch);
        if (xx + 1 < w) {
          const double d = x.at(y, xx + 1, ch) - v;
          sum += d * d;
          if (grad) {
            grad->at(y, xx + 1, ch) += 2.0 * d / pairs;
            grad->at(y, xx, ch) -= 2.0 * d / pairs;
          }
        }
        if (y + 1 < h) {
          const double d = x.at(y + 1, xx, ch) - v;
          sum += d * d;
          if (grad) {
            grad->at(y + 1, xx, ch) += 2.0 * d / pairs;
            grad->at(y, xx, ch) -= 2.0 * d / pairs;
          }
        }
      }
    }
  }
  return sum / pairs;
}

Image style_input_for_block(const StyleSpec& spec, Block block) {
  const Image base = spec.luminance_only ? luminance_triplicate(spec.image) : spec.image;
  const double t = spec.scale(block);
  if (t == 1.0) return base;
  const int h = std::max(1, static_cast<int>(std::lround(base.height() * t)));
  const int w = std::max(1, static_cast<int>(std::lround(base.width() * t)));
  return resize_bilinear(base, h, w);
}

StyleTarget prepare_style_target(const StyleSpec& spec, const FeatureExtractor& fx) {
  spec.validate();
  StyleTarget target;
  // Blocks sharing a resize factor share one extraction.
  std::map<double, BlockSet> by_scale;
  for (Block b : spec.active_blocks()) by_scale[spec.scale(b)].insert(b);
  for (const auto& [scale, blocks] : by_scale) {
    const Image input = style_input_for_block(spec, *blocks.begin());
    FeatureSet f = fx.extract(input, blocks);
    for (auto& [b, map] : f) target.features.emplace(b, std::move(map));
  }
  return target;
}

double scaled_style_loss(const Image& render, const StyleSpec& spec, const FeatureExtractor& fx, Image* grad) {
  return scaled_style_loss(render, spec, prepare_style_target(spec, fx), fx, grad);
}

double scaled_style_loss(const Image& render, const StyleSpec& spec, const StyleTarget& target,
                         const FeatureExtractor& fx, Image* grad) {
  const BlockSet blocks = spec.active_blocks();
  if (blocks.empty()) throw ConfigError("style '" + spec.name + "': no active blocks");
  const Image input = spec.luminance_only ? luminance_triplicate(render) : render;
  FeatureTape tape;
  const FeatureSet features = fx.extract(input, blocks, grad ? &tape : nullptr);
  double loss = 0.0;
  FeatureSet feature_grads;
  for (Block b : blocks) {
    const double w = spec.weight(b);
    auto it = target.features.find(b);
    if (it == target.features.end()) throw ArgumentError("style target lacks block " + to_string(b));
    FeatureMap g;
    loss += w * nnfm_loss(features.at(b), it->second, grad ? &g : nullptr);
    if (grad) {
      g *= w;
      feature_grads.emplace(b, std::move(g));
    }
  }
  if (grad) {
    Image g_input = fx.backward(tape, feature_grads);
    *grad = spec.luminance_only ? luminance_triplicate_backward(g_input) : std::move(g_input);
  }
  return loss;
}

double blended_style_loss(const Image& render, const std::vector<StyleSpec>& specs, const FeatureExtractor& fx,
                          Image* grad) {
  if (specs.empty()) throw ArgumentError("blended_style_loss needs at least one style");
  double loss = 0.0;
  if (grad) *grad = Image(render.height(), render.width(), render.channels());
  for (const StyleSpec& spec : specs) {
    if (spec.blend_weight == 0.0) continue;
    Image g;
    loss += spec.blend_weight * scaled_style_loss(render, spec, fx, grad ? &g : nullptr);
    if (grad) {
      g *= spec.blend_weight;
      *grad += g;
    }
  }
  return loss;
}

double depth_loss(const Image& render, const Image& content, const DepthEstimator& depth, Image* grad,
                  const std::string& view) {
  require_same_shape(render, content, "depth_loss");
  const Image dr = depth.estimate(render);
  const Image dc = depth.estimate(content);
  if (!all_finite(dr) || !all_finite(dc)) {
    throw NumericError("depth estimator produced non-finite output" + (view.empty() ? "" : " on view " + view));
  }
  const double n = static_cast<double>(dr.size());
  double sum = 0.0;
  Image upstream(dr.height(), dr.width(), 1);
  for (std::size_t i = 0; i < dr.size(); ++i) {
    const double d = dr.data()[i] - dc.data()[i];
    sum += d * d;
    upstream.data()[i] = 2.0 * d / n;
  }
  if (grad) *grad = depth.depth_grad(render, upstream);
  return sum / n;
}

Objective::Objective(const FeatureExtractor& fx, std::vector<StyleSpec> specs, LossWeights weights,
                     const DepthEstimator* depth, Block content_block)
    : fx_(fx), specs_(std::move(specs)), weights_(weights), depth_(depth), content_block_(content_block) {
  weights_.validate();
  targets_.resize(specs_.size());
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    specs_[i].validate();
    if (specs_[i].blend_weight == 0.0) continue;
    targets_[i] = prepare_style_target(specs_[i], fx_);
  }
}

LossBreakdown Objective::evaluate(const Image& render, const Image& content, Image* grad,
                                  const std::string& view) const {
  require_same_shape(render, content, "objective");
  LossBreakdown out;
  if (grad) *grad = Image(render.height(), render.width(), render.channels());

  const bool style_grad = grad && weights_.style != 0.0;
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const StyleSpec& spec = specs_[i];
    if (spec.blend_weight == 0.0) continue;
    Image g;
    const double term = scaled_style_loss(render, spec, targets_[i], fx_, style_grad ? &g : nullptr);
    out.style += spec.blend_weight * term;
    if (style_grad) {
      g *= weights_.style * spec.blend_weight;
      *grad += g;
    }
  }
  check_finite(out.style, "style", view);

  {
    const bool want = grad && weights_.content != 0.0;
    Image g;
    out.content = content_loss(render, content, fx_, want ? &g : nullptr, content_block_);
    check_finite(out.content, "content", view);
    if (want) {
      g *= weights_.content;
      *grad += g;
    }
  }
  {
    const bool want = grad && weights_.tv != 0.0;
    Image g;
    out.tv = tv_loss(render, want ? &g : nullptr);
    check_finite(out.tv, "tv", view);
    if (want) {
      g *= weights_.tv;
      *grad += g;
    }
  }
  if (depth_) {
    out.has_depth = true;
    const bool want = grad && weights_.depth != 0.0;
    Image g;
    out.depth = depth_loss(render, content, *depth_, want ? &g : nullptr, view);
    check_finite(out.depth, "depth", view);
    if (want) {
      g *= weights_.depth;
      *grad += g;
    }
  }

  out.weighted_style = weights_.style * out.style;
  out.weighted_content = weights_.content * out.content;
  out.weighted_tv = weights_.tv * out.tv;
  out.weighted_depth = out.has_depth ? weights_.depth * out.depth : 0.0;
  out.total = out.weighted_style + out.weighted_content + out.weighted_tv + out.weighted_depth;
  return out;
}

LossBreakdown total_loss(const Image& render, const Image& content, const std::vector<StyleSpec>& specs,
                         const LossWeights& weights, const DepthEstimator* depth, const FeatureExtractor& fx,
                         Image* grad, Block content_block) {
  return Objective(fx, specs, weights, depth, content_block).evaluate(render, content, grad);
}

}  // namespace pstyle
