// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/stylize.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <spdlog/spdlog.h>

#include "pstyle/color.hpp"
#include "pstyle/dataio.hpp"
#include "pstyle/error.hpp"
#include "pstyle/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pstyle {
namespace {

LossBreakdown& operator+=(LossBreakdown& a, const LossBreakdown& b) {
  a.style += b.style;
  a.content += b.content;
  a.tv += b.tv;
  a.depth += b.depth;
  a.weighted_style += b.weighted_style;
  a.weighted_content += b.weighted_content;
  a.weighted_tv += b.weighted_tv;
  a.weighted_depth += b.weighted_depth;
  a.total += b.total;
  a.has_depth = a.has_depth || b.has_depth;
  return a;
}

LossBreakdown scaled(LossBreakdown a, double s) {
  a.style *= s;
  a.content *= s;
  a.tv *= s;
  a.depth *= s;
  a.weighted_style *= s;
  a.weighted_content *= s;
  a.weighted_tv *= s;
  a.weighted_depth *= s;
  a.total *= s;
  return a;
}

json breakdown_json(const LossBreakdown& b) {
  return {{"style", b.style},
          {"content", b.content},
          {"tv", b.tv},
          {"depth", b.has_depth ? json(b.depth) : json(nullptr)},
          {"weighted_style", b.weighted_style},
          {"weighted_content", b.weighted_content},
          {"weighted_tv", b.weighted_tv},
          {"weighted_depth", b.weighted_depth},
          {"total", b.total}};
}

std::string view_name(const ViewSet& views, std::size_t v) {
  return v < views.names.size() ? views.names[v] : "view " + std::to_string(v);
}

// The objectives of one run and the per-view loss they define.
class Plan {
 public:
  Plan(const StylizeConfig& cfg, const ViewSet& views, const StylizeBackends& backends)
      : cfg_(cfg), views_(views) {
    const DepthEstimator* depth = nullptr;
    if (cfg.depth) {
      if (backends.depth == nullptr) throw ConfigError("depth control needs a depth estimator");
      depth = backends.depth;
    }
    if (cfg.spatial) {
      for (const StyleSpec& spec : cfg.specs) {
        per_spec_.push_back(
            std::make_unique<Objective>(backends.features, std::vector<StyleSpec>{spec}, cfg.weights, depth,
                                        cfg.content_block));
      }
      for (const RegionBinding& b : cfg.regions) {
        if (!views.masks.count(b.region)) throw ConfigError("scene has no masks for region '" + b.region + "'");
      }
    } else {
      global_ = std::make_unique<Objective>(backends.features, cfg.specs, cfg.weights, depth, cfg.content_block);
    }
  }

  // Loss of view `v` and, when `grad` is given, the routed cached gradient.
  LossBreakdown evaluate(const Image& render, const Image& content, std::size_t v, CachedGradMap* grad) const {
    const std::string name = view_name(views_, v);
    if (!cfg_.spatial) {
      LossBreakdown br;
      if (grad) {
        *grad = compute_cached_grads(
            render, [&](const Image& x, Image* g) { return (br = global_->evaluate(x, content, g, name)).total; },
            name);
      } else {
        br = global_->evaluate(render, content, nullptr, name);
      }
      return br;
    }
    if (cfg_.regions.size() == 1) {
      // One region: the whole-view gradient is gated by the mask.
      const RegionBinding& b = cfg_.regions.front();
      const Objective& obj = *per_spec_[b.style];
      LossBreakdown br;
      if (!grad) return obj.evaluate(render, content, nullptr, name);
      const CachedGradMap full = compute_cached_grads(
          render, [&](const Image& x, Image* g) { return (br = obj.evaluate(x, content, g, name)).total; }, name);
      const Image* plane = views_.mask(b.region, v);
      *grad = plane ? apply_mask(full, RegionMask{b.region, name, *plane, {}})
                    : CachedGradMap{name, Image(render.height(), render.width(), 3)};
      return br;
    }
    // Several regions: per-region losses combined into one map.
    LossBreakdown sum;
    std::vector<std::pair<RegionMask, CachedGradMap>> pairs;
    for (const RegionBinding& b : cfg_.regions) {
      const Image* plane = views_.mask(b.region, v);
      if (!plane) continue;
      RegionMask m{b.region, name, *plane, cfg_.specs[b.style].name};
      Image g;
      sum += region_loss(render, content, m, *per_spec_[b.style], grad ? &g : nullptr);
      if (grad) {
        if (!all_finite(g)) throw NumericError("non-finite cached gradient on view " + name + " region " + b.region);
        pairs.emplace_back(std::move(m), CachedGradMap{name, std::move(g)});
      }
    }
    if (grad) {
      *grad = pairs.empty() ? CachedGradMap{name, Image(render.height(), render.width(), 3)}
                            : combine_region_grads(pairs);
    }
    return sum;
  }

  // Mean style distance over feature positions inside the bound regions.
  std::optional<double> in_mask_style(const Image& render, std::size_t v, double& weight_out) const {
    if (!cfg_.spatial) return std::nullopt;
    double sum = 0.0;
    double count = 0.0;
    for (const RegionBinding& b : cfg_.regions) {
      const Image* plane = views_.mask(b.region, v);
      if (!plane) continue;
      const Objective& obj = *per_spec_[b.style];
      const StyleSpec& spec = obj.specs().front();
      const StyleTarget& target = obj.targets().front();
      const Image input = spec.luminance_only ? luminance_triplicate(render) : render;
      const FeatureSet features = obj.extractor().extract(input, spec.active_blocks());
      double term = 0.0;
      for (const auto& [block, map] : features) {
        const Image weights = downsample_area(*plane, downsample_factor(block));
        term += spec.weight(block) * nnfm_loss_weighted(map, target.features.at(block), weights);
      }
      sum += term;
      count += 1.0;
    }
    weight_out = count;
    return sum;
  }

 private:
  const StylizeConfig& cfg_;
  const ViewSet& views_;
  std::unique_ptr<Objective> global_;
  std::vector<std::unique_ptr<Objective>> per_spec_;
};

std::vector<std::size_t> validation_views(const StylizeConfig& cfg, const ViewSet& views) {
  if (!cfg.validation_views.empty()) return cfg.validation_views;
  std::vector<std::size_t> all(views.size());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
  return all;
}

EpochRecord validate_with(const Plan& plan, const VoxelField& field, const ViewSet& views, const StylizeConfig& cfg,
                          const std::vector<Image>& content, int epoch, const std::optional<fs::path>& image_dir,
                          const std::optional<fs::path>& relative_to) {
  EpochRecord rec;
  rec.epoch = epoch;
  const std::vector<std::size_t> subset = validation_views(cfg, views);
  double mask_sum = 0.0;
  double mask_count = 0.0;
  for (std::size_t v : subset) {
    const Image render = render_view(field, views.cameras[v], views.render);
    rec.loss += plan.evaluate(render, content.at(v), v, nullptr);
    double w = 0.0;
    if (auto in_mask = plan.in_mask_style(render, v, w)) {
      mask_sum += *in_mask;
      mask_count += w;
    }
    if (image_dir) {
      std::ostringstream dir;
      dir << "epoch_" << std::setw(3) << std::setfill('0') << epoch;
      const fs::path file = *image_dir / dir.str() / view_name(views, v);
      write_png(file.extension() == ".png" ? file : fs::path(file.string() + ".png"), render);
      rec.images.push_back(relative_to ? fs::relative(file, *relative_to).generic_string() : file.string());
    }
  }
  const double inv = subset.empty() ? 0.0 : 1.0 / static_cast<double>(subset.size());
  const bool has_depth = rec.loss.has_depth;
  rec.loss = scaled(rec.loss, inv);
  rec.loss.has_depth = has_depth;
  // Recompute the total from the averaged weighted terms so the record is
  // internally consistent to rounding.
  rec.loss.total = rec.loss.weighted_style + rec.loss.weighted_content + rec.loss.weighted_tv +
                   rec.loss.weighted_depth;
  if (cfg.spatial) rec.in_mask_style = mask_count > 0.0 ? mask_sum / mask_count : 0.0;
  return rec;
}

std::vector<Image> render_all(const VoxelField& field, const ViewSet& views) {
  std::vector<Image> out;
  out.reserve(views.size());
  for (const Camera& cam : views.cameras) out.push_back(render_view(field, cam, views.render));
  return out;
}

}  // namespace

void StylizeConfig::validate(std::size_t n_views) const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1, got " + std::to_string(epochs));
  if (!(lr_end > 0.0) || !(lr_start > lr_end) || !std::isfinite(lr_start)) {
    throw ConfigError("learning rates need lr_start > lr_end > 0");
  }
  weights.validate();
  if (specs.empty()) throw ConfigError("at least one style is required");
  for (const StyleSpec& s : specs) s.validate();
  if (spatial && regions.empty()) throw ConfigError("spatial control needs at least one region binding");
  if (!spatial && !regions.empty()) throw ConfigError("region bindings given without spatial control");
  for (const RegionBinding& b : regions) {
    if (b.style >= specs.size()) {
      throw ConfigError("region '" + b.region + "' binds style " + std::to_string(b.style) + " but only " +
                        std::to_string(specs.size()) + " styles are configured");
    }
  }
  if (patch <= 0) throw ConfigError("patch size must be positive");
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  for (std::size_t v : validation_views) {
    if (v >= n_views) throw ConfigError("validation view " + std::to_string(v) + " does not exist");
  }
}

void apply_weight_presets(StylizeConfig& cfg, SceneKind kind) {
  const bool forward = kind == SceneKind::kForwardFacing;
  if (cfg.color_preserve) {
    cfg.weights.content = forward ? Presets::kBetaColorForward : Presets::kBetaColor360;
  } else if (cfg.spatial) {
    cfg.weights.content = forward ? Presets::kBetaSpatialForward : Presets::kBetaSpatial360;
  } else {
    cfg.weights.content = forward ? Presets::kBetaForward : Presets::kBeta360;
  }
  if (cfg.depth) cfg.weights.depth = Presets::kDepthWeight;
}

std::vector<std::string> resolve_controls(StylizeConfig& cfg) {
  std::vector<std::string> notices;
  if (cfg.color_preserve) {
    for (StyleSpec& s : cfg.specs) s.luminance_only = true;
  }
  if (cfg.recolor_enabled && (cfg.color_preserve || cfg.spatial || cfg.multi_style())) {
    cfg.recolor_enabled = false;
    const char* why = cfg.color_preserve ? "color preservation" : cfg.spatial ? "spatial control" : "multiple styles";
    notices.push_back(std::string("recolor disabled: incompatible with ") + why);
  }
  for (const std::string& n : notices) spdlog::info("{}", n);
  return notices;
}

double lr_at(long step, long total_steps, const StylizeConfig& cfg) {
  if (total_steps < 1) throw ArgumentError("total_steps must be >= 1");
  if (step < 0 || step > total_steps) {
    throw ArgumentError("step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + "]");
  }
  if (step == 0) return cfg.lr_start;
  if (step == total_steps) return cfg.lr_end;
  return cfg.lr_start *
         std::pow(cfg.lr_end / cfg.lr_start, static_cast<double>(step) / static_cast<double>(total_steps));
}

json to_json(const EpochRecord& rec) {
  json j = {{"epoch", rec.epoch},
            {"step", rec.step},
            {"lr", rec.lr},
            {"loss", breakdown_json(rec.loss)},
            {"train_style", rec.train_style},
            {"train_total", rec.train_total},
            {"in_mask_style", rec.in_mask_style ? json(*rec.in_mask_style) : json(nullptr)},
            {"images", rec.images}};
  return j;
}

EpochRecord validate_epoch(const VoxelField& field, const ViewSet& views, const StylizeConfig& cfg,
                           const StylizeBackends& backends, const std::vector<Image>& content, int epoch,
                           const std::optional<fs::path>& image_dir) {
  if (content.size() != views.size()) {
    throw ArgumentError("validation needs one content render per view (" + std::to_string(content.size()) +
                        " for " + std::to_string(views.size()) + " views)");
  }
  const Plan plan(cfg, views, backends);
  return validate_with(plan, field, views, cfg, content, epoch, image_dir, std::nullopt);
}

void recolor_field(VoxelField& field, const std::vector<Image>& renders, const Image& palette) {
  std::size_t pixels = 0;
  for (const Image& r : renders) pixels += static_cast<std::size_t>(r.height()) * r.width();
  if (pixels == 0) throw ArgumentError("recolor needs at least one render");
  Image stacked(static_cast<int>(pixels), 1, 3);
  std::size_t row = 0;
  for (const Image& r : renders) {
    for (int y = 0; y < r.height(); ++y) {
      for (int x = 0; x < r.width(); ++x, ++row) {
        for (int c = 0; c < 3; ++c) stacked.at(static_cast<int>(row), 0, c) = r.at(y, x, c);
      }
    }
  }
  const ColorTransfer map = fit_color_transfer(stacked, palette);
  constexpr double kLimit = 1e-4;
  for (std::size_t v = 0; v < field.shape.count(); ++v) {
    Eigen::Vector3d c;
    for (int k = 0; k < 3; ++k) c[k] = sigmoid(field.color[3 * v + k]);
    const Eigen::Vector3d q = map.apply(c);
    for (int k = 0; k < 3; ++k) {
      const double p = std::clamp(q[k], kLimit, 1.0 - kLimit);
      field.color[3 * v + k] = static_cast<float>(std::log(p / (1.0 - p)));
    }
  }
}

json config_snapshot(const StylizeConfig& cfg) {
  json specs = json::array();
  for (const StyleSpec& s : cfg.specs) {
    std::ostringstream hash;
    hash << std::hex << std::setw(16) << std::setfill('0') << content_hash(s.image);
    specs.push_back({{"name", s.name},
                     {"height", s.image.height()},
                     {"width", s.image.width()},
                     {"content_hash", hash.str()},
                     {"block_weights", s.block_weights},
                     {"block_scales", s.block_scales},
                     {"blend_weight", s.blend_weight},
                     {"luminance_only", s.luminance_only}});
  }
  json regions = json::array();
  for (const RegionBinding& b : cfg.regions) regions.push_back({{"region", b.region}, {"style", b.style}});
  return {{"epochs", cfg.epochs},
          {"lr_start", cfg.lr_start},
          {"lr_end", cfg.lr_end},
          {"weights",
           {{"style", cfg.weights.style},
            {"content", cfg.weights.content},
            {"tv", cfg.weights.tv},
            {"depth", cfg.weights.depth}}},
          {"controls",
           {{"color_preserve", cfg.color_preserve},
            {"scale", cfg.scale},
            {"spatial", cfg.spatial},
            {"depth", cfg.depth}}},
          {"specs", specs},
          {"regions", regions},
          {"recolor_enabled", cfg.recolor_enabled},
          {"optimizer", to_string(cfg.optimizer)},
          {"adam_epsilon", cfg.adam_epsilon},
          {"seed", cfg.seed},
          {"content_block", to_string(cfg.content_block)},
          {"patch", cfg.patch},
          {"validation_views", cfg.validation_views}};
}

StylizeResult run_stylization(const VoxelField& photoreal, const ViewSet& views, StylizeConfig cfg,
                              const StylizeBackends& backends) {
  views.validate();
  photoreal.validate();
  if (views.size() == 0) throw ConfigError("stylization needs at least one view");
  StylizeResult result{photoreal, {}, resolve_controls(cfg)};
  cfg.validate(views.size());
  VoxelField& field = result.field;
  if (!field.density_frozen) spdlog::info("freezing density for stylization");
  field.density_frozen = true;

  const Plan plan(cfg, views, backends);
  // Content targets are the photo-real renders, not the captured photos.
  const std::vector<Image> content = render_all(photoreal, views);

  std::optional<fs::path> image_dir;
  std::ofstream metrics;
  if (cfg.run_dir) {
    fs::create_directories(*cfg.run_dir);
    std::ofstream snap(*cfg.run_dir / "config.json");
    snap << config_snapshot(cfg).dump(2) << "\n";
    metrics.open(*cfg.run_dir / "metrics.jsonl");
    if (!snap || !metrics) throw IoError("cannot write into run directory " + cfg.run_dir->string());
    image_dir = *cfg.run_dir / "validation";
  }

  TrainState& state = result.state;
  state.rng.seed(cfg.seed);
  Optimizer optimizer(cfg.optimizer, 0.9, 0.999, cfg.adam_epsilon);
  const long total_steps = static_cast<long>(cfg.epochs) * static_cast<long>(views.size());
  const long schedule_steps = std::max(1L, total_steps - 1);
  std::vector<std::size_t> order(views.size());

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    state.epoch = epoch;
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[state.rng() % (i + 1)]);

    double train_style = 0.0;
    double train_total = 0.0;
    for (std::size_t v : order) {
      state.lr = lr_at(state.step, schedule_steps, cfg);
      const Camera& cam = views.cameras[v];
      const Image render = render_view(field, cam, views.render);
      CachedGradMap cached;
      const LossBreakdown br = plan.evaluate(render, content[v], v, &cached);
      state.history.push_back(br);
      train_style += br.style;
      train_total += br.total;
      const FieldGrad grad = deferred_backprop(field, cam, views.render, cached, cfg.patch);
      apply_field_step(field, grad, optimizer, nullptr, state.lr, 0.0);
      ++state.step;
    }

    EpochRecord rec = validate_with(plan, field, views, cfg, content, epoch, image_dir, cfg.run_dir);
    rec.step = state.step;
    rec.lr = state.lr;
    rec.train_style = train_style / static_cast<double>(views.size());
    rec.train_total = train_total / static_cast<double>(views.size());
    if (metrics.is_open()) metrics << to_json(rec).dump() << "\n";
    spdlog::info("epoch {}/{}: total {:.6g} style {:.6g} content {:.6g}", epoch, cfg.epochs, rec.loss.total,
                 rec.loss.style, rec.loss.content);
    state.records.push_back(std::move(rec));
  }

  if (cfg.recolor_enabled) recolor_field(field, render_all(field, views), cfg.specs.front().image);
  if (cfg.run_dir) save_checkpoint(field, *cfg.run_dir / "checkpoints" / "final.ckpt");
  return result;
}

}  // namespace pstyle
