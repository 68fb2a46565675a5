// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pstyle/dataio.hpp"
#include "pstyle/error.hpp"
#include "pstyle/eval.hpp"
#include "pstyle/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pstyle {
namespace {

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  try {
    json doc = json::parse(in);
    if (!doc.is_object()) throw ConfigError("config file " + path + " must hold a JSON object");
    return doc;
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
}

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  if (!doc.contains(key) || doc.at(key).is_null()) return fallback;
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

std::string require_string(const json& doc, const char* key, const std::string& command) {
  const std::string v = get_or<std::string>(doc, key, "");
  if (v.empty()) throw ConfigError(command + ": '" + key + "' is required (config file or --" + key + ")");
  return v;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << v;
  return out.str();
}

// Deterministic run id: the command and a hash of the effective config.
std::string run_id_for(const std::string& command, const json& doc) {
  const std::string text = doc.dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return command + "-" + hex64(h).substr(0, 10);
}

struct RunContext {
  fs::path dir;
  RunManifest manifest;
};

RunContext start_run(const std::string& command, const json& doc, std::uint64_t seed,
                     std::vector<std::string> outputs) {
  const fs::path root = get_or<std::string>(doc, "runs_root", "runs");
  const std::string id = get_or<std::string>(doc, "run_id", run_id_for(command, doc));
  RunContext ctx;
  ctx.dir = root / id;
  fs::create_directories(ctx.dir);
  ctx.manifest.command = command;
  ctx.manifest.config = doc;
  ctx.manifest.seed = seed;
  ctx.manifest.version = library_version();
  ctx.manifest.run_dir = ctx.dir;
  ctx.manifest.outputs = std::move(outputs);
  ctx.manifest.write();
  spdlog::info("{}: run directory {}", command, ctx.dir.string());
  return ctx;
}

json path_spec_to_json(const PathSpec& p) {
  return {{"kind", p.kind == PathKind::kArc ? "arc" : "keyframes"},
          {"frames", p.frames},
          {"target", {p.target.x(), p.target.y(), p.target.z()}},
          {"radius", p.radius},
          {"height", p.height},
          {"start_deg", p.start_deg},
          {"end_deg", p.end_deg},
          {"fov_y_deg", p.fov_y_deg},
          {"width", p.width},
          {"height_px", p.height_px}};
}

PathSpec path_spec_from_json(const json& j, const SceneBundle* scene) {
  PathSpec p;
  if (scene && scene->size() > 0) {
    p.width = scene->cameras.front().width;
    p.height_px = scene->cameras.front().height;
  }
  const std::string kind = get_or<std::string>(j, "kind", "arc");
  if (kind == "keyframes") {
    p.kind = PathKind::kKeyframes;
    if (!scene) throw ConfigError("keyframe paths need a scene to take poses from");
    for (std::size_t v : get_or<std::vector<std::size_t>>(j, "views", {})) {
      if (v >= scene->size()) throw ConfigError("keyframe view " + std::to_string(v) + " does not exist");
      p.keyframes.push_back(scene->cameras[v]);
    }
  } else if (kind != "arc") {
    throw ConfigError("unknown path kind '" + kind + "' (expected arc or keyframes)");
  }
  p.frames = get_or<int>(j, "frames", 0);
  if (j.contains("target")) {
    const auto t = get_or<std::vector<double>>(j, "target", {});
    if (t.size() != 3) throw ConfigError("path target needs 3 coordinates");
    p.target = Eigen::Vector3d(t[0], t[1], t[2]);
  }
  p.radius = get_or<double>(j, "radius", p.radius);
  p.height = get_or<double>(j, "height", p.height);
  p.start_deg = get_or<double>(j, "start_deg", p.start_deg);
  p.end_deg = get_or<double>(j, "end_deg", p.end_deg);
  p.fov_y_deg = get_or<double>(j, "fov_y_deg", p.fov_y_deg);
  p.width = get_or<int>(j, "width", p.width);
  p.height_px = get_or<int>(j, "height_px", p.height_px);
  if (p.frames < 0) throw ConfigError("path frame count must be >= 0");
  return p;
}

// Evaluation / rendering path stored next to a scene, falling back to defaults.
PathSpec scene_path(const fs::path& scene_dir, const SceneBundle& scene, const json& overrides) {
  json j = json::object();
  const fs::path file = scene_dir / "path.json";
  if (fs::exists(file)) j = load_config(file.string());
  for (auto it = overrides.begin(); it != overrides.end(); ++it) j[it.key()] = it.value();
  return path_spec_from_json(j, &scene);
}

std::array<double, 5> five(const json& j, const char* key, std::array<double, 5> fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = get_or<std::vector<double>>(j, key, {});
  if (v.size() != 5) throw ConfigError(std::string("'") + key + "' needs 5 entries (l1..l5)");
  return {v[0], v[1], v[2], v[3], v[4]};
}

int make_synthetic_cmd(const json& doc) {
  SyntheticOptions o;
  o.seed = get_or<std::uint64_t>(doc, "seed", o.seed);
  o.resolution = get_or<int>(doc, "resolution", o.resolution);
  o.n_views = get_or<int>(doc, "views", o.n_views);
  o.image_size = get_or<int>(doc, "image_size", o.image_size);
  o.primitives = get_or<int>(doc, "primitives", o.primitives);
  o.kind = parse_scene_kind(get_or<std::string>(doc, "kind", "forward-facing"));
  o.fov_y_deg = get_or<double>(doc, "fov", o.fov_y_deg);
  const fs::path out = require_string(doc, "out", "make-synthetic");
  const int eval_frames = get_or<int>(doc, "eval_frames", 0);

  start_run("make-synthetic", doc, o.seed, {out.string()});
  const SyntheticScene s = make_synthetic(o);
  save_scene(s.bundle, out);
  save_checkpoint(s.truth, out / "truth.ckpt");

  // Evaluation path and matching region masks for Mask-In evaluation.
  PathSpec path;
  path.frames = eval_frames;
  path.width = o.image_size;
  path.height_px = o.image_size;
  path.fov_y_deg = o.fov_y_deg;
  path.height = o.kind == SceneKind::kForwardFacing ? 0.35 : 2.6;
  path.radius = o.kind == SceneKind::kForwardFacing ? 2.98 : 1.5;
  path.start_deg = o.kind == SceneKind::kForwardFacing ? -25.0 : 0.0;
  path.end_deg = o.kind == SceneKind::kForwardFacing ? 25.0 : 360.0;
  {
    std::ofstream f(out / "path.json");
    f << path_spec_to_json(path).dump(2) << "\n";
  }
  const std::vector<Camera> cams = path_cameras(path, o.kind);
  for (const auto& [region, support] : s.region_support) {
    for (std::size_t f = 0; f < cams.size(); ++f) {
      std::ostringstream name;
      name << "frame_" << std::setw(4) << std::setfill('0') << f << ".png";
      write_png(out / "eval_masks" / region / name.str(),
                ray_support_mask(s.truth, cams[f], s.bundle.render, support));
    }
  }
  std::cout << "wrote synthetic scene with " << s.bundle.size() << " views to " << out.string() << "\n";
  return kExitOk;
}

constexpr double kDefaultInitDensity = 2.0;

VoxelField initial_field(int resolution, double density) {
  VoxelField f(GridShape{resolution, resolution, resolution}, Eigen::Vector3d::Constant(-1.0),
               Eigen::Vector3d::Constant(1.0));
  std::fill(f.density.begin(), f.density.end(), static_cast<float>(density));
  return f;
}

int reconstruct_cmd(const json& doc) {
  const fs::path scene_dir = require_string(doc, "scene", "reconstruct");
  FitOptions fit;
  fit.iterations = get_or<int>(doc, "iterations", fit.iterations);
  fit.lr = get_or<double>(doc, "lr", fit.lr);
  fit.density_lr = get_or<double>(doc, "density_lr", fit.density_lr);
  fit.optimizer = parse_optimizer(get_or<std::string>(doc, "optimizer", to_string(fit.optimizer)));
  fit.seed = get_or<std::uint64_t>(doc, "seed", 0);
  const int resolution = get_or<int>(doc, "resolution", 24);
  const double init_density = get_or<double>(doc, "init_density", kDefaultInitDensity);

  RunContext ctx = start_run("reconstruct", doc, fit.seed, {});
  const fs::path out = get_or<std::string>(doc, "out", (ctx.dir / "checkpoints" / "photoreal.ckpt").string());
  const SceneBundle scene = load_scene(scene_dir);
  const FitResult result = fit_photoreal(initial_field(resolution, init_density), scene, fit);
  save_checkpoint(result.field, out);
  std::cout << "final loss " << (result.losses.empty() ? 0.0 : result.losses.back()) << ", checkpoint "
            << out.string() << "\n";
  return kExitOk;
}

int stylize_cmd(const json& doc) {
  const fs::path scene_dir = require_string(doc, "scene", "stylize");
  const fs::path field_path = require_string(doc, "field", "stylize");
  const SceneBundle scene = load_scene(scene_dir);
  StylizeConfig cfg = stylize_config_from_json(doc, scene.kind);
  RunContext ctx = start_run("stylize", doc, cfg.seed,
                             {"config.json", "metrics.jsonl", "validation/", "checkpoints/final.ckpt"});
  cfg.run_dir = ctx.dir;

  const VoxelField photoreal = load_checkpoint(field_path);
  const std::string feature_weights = get_or<std::string>(doc, "feature_weights", "");
  const std::string depth_weights = get_or<std::string>(doc, "depth_weights", "");
  const FeatureExtractor fx = FeatureExtractor::from_environment(
      feature_weights.empty() ? std::nullopt : std::optional<fs::path>(feature_weights));
  std::optional<DepthEstimator> depth;
  if (cfg.depth) {
    depth = DepthEstimator::from_environment(depth_weights.empty() ? std::nullopt
                                                                   : std::optional<fs::path>(depth_weights));
  }
  const StylizeResult result = run_stylization(photoreal, scene, cfg, {fx, depth ? &*depth : nullptr});
  for (const std::string& n : result.notices) std::cout << "notice: " << n << "\n";
  std::cout << "stylized " << result.state.step << " steps; checkpoint " << (ctx.dir / "checkpoints" / "final.ckpt").string()
            << "\n";
  return kExitOk;
}

int render_cmd(const json& doc) {
  const fs::path field_path = require_string(doc, "field", "render");
  const fs::path scene_dir = require_string(doc, "scene", "render");
  const SceneBundle scene = load_scene(scene_dir);
  json overrides = doc.value("path", json::object());
  if (doc.contains("frames")) overrides["frames"] = doc.at("frames");
  const PathSpec path = scene_path(scene_dir, scene, overrides);
  RunContext ctx = start_run("render", doc, 0, {"frames/"});
  const fs::path out = get_or<std::string>(doc, "out", (ctx.dir / "frames").string());
  const VoxelField field = load_checkpoint(field_path);
  const auto frames = render_path(field, path, scene.kind, scene.render, out);
  std::cout << "wrote " << frames.size() << " frames to " << out.string() << "\n";
  return kExitOk;
}

std::vector<Image> load_frames(const fs::path& dir, std::size_t n) {
  std::vector<Image> out;
  for (std::size_t f = 0; f < n; ++f) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << f << ".png";
    const fs::path file = dir / name.str();
    if (!fs::exists(file)) throw IoError("missing mask frame " + file.string());
    Image m = read_png(file);
    if (m.channels() != 1) throw ValidationError("mask " + file.string() + " must be single-channel");
    require_binary_mask(m, m.height(), m.width(), file.string());
    out.push_back(std::move(m));
  }
  return out;
}

int evaluate_cmd(const json& doc) {
  const bool masked = get_or<bool>(doc, "masked", false);
  const std::string masks_dir = get_or<std::string>(doc, "masks", "");
  if (masked && masks_dir.empty()) {
    throw ConfigError("evaluate --masked needs a masks directory (--masks DIR holding <region>/frame_NNNN.png)");
  }
  const std::string region = get_or<std::string>(doc, "region", "");
  if (masked && region.empty()) throw ConfigError("evaluate --masked needs --region");
  const fs::path scene_dir = require_string(doc, "scene", "evaluate");
  const fs::path photoreal_path = require_string(doc, "photoreal", "evaluate");
  const fs::path stylized_path = require_string(doc, "stylized", "evaluate");
  const fs::path style_path = require_string(doc, "style", "evaluate");

  const SceneBundle scene = load_scene(scene_dir);
  json overrides = doc.value("path", json::object());
  if (doc.contains("frames")) overrides["frames"] = doc.at("frames");
  const PathSpec path = scene_path(scene_dir, scene, overrides);
  RunContext ctx = start_run("evaluate", doc, 0, {"report.jsonl"});
  const fs::path report = get_or<std::string>(doc, "report", (ctx.dir / "report.jsonl").string());

  const VoxelField photoreal = load_checkpoint(photoreal_path);
  const VoxelField stylized = load_checkpoint(stylized_path);
  const Image style = read_png(style_path);
  const std::vector<Camera> cams = path_cameras(path, scene.kind);
  std::vector<Image> xc;
  std::vector<Image> xg;
  for (const Camera& cam : cams) {
    xc.push_back(render_view(photoreal, cam, scene.render));
    xg.push_back(render_view(stylized, cam, scene.render));
  }
  const std::vector<Image> xs = replicate(style, cams.size());

  const FeatureExtractor fx = FeatureExtractor::from_environment(
      doc.contains("feature_weights") ? std::optional<fs::path>(get_or<std::string>(doc, "feature_weights", ""))
                                      : std::nullopt);
  const std::string dname = get_or<std::string>(doc, "distance", "features");
  const std::string ename = get_or<std::string>(doc, "embedder", "features");
  PerceptualDistance d = dname == "nmse" ? nmse_distance() : feature_distance(fx);
  if (dname != "nmse" && dname != "features") throw ConfigError("unknown distance '" + dname + "'");
  Embedder e = ename == "projection" ? projection_embedder() : feature_embedder(fx);
  if (ename != "projection" && ename != "features") throw ConfigError("unknown embedder '" + ename + "'");

  ReportRecord rec;
  rec.scene = scene_dir.filename().string();
  rec.style = style_path.stem().string();
  rec.config = get_or<std::string>(doc, "label", stylized_path.string());
  rec.distance_backend = d.name;
  rec.embedder_backend = e.name;
  if (masked) {
    const std::vector<Image> masks = load_frames(fs::path(masks_dir) / region, cams.size());
    rec.result = mask_in_eval(xg, xc, xs, masks, d, e);
  } else {
    rec.result = evaluate_sets(xg, xc, xs, d, e);
  }
  append_report(report, rec);
  std::cout << rec.to_json().dump() << "\n";
  return kExitOk;
}

}  // namespace

StylizeConfig stylize_config_from_json(const json& doc, SceneKind kind) {
  StylizeConfig cfg;
  for (const std::string& c : get_or<std::vector<std::string>>(doc, "controls", {})) {
    if (c == "color") {
      cfg.color_preserve = true;
    } else if (c == "scale") {
      cfg.scale = true;
    } else if (c == "spatial") {
      cfg.spatial = true;
    } else if (c == "depth") {
      cfg.depth = true;
    } else {
      throw ConfigError("unknown control '" + c + "' (expected color, scale, spatial or depth)");
    }
  }
  apply_weight_presets(cfg, kind);
  if (doc.contains("weights")) {
    const json& w = doc.at("weights");
    cfg.weights.style = get_or<double>(w, "style", cfg.weights.style);
    cfg.weights.content = get_or<double>(w, "content", cfg.weights.content);
    cfg.weights.tv = get_or<double>(w, "tv", cfg.weights.tv);
    cfg.weights.depth = get_or<double>(w, "depth", cfg.weights.depth);
  }
  cfg.epochs = get_or<int>(doc, "epochs", cfg.epochs);
  cfg.lr_start = get_or<double>(doc, "lr_start", cfg.lr_start);
  cfg.lr_end = get_or<double>(doc, "lr_end", cfg.lr_end);
  cfg.recolor_enabled = get_or<bool>(doc, "recolor", cfg.recolor_enabled);
  cfg.optimizer = parse_optimizer(get_or<std::string>(doc, "optimizer", to_string(cfg.optimizer)));
  cfg.adam_epsilon = get_or<double>(doc, "adam_epsilon", cfg.adam_epsilon);
  cfg.seed = get_or<std::uint64_t>(doc, "seed", cfg.seed);
  cfg.content_block = parse_block(get_or<std::string>(doc, "content_block", to_string(cfg.content_block)));
  cfg.patch = get_or<int>(doc, "patch", cfg.patch);
  cfg.validation_views = get_or<std::vector<std::size_t>>(doc, "validation_views", {});

  if (!doc.contains("styles") || !doc.at("styles").is_array() || doc.at("styles").empty()) {
    throw ConfigError("stylize needs at least one style (config 'styles' or --style)");
  }
  for (const json& s : doc.at("styles")) {
    StyleSpec spec;
    const std::string image = s.is_string() ? s.get<std::string>() : require_string(s, "image", "style entry");
    const json entry = s.is_string() ? json::object() : s;
    spec.image = read_png(image);
    spec.name = get_or<std::string>(entry, "name", fs::path(image).stem().string());
    spec.block_weights = five(entry, "block_weights", spec.block_weights);
    spec.block_scales = five(entry, "block_scales", spec.block_scales);
    spec.blend_weight = get_or<double>(entry, "blend_weight", spec.blend_weight);
    cfg.specs.push_back(std::move(spec));
  }
  if (doc.contains("regions")) {
    for (const json& r : doc.at("regions")) {
      RegionBinding b;
      if (r.is_string()) {
        b.region = r.get<std::string>();
      } else {
        b.region = require_string(r, "region", "region entry");
        b.style = get_or<std::size_t>(r, "style", 0);
      }
      cfg.regions.push_back(b);
    }
  }
  return cfg;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Perceptually controllable radiance-field stylization", "pstyle"};
  app.require_subcommand(1);
  std::string config_path;
  std::string runs_root;
  std::string run_id;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file; flags override its entries");
    sub->add_option("--runs-root", runs_root, "Parent of run directories (default runs)");
    sub->add_option("--run-id", run_id, "Run directory name (default: command plus config hash)");
  };

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "Generate the seeded synthetic scene");
  common(synth);
  std::optional<std::string> s_out, s_kind;
  std::optional<std::uint64_t> s_seed;
  std::optional<int> s_res, s_views, s_size, s_prims, s_eval_frames;
  synth->add_option("--out", s_out, "Scene directory to write");
  synth->add_option("--seed", s_seed);
  synth->add_option("--resolution", s_res, "Voxels per axis");
  synth->add_option("--views", s_views);
  synth->add_option("--image-size", s_size);
  synth->add_option("--primitives", s_prims, "2 or 3");
  synth->add_option("--kind", s_kind, "forward-facing or 360");
  synth->add_option("--eval-frames", s_eval_frames, "Frames of the evaluation path (0: default N)");

  // reconstruct
  auto* recon = app.add_subcommand("reconstruct", "Fit a photo-real voxel field to a scene");
  common(recon);
  std::optional<std::string> r_scene, r_out, r_opt;
  std::optional<int> r_iters, r_res;
  std::optional<double> r_lr;
  std::optional<std::uint64_t> r_seed;
  recon->add_option("--scene", r_scene);
  recon->add_option("--out", r_out, "Checkpoint path");
  recon->add_option("--iterations", r_iters);
  recon->add_option("--resolution", r_res);
  recon->add_option("--lr", r_lr);
  recon->add_option("--optimizer", r_opt, "sgd or adam");
  recon->add_option("--seed", r_seed);

  // stylize
  auto* styl = app.add_subcommand("stylize", "Stylize a photo-real field");
  common(styl);
  std::optional<std::string> t_scene, t_field, t_opt, t_content_block;
  std::vector<std::string> t_styles, t_controls, t_regions;
  std::optional<int> t_epochs;
  std::optional<std::uint64_t> t_seed;
  std::optional<double> t_alpha, t_beta, t_gamma, t_delta;
  bool t_recolor = false;
  bool t_no_recolor = false;
  styl->add_option("--scene", t_scene);
  styl->add_option("--field", t_field, "Photo-real checkpoint");
  styl->add_option("--style", t_styles, "Style image(s); replaces the config list");
  styl->add_option("--control", t_controls, "color, scale, spatial or depth (repeatable)");
  styl->add_option("--region", t_regions, "Region binding NAME or NAME=STYLE_INDEX (repeatable)");
  styl->add_option("--epochs", t_epochs);
  styl->add_option("--seed", t_seed);
  styl->add_option("--optimizer", t_opt, "sgd or adam");
  styl->add_option("--content-block", t_content_block, "l1..l5");
  styl->add_option("--style-weight", t_alpha);
  styl->add_option("--content-weight", t_beta);
  styl->add_option("--tv-weight", t_gamma);
  styl->add_option("--depth-weight", t_delta);
  styl->add_flag("--recolor", t_recolor, "Recolor the result to the style palette");
  styl->add_flag("--no-recolor", t_no_recolor);

  // render
  auto* rend = app.add_subcommand("render", "Render a novel-view path");
  common(rend);
  std::optional<std::string> n_field, n_scene, n_out;
  std::optional<int> n_frames;
  rend->add_option("--field", n_field);
  rend->add_option("--scene", n_scene, "Scene providing render settings and the path");
  rend->add_option("--out", n_out, "Frame directory");
  rend->add_option("--frames", n_frames, "Frame count (default 120 forward-facing, 200 for 360)");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "ContentDist, StyleFID and ArtFID");
  common(eval);
  std::optional<std::string> e_scene, e_photo, e_styl, e_style, e_masks, e_region, e_report, e_dist, e_emb, e_label;
  std::optional<int> e_frames;
  bool e_masked = false;
  eval->add_option("--scene", e_scene);
  eval->add_option("--photoreal", e_photo, "Photo-real checkpoint");
  eval->add_option("--stylized", e_styl, "Stylized checkpoint");
  eval->add_option("--style", e_style, "Style image");
  eval->add_flag("--masked", e_masked, "Mask-In evaluation");
  eval->add_option("--masks", e_masks, "Directory of <region>/frame_NNNN.png masks");
  eval->add_option("--region", e_region);
  eval->add_option("--frames", e_frames);
  eval->add_option("--report", e_report, "JSONL report to append to");
  eval->add_option("--distance", e_dist, "features or nmse");
  eval->add_option("--embedder", e_emb, "features or projection");
  eval->add_option("--label", e_label, "Config label recorded in the report");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  auto set = [](json& doc, const char* key, const auto& opt) {
    if (opt) doc[key] = *opt;
  };
  try {
    json doc = load_config(config_path);
    if (!runs_root.empty()) doc["runs_root"] = runs_root;
    if (!run_id.empty()) doc["run_id"] = run_id;
    if (synth->parsed()) {
      set(doc, "out", s_out);
      set(doc, "seed", s_seed);
      set(doc, "resolution", s_res);
      set(doc, "views", s_views);
      set(doc, "image_size", s_size);
      set(doc, "primitives", s_prims);
      set(doc, "kind", s_kind);
      set(doc, "eval_frames", s_eval_frames);
      return make_synthetic_cmd(doc);
    }
    if (recon->parsed()) {
      set(doc, "scene", r_scene);
      set(doc, "out", r_out);
      set(doc, "iterations", r_iters);
      set(doc, "resolution", r_res);
      set(doc, "lr", r_lr);
      set(doc, "optimizer", r_opt);
      set(doc, "seed", r_seed);
      return reconstruct_cmd(doc);
    }
    if (styl->parsed()) {
      set(doc, "scene", t_scene);
      set(doc, "field", t_field);
      set(doc, "epochs", t_epochs);
      set(doc, "seed", t_seed);
      set(doc, "optimizer", t_opt);
      set(doc, "content_block", t_content_block);
      if (!t_styles.empty()) doc["styles"] = t_styles;
      if (!t_controls.empty()) {
        json controls = doc.value("controls", json::array());
        for (const auto& c : t_controls) controls.push_back(c);
        doc["controls"] = controls;
      }
      if (!t_regions.empty()) {
        json regions = json::array();
        for (const auto& r : t_regions) {
          const auto eq = r.find('=');
          if (eq == std::string::npos) {
            regions.push_back({{"region", r}, {"style", 0}});
          } else {
            try {
              regions.push_back({{"region", r.substr(0, eq)}, {"style", std::stoul(r.substr(eq + 1))}});
            } catch (const std::exception&) {
              throw ConfigError("bad --region '" + r + "' (expected NAME or NAME=INDEX)");
            }
          }
        }
        doc["regions"] = regions;
      }
      if (t_alpha) doc["weights"]["style"] = *t_alpha;
      if (t_beta) doc["weights"]["content"] = *t_beta;
      if (t_gamma) doc["weights"]["tv"] = *t_gamma;
      if (t_delta) doc["weights"]["depth"] = *t_delta;
      if (t_recolor && t_no_recolor) throw ConfigError("--recolor and --no-recolor are mutually exclusive");
      if (t_recolor) doc["recolor"] = true;
      if (t_no_recolor) doc["recolor"] = false;
      return stylize_cmd(doc);
    }
    if (rend->parsed()) {
      set(doc, "field", n_field);
      set(doc, "scene", n_scene);
      set(doc, "out", n_out);
      set(doc, "frames", n_frames);
      return render_cmd(doc);
    }
    if (eval->parsed()) {
      set(doc, "scene", e_scene);
      set(doc, "photoreal", e_photo);
      set(doc, "stylized", e_styl);
      set(doc, "style", e_style);
      set(doc, "masks", e_masks);
      set(doc, "region", e_region);
      set(doc, "frames", e_frames);
      set(doc, "report", e_report);
      set(doc, "distance", e_dist);
      set(doc, "embedder", e_emb);
      set(doc, "label", e_label);
      if (e_masked) doc["masked"] = true;
      return evaluate_cmd(doc);
    }
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return kExitConfig;
  } catch (const ArgumentError& e) {
    spdlog::error("invalid argument: {}", e.what());
    return kExitConfig;
  } catch (const ValidationError& e) {
    spdlog::error("validation failed: {}", e.what());
    return kExitValidation;
  } catch (const IoError& e) {
    spdlog::error("I/O error: {}", e.what());
    return kExitIo;
  } catch (const NumericError& e) {
    spdlog::error("numerical failure: {}", e.what());
    return kExitNumeric;
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return kExitFailure;
  }
  return kExitConfig;
}

}  // namespace pstyle
