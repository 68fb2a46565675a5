// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/dataio.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Geometry>
#include <spdlog/spdlog.h>

#include "binio.hpp"
#include "pstyle/error.hpp"
#include "pstyle/image_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pstyle {
namespace {

constexpr const char* kCameraFormat = "pstyle-cameras";
constexpr const char* kCheckpointMagic = "pstyle-checkpoint";

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

json matrix_to_json(const Eigen::Matrix4d& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

Eigen::Matrix4d matrix_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 4) throw ValidationError(what + ": world_from_camera must be 4x4");
  Eigen::Matrix4d m;
  for (int r = 0; r < 4; ++r) {
    if (!j[r].is_array() || j[r].size() != 4) throw ValidationError(what + ": world_from_camera must be 4x4");
    for (int c = 0; c < 4; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

Image mask_from_png(const fs::path& path) {
  const Image8 img = read_png8(path);
  Image plane(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const std::size_t base = (static_cast<std::size_t>(y) * img.width + x) * img.channels;
      const std::uint8_t v = img.pixels[base];
      for (int c = 1; c < img.channels; ++c) {
        if (img.pixels[base + c] != v) throw ValidationError("mask " + path.string() + " is not grayscale");
      }
      if (v != 0 && v != 255) {
        throw ValidationError("mask " + path.string() + " is not binary: pixel (" + std::to_string(x) + ", " +
                              std::to_string(y) + ") has value " + std::to_string(v));
      }
      plane.at(y, x, 0) = v == 255 ? 1.0 : 0.0;
    }
  }
  return plane;
}

// Uniform double in [0, 1) from the top 53 bits; portable across standard
// libraries unlike std::uniform_real_distribution.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double logit(double p) {
  p = std::clamp(p, 0.02, 0.98);
  return std::log(p / (1.0 - p));
}

struct Sphere {
  Eigen::Vector3d center;
  double radius;
  Eigen::Vector3d albedo;
  double stripe_phase;
};

Eigen::Vector3d shade(const Sphere& s, const Eigen::Vector3d& p) {
  Eigen::Vector3d n = p - s.center;
  n = n.norm() > 0.0 ? Eigen::Vector3d(n.normalized()) : Eigen::Vector3d(0.0, 0.0, -1.0);
  const Eigen::Vector3d light = Eigen::Vector3d(0.35, 0.6, -0.72).normalized();
  const double lambert = 0.35 + 0.65 * std::max(0.0, n.dot(light));
  const double stripe = 0.78 + 0.22 * std::sin(2.0 * std::numbers::pi * (3.0 * p.y() + s.stripe_phase));
  return (s.albedo * lambert * stripe).cwiseMin(1.0);
}

std::string iso_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

}  // namespace

std::string library_version() { return "pstyle 0.1.0"; }

SceneBundle load_scene(const fs::path& dir) {
  const fs::path camera_file = dir / "cameras.json";
  if (!fs::exists(camera_file)) throw IoError("scene " + dir.string() + " has no cameras.json");
  const json doc = read_json(camera_file);
  if (doc.value("format", "") != kCameraFormat) {
    throw ValidationError(camera_file.string() + ": format must be \"" + std::string(kCameraFormat) + "\"");
  }
  const int version = doc.value("version", -1);
  if (version != kCameraFormatVersion) {
    throw ValidationError(camera_file.string() + ": unsupported camera format version " + std::to_string(version) +
                          " (expected " + std::to_string(kCameraFormatVersion) + ")");
  }

  SceneBundle scene;
  try {
    scene.kind = parse_scene_kind(doc.value("kind", "forward-facing"));
    scene.render.near = doc.at("near").get<double>();
    scene.render.far = doc.at("far").get<double>();
    scene.render.samples_per_ray = doc.value("samples_per_ray", 64);
    if (doc.contains("background")) {
      const auto bg = doc.at("background").get<std::vector<double>>();
      if (bg.size() != 3) throw ValidationError(camera_file.string() + ": background must have 3 entries");
      scene.render.background = Eigen::Vector3d(bg[0], bg[1], bg[2]);
    }
  } catch (const json::exception& e) {
    throw ValidationError(camera_file.string() + ": " + e.what());
  }

  const fs::path image_dir = dir / "images";
  std::vector<std::string> files;
  if (fs::is_directory(image_dir)) {
    for (const auto& entry : fs::directory_iterator(image_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") files.push_back(entry.path().filename().string());
    }
  }
  std::sort(files.begin(), files.end());

  const json& views = doc.at("views");
  if (views.size() != files.size()) {
    throw ValidationError("camera count (" + std::to_string(views.size()) + ") does not equal image count (" +
                          std::to_string(files.size()) + ") in " + dir.string());
  }
  std::map<std::string, std::size_t> by_name;
  for (std::size_t v = 0; v < files.size(); ++v) by_name[files[v]] = v;
  scene.names = files;
  scene.cameras.resize(files.size());
  for (const json& view : views) {
    const std::string name = view.at("image").get<std::string>();
    auto it = by_name.find(name);
    if (it == by_name.end()) throw ValidationError("camera entry references missing image '" + name + "'");
    try {
      scene.cameras[it->second] = Camera::from_matrix(
          matrix_from_json(view.at("world_from_camera"), name), view.at("fx").get<double>(),
          view.at("fy").get<double>(), view.at("cx").get<double>(), view.at("cy").get<double>(),
          view.at("width").get<int>(), view.at("height").get<int>());
    } catch (const json::exception& e) {
      throw ValidationError("camera entry '" + name + "': " + e.what());
    }
  }
  for (const std::string& name : files) scene.images.push_back(read_png(image_dir / name));

  const fs::path mask_root = dir / "masks";
  if (fs::is_directory(mask_root)) {
    std::vector<fs::path> regions;
    for (const auto& entry : fs::directory_iterator(mask_root)) {
      if (entry.is_directory()) regions.push_back(entry.path());
    }
    std::sort(regions.begin(), regions.end());
    for (const fs::path& region_dir : regions) {
      const std::string region = region_dir.filename().string();
      std::vector<Image> planes(files.size());
      std::vector<fs::path> mask_files;
      for (const auto& entry : fs::directory_iterator(region_dir)) mask_files.push_back(entry.path());
      std::sort(mask_files.begin(), mask_files.end());
      for (const fs::path& mask_file : mask_files) {
        auto it = by_name.find(mask_file.filename().string());
        if (it == by_name.end()) {
          throw ValidationError("mask " + mask_file.string() + " does not pair with any view image");
        }
        planes[it->second] = mask_from_png(mask_file);
      }
      scene.masks.emplace(region, std::move(planes));
    }
  }
  scene.validate();
  return scene;
}

void save_scene(const SceneBundle& scene, const fs::path& dir) {
  scene.validate();
  std::vector<std::string> names = scene.names;
  if (names.empty()) {
    for (std::size_t v = 0; v < scene.size(); ++v) {
      std::ostringstream n;
      n << "view_" << std::setw(3) << std::setfill('0') << v << ".png";
      names.push_back(n.str());
    }
  }
  if (!std::is_sorted(names.begin(), names.end())) {
    throw ValidationError("view names must sort in view order to round-trip through a scene directory");
  }
  json views = json::array();
  for (std::size_t v = 0; v < scene.size(); ++v) {
    const Camera& cam = scene.cameras[v];
    views.push_back({{"image", names[v]},
                     {"width", cam.width},
                     {"height", cam.height},
                     {"fx", cam.fx},
                     {"fy", cam.fy},
                     {"cx", cam.cx},
                     {"cy", cam.cy},
                     {"world_from_camera", matrix_to_json(cam.world_from_camera())}});
    write_png(dir / "images" / names[v], scene.images[v]);
  }
  const Eigen::Vector3d& bg = scene.render.background;
  const json doc = {{"format", kCameraFormat},
                    {"version", kCameraFormatVersion},
                    {"kind", to_string(scene.kind)},
                    {"near", scene.render.near},
                    {"far", scene.render.far},
                    {"samples_per_ray", scene.render.samples_per_ray},
                    {"background", {bg[0], bg[1], bg[2]}},
                    {"views", views}};
  write_text(dir / "cameras.json", doc.dump(2) + "\n");
  for (const auto& [region, planes] : scene.masks) {
    for (std::size_t v = 0; v < planes.size(); ++v) {
      if (planes[v].empty()) continue;
      write_png(dir / "masks" / region / names[v], planes[v]);
    }
  }
}

void save_checkpoint(const VoxelField& field, const fs::path& path) {
  field.validate();
  std::ostringstream header;
  header << std::setprecision(17);
  header << kCheckpointMagic << "\n";
  header << "version " << kCheckpointVersion << "\n";
  header << "resolution " << field.shape.nx << " " << field.shape.ny << " " << field.shape.nz << "\n";
  header << "bbox_min " << field.bbox_min.x() << " " << field.bbox_min.y() << " " << field.bbox_min.z() << "\n";
  header << "bbox_max " << field.bbox_max.x() << " " << field.bbox_max.y() << " " << field.bbox_max.z() << "\n";
  header << "density_frozen " << (field.density_frozen ? 1 : 0) << "\n";
  header << "density_bytes " << field.density.size() * 4 << "\n";
  header << "color_bytes " << field.color.size() * 4 << "\n";
  header << "end\n";

  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint " + path.string());
  out << header.str();
  for (float v : field.density) binio::write_f32(out, v);
  for (float v : field.color) binio::write_f32(out, v);
  if (!out) throw IoError("failed writing checkpoint " + path.string());
}

VoxelField load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  auto next_line = [&](const std::string& key) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("checkpoint " + path.string() + " is truncated before '" + key + "'");
    std::istringstream fields(line);
    std::string got;
    fields >> got;
    if (got != key) {
      throw ValidationError("checkpoint " + path.string() + ": expected '" + key + "', found '" + line + "'");
    }
    return line.substr(key.size());
  };
  next_line(kCheckpointMagic);
  {
    std::istringstream v(next_line("version"));
    int version = -1;
    v >> version;
    if (version != kCheckpointVersion) {
      throw ValidationError("checkpoint " + path.string() + ": unsupported version " + std::to_string(version) +
                            " (expected " + std::to_string(kCheckpointVersion) + ")");
    }
  }
  GridShape shape;
  Eigen::Vector3d lo;
  Eigen::Vector3d hi;
  int frozen = 0;
  std::size_t density_bytes = 0;
  std::size_t color_bytes = 0;
  {
    std::istringstream s(next_line("resolution"));
    s >> shape.nx >> shape.ny >> shape.nz;
  }
  {
    std::istringstream s(next_line("bbox_min"));
    s >> lo[0] >> lo[1] >> lo[2];
  }
  {
    std::istringstream s(next_line("bbox_max"));
    s >> hi[0] >> hi[1] >> hi[2];
  }
  std::istringstream(next_line("density_frozen")) >> frozen;
  std::istringstream(next_line("density_bytes")) >> density_bytes;
  std::istringstream(next_line("color_bytes")) >> color_bytes;
  next_line("end");

  VoxelField field(shape, lo, hi);
  if (density_bytes != field.density.size() * 4 || color_bytes != field.color.size() * 4) {
    throw ValidationError("checkpoint " + path.string() + ": grid byte counts do not match resolution " +
                          std::to_string(shape.nx) + "x" + std::to_string(shape.ny) + "x" + std::to_string(shape.nz));
  }
  field.density_frozen = frozen != 0;
  for (float& v : field.density) v = binio::read_f32(in, "checkpoint density");
  for (float& v : field.color) v = binio::read_f32(in, "checkpoint color");
  if (in.peek() != std::char_traits<char>::eof()) {
    throw ValidationError("checkpoint " + path.string() + " has trailing bytes");
  }
  field.validate();
  return field;
}

Image ray_support_mask(const VoxelField& field, const Camera& cam, const RenderSettings& settings,
                       const std::vector<bool>& support) {
  if (support.size() != field.shape.count()) throw ArgumentError("support flags must cover every voxel");
  Image mask(cam.height, cam.width, 1);
  Stencil stencil;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      const Eigen::Vector3d dir = cam.ray_direction(x, y);
      bool hit = false;
      for (int i = 0; i < settings.samples_per_ray && !hit; ++i) {
        if (!make_stencil(field, cam.position + settings.sample_distance(i, x, y) * dir, stencil)) continue;
        for (int k = 0; k < 8 && !hit; ++k) hit = support[stencil.voxel[k]];
      }
      mask.at(y, x, 0) = hit ? 1.0 : 0.0;
    }
  }
  return mask;
}

SyntheticScene make_synthetic(const SyntheticOptions& o) {
  if (o.n_views < 4) throw ConfigError("synthetic scene needs at least 4 views, got " + std::to_string(o.n_views));
  if (o.primitives < 2 || o.primitives > 3) throw ConfigError("synthetic scene supports 2 or 3 primitives");
  if (o.resolution < 8) throw ConfigError("synthetic resolution must be >= 8");
  if (o.image_size < 16) throw ConfigError("synthetic image size must be >= 16");

  std::mt19937_64 rng(o.seed);
  auto jitter = [&](double amount) { return (2.0 * unit(rng) - 1.0) * amount; };
  std::vector<Sphere> spheres = {
      {{-0.5, 0.0, 0.0}, 0.35, {0.88, 0.30, 0.22}, 0.0},
      {{0.5, 0.0, 0.0}, 0.35, {0.22, 0.45, 0.90}, 0.0},
      {{0.0, 0.72, 0.2}, 0.2, {0.30, 0.82, 0.36}, 0.0},
  };
  spheres.resize(o.primitives);
  for (Sphere& s : spheres) {
    s.center += Eigen::Vector3d(jitter(0.03), jitter(0.03), jitter(0.03));
    s.albedo = (s.albedo + Eigen::Vector3d(jitter(0.05), jitter(0.05), jitter(0.05))).cwiseMax(0.05).cwiseMin(0.95);
    s.stripe_phase = unit(rng);
  }

  const int n = o.resolution;
  VoxelField truth(GridShape{n, n, n}, Eigen::Vector3d::Constant(-1.0), Eigen::Vector3d::Constant(1.0));
  const double voxel = truth.voxel_size().maxCoeff();
  std::vector<std::vector<bool>> support(spheres.size(), std::vector<bool>(truth.shape.count(), false));
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) {
        const Eigen::Vector3d p = truth.voxel_center(i, j, k);
        const std::size_t idx = truth.index(i, j, k);
        std::size_t nearest = 0;
        double gap = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < spheres.size(); ++s) {
          const double d = (p - spheres[s].center).norm() - spheres[s].radius;
          if (d < gap) {
            gap = d;
            nearest = s;
          }
        }
        if (gap <= 0.0) {
          truth.density[idx] = 200.0f;
          support[nearest][idx] = true;
        }
        // Colors of empty voxels next to a surface continue that surface so
        // trilinear blending does not darken silhouettes.
        if (gap <= 2.0 * voxel) {
          const Eigen::Vector3d c = shade(spheres[nearest], p);
          for (int ch = 0; ch < 3; ++ch) truth.color[3 * idx + ch] = static_cast<float>(logit(c[ch]));
        }
      }
    }
  }

  SyntheticScene out;
  SceneBundle& scene = out.bundle;
  scene.kind = o.kind;
  scene.render.samples_per_ray = 64;
  scene.render.near = 2.0;
  scene.render.far = 4.0;
  scene.render.background = Eigen::Vector3d(0.93, 0.89, 0.78);

  const double radius = 3.0;
  const double fov = o.fov_y_deg;
  auto camera_at = [&](double azimuth_deg) {
    const double a = azimuth_deg * std::numbers::pi / 180.0;
    Eigen::Vector3d eye;
    if (o.kind == SceneKind::kForwardFacing) {
      eye = Eigen::Vector3d(radius * std::sin(a), 0.35, -radius * std::cos(a));
      eye = eye.normalized() * radius;
    } else {
      const double e = 60.0 * std::numbers::pi / 180.0;
      eye = radius * Eigen::Vector3d(std::cos(e) * std::sin(a), std::sin(e), -std::cos(e) * std::cos(a));
    }
    return Camera::look_at(eye, Eigen::Vector3d::Zero(), Eigen::Vector3d::UnitY(), fov, o.image_size, o.image_size);
  };
  std::vector<double> azimuths;
  double held_out_az = 0.0;
  if (o.kind == SceneKind::kForwardFacing) {
    for (int v = 0; v < o.n_views; ++v) azimuths.push_back(-25.0 + 50.0 * v / (o.n_views - 1));
    held_out_az = 0.5 * (azimuths[o.n_views / 2 - 1] + azimuths[o.n_views / 2]);
  } else {
    for (int v = 0; v < o.n_views; ++v) azimuths.push_back(360.0 * v / o.n_views);
    held_out_az = 0.5 * (azimuths[0] + azimuths[1]);
  }

  for (int v = 0; v < o.n_views; ++v) {
    std::ostringstream name;
    name << "view_" << std::setw(3) << std::setfill('0') << v << ".png";
    scene.names.push_back(name.str());
    scene.cameras.push_back(camera_at(azimuths[v]));
    scene.images.push_back(render_view(truth, scene.cameras.back(), scene.render));
  }
  out.held_out = camera_at(held_out_az);
  out.held_out_image = render_view(truth, out.held_out, scene.render);

  for (std::size_t s = 0; s < spheres.size(); ++s) {
    const std::string region = "object" + std::to_string(s);
    std::vector<Image> planes;
    for (int v = 0; v < o.n_views; ++v) {
      Image m = ray_support_mask(truth, scene.cameras[v], scene.render, support[s]);
      const double coverage = mean_value(m);
      if (coverage < 0.01) {
        throw ValidationError("synthetic region " + region + " covers only " + std::to_string(100.0 * coverage) +
                              "% of view " + std::to_string(v));
      }
      planes.push_back(std::move(m));
    }
    scene.masks.emplace(region, std::move(planes));
    out.region_support.emplace(region, support[s]);
    out.held_out_masks.emplace(region, ray_support_mask(truth, out.held_out, scene.render, support[s]));
  }

  for (int v = 0; v < o.n_views; ++v) {
    Image coverage(o.image_size, o.image_size, 1);
    for (const auto& [region, planes] : scene.masks) coverage += planes[v];
    const auto shared = std::count_if(coverage.data().begin(), coverage.data().end(), [](double c) { return c > 1.0; });
    if (shared > 0) spdlog::warn("synthetic regions share {} ray-support pixels in view {}", shared, v);
  }
  scene.validate();
  out.truth = std::move(truth);
  return out;
}

int default_frame_count(SceneKind kind) { return kind == SceneKind::k360 ? 200 : 120; }

std::vector<Camera> path_cameras(const PathSpec& spec, SceneKind kind) {
  const int frames = spec.frames > 0 ? spec.frames : default_frame_count(kind);
  std::vector<Camera> out;
  out.reserve(frames);
  if (spec.kind == PathKind::kArc) {
    for (int f = 0; f < frames; ++f) {
      const double t = frames > 1 ? static_cast<double>(f) / (frames - 1) : 0.5;
      const double a = (spec.start_deg + t * (spec.end_deg - spec.start_deg)) * std::numbers::pi / 180.0;
      const Eigen::Vector3d eye = spec.target + Eigen::Vector3d(spec.radius * std::sin(a), spec.height,
                                                                -spec.radius * std::cos(a));
      out.push_back(Camera::look_at(eye, spec.target, Eigen::Vector3d::UnitY(), spec.fov_y_deg, spec.width,
                                    spec.height_px));
    }
    return out;
  }
  if (spec.keyframes.empty()) throw ConfigError("keyframe path needs at least one keyframe");
  const int segments = static_cast<int>(spec.keyframes.size()) - 1;
  for (int f = 0; f < frames; ++f) {
    const double u = frames > 1 && segments > 0 ? static_cast<double>(f) * segments / (frames - 1) : 0.0;
    const int seg = std::min(static_cast<int>(std::floor(u)), std::max(segments - 1, 0));
    const double t = u - seg;
    if (segments == 0 || t == 0.0) {
      out.push_back(spec.keyframes[seg]);
      continue;
    }
    if (t == 1.0) {
      out.push_back(spec.keyframes[seg + 1]);
      continue;
    }
    const Camera& a = spec.keyframes[seg];
    const Camera& b = spec.keyframes[seg + 1];
    Camera cam = a;
    cam.position = (1.0 - t) * a.position + t * b.position;
    const Eigen::Quaterniond qa(a.rotation);
    const Eigen::Quaterniond qb(b.rotation);
    cam.rotation = qa.slerp(t, qb).normalized().toRotationMatrix();
    out.push_back(cam);
  }
  return out;
}

std::vector<fs::path> render_path(const VoxelField& field, const PathSpec& spec, SceneKind kind,
                                  const RenderSettings& settings, const fs::path& out_dir) {
  const std::vector<Camera> cams = path_cameras(spec, kind);
  std::vector<fs::path> frames;
  for (std::size_t f = 0; f < cams.size(); ++f) {
    std::ostringstream name;
    name << "frame_" << std::setw(4) << std::setfill('0') << f << ".png";
    frames.push_back(out_dir / name.str());
    write_png(frames.back(), render_view(field, cams[f], settings));
  }
  return frames;
}

json RunManifest::to_json() const {
  return {{"command", command},     {"config", config},
          {"seed", seed},           {"version", version},
          {"started_at", started_at}, {"run_dir", run_dir.string()},
          {"outputs", outputs}};
}

void RunManifest::write() const {
  RunManifest copy = *this;
  if (copy.started_at.empty()) copy.started_at = iso_now();
  if (copy.version.empty()) copy.version = library_version();
  write_text(run_dir / "manifest.json", copy.to_json().dump(2) + "\n");
}

}  // namespace pstyle
