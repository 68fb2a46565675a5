// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/field.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "pstyle/error.hpp"
#include "pstyle/view_set.hpp"

namespace pstyle {
namespace {

struct SampleRecord {
  Stencil stencil;
  bool inside = false;
  double sigma = 0.0;
  double alpha = 1.0;  // exp(-sigma * delta)
  double transmittance = 1.0;
  Eigen::Vector3d rgb = Eigen::Vector3d::Zero();
};

// Forward march of one ray. Fills `records` (one per sample) and returns the
// composited color; `final_t` receives the transmittance after the last sample.
Eigen::Vector3d march(const VoxelField& field, const Camera& cam, const RenderSettings& s, int x,
                      int y, std::vector<SampleRecord>& records, double& final_t) {
  const Eigen::Vector3d dir = cam.ray_direction(x, y);
  const double delta = s.step();
  records.resize(s.samples_per_ray);
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double t = 1.0;
  for (int i = 0; i < s.samples_per_ray; ++i) {
    SampleRecord& r = records[i];
    const Eigen::Vector3d p = cam.position + s.sample_distance(i, x, y) * dir;
    r.inside = make_stencil(field, p, r.stencil);
    r.transmittance = t;
    r.sigma = 0.0;
    r.alpha = 1.0;
    if (!r.inside) continue;
    double sigma = 0.0;
    Eigen::Vector3d z = Eigen::Vector3d::Zero();
    for (int k = 0; k < 8; ++k) {
      const double w = r.stencil.weight[k];
      const std::uint32_t v = r.stencil.voxel[k];
      sigma += w * field.density[v];
      z[0] += w * field.color[3 * v + 0];
      z[1] += w * field.color[3 * v + 1];
      z[2] += w * field.color[3 * v + 2];
    }
    r.sigma = sigma;
    r.rgb = Eigen::Vector3d(sigmoid(z[0]), sigmoid(z[1]), sigmoid(z[2]));
    r.alpha = std::exp(-sigma * delta);
    const double weight = t * (1.0 - r.alpha);
    color += weight * r.rgb;
    t *= r.alpha;
  }
  final_t = t;
  return color + t * s.background;
}

void validate_render_inputs(const VoxelField& field, const Camera& cam, const RenderSettings& s) {
  if (field.density.size() != field.shape.count() || field.color.size() != 3 * field.shape.count()) {
    throw ValidationError("voxel field storage does not match its resolution");
  }
  cam.validate();
  s.validate();
}

}  // namespace

VoxelField::VoxelField(GridShape shape_in, const Eigen::Vector3d& min, const Eigen::Vector3d& max)
    : shape(shape_in), bbox_min(min), bbox_max(max) {
  if (shape.nx <= 0 || shape.ny <= 0 || shape.nz <= 0) {
    throw ValidationError("voxel resolution must be positive");
  }
  density.assign(shape.count(), 0.0f);
  color.assign(3 * shape.count(), 0.0f);
}

Eigen::Vector3d VoxelField::voxel_size() const {
  return (bbox_max - bbox_min).cwiseQuotient(Eigen::Vector3d(shape.nx, shape.ny, shape.nz));
}

Eigen::Vector3d VoxelField::voxel_center(int i, int j, int k) const {
  return bbox_min + (Eigen::Vector3d(i, j, k) + Eigen::Vector3d::Constant(0.5)).cwiseProduct(voxel_size());
}

void VoxelField::validate() const {
  if (shape.nx <= 0 || shape.ny <= 0 || shape.nz <= 0) {
    throw ValidationError("voxel resolution must be positive");
  }
  if (!((bbox_max - bbox_min).array() > 0.0).all()) {
    throw ValidationError("voxel bounding box is empty or inverted");
  }
  if (density.size() != shape.count() || color.size() != 3 * shape.count()) {
    throw ValidationError("voxel field storage does not match its resolution");
  }
  for (float d : density) {
    if (!(d >= 0.0f) || !std::isfinite(d)) throw ValidationError("voxel density must be finite and >= 0");
  }
  for (float c : color) {
    if (!std::isfinite(c)) throw ValidationError("voxel color parameters must be finite");
  }
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

bool make_stencil(const VoxelField& field, const Eigen::Vector3d& p, Stencil& out) {
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= field.bbox_min[a] && p[a] <= field.bbox_max[a])) return false;
  }
  const Eigen::Vector3d size = field.voxel_size();
  const int n[3] = {field.shape.nx, field.shape.ny, field.shape.nz};
  int lo[3];
  int hi[3];
  double frac[3];
  for (int a = 0; a < 3; ++a) {
    if (n[a] == 1) {
      lo[a] = hi[a] = 0;
      frac[a] = 0.0;
      continue;
    }
    const double g = std::clamp((p[a] - field.bbox_min[a]) / size[a] - 0.5, 0.0, n[a] - 1.0);
    lo[a] = std::min(static_cast<int>(std::floor(g)), n[a] - 2);
    hi[a] = lo[a] + 1;
    frac[a] = g - lo[a];
  }
  int k = 0;
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const int i = dx ? hi[0] : lo[0];
        const int j = dy ? hi[1] : lo[1];
        const int kk = dz ? hi[2] : lo[2];
        out.voxel[k] = static_cast<std::uint32_t>(field.index(i, j, kk));
        out.weight[k] = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                        (dz ? frac[2] : 1.0 - frac[2]);
        ++k;
      }
    }
  }
  return true;
}

FieldSample trilinear_sample(const VoxelField& field, const Eigen::Vector3d& p) {
  FieldSample out;
  Stencil st;
  if (!make_stencil(field, p, st)) return out;
  Eigen::Vector3d z = Eigen::Vector3d::Zero();
  for (int k = 0; k < 8; ++k) {
    const std::uint32_t v = st.voxel[k];
    out.density += st.weight[k] * field.density[v];
    for (int c = 0; c < 3; ++c) z[c] += st.weight[k] * field.color[3 * v + c];
  }
  out.rgb = Eigen::Vector3d(sigmoid(z[0]), sigmoid(z[1]), sigmoid(z[2]));
  return out;
}

Image render_view(const VoxelField& field, const Camera& cam, const RenderSettings& settings) {
  validate_render_inputs(field, cam, settings);
  Image out(cam.height, cam.width, 3);
  std::vector<SampleRecord> records;
  for (int y = 0; y < cam.height; ++y) {
    for (int x = 0; x < cam.width; ++x) {
      double final_t = 1.0;
      const Eigen::Vector3d c = march(field, cam, settings, x, y, records, final_t);
      double* px = out.pixel(y, x);
      px[0] = c[0];
      px[1] = c[1];
      px[2] = c[2];
    }
  }
  return out;
}

FieldGrad::FieldGrad(const VoxelField& field)
    : density(field.density.size(), 0.0), color(field.color.size(), 0.0) {}

FieldGrad& FieldGrad::operator+=(const FieldGrad& other) {
  if (other.density.size() != density.size() || other.color.size() != color.size()) {
    throw ArgumentError("field gradient size mismatch");
  }
  for (std::size_t i = 0; i < density.size(); ++i) density[i] += other.density[i];
  for (std::size_t i = 0; i < color.size(); ++i) color[i] += other.color[i];
  return *this;
}

bool FieldGrad::is_zero() const {
  auto zero = [](double v) { return v == 0.0; };
  return std::all_of(density.begin(), density.end(), zero) &&
         std::all_of(color.begin(), color.end(), zero);
}

void render_backward(const VoxelField& field, const Camera& cam, const RenderSettings& settings,
                     const Image& grad_image, const PixelRect& rect, FieldGrad& acc) {
  validate_render_inputs(field, cam, settings);
  if (grad_image.height() != cam.height || grad_image.width() != cam.width ||
      grad_image.channels() != 3) {
    throw ValidationError("gradient image " + shape_string(grad_image) + " does not match camera " +
                          std::to_string(cam.height) + "x" + std::to_string(cam.width) + "x3");
  }
  if (acc.density.size() != field.density.size() || acc.color.size() != field.color.size()) {
    acc = FieldGrad(field);
  }
  const bool want_density = !field.density_frozen;
  const double delta = settings.step();
  std::vector<SampleRecord> records;
  for (int y = std::max(rect.y0, 0); y < std::min(rect.y1, cam.height); ++y) {
    for (int x = std::max(rect.x0, 0); x < std::min(rect.x1, cam.width); ++x) {
      const double* g_ptr = grad_image.pixel(y, x);
      const Eigen::Vector3d g(g_ptr[0], g_ptr[1], g_ptr[2]);
      if (g.isZero(0.0)) continue;
      double final_t = 1.0;
      march(field, cam, settings, x, y, records, final_t);
      // Suffix radiance behind the current sample, starting from the background.
      Eigen::Vector3d behind = final_t * settings.background;
      for (int i = settings.samples_per_ray - 1; i >= 0; --i) {
        const SampleRecord& r = records[i];
        if (!r.inside) continue;
        const double weight = r.transmittance * (1.0 - r.alpha);
        if (weight != 0.0) {
          for (int c = 0; c < 3; ++c) {
            const double dz = weight * g[c] * r.rgb[c] * (1.0 - r.rgb[c]);
            if (dz == 0.0) continue;
            for (int k = 0; k < 8; ++k) {
              acc.color[3 * r.stencil.voxel[k] + c] += r.stencil.weight[k] * dz;
            }
          }
        }
        if (want_density) {
          const double dsigma = delta * (r.transmittance * r.alpha * g.dot(r.rgb) - g.dot(behind));
          for (int k = 0; k < 8; ++k) acc.density[r.stencil.voxel[k]] += r.stencil.weight[k] * dsigma;
        }
        behind += weight * r.rgb;
      }
    }
  }
}

void apply_field_step(VoxelField& field, const FieldGrad& grad, Optimizer& color_opt,
                      Optimizer* density_opt, double color_lr, double density_lr) {
  color_opt.step(field.color, grad.color, color_lr);
  if (field.density_frozen || density_opt == nullptr) return;
  density_opt->step(field.density, grad.density, density_lr);
  for (float& d : field.density) d = std::max(d, 0.0f);
}

FitResult fit_photoreal(const VoxelField& init, const ViewSet& views, const FitOptions& options) {
  if (views.size() < 2) throw ValidationError("photoreal fit needs at least 2 views");
  if (options.iterations < 0) throw ConfigError("fit iterations must be >= 0");
  views.validate();
  init.validate();

  FitResult result{init, {}};
  VoxelField& field = result.field;
  Optimizer color_opt(options.optimizer);
  Optimizer density_opt(options.optimizer);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(views.size());
  const double decay = 0.1;

  for (int it = 0; it < options.iterations; ++it) {
    const std::size_t slot = static_cast<std::size_t>(it) % views.size();
    if (slot == 0) {
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng() % (i + 1)]);
    }
    const std::size_t v = order[slot];
    const Camera& cam = views.cameras[v];
    const Image render = render_view(field, cam, views.render);
    const Image& target = views.images[v];

    Image grad(render.height(), render.width(), 3);
    double loss = 0.0;
    const double inv_count = 1.0 / static_cast<double>(render.size());
    for (std::size_t i = 0; i < render.size(); ++i) {
      const double diff = render.data()[i] - target.data()[i];
      loss += diff * diff;
      grad.data()[i] = 2.0 * diff * inv_count;
    }
    loss *= inv_count;
    if (!std::isfinite(loss)) {
      const auto [dmin, dmax] = std::minmax_element(field.density.begin(), field.density.end());
      const auto [cmin, cmax] = std::minmax_element(field.color.begin(), field.color.end());
      std::ostringstream msg;
      msg << "photoreal fit diverged at iteration " << it << " (view " << v << "): loss=" << loss
          << ", density range [" << *dmin << ", " << *dmax << "], color logit range [" << *cmin
          << ", " << *cmax << "]";
      throw NumericError(msg.str());
    }
    result.losses.push_back(loss);

    FieldGrad fgrad(field);
    render_backward(field, cam, views.render, grad, PixelRect{0, 0, cam.width, cam.height}, fgrad);
    const double progress = options.iterations > 1 ? static_cast<double>(it) / (options.iterations - 1) : 0.0;
    const double scale = std::pow(decay, progress);
    apply_field_step(field, fgrad, color_opt, &density_opt, options.lr * scale,
                     options.density_lr * scale);
  }
  return result;
}

}  // namespace pstyle
