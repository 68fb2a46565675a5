// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include "pstyle/eval.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <Eigen/Eigenvalues>
#include <spdlog/spdlog.h>

#include "pstyle/error.hpp"
#include "pstyle/view_set.hpp"

namespace pstyle {
namespace {

constexpr int kEmbedSide = 8;

Block deepest_fitting(const Image& img, Block limit) {
  Block best = Block::kL1;
  for (Block b : kAllBlocks) {
    if (block_number(b) > block_number(limit)) break;
    if (img.height() >= FeatureExtractor::min_extent(b) && img.width() >= FeatureExtractor::min_extent(b)) best = b;
  }
  return best;
}

// Trace of the square root of a symmetric positive semi-definite matrix.
// Returns false when the decomposition fails or finds clearly negative
// eigenvalues.
bool trace_sqrt_psd(const Eigen::MatrixXd& m, double& out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) return false;
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-9 * scale) return false;
  out = ev.cwiseMax(0.0).cwiseSqrt().sum();
  return true;
}

bool sqrt_psd(const Eigen::MatrixXd& m, Eigen::MatrixXd& out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  if (es.info() != Eigen::Success) return false;
  const Eigen::VectorXd ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-9 * scale) return false;
  out = es.eigenvectors() * ev.cwiseMax(0.0).cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
  return true;
}

bool cross_term(const Eigen::MatrixXd& s1, const Eigen::MatrixXd& s2, double& out) {
  Eigen::MatrixXd root;
  if (!sqrt_psd(s1, root)) return false;
  const Eigen::MatrixXd inner = root * s2 * root;
  return trace_sqrt_psd(0.5 * (inner + inner.transpose()), out);
}

void require_paired(const std::vector<Image>& a, const std::vector<Image>& b, const std::string& what) {
  if (a.size() != b.size()) {
    throw ValidationError(what + ": " + std::to_string(a.size()) + " generated vs " + std::to_string(b.size()) +
                          " reference images");
  }
  for (std::size_t i = 0; i < a.size(); ++i) require_same_shape(a[i], b[i], what + " pair " + std::to_string(i));
}

}  // namespace

PerceptualDistance nmse_distance() {
  return {"nmse", [](const Image& reference, const Image& generated) {
            require_same_shape(reference, generated, "nmse");
            double err = 0.0;
            double energy = 0.0;
            for (std::size_t i = 0; i < reference.size(); ++i) {
              const double r = reference.data()[i];
              const double d = r - generated.data()[i];
              err += d * d;
              energy += r * r;
            }
            const double n = static_cast<double>(reference.size());
            return (err / n) / (energy / n + 1e-12);
          }};
}

PerceptualDistance feature_distance(const FeatureExtractor& fx) {
  return {"features:" + fx.name(), [&fx](const Image& reference, const Image& generated) {
            require_same_shape(reference, generated, "feature distance");
            const Block deepest = deepest_fitting(reference, Block::kL3);
            BlockSet blocks;
            for (Block b : kAllBlocks) {
              if (block_number(b) <= block_number(deepest)) blocks.insert(b);
            }
            const FeatureSet fa = fx.extract(reference, blocks);
            const FeatureSet fb = fx.extract(generated, blocks);
            double total = 0.0;
            for (Block b : blocks) {
              const FeatureMap& a = fa.at(b);
              const FeatureMap& g = fb.at(b);
              const int c = a.channels();
              const std::size_t positions = static_cast<std::size_t>(a.height()) * a.width();
              double sum = 0.0;
              for (std::size_t p = 0; p < positions; ++p) {
                const double* u = a.data().data() + p * c;
                const double* v = g.data().data() + p * c;
                double nu = 0.0;
                double nv = 0.0;
                for (int k = 0; k < c; ++k) {
                  nu += u[k] * u[k];
                  nv += v[k] * v[k];
                }
                nu = std::sqrt(nu) + 1e-10;
                nv = std::sqrt(nv) + 1e-10;
                for (int k = 0; k < c; ++k) {
                  const double d = u[k] / nu - v[k] / nv;
                  sum += d * d;
                }
              }
              total += sum / static_cast<double>(positions);
            }
            return total;
          }};
}

Embedder feature_embedder(const FeatureExtractor& fx) {
  return {"pooled-features:" + fx.name(), [&fx](const Image& img) {
            const Block b = deepest_fitting(img, Block::kL5);
            const FeatureMap f = fx.extract(img, {b}).at(b);
            Eigen::VectorXd out = Eigen::VectorXd::Zero(f.channels());
            const std::size_t positions = static_cast<std::size_t>(f.height()) * f.width();
            for (std::size_t p = 0; p < positions; ++p) {
              out += Eigen::Map<const Eigen::VectorXd>(f.data().data() + p * f.channels(), f.channels());
            }
            return Eigen::VectorXd(out / static_cast<double>(positions));
          }};
}

Embedder projection_embedder(std::uint64_t seed, int dims) {
  if (dims <= 0) throw ArgumentError("embedding size must be positive");
  const int inputs = kEmbedSide * kEmbedSide * 3;
  std::mt19937_64 rng(seed);
  Eigen::MatrixXd proj(dims, inputs);
  for (int r = 0; r < dims; ++r) {
    for (int c = 0; c < inputs; ++c) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      proj(r, c) = (2.0 * u - 1.0) / std::sqrt(static_cast<double>(inputs));
    }
  }
  return {"projection" + std::to_string(dims), [proj](const Image& img) {
            if (img.channels() != 3) throw ValidationError("embedder expects RGB, got " + shape_string(img));
            const Image small = resize_bilinear(img, kEmbedSide, kEmbedSide);
            const Eigen::Map<const Eigen::VectorXd> x(small.data().data(), static_cast<Eigen::Index>(small.size()));
            return Eigen::VectorXd(proj * x);
          }};
}

Moments moments(const std::vector<Eigen::VectorXd>& samples) {
  if (samples.empty()) throw ArgumentError("moments of an empty set");
  const Eigen::Index d = samples.front().size();
  Moments m{Eigen::VectorXd::Zero(d), Eigen::MatrixXd::Zero(d, d)};
  for (const auto& s : samples) {
    if (s.size() != d) throw ArgumentError("embedding sizes differ");
    m.mean += s;
  }
  m.mean /= static_cast<double>(samples.size());
  if (samples.size() < 2) return m;
  for (const auto& s : samples) {
    const Eigen::VectorXd c = s - m.mean;
    m.covariance += c * c.transpose();
  }
  m.covariance /= static_cast<double>(samples.size() - 1);
  return m;
}

double frechet_distance(const Moments& a, const Moments& b, double epsilon) {
  if (a.mean.size() != b.mean.size()) throw ArgumentError("Frechet distance of different dimensions");
  const double mean_term = (a.mean - b.mean).squaredNorm();
  Eigen::MatrixXd s1 = a.covariance;
  Eigen::MatrixXd s2 = b.covariance;
  double cross = 0.0;
  if (!cross_term(s1, s2, cross)) {
    spdlog::warn("covariance square root failed; symmetrizing and adding {:.1g} I", epsilon);
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(s1.rows(), s1.cols());
    s1 = 0.5 * (s1 + s1.transpose()) + epsilon * eye;
    s2 = 0.5 * (s2 + s2.transpose()) + epsilon * eye;
    if (!cross_term(s1, s2, cross)) throw NumericError("covariance square root failed after regularization");
  }
  return mean_term + s1.trace() + s2.trace() - 2.0 * cross;
}

double content_dist(const std::vector<Image>& generated, const std::vector<Image>& content,
                    const PerceptualDistance& d) {
  require_paired(generated, content, "content_dist");
  if (generated.empty()) throw ValidationError("content_dist of empty sets");
  double sum = 0.0;
  for (std::size_t i = 0; i < generated.size(); ++i) sum += d.fn(content[i], generated[i]);
  return sum / static_cast<double>(generated.size());
}

double style_fid(const std::vector<Image>& generated, const std::vector<Image>& style, const Embedder& embedder) {
  if (generated.empty() || style.empty()) throw ValidationError("style_fid needs non-empty sets");
  std::vector<Eigen::VectorXd> g;
  std::vector<Eigen::VectorXd> s;
  for (const Image& img : generated) g.push_back(embedder.fn(img));
  for (const Image& img : style) s.push_back(embedder.fn(img));
  return frechet_distance(moments(g), moments(s));
}

double artfid(double cd, double sf) {
  if (!std::isfinite(cd) || !std::isfinite(sf) || cd < 0.0 || sf < 0.0) {
    throw ArgumentError("artfid needs finite non-negative inputs (cd=" + std::to_string(cd) +
                        ", sf=" + std::to_string(sf) + ")");
  }
  return (1.0 + cd) * (1.0 + sf);
}

std::vector<Image> replicate(const Image& style, std::size_t n) { return std::vector<Image>(n, style); }

EvalResult evaluate_sets(const std::vector<Image>& generated, const std::vector<Image>& content,
                         const std::vector<Image>& style, const PerceptualDistance& d, const Embedder& embedder) {
  if (style.size() != generated.size()) {
    throw ValidationError("evaluation sets differ in length: " + std::to_string(generated.size()) + " generated, " +
                          std::to_string(style.size()) + " style");
  }
  EvalResult r;
  r.n = generated.size();
  r.content_dist = content_dist(generated, content, d);
  // Tiny negative values are eigen-solver rounding of an exact zero.
  r.style_fid = std::max(0.0, style_fid(generated, style, embedder));
  r.artfid = artfid(r.content_dist, r.style_fid);
  return r;
}

EvalResult mask_in_eval(const std::vector<Image>& generated, const std::vector<Image>& content,
                        const std::vector<Image>& style, const std::vector<Image>& masks,
                        const PerceptualDistance& d, const Embedder& embedder) {
  require_paired(generated, content, "mask_in_eval");
  if (masks.size() != generated.size()) {
    throw ValidationError("mask_in_eval: " + std::to_string(masks.size()) + " masks for " +
                          std::to_string(generated.size()) + " views");
  }
  std::vector<Image> g;
  std::vector<Image> c;
  for (std::size_t i = 0; i < generated.size(); ++i) {
    const Image& m = masks[i];
    require_binary_mask(m, generated[i].height(), generated[i].width(), "evaluation mask " + std::to_string(i));
    g.push_back(multiply_plane(generated[i], m));
    c.push_back(multiply_plane(content[i], m));
  }
  EvalResult r = evaluate_sets(g, c, style, d, embedder);
  r.masked = true;
  return r;
}

nlohmann::json ReportRecord::to_json() const {
  return {{"scene", scene},
          {"style", style},
          {"config", config},
          {"N", result.n},
          {"content_dist", result.content_dist},
          {"style_fid", result.style_fid},
          {"artfid", result.artfid},
          {"masked", result.masked},
          {"backends", {{"distance", distance_backend}, {"embedder", embedder_backend}}}};
}

void append_report(const std::filesystem::path& path, const ReportRecord& rec) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to report " + path.string());
  out << rec.to_json().dump() << "\n";
}

}  // namespace pstyle
