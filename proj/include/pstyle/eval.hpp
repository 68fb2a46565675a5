// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "pstyle/features.hpp"
#include "pstyle/image.hpp"

namespace pstyle {

/// d(reference, generated) >= 0 with d(x, x) = 0.
struct PerceptualDistance {
  std::string name;
  std::function<double(const Image& reference, const Image& generated)> fn;
};

/// Maps an image to a fixed-length activation vector.
struct Embedder {
  std::string name;
  std::function<Eigen::VectorXd(const Image&)> fn;
};

/// mean((a - b)^2) / (mean(a^2) + 1e-12), a being the reference.
PerceptualDistance nmse_distance();

/// Learned-free perceptual distance: per-position channel-normalized
/// features of blocks l1..l3 compared by mean squared difference, summed
/// over blocks.
PerceptualDistance feature_distance(const FeatureExtractor& fx);

/// Global average of the deepest block the image size allows.
Embedder feature_embedder(const FeatureExtractor& fx);

/// Test embedder: bilinear resize to 8x8, then a fixed seeded linear
/// projection of the 192 values to `dims` outputs.
Embedder projection_embedder(std::uint64_t seed = 0x9E3779B97F4A7C15ull, int dims = 16);

struct Moments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // unbiased (N - 1); zero for a single sample
};
Moments moments(const std::vector<Eigen::VectorXd>& samples);

/// |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1^{1/2} S2 S1^{1/2})^{1/2}). If the
/// eigendecomposition fails, both covariances are symmetrized and
/// regularized with epsilon * I and a warning is logged.
double frechet_distance(const Moments& a, const Moments& b, double epsilon = 1e-6);

/// (1/N) sum_i d(X_c[i], X_g[i]).
double content_dist(const std::vector<Image>& generated, const std::vector<Image>& content,
                    const PerceptualDistance& d);

double style_fid(const std::vector<Image>& generated, const std::vector<Image>& style, const Embedder& embedder);

/// (1 + cd) (1 + sf); negative or non-finite inputs are rejected.
double artfid(double cd, double sf);

/// The style image repeated n times.
std::vector<Image> replicate(const Image& style, std::size_t n);

struct EvalResult {
  double content_dist = 0.0;
  double style_fid = 0.0;
  double artfid = 0.0;
  std::size_t n = 0;
  bool masked = false;
};

EvalResult evaluate_sets(const std::vector<Image>& generated, const std::vector<Image>& content,
                         const std::vector<Image>& style, const PerceptualDistance& d, const Embedder& embedder);

/// Sets pixels outside each view's mask to black in both the generated and
/// the content renders, then evaluates.
EvalResult mask_in_eval(const std::vector<Image>& generated, const std::vector<Image>& content,
                        const std::vector<Image>& style, const std::vector<Image>& masks,
                        const PerceptualDistance& d, const Embedder& embedder);

struct ReportRecord {
  std::string scene;
  std::string style;
  std::string config;
  EvalResult result;
  std::string distance_backend;
  std::string embedder_backend;

  nlohmann::json to_json() const;
};

/// Appends one JSON line per record.
void append_report(const std::filesystem::path& path, const ReportRecord& rec);

}  // namespace pstyle
