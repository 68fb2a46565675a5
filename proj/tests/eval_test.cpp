// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <filesystem>
#include <fstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pstyle/error.hpp"
#include "pstyle/eval.hpp"

namespace pstyle {
namespace {

const FeatureExtractor& fx() {
  static const FeatureExtractor e = FeatureExtractor::deterministic();
  return e;
}

std::vector<Image> random_set(std::size_t n, std::uint64_t seed, int size = 16) {
  std::vector<Image> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing::random_image(size, size, 3, seed + i));
  return out;
}

Moments gaussian(std::initializer_list<double> mean, std::initializer_list<double> cov) {
  const int n = static_cast<int>(mean.size());
  Moments m{Eigen::VectorXd(n), Eigen::MatrixXd(n, n)};
  int i = 0;
  for (double v : mean) m.mean[i++] = v;
  i = 0;
  for (double v : cov) {
    m.covariance(i / n, i % n) = v;
    ++i;
  }
  return m;
}

// Distance that reads a preset value from the generated image's first pixel.
PerceptualDistance first_pixel_distance() {
  return {"first-pixel", [](const Image&, const Image& g) { return g.at(0, 0, 0); }};
}

TEST(ContentDist, IdenticalSetsGiveZero) {
  const std::vector<Image> a = random_set(3, 1);
  EXPECT_EQ(content_dist(a, a, nmse_distance()), 0.0);
  EXPECT_NEAR(content_dist(a, a, feature_distance(fx())), 0.0, 1e-12);
}

TEST(ContentDist, MeanOfPairDistances) {
  const std::vector<Image> generated = {Image(2, 2, 3, 0.2), Image(2, 2, 3, 0.4)};
  const std::vector<Image> content = {Image(2, 2, 3), Image(2, 2, 3)};
  EXPECT_NEAR(content_dist(generated, content, first_pixel_distance()), 0.3, 1e-15);
}

TEST(ContentDist, PermutationInvariant) {
  const std::vector<Image> g = random_set(4, 10);
  const std::vector<Image> c = random_set(4, 20);
  const double ref = content_dist(g, c, nmse_distance());
  const std::vector<Image> gp = {g[2], g[0], g[3], g[1]};
  const std::vector<Image> cp = {c[2], c[0], c[3], c[1]};
  EXPECT_NEAR(content_dist(gp, cp, nmse_distance()), ref, 1e-12);
}

TEST(ContentDist, RejectsMismatchedSets) {
  EXPECT_THROW(content_dist(random_set(2, 1), random_set(3, 1), nmse_distance()), ValidationError);
}

TEST(Nmse, Definition) {
  const Image a = testing::random_image(4, 4, 3, 30);
  const Image b = testing::random_image(4, 4, 3, 31);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    den += a.data()[i] * a.data()[i];
  }
  const double n = static_cast<double>(a.size());
  EXPECT_NEAR(nmse_distance().fn(a, b), (num / n) / (den / n + 1e-12), 1e-12);
}

TEST(Moments, UnbiasedCovarianceAndSingleSample) {
  const std::vector<Eigen::VectorXd> one = {Eigen::Vector2d(1.0, 2.0)};
  const Moments m1 = moments(one);
  EXPECT_EQ(m1.covariance, Eigen::MatrixXd::Zero(2, 2));
  const Moments m = moments({Eigen::Vector2d(0, 0), Eigen::Vector2d(2, 0), Eigen::Vector2d(1, 3)});
  EXPECT_NEAR(m.mean[0], 1.0, 1e-15);
  EXPECT_NEAR(m.mean[1], 1.0, 1e-15);
  EXPECT_NEAR(m.covariance(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(m.covariance(1, 1), 3.0, 1e-12);
  EXPECT_NEAR(m.covariance(0, 1), 0.0, 1e-12);
}

TEST(Frechet, DiagonalGaussians) {
  // Commuting covariances: sum of squared differences of standard deviations.
  const double got = frechet_distance(gaussian({0, 0}, {1, 0, 0, 4}), gaussian({1, 2}, {4, 0, 0, 1}));
  EXPECT_NEAR(got, 5.0 + 1.0 + 1.0, 1e-4);
}

TEST(Frechet, CorrelatedAgainstIdentity) {
  // Tr(S + I - 2 S^{1/2}) with eigenvalues 3 and 1.
  const double got = frechet_distance(gaussian({0, 0}, {2, 1, 1, 2}), gaussian({0, 0}, {1, 0, 0, 1}));
  EXPECT_NEAR(got, 4.0 - 2.0 * std::sqrt(3.0), 1e-4);
}

TEST(Frechet, SymmetricAndZeroOnSelf) {
  const Moments a = gaussian({0.5, -1}, {2, 0.3, 0.3, 1});
  const Moments b = gaussian({0, 1}, {1, -0.2, -0.2, 3});
  EXPECT_NEAR(frechet_distance(a, b), frechet_distance(b, a), 1e-9);
  EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-9);
}

TEST(StyleFid, SelfIsZero) {
  const std::vector<Image> a = random_set(6, 40);
  EXPECT_LE(std::abs(style_fid(a, a, projection_embedder())), 1e-6);
}

TEST(StyleFid, ReplicatedStyleHasZeroCovariance) {
  const Embedder e = projection_embedder();
  const std::vector<Image> g = random_set(5, 50);
  const Image style = testing::rings(16);
  const std::vector<Image> s = replicate(style, g.size());
  ASSERT_EQ(s.size(), 5u);
  // Independent moments of the generated embeddings.
  const Eigen::VectorXd es = e.fn(style);
  std::vector<Eigen::VectorXd> eg;
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(es.size());
  for (const Image& img : g) {
    eg.push_back(e.fn(img));
    mu += eg.back();
  }
  mu /= static_cast<double>(g.size());
  double trace = 0.0;
  for (const auto& v : eg) trace += (v - mu).squaredNorm();
  trace /= static_cast<double>(g.size() - 1);
  EXPECT_NEAR(style_fid(g, s, e), (mu - es).squaredNorm() + trace, 1e-6);
}

TEST(ArtFid, Composition) {
  EXPECT_NEAR(artfid(0.0435, 38.7340), 41.46, 0.01);
  EXPECT_NEAR(artfid(0.0434, 36.7384), 39.38, 0.01);
  EXPECT_EQ(artfid(0.0, 0.0), 1.0);
  EXPECT_THROW(artfid(-0.1, 1.0), ArgumentError);
  EXPECT_THROW(artfid(0.1, std::nan("")), ArgumentError);
}

TEST(Embedders, FixedLengthAndDeterministic) {
  const Embedder f = feature_embedder(fx());
  const Image img = testing::random_image(32, 32, 3, 60);
  EXPECT_EQ(f.fn(img), f.fn(img));
  EXPECT_EQ(projection_embedder().fn(img).size(), 16);
  EXPECT_EQ(projection_embedder().fn(img), projection_embedder().fn(img));
}

class MaskedEval : public ::testing::Test {
 protected:
  std::vector<Image> generated = random_set(3, 70);
  std::vector<Image> content = random_set(3, 80);
  std::vector<Image> style = replicate(testing::rings(16), 3);
  Embedder embedder = projection_embedder();
  PerceptualDistance d = nmse_distance();

  std::vector<Image> masks(double value) const { return std::vector<Image>(3, Image(16, 16, 1, value)); }
};

TEST_F(MaskedEval, AllOnesEqualsUnmasked) {
  const EvalResult a = mask_in_eval(generated, content, style, masks(1.0), d, embedder);
  const EvalResult b = evaluate_sets(generated, content, style, d, embedder);
  EXPECT_EQ(a.content_dist, b.content_dist);
  EXPECT_EQ(a.style_fid, b.style_fid);
  EXPECT_EQ(a.artfid, b.artfid);
  EXPECT_TRUE(a.masked);
  EXPECT_FALSE(b.masked);
}

TEST_F(MaskedEval, AllZerosGivesZeroContentDistance) {
  EXPECT_EQ(mask_in_eval(generated, content, style, masks(0.0), d, embedder).content_dist, 0.0);
}

TEST_F(MaskedEval, OutOfMaskPerturbationIgnored) {
  std::vector<Image> m = masks(0.0);
  for (Image& plane : m)
    for (int y = 4; y < 12; ++y)
      for (int x = 2; x < 9; ++x) plane.at(y, x, 0) = 1.0;
  const EvalResult a = mask_in_eval(generated, content, style, m, d, embedder);
  std::vector<Image> g2 = generated;
  std::vector<Image> c2 = content;
  for (std::size_t i = 0; i < g2.size(); ++i) {
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        if (m[i].at(y, x, 0) != 0.0) continue;
        for (int c = 0; c < 3; ++c) {
          g2[i].at(y, x, c) = 1.0 - g2[i].at(y, x, c);
          c2[i].at(y, x, c) *= 0.5;
        }
      }
    }
  }
  const EvalResult b = mask_in_eval(g2, c2, style, m, d, embedder);
  EXPECT_NEAR(a.content_dist, b.content_dist, 1e-9);
  EXPECT_NEAR(a.style_fid, b.style_fid, 1e-9);
  EXPECT_NEAR(a.artfid, b.artfid, 1e-9);
}

TEST_F(MaskedEval, RejectsNonBinaryMasks) {
  EXPECT_THROW(mask_in_eval(generated, content, style, masks(0.5), d, embedder), ValidationError);
}

TEST(Report, AppendsJsonLines) {
  const auto path = std::filesystem::temp_directory_path() / "pstyle_eval_report.jsonl";
  std::filesystem::remove(path);
  ReportRecord r;
  r.scene = "synthetic";
  r.style = "rings";
  r.config = "baseline";
  r.result = EvalResult{0.1, 2.0, artfid(0.1, 2.0), 3, false};
  r.distance_backend = "nmse";
  r.embedder_backend = "projection";
  append_report(path, r);
  append_report(path, r);
  std::ifstream in(path);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    const nlohmann::json j = nlohmann::json::parse(line);
    EXPECT_EQ(j, r.to_json());
    ++n;
  }
  EXPECT_EQ(n, 2);
}

}  // namespace
}  // namespace pstyle
