// Copyright 2026 The pstyle Authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <iterator>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "pstyle/cli.hpp"
#include "pstyle/dataio.hpp"
#include "pstyle/image_io.hpp"

namespace pstyle {
namespace fs = std::filesystem;
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// A small scene, a short reconstruction and a style image shared by the tests.
class Cli : public ::testing::Test {
 protected:
  static fs::path root() { return fs::temp_directory_path() / "pstyle_cli_test"; }
  static fs::path scene() { return root() / "scene"; }
  static fs::path field() { return root() / "photo.ckpt"; }
  static fs::path style() { return root() / "style.png"; }
  static fs::path runs() { return root() / "runs"; }

  static void SetUpTestSuite() {
    fs::remove_all(root());
    fs::create_directories(root());
    write_png(style(), testing::diagonal_stripes(32));
    ASSERT_EQ(run_cli({"make-synthetic", "--out", scene().string(), "--views", "4", "--image-size", "24",
                       "--eval-frames", "3", "--runs-root", runs().string()}),
              kExitOk);
    ASSERT_EQ(run_cli({"reconstruct", "--scene", scene().string(), "--iterations", "40", "--out",
                       field().string(), "--runs-root", runs().string()}),
              kExitOk);
  }

  static std::vector<std::string> stylize(const std::string& run_id, std::vector<std::string> extra) {
    std::vector<std::string> args = {"stylize", "--scene", scene().string(), "--field", field().string(),
                                     "--style", style().string(), "--epochs", "1", "--runs-root",
                                     runs().string(), "--run-id", run_id};
    args.insert(args.end(), extra.begin(), extra.end());
    return args;
  }
};

TEST_F(Cli, SyntheticLayout) {
  EXPECT_TRUE(fs::exists(scene() / "cameras.json"));
  EXPECT_TRUE(fs::exists(scene() / "truth.ckpt"));
  EXPECT_TRUE(fs::exists(scene() / "path.json"));
  EXPECT_TRUE(fs::exists(scene() / "eval_masks" / "object0" / "frame_0002.png"));
  EXPECT_EQ(load_scene(scene()).size(), 4u);
}

TEST_F(Cli, ColorControlSetsLuminanceAndPreset) {
  ASSERT_EQ(run_cli(stylize("color", {"--control", "color"})), kExitOk);
  const nlohmann::json cfg = nlohmann::json::parse(slurp(runs() / "color" / "config.json"));
  EXPECT_TRUE(cfg["specs"][0]["luminance_only"].get<bool>());
  EXPECT_EQ(cfg["weights"]["content"].get<double>(), 0.0001);
  EXPECT_TRUE(fs::exists(runs() / "color" / "manifest.json"));
  EXPECT_TRUE(fs::exists(runs() / "color" / "checkpoints" / "final.ckpt"));
}

TEST_F(Cli, SpatialControlForcesRecolorOff) {
  ::testing::internal::CaptureStdout();
  const int code = run_cli(stylize("spatial", {"--control", "spatial", "--region", "object0", "--recolor"}));
  const std::string out = ::testing::internal::GetCapturedStdout();
  ASSERT_EQ(code, kExitOk);
  EXPECT_NE(out.find("notice: recolor disabled"), std::string::npos) << out;
  const nlohmann::json cfg = nlohmann::json::parse(slurp(runs() / "spatial" / "config.json"));
  EXPECT_FALSE(cfg["recolor_enabled"].get<bool>());
}

TEST_F(Cli, IdenticalRunsAreBitIdentical) {
  ASSERT_EQ(run_cli(stylize("rep_a", {"--seed", "5"})), kExitOk);
  ASSERT_EQ(run_cli(stylize("rep_b", {"--seed", "5"})), kExitOk);
  EXPECT_EQ(slurp(runs() / "rep_a" / "checkpoints" / "final.ckpt"),
            slurp(runs() / "rep_b" / "checkpoints" / "final.ckpt"));
  EXPECT_EQ(slurp(runs() / "rep_a" / "metrics.jsonl"), slurp(runs() / "rep_b" / "metrics.jsonl"));
}

TEST_F(Cli, RenderAndEvaluate) {
  ASSERT_EQ(run_cli({"render", "--field", field().string(), "--scene", scene().string(), "--frames", "2", "--out",
                     (root() / "frames").string(), "--runs-root", runs().string()}),
            kExitOk);
  EXPECT_TRUE(fs::exists(root() / "frames" / "frame_0001.png"));
  const fs::path report = root() / "report.jsonl";
  ASSERT_EQ(run_cli({"evaluate", "--scene", scene().string(), "--photoreal", field().string(), "--stylized",
                     field().string(), "--style", style().string(), "--report", report.string(), "--distance",
                     "nmse", "--embedder", "projection", "--runs-root", runs().string()}),
            kExitOk);
  const nlohmann::json j = nlohmann::json::parse(slurp(report));
  EXPECT_EQ(j["content_dist"].get<double>(), 0.0);
  EXPECT_EQ(j["backends"]["distance"], "nmse");
  ASSERT_EQ(run_cli({"evaluate", "--scene", scene().string(), "--photoreal", field().string(), "--stylized",
                     field().string(), "--style", style().string(), "--report", report.string(), "--masked",
                     "--masks", (scene() / "eval_masks").string(), "--region", "object1", "--embedder",
                     "projection", "--runs-root", runs().string()}),
            kExitOk);
}

TEST_F(Cli, MaskedEvaluateWithoutMasksIsConfigError) {
  EXPECT_EQ(run_cli({"evaluate", "--scene", scene().string(), "--photoreal", field().string(), "--stylized",
                     field().string(), "--style", style().string(), "--masked", "--runs-root", runs().string()}),
            kExitConfig);
}

TEST_F(Cli, ErrorsMapToExitCodes) {
  EXPECT_EQ(run_cli(stylize("bad_control", {"--control", "texture"})), kExitConfig);
  EXPECT_EQ(run_cli({"stylize", "--scene", (root() / "missing").string(), "--field", field().string(),
                     "--style", style().string(), "--runs-root", runs().string()}),
            kExitIo);
  EXPECT_EQ(run_cli({"frobnicate"}), kExitConfig);
  EXPECT_EQ(run_cli(stylize("no_region", {"--control", "spatial"})), kExitConfig);
}

TEST(StylizeConfigJson, PresetsThenOverrides) {
  const fs::path style = fs::temp_directory_path() / "pstyle_cli_cfg_style.png";
  write_png(style, testing::rings(16));
  nlohmann::json doc = {{"styles", {style.string()}}, {"controls", {"color"}}};
  StylizeConfig cfg = stylize_config_from_json(doc, SceneKind::k360);
  EXPECT_TRUE(cfg.color_preserve);
  EXPECT_EQ(cfg.weights.content, 0.0005);
  doc["weights"] = {{"content", 0.02}};
  doc["controls"] = {"depth"};
  cfg = stylize_config_from_json(doc, SceneKind::kForwardFacing);
  EXPECT_EQ(cfg.weights.content, 0.02);
  EXPECT_EQ(cfg.weights.depth, 0.003);
  EXPECT_EQ(cfg.specs.size(), 1u);
  EXPECT_EQ(cfg.specs[0].name, "pstyle_cli_cfg_style");
}

}  // namespace
}  // namespace pstyle
