// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <sys/wait.h>

#include "liftseg/config.hpp"
#include "liftseg/error.hpp"
#include "liftseg/geometry.hpp"
#include "liftseg/io.hpp"
#include "liftseg/pipeline.hpp"
#include "liftseg/synthetic.hpp"
#include "support.hpp"

namespace liftseg {
namespace {

namespace fs = std::filesystem;
using testing::max_abs_diff;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("liftseg_pipe_" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

SyntheticSceneSpec small_spec() {
  SyntheticSceneSpec s;
  s.points_per_object = 250;
  s.view_count = 2;
  s.image_width = 64;
  s.image_height = 48;
  return s;
}

TEST(Config, JsonRoundTrip) {
  PipelineConfig c;
  c.paths.cloud = "scene.ply";
  c.paths.views = {"v0.json", "v1.json"};
  c.dims = FusionDims{32, 16, 4, 2};
  c.tau = 0.125;
  c.multiview = MultiViewPooling::kPerViewMean;
  c.relevance_pooling = RelevancePooling::kMean;
  c.n_seeds = 12;
  c.m = 3;
  c.enable_mlf = false;
  c.eval_thresholds = {0.1, 0.9};
  c.rng_seed = 77;
  EXPECT_EQ(config_from_json(to_json(c)), c);
  EXPECT_EQ(config_from_json(nlohmann::json::object()), PipelineConfig{});
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto doc = to_json(PipelineConfig{});
  doc["surprise"] = 1;
  try {
    config_from_json(doc);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  PipelineConfig c;
  c.tau = -1.0;
  EXPECT_THROW(c.validate(), Error);
  PipelineConfig d;
  d.n_seeds = 4;
  d.m = 5;
  EXPECT_THROW(d.validate(), Error);
}

TEST(Generator, ZeroTargetTextIsOrthogonal) {
  auto spec = small_spec();
  spec.targets.clear();
  const SyntheticScene s = generate_scene(spec, 3);
  ASSERT_FALSE(s.scene.sample->ground_truth.empty());
  for (std::uint8_t v : s.scene.sample->ground_truth) EXPECT_EQ(v, 0);
  const Matrix& text = s.scene.text.tokens;
  double worst = 0.0;
  for (std::size_t t = 0; t < text.rows(); ++t)
    for (std::size_t o = 0; o < s.signatures.rows(); ++o) {
      double dot = 0, nt = 0, no = 0;
      for (std::size_t c = 0; c < text.cols(); ++c) {
        dot += text(t, c) * s.signatures(o, c);
        nt += text(t, c) * text(t, c);
        no += s.signatures(o, c) * s.signatures(o, c);
      }
      worst = std::max(worst, std::abs(dot) / std::sqrt(nt * no));
    }
  EXPECT_LT(worst, 0.1);
}

TEST(Generator, SingleObjectDepthLiftsInsideBox) {
  SyntheticSceneSpec spec = small_spec();
  spec.object_count = 1;
  spec.view_count = 1;
  spec.distractor = false;
  const SyntheticScene s = generate_scene(spec, 11);
  const CameraView& view = s.scene.views.at(0);
  const auto lifted = backproject_view(view);
  ASSERT_FALSE(lifted.empty());
  for (const LiftedPixel& px : lifted) EXPECT_TRUE(s.boxes[0].contains(px.position, 1e-5));
}

TEST(Generator, FixtureBytesAreReproducible) {
  TempDir a, b;
  const auto spec = small_spec();
  gen_fixtures(spec, 21, a.path());
  gen_fixtures(spec, 21, b.path());
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(a.path())) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path rel = fs::relative(e.path(), a.path());
    EXPECT_EQ(io::read_file(e.path()), io::read_file(b.path() / rel)) << rel;
  }
  EXPECT_GT(files, 10u);
}

TEST(Generator, RejectsInvalidSpec) {
  SyntheticSceneSpec s = small_spec();
  s.targets = {9};
  EXPECT_THROW(s.validate(), Error);
  auto doc = to_json(small_spec());
  doc["bogus"] = true;
  EXPECT_THROW(scene_spec_from_json(doc), Error);
  EXPECT_EQ(scene_spec_from_json(to_json(small_spec())), small_spec());
}

TEST(Pipeline, MatchesOracleOnFixture) {
  TempDir dir;
  const fs::path config_path = gen_fixtures(small_spec(), 5, dir.path());
  const PipelineConfig config = load_config(config_path);
  const SceneData scene = load_scene(config, dir.path());
  const PipelineResult fast = run_pipeline(config, scene);
  const PipelineResult slow = run_oracle(config, scene);
  EXPECT_EQ(fast.prediction, slow.prediction);
  EXPECT_EQ(fast.queries.source, slow.queries.source);
  EXPECT_LT(max_abs_diff(fast.decoded.logits.data(), slow.decoded.logits.data()), 1e-4);
  EXPECT_LT(max_abs_diff(fast.decoded.confidence, slow.decoded.confidence), 1e-4);
  ASSERT_TRUE(fast.evaluation.has_value());
  EXPECT_GE(fast.evaluation->per_record_iou.front(), 0.9);
}

TEST(Pipeline, ZeroTargetPredictsNothing) {
  auto spec = small_spec();
  spec.targets.clear();
  const SyntheticScene s = generate_scene(spec, 8);
  const PipelineResult r = run_pipeline(s.config, s.scene);
  for (std::uint8_t v : r.prediction) EXPECT_EQ(v, 0);
}

TEST(Pipeline, DeterministicOutputs) {
  const SyntheticScene s = generate_scene(small_spec(), 13);
  TempDir a, b;
  write_outputs(a.path(), run_pipeline(s.config, s.scene));
  write_outputs(b.path(), run_pipeline(s.config, s.scene));
  for (const char* name : {"prediction.htns", "logits.htns", "confidence.htns", "report.json"})
    EXPECT_EQ(io::read_file(a.path() / name), io::read_file(b.path() / name)) << name;
}

TEST(Pipeline, TogglesChangeStructure) {
  const SyntheticScene s = generate_scene(small_spec(), 14);
  PipelineConfig off = s.config;
  off.enable_vsd = false;
  off.enable_mlf = false;
  const PipelineResult r = run_pipeline(off, s.scene);
  EXPECT_TRUE(r.fusion.w2d.empty());
  EXPECT_EQ(r.instance.values.rows(), 0u);
  EXPECT_FALSE(r.report.contains("gate_w2d"));
}

TEST(Pipeline, StageErrorsNameTheStage) {
  const SyntheticScene s = generate_scene(small_spec(), 15);
  PipelineConfig c = s.config;
  c.n_seeds = s.scene.partition.count() + 1;
  try {
    run_pipeline(c, s.scene);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "select_queries");
    EXPECT_EQ(e.kind(), ErrorKind::kConfig);
  }
  SceneData broken = s.scene;
  broken.views.pop_back();
  try {
    run_pipeline(s.config, broken);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "validate");
  }
}

// CLI exit codes: 0 success, 2 configuration, 3 runtime.
int cli(const std::string& args) {
  const std::string cmd = std::string(LIFTSEG_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  TempDir dir;
  const std::string fixture = (dir.path() / "fx").string();
  const std::string out = (dir.path() / "out").string();
  {
    std::ofstream spec(dir.path() / "spec.json");
    spec << to_json(small_spec()).dump();
  }
  EXPECT_EQ(cli("gen --out " + fixture + " --seed 4 --config " + (dir.path() / "spec.json").string()), 0);
  EXPECT_EQ(cli("run --config " + fixture + "/config.json --out " + out), 0);
  EXPECT_TRUE(fs::exists(fs::path(out) / "report.json"));
  EXPECT_EQ(cli("oracle --config " + fixture + "/config.json --out " + out + "_ref --toggle-vsd off"), 0);
  EXPECT_EQ(cli("run --config " + fixture + "/missing.json"), 2);
  EXPECT_EQ(cli("run --config " + fixture + "/config.json --toggle-vsd maybe"), 2);
  EXPECT_EQ(cli("frobnicate"), 2);

  // Runtime failure inside a stage: more seeds than superpoints.
  auto doc = nlohmann::json::parse(io::read_file(fs::path(fixture) / "config.json"));
  doc["selection"]["n_seeds"] = 100000;
  io::write_file_atomic(fs::path(fixture) / "big.json", doc.dump());
  EXPECT_EQ(cli("run --config " + fixture + "/big.json --out " + out), 2);
  // Corrupt tensor: loading error.
  io::write_file_atomic(fs::path(fixture) / "text.htns", "garbage");
  EXPECT_EQ(cli("run --config " + fixture + "/config.json --out " + out), 2);

  // Eval on a manifest with an empty record list is a runtime error.
  io::write_file_atomic(dir.path() / "empty.json", R"({"records": []})");
  EXPECT_EQ(cli("eval --config " + (dir.path() / "empty.json").string()), 3);
}

}  // namespace
}  // namespace liftseg
