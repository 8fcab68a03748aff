// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_PIPELINE_HPP
#define LIFTSEG_PIPELINE_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "liftseg/config.hpp"
#include "liftseg/fusion.hpp"
#include "liftseg/geometry.hpp"
#include "liftseg/imagefeat.hpp"
#include "liftseg/lossmetrics.hpp"
#include "liftseg/superpoint.hpp"

namespace liftseg {

struct SampleInfo {
  std::string id;
  BinaryMask ground_truth;
  TargetCategory category = TargetCategory::kSingle;
  bool has_distractor = false;
};

/// Everything one pipeline run consumes, already decoded.
struct SceneData {
  PointCloud cloud;
  Matrix point_features;  // N_p x C
  SuperpointPartition partition;
  std::vector<CameraView> views;
  std::vector<FeatureMap> dense_maps;  // empty: upsample token grids instead
  std::vector<TokenGrid> token_grids;
  std::vector<std::vector<InstanceMask>> masks;  // per view
  TextEmbedding text;
  std::optional<ParameterBundle> params;
  std::optional<SampleInfo> sample;
};

/// Loads the files named by `config.paths`, resolving relative paths against
/// `base_dir`. Throws kValidation / kIo.
SceneData load_scene(const PipelineConfig& config, const std::filesystem::path& base_dir);

/// Writes `scene` under `dir` and fills `config.paths` with the relative names.
void write_scene(const std::filesystem::path& dir, const SceneData& scene, PipelineConfig& config);

enum class Backend { kParallel, kReference };

struct PipelineResult {
  BinaryMask prediction;
  DecodeOutput decoded;
  QuerySet queries;
  GateOutput fusion;  // w2d/w3d empty when gated fusion is disabled
  SuperpointFeatures dense;
  SuperpointFeatures instance;
  std::optional<EvalReport> evaluation;
  nlohmann::json report;
};

/// Runs every stage; errors are rethrown as StageError naming the stage.
PipelineResult run_pipeline(const PipelineConfig& config, const SceneData& scene,
                            Backend backend = Backend::kParallel);

/// Same composition on the serial reference kernels.
inline PipelineResult run_oracle(const PipelineConfig& config, const SceneData& scene) {
  return run_pipeline(config, scene, Backend::kReference);
}

/// prediction.htns, logits.htns, confidence.htns and report.json.
void write_outputs(const std::filesystem::path& out_dir, const PipelineResult& result);

nlohmann::json to_json(const EvalReport& report);

/// Evaluation manifest: {records: [{id, prediction, ground_truth, category,
/// has_distractor}], thresholds}. Paths resolve against the manifest.
EvalReport evaluate_manifest(const std::filesystem::path& manifest_path,
                             std::vector<double>* thresholds_out = nullptr);

}  // namespace liftseg

#endif  // LIFTSEG_PIPELINE_HPP
