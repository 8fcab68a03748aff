// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_CONFIG_HPP
#define LIFTSEG_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "liftseg/fusion.hpp"
#include "liftseg/superpoint.hpp"

namespace liftseg {

/// File locations of one scene; relative paths resolve against the config file.
struct ScenePaths {
  std::string cloud;
  std::string point_features;
  std::string partition;
  std::vector<std::string> views;
  std::vector<std::string> dense_maps;  // optional; empty means upsample token grids
  std::vector<std::string> token_grids;
  std::vector<std::string> masks;
  std::string text;
  std::string params;  // optional; empty means seeded initialization
  std::string sample;  // optional ground truth + metadata

  friend bool operator==(const ScenePaths&, const ScenePaths&) = default;
};

struct LossWeights {
  double bce = 1.0;
  double dice = 1.0;
  double confidence = 1.0;
  double contrastive = 0.1;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct PipelineConfig {
  ScenePaths paths;

  FusionDims dims;
  double dense_radius = 0.05;
  double instance_radius = 0.05;
  double tau = 0.05;
  MultiViewPooling multiview = MultiViewPooling::kGlobalMean;
  double sigma = 2.0;
  double theta_iou = 0.8;
  double theta_stab = 0.9;
  std::size_t n_seeds = 0;  // 0: min(256, N_S)
  std::size_t m = 0;        // 0: min(32, n_seeds)
  RelevancePooling relevance_pooling = RelevancePooling::kMax;
  double logit_threshold = 0.0;
  double conf_threshold = 0.5;
  LossWeights loss_weights;
  double temperature = 0.07;
  double dice_smooth = 1.0;
  std::vector<double> eval_thresholds{0.25, 0.5};

  bool enable_vsd = true;  // instance branch + instance refinement
  bool enable_mlf = true;  // gated fusion instead of element-wise addition
  std::uint64_t rng_seed = 0;

  /// Throws kConfig when a knob is outside its documented range.
  void validate() const;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

nlohmann::json to_json(const PipelineConfig& config);
/// Missing keys take their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& doc);

PipelineConfig load_config(const std::filesystem::path& path);
void save_config(const std::filesystem::path& path, const PipelineConfig& config);

}  // namespace liftseg

#endif  // LIFTSEG_CONFIG_HPP
