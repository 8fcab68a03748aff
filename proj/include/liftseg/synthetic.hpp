// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_SYNTHETIC_HPP
#define LIFTSEG_SYNTHETIC_HPP

#include <cstdint>
#include <filesystem>
#include <vector>

#include "json.hpp"
#include "liftseg/config.hpp"
#include "liftseg/pipeline.hpp"

namespace liftseg {

/// Desk-scale scene made of axis-aligned boxes resting on z = 0.
struct SyntheticSceneSpec {
  std::size_t object_count = 4;
  std::size_t points_per_object = 600;
  double extent_min = 0.35;  // meters
  double extent_max = 0.55;
  std::size_t feature_dim = 256;
  std::size_t view_count = 4;
  std::size_t image_width = 128;
  std::size_t image_height = 96;
  std::size_t patch_size = 8;  // pixels per token along each axis
  double noise = 0.05;         // per-channel feature noise std
  std::vector<std::size_t> targets{0};
  bool distractor = true;  // the last object shares the first target's class

  void validate() const;

  friend bool operator==(const SyntheticSceneSpec&, const SyntheticSceneSpec&) = default;
};

nlohmann::json to_json(const SyntheticSceneSpec& spec);
SyntheticSceneSpec scene_spec_from_json(const nlohmann::json& doc);

struct Box {
  Vec3 min;
  Vec3 max;

  bool contains(Vec3 p, double slack = 0.0) const {
    return p.x >= min.x - slack && p.x <= max.x + slack && p.y >= min.y - slack &&
           p.y <= max.y + slack && p.z >= min.z - slack && p.z <= max.z + slack;
  }
};

/// Gains of the hand-built parameter bundle that makes the untrained fusion
/// stack match superpoint signatures against the text tokens.
struct MatchingCalibration {
  double attention_gain = 6.0;       // query/key scale in the fusion attentions
  double decoder_cross_gain = 0.5;   // output scale of the decoder cross-attention
  double relevance_gain = 400.0;     // confidence logit per unit of relevance
  double relevance_threshold = 0.0575;  // relevance where confidence crosses 0.5
  double mlp_shift = 1.0;            // bias that keeps ReLU layers in their linear range
};

/// Identity-like bundle: MLPs pass features through, attentions match by
/// similarity, the gate blends evenly and confidence thresholds relevance.
ParameterBundle signature_matching_parameters(const FusionDims& dims,
                                              const MatchingCalibration& calibration = {});

struct SyntheticScene {
  SceneData scene;
  PipelineConfig config;  // paths left empty until written
  std::vector<Box> boxes;
  Matrix signatures;  // per-object appearance signature, unit rows
  std::vector<std::size_t> object_class;
  std::vector<std::size_t> point_object;  // object id of every point
};

SyntheticScene generate_scene(const SyntheticSceneSpec& spec, std::uint64_t seed);

/// Writes the scene plus config.json (paths relative to `dir`) and
/// scene_spec.json. Returns the config path.
std::filesystem::path write_fixture(const std::filesystem::path& dir, const SyntheticScene& scene,
                                    const SyntheticSceneSpec& spec, std::uint64_t seed);

inline std::filesystem::path gen_fixtures(const SyntheticSceneSpec& spec, std::uint64_t seed,
                                          const std::filesystem::path& dir) {
  return write_fixture(dir, generate_scene(spec, seed), spec, seed);
}

}  // namespace liftseg

#endif  // LIFTSEG_SYNTHETIC_HPP
