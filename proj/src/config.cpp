// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/config.hpp"

#include <cmath>
#include <set>

#include "liftseg/error.hpp"
#include "liftseg/io.hpp"

namespace liftseg {

using nlohmann::json;

namespace {

void in_range(double v, double lo, double hi, const char* name) {
  require(std::isfinite(v) && v >= lo && v <= hi, ErrorKind::kConfig,
          std::string(name) + " must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) +
              "], got " + std::to_string(v));
}

void positive(double v, const char* name) {
  require(std::isfinite(v) && v > 0.0, ErrorKind::kConfig,
          std::string(name) + " must be positive, got " + std::to_string(v));
}

// Reads doc[key] into out when present; rejects type mismatches.
template <class T>
void read(const json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  try {
    out = doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("config key '") + key + "': " + e.what());
  }
}

void reject_unknown(const json& doc, const std::set<std::string>& known, const char* section) {
  require(doc.is_object(), ErrorKind::kConfig, std::string(section) + " must be an object");
  for (const auto& [key, value] : doc.items())
    require(known.count(key) == 1, ErrorKind::kConfig,
            std::string("unknown config key '") + section + "." + key + "'");
}

}  // namespace

void PipelineConfig::validate() const {
  require(dims.dim >= 1 && dims.point_dim >= 1, ErrorKind::kConfig, "dims must be positive");
  require(dims.heads >= 1 && dims.dim % dims.heads == 0, ErrorKind::kConfig,
          "dim must be divisible by heads");
  require(dims.layers >= 1, ErrorKind::kConfig, "decoder needs at least one layer");
  positive(dense_radius, "dense_radius");
  positive(instance_radius, "instance_radius");
  positive(tau, "tau");
  positive(sigma, "sigma");
  in_range(theta_iou, 0.0, 1.0, "theta_iou");
  in_range(theta_stab, 0.0, 1.0, "theta_stab");
  require(m == 0 || n_seeds == 0 || m <= n_seeds, ErrorKind::kConfig, "m must not exceed n_seeds");
  require(std::isfinite(logit_threshold), ErrorKind::kConfig, "logit_threshold must be finite");
  in_range(conf_threshold, 0.0, 1.0, "conf_threshold");
  for (double w : {loss_weights.bce, loss_weights.dice, loss_weights.confidence,
                   loss_weights.contrastive})
    in_range(w, 0.0, 1e6, "loss weight");
  positive(temperature, "temperature");
  positive(dice_smooth, "dice_smooth");
  require(!eval_thresholds.empty(), ErrorKind::kConfig, "need at least one eval threshold");
  for (double k : eval_thresholds) in_range(k, 0.0, 1.0, "eval threshold");
}

json to_json(const PipelineConfig& c) {
  const ScenePaths& p = c.paths;
  return json{
      {"scene",
       {{"cloud", p.cloud},
        {"point_features", p.point_features},
        {"partition", p.partition},
        {"views", p.views},
        {"dense_maps", p.dense_maps},
        {"token_grids", p.token_grids},
        {"masks", p.masks},
        {"text", p.text},
        {"params", p.params},
        {"sample", p.sample}}},
      {"model",
       {{"point_dim", c.dims.point_dim},
        {"dim", c.dims.dim},
        {"heads", c.dims.heads},
        {"layers", c.dims.layers}}},
      {"lifting",
       {{"dense_radius", c.dense_radius},
        {"instance_radius", c.instance_radius},
        {"tau", c.tau},
        {"multiview", c.multiview == MultiViewPooling::kGlobalMean ? "global" : "per_view"},
        {"sigma", c.sigma},
        {"theta_iou", c.theta_iou},
        {"theta_stab", c.theta_stab}}},
      {"selection",
       {{"n_seeds", c.n_seeds},
        {"m", c.m},
        {"relevance_pooling", c.relevance_pooling == RelevancePooling::kMax ? "max" : "mean"}}},
      {"prediction", {{"logit_threshold", c.logit_threshold}, {"conf_threshold", c.conf_threshold}}},
      {"loss",
       {{"bce", c.loss_weights.bce},
        {"dice", c.loss_weights.dice},
        {"confidence", c.loss_weights.confidence},
        {"contrastive", c.loss_weights.contrastive},
        {"temperature", c.temperature},
        {"dice_smooth", c.dice_smooth}}},
      {"eval_thresholds", c.eval_thresholds},
      {"toggles", {{"enable_vsd", c.enable_vsd}, {"enable_mlf", c.enable_mlf}}},
      {"rng_seed", c.rng_seed}};
}

PipelineConfig config_from_json(const json& doc) {
  PipelineConfig c;
  reject_unknown(doc, {"scene", "model", "lifting", "selection", "prediction", "loss",
                       "eval_thresholds", "toggles", "rng_seed"},
                 "config");
  if (doc.contains("scene")) {
    const json& s = doc.at("scene");
    reject_unknown(s, {"cloud", "point_features", "partition", "views", "dense_maps",
                       "token_grids", "masks", "text", "params", "sample"},
                   "scene");
    read(s, "cloud", c.paths.cloud);
    read(s, "point_features", c.paths.point_features);
    read(s, "partition", c.paths.partition);
    read(s, "views", c.paths.views);
    read(s, "dense_maps", c.paths.dense_maps);
    read(s, "token_grids", c.paths.token_grids);
    read(s, "masks", c.paths.masks);
    read(s, "text", c.paths.text);
    read(s, "params", c.paths.params);
    read(s, "sample", c.paths.sample);
  }
  if (doc.contains("model")) {
    const json& s = doc.at("model");
    reject_unknown(s, {"point_dim", "dim", "heads", "layers"}, "model");
    read(s, "point_dim", c.dims.point_dim);
    read(s, "dim", c.dims.dim);
    read(s, "heads", c.dims.heads);
    read(s, "layers", c.dims.layers);
  }
  if (doc.contains("lifting")) {
    const json& s = doc.at("lifting");
    reject_unknown(s, {"dense_radius", "instance_radius", "tau", "multiview", "sigma", "theta_iou",
                       "theta_stab"},
                   "lifting");
    read(s, "dense_radius", c.dense_radius);
    read(s, "instance_radius", c.instance_radius);
    read(s, "tau", c.tau);
    std::string mv = "global";
    read(s, "multiview", mv);
    require(mv == "global" || mv == "per_view", ErrorKind::kConfig,
            "lifting.multiview must be 'global' or 'per_view'");
    c.multiview = mv == "global" ? MultiViewPooling::kGlobalMean : MultiViewPooling::kPerViewMean;
    read(s, "sigma", c.sigma);
    read(s, "theta_iou", c.theta_iou);
    read(s, "theta_stab", c.theta_stab);
  }
  if (doc.contains("selection")) {
    const json& s = doc.at("selection");
    reject_unknown(s, {"n_seeds", "m", "relevance_pooling"}, "selection");
    read(s, "n_seeds", c.n_seeds);
    read(s, "m", c.m);
    std::string pool = "max";
    read(s, "relevance_pooling", pool);
    require(pool == "max" || pool == "mean", ErrorKind::kConfig,
            "selection.relevance_pooling must be 'max' or 'mean'");
    c.relevance_pooling = pool == "max" ? RelevancePooling::kMax : RelevancePooling::kMean;
  }
  if (doc.contains("prediction")) {
    const json& s = doc.at("prediction");
    reject_unknown(s, {"logit_threshold", "conf_threshold"}, "prediction");
    read(s, "logit_threshold", c.logit_threshold);
    read(s, "conf_threshold", c.conf_threshold);
  }
  if (doc.contains("loss")) {
    const json& s = doc.at("loss");
    reject_unknown(s, {"bce", "dice", "confidence", "contrastive", "temperature", "dice_smooth"},
                   "loss");
    read(s, "bce", c.loss_weights.bce);
    read(s, "dice", c.loss_weights.dice);
    read(s, "confidence", c.loss_weights.confidence);
    read(s, "contrastive", c.loss_weights.contrastive);
    read(s, "temperature", c.temperature);
    read(s, "dice_smooth", c.dice_smooth);
  }
  read(doc, "eval_thresholds", c.eval_thresholds);
  if (doc.contains("toggles")) {
    const json& s = doc.at("toggles");
    reject_unknown(s, {"enable_vsd", "enable_mlf"}, "toggles");
    read(s, "enable_vsd", c.enable_vsd);
    read(s, "enable_mlf", c.enable_mlf);
  }
  read(doc, "rng_seed", c.rng_seed);
  c.validate();
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return config_from_json(doc);
}

void save_config(const std::filesystem::path& path, const PipelineConfig& config) {
  io::write_file_atomic(path, to_json(config).dump(2) + "\n");
}

}  // namespace liftseg
