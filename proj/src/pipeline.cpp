// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "liftseg/error.hpp"
#include "liftseg/io.hpp"
#include "liftseg/reference.hpp"

namespace liftseg {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kValidation, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  io::write_file_atomic(path, doc.dump(2) + "\n");
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

// Kernel sets with one call surface so the composition below is shared.
struct ParallelKernels {
  static constexpr const char* kName = "parallel";
  static auto filter_masks(const auto&... a) { return liftseg::filter_masks(a...); }
  static auto gaussian_soften(const auto&... a) { return liftseg::gaussian_soften(a...); }
  static Matrix resize(const Matrix& m, std::size_t h, std::size_t w) {
    return liftseg::bilinear_resize(m, h, w);
  }
  static Tensor3 resize(const Tensor3& t, std::size_t h, std::size_t w) {
    return liftseg::bilinear_resize(t, h, w);
  }
  static auto masked_pool(const auto&... a) { return liftseg::masked_pool(a...); }
  static auto pool_point_features(const auto&... a) { return liftseg::pool_point_features(a...); }
  static auto superpoint_centroids(const auto&... a) {
    return liftseg::superpoint_centroids(a...);
  }
  static auto aggregate_dense(const auto&... a) { return liftseg::aggregate_dense(a...); }
  static auto aggregate_instance(const auto&... a) { return liftseg::aggregate_instance(a...); }
  static Matrix mlp(const Mlp2& m, const Matrix& x) { return liftseg::apply(m, x); }
  static auto adapter(const auto&... a) { return liftseg::adapter(a...); }
  static auto intra_modal_fuse(const auto&... a) { return liftseg::intra_modal_fuse(a...); }
  static auto cross_modal_gate(const auto&... a) { return liftseg::cross_modal_gate(a...); }
  static auto select_queries(const auto&... a) { return liftseg::select_queries(a...); }
  static auto instance_refine(const auto&... a) { return liftseg::instance_refine(a...); }
  static auto decode(const auto&... a) { return liftseg::decode(a...); }
  static auto predict_mask(const auto&... a) { return liftseg::predict_mask(a...); }
  static auto expand_mask(const auto&... a) { return liftseg::expand_mask(a...); }
};

struct ReferenceKernels {
  static constexpr const char* kName = "reference";
  static auto filter_masks(const auto&... a) { return reference::filter_masks(a...); }
  static auto gaussian_soften(const auto&... a) { return reference::gaussian_soften(a...); }
  static Matrix resize(const Matrix& m, std::size_t h, std::size_t w) {
    return reference::bilinear_resize(m, h, w);
  }
  static Tensor3 resize(const Tensor3& t, std::size_t h, std::size_t w) {
    return reference::bilinear_resize(t, h, w);
  }
  static auto masked_pool(const auto&... a) { return reference::masked_pool(a...); }
  static auto pool_point_features(const auto&... a) {
    return reference::pool_point_features(a...);
  }
  static auto superpoint_centroids(const auto&... a) {
    return reference::superpoint_centroids(a...);
  }
  static auto aggregate_dense(const auto&... a) { return reference::aggregate_dense(a...); }
  static auto aggregate_instance(const auto&... a) { return reference::aggregate_instance(a...); }
  static Matrix mlp(const Mlp2& m, const Matrix& x) { return reference::mlp(m, x); }
  static auto adapter(const auto&... a) { return reference::adapter(a...); }
  static auto intra_modal_fuse(const auto&... a) { return reference::intra_modal_fuse(a...); }
  static auto cross_modal_gate(const auto&... a) { return reference::cross_modal_gate(a...); }
  static auto select_queries(const auto&... a) { return reference::select_queries(a...); }
  static auto instance_refine(const auto&... a) { return reference::instance_refine(a...); }
  static auto decode(const auto&... a) { return reference::decode(a...); }
  static auto predict_mask(const auto&... a) { return reference::predict_mask(a...); }
  static auto expand_mask(const auto&... a) { return reference::expand_mask(a...); }
};

template <class F>
auto stage(const char* name, F&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(name, e);
  }
}

void validate_scene(const PipelineConfig& config, const SceneData& scene) {
  const std::size_t n = scene.cloud.size();
  const std::size_t dim = config.dims.dim;
  require(n > 0, ErrorKind::kValidation, "point cloud is empty");
  require(scene.point_features.rows() == n, ErrorKind::kValidation,
          "point feature rows (" + std::to_string(scene.point_features.rows()) +
              ") differ from point count (" + std::to_string(n) + ")");
  require(scene.point_features.cols() == config.dims.point_dim, ErrorKind::kValidation,
          "point feature width differs from model.point_dim");
  require(scene.point_features.all_finite(), ErrorKind::kValidation,
          "point features contain non-finite values");
  require(scene.partition.point_count() == n, ErrorKind::kValidation,
          "partition length differs from point count");
  const std::size_t nv = scene.views.size();
  require(nv >= 1, ErrorKind::kValidation, "scene has no views");
  require(scene.token_grids.size() == nv, ErrorKind::kValidation,
          "token grid count differs from view count");
  require(scene.masks.size() == nv, ErrorKind::kValidation, "mask set count differs from view count");
  require(scene.dense_maps.empty() || scene.dense_maps.size() == nv, ErrorKind::kValidation,
          "dense map count differs from view count");
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& view = scene.views[v];
    const auto tag = "view " + std::to_string(v) + ": ";
    require(scene.token_grids[v].values.dim() == dim, ErrorKind::kValidation,
            tag + "token width differs from model.dim");
    require(scene.token_grids[v].values.all_finite(), ErrorKind::kValidation,
            tag + "token grid contains non-finite values");
    if (!scene.dense_maps.empty()) {
      const Tensor3& d = scene.dense_maps[v].values;
      require(d.height() == view.height() && d.width() == view.width() && d.dim() == dim,
              ErrorKind::kValidation, tag + "dense map shape differs from the view");
      require(d.all_finite(), ErrorKind::kValidation, tag + "dense map contains non-finite values");
    }
    for (const auto& m : scene.masks[v]) {
      validate(m);
      require(m.mask.height == view.height() && m.mask.width == view.width(),
              ErrorKind::kValidation, tag + "instance mask size differs from the view");
    }
  }
  require(scene.text.tokens.rows() >= 1 && scene.text.tokens.cols() == dim, ErrorKind::kValidation,
          "text embedding must be N_T x model.dim with N_T >= 1");
  require(scene.text.tokens.all_finite(), ErrorKind::kValidation,
          "text embedding contains non-finite values");
  if (scene.params) {
    require(scene.params->dims == config.dims, ErrorKind::kValidation,
            "parameter bundle dims differ from the config");
    scene.params->validate();
  }
  if (scene.sample) {
    require(scene.sample->ground_truth.size() == n, ErrorKind::kValidation,
            "ground truth length differs from point count");
    validate(EvalRecord{scene.sample->id, BinaryMask(n, 0), scene.sample->ground_truth,
                        scene.sample->category, scene.sample->has_distractor});
  }
}

json summary_json(const MetricSummary& s) {
  json acc = json::object();
  for (const auto& [k, v] : s.acc) {
    // Fixed key format so reports diff cleanly.
    char key[32];
    std::snprintf(key, sizeof key, "%.2f", k);
    acc[key] = v;
  }
  return json{{"count", s.count}, {"miou", s.miou}, {"acc", acc}};
}

json stats_json(std::span<const double> values) {
  if (values.empty()) return json{{"count", 0}};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
                      static_cast<double>(sorted.size());
  return json{{"count", values.size()}, {"min", *lo}, {"max", *hi}, {"mean", mean}};
}

double sigmoid(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

template <class K>
json compute_losses(const PipelineConfig& config, const SceneData& scene,
                    const PipelineResult& r) {
  const SampleInfo& sample = *scene.sample;
  const auto members = scene.partition.members();
  const std::size_t n_s = scene.partition.count();
  // Superpoint target: majority vote of member labels.
  std::vector<double> target(n_s, 0.0);
  std::vector<bool> positive(n_s, false);
  for (std::size_t s = 0; s < n_s; ++s) {
    std::size_t on = 0;
    for (std::size_t p : members[s]) on += sample.ground_truth[p];
    positive[s] = 2 * on > members[s].size();
    target[s] = positive[s] ? 1.0 : 0.0;
  }
  const Matrix& logits = r.decoded.logits;
  const std::size_t m = logits.rows();
  double bce = 0.0;
  double dice = 0.0;
  std::vector<double> actual_iou(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto row = logits.row(i);
    bce += bce_loss(row, target).loss;
    std::vector<double> probs(n_s);
    BinaryMask sp(n_s, 0);
    for (std::size_t s = 0; s < n_s; ++s) {
      probs[s] = sigmoid(row[s]);
      sp[s] = row[s] > config.logit_threshold ? 1 : 0;
    }
    dice += dice_loss(probs, target, config.dice_smooth).loss;
    actual_iou[i] = iou(K::expand_mask(sp, scene.partition), sample.ground_truth);
  }
  bce /= static_cast<double>(m);
  dice /= static_cast<double>(m);
  const double conf = confidence_loss(r.decoded.confidence, actual_iou).loss;

  std::vector<bool> query_positive(m);
  bool any_positive = false;
  for (std::size_t i = 0; i < m; ++i) {
    query_positive[i] = positive[r.queries.source[i]];
    any_positive = any_positive || query_positive[i];
  }
  json contrastive = nullptr;
  double total = config.loss_weights.bce * bce + config.loss_weights.dice * dice +
                 config.loss_weights.confidence * conf;
  if (any_positive) {
    std::vector<double> pooled(scene.text.tokens.cols(), 0.0);
    for (std::size_t t = 0; t < scene.text.tokens.rows(); ++t)
      for (std::size_t c = 0; c < pooled.size(); ++c) pooled[c] += scene.text.tokens(t, c);
    for (double& v : pooled) v /= static_cast<double>(scene.text.tokens.rows());
    const double value =
        contrastive_alignment(r.queries.embeddings, pooled, query_positive, config.temperature)
            .loss;
    contrastive = value;
    total += config.loss_weights.contrastive * value;
  }
  return json{{"bce", bce},   {"dice", dice}, {"confidence", conf}, {"contrastive", contrastive},
              {"total", total}};
}

template <class K>
PipelineResult run_with(const PipelineConfig& config, const SceneData& scene) {
  stage("validate", [&] {
    config.validate();
    validate_scene(config, scene);
    return 0;
  });
  const ParameterBundle params =
      scene.params ? *scene.params : ParameterBundle::initialize(config.dims, config.rng_seed);
  const std::size_t nv = scene.views.size();
  const std::size_t dim = config.dims.dim;
  PipelineResult r;

  const std::vector<FeatureMap> maps = stage("upsample", [&] {
    if (!scene.dense_maps.empty()) return scene.dense_maps;
    std::vector<FeatureMap> out;
    for (std::size_t v = 0; v < nv; ++v)
      out.push_back(FeatureMap{K::resize(scene.token_grids[v].values, scene.views[v].height(),
                                         scene.views[v].width())});
    return out;
  });

  LiftingOptions dense_opts{config.dense_radius, config.tau, config.multiview, dim};
  r.dense = stage("aggregate_dense", [&] {
    return K::aggregate_dense(scene.cloud, scene.partition, scene.views, maps, dense_opts);
  });

  std::vector<ViewInstances> instances(nv);
  Matrix bank(0, dim);
  std::size_t kept_total = 0;
  std::size_t degenerate = 0;
  if (config.enable_vsd) {
    stage("instance_masks", [&] {
      std::vector<std::vector<double>> rows;
      for (std::size_t v = 0; v < nv; ++v) {
        const TokenGrid& tokens = scene.token_grids[v];
        const auto kept = K::filter_masks(scene.masks[v], config.theta_iou, config.theta_stab);
        kept_total += kept.size();
        for (const auto& mask : kept) {
          const SoftMask soft = K::gaussian_soften(mask, config.sigma);
          const SoftMask at_tokens{
              K::resize(soft.weights, tokens.values.height(), tokens.values.width())};
          try {
            auto f = K::masked_pool(tokens, at_tokens);
            instances[v].masks.push_back(soft);
            instances[v].features.push_back(f);
            rows.push_back(std::move(f));
          } catch (const Error& e) {
            if (e.kind() != ErrorKind::kDegenerateMask) throw;
            ++degenerate;
          }
        }
      }
      if (!rows.empty()) bank = Matrix::from_rows(rows);
      return 0;
    });
    LiftingOptions inst_opts{config.instance_radius, config.tau, config.multiview, dim};
    r.instance = stage("aggregate_instance", [&] {
      return K::aggregate_instance(scene.cloud, scene.partition, scene.views, instances, inst_opts);
    });
  }

  const Matrix v3d = stage("adapter", [&] {
    return K::adapter(K::pool_point_features(scene.point_features, scene.partition), params);
  });
  const Matrix v2d = stage("intra_modal_fuse", [&] {
    if (config.enable_vsd) return K::intra_modal_fuse(r.dense.values, r.instance.values, params);
    return K::mlp(params.dense_mlp, r.dense.values);
  });
  r.fusion = stage("cross_modal_gate", [&] {
    if (config.enable_mlf) return K::cross_modal_gate(v2d, v3d, params);
    GateOutput sum{v2d, {}, {}};
    for (std::size_t i = 0; i < sum.unified.size(); ++i) sum.unified.data()[i] += v3d.data()[i];
    return sum;
  });

  const std::size_t n_s = scene.partition.count();
  const std::size_t n_seeds = config.n_seeds ? config.n_seeds : std::min<std::size_t>(256, n_s);
  const std::size_t m = config.m ? config.m : std::min<std::size_t>(32, n_seeds);
  r.queries = stage("select_queries", [&] {
    const auto centroids = K::superpoint_centroids(scene.cloud, scene.partition);
    auto q = K::select_queries(r.fusion.unified, centroids, scene.text, params, n_seeds, m,
                               config.relevance_pooling);
    if (config.enable_vsd) q = K::instance_refine(q, bank, params);
    return q;
  });
  r.decoded = stage("decode", [&] {
    return K::decode(r.queries, r.fusion.unified, params, config.dims.layers);
  });
  r.prediction = stage("predict_mask", [&] {
    return K::predict_mask(r.decoded, scene.partition, config.logit_threshold,
                           config.conf_threshold);
  });

  json report;
  report["backend"] = K::kName;
  report["config"] = to_json(config);
  report["counts"] = json{{"points", scene.cloud.size()},
                          {"superpoints", n_s},
                          {"views", nv},
                          {"instance_masks_kept", kept_total},
                          {"instance_masks_degenerate", degenerate},
                          {"n_seeds", n_seeds},
                          {"queries", m},
                          {"predicted_points", std::count(r.prediction.begin(),
                                                          r.prediction.end(), std::uint8_t{1})}};
  report["dense_coverage"] = stats_json(r.dense.coverage);
  if (config.enable_vsd) report["instance_coverage"] = stats_json(r.instance.coverage);
  if (config.enable_mlf) report["gate_w2d"] = stats_json(r.fusion.w2d);
  report["queries"] = json{{"source", r.queries.source},
                           {"relevance", r.queries.relevance},
                           {"confidence", r.decoded.confidence}};
  if (scene.sample) {
    stage("evaluate", [&] {
      const SampleInfo& s = *scene.sample;
      r.evaluation = evaluate({EvalRecord{s.id, r.prediction, s.ground_truth, s.category,
                                          s.has_distractor}},
                              config.eval_thresholds);
      report["sample"] = json{{"id", s.id},
                              {"category", std::string(to_string(s.category))},
                              {"has_distractor", s.has_distractor},
                              {"iou", r.evaluation->per_record_iou.front()}};
      report["evaluation"] = to_json(*r.evaluation);
      return 0;
    });
    report["losses"] = stage("losses", [&] { return compute_losses<K>(config, scene, r); });
  }
  r.report = std::move(report);
  return r;
}

}  // namespace

SceneData load_scene(const PipelineConfig& config, const fs::path& base_dir) {
  const ScenePaths& p = config.paths;
  const auto at = [&](const std::string& rel) { return resolve(base_dir, rel); };
  SceneData scene;
  scene.cloud = io::read_ply(at(p.cloud));
  scene.point_features = io::to_matrix(io::read_tensor(at(p.point_features)));
  scene.partition = io::read_partition(at(p.partition));
  for (const auto& v : p.views) scene.views.push_back(io::read_view(at(v)));
  for (const auto& d : p.dense_maps)
    scene.dense_maps.push_back(FeatureMap{io::to_tensor3(io::read_tensor(at(d)))});
  for (const auto& t : p.token_grids)
    scene.token_grids.push_back(TokenGrid{io::to_tensor3(io::read_tensor(at(t)))});
  for (const auto& m : p.masks) scene.masks.push_back(io::read_mask_manifest(at(m)));
  scene.text = TextEmbedding{io::to_matrix(io::read_tensor(at(p.text)))};
  if (!p.params.empty()) scene.params = io::read_parameters(at(p.params));
  if (!p.sample.empty()) {
    const fs::path sample_path = at(p.sample);
    const json doc = read_json(sample_path);
    try {
      SampleInfo s;
      s.id = doc.at("id").get<std::string>();
      s.category = parse_category(doc.at("category").get<std::string>());
      s.has_distractor = doc.at("has_distractor").get<bool>();
      s.ground_truth = io::to_mask(io::read_tensor(
          sample_path.parent_path() / doc.at("ground_truth").get<std::string>()));
      scene.sample = std::move(s);
    } catch (const json::exception& e) {
      fail(ErrorKind::kValidation, sample_path.string() + ": " + e.what());
    }
  }
  return scene;
}

void write_scene(const fs::path& dir, const SceneData& scene, PipelineConfig& config) {
  ScenePaths p;
  fs::create_directories(dir);
  p.cloud = "scene.ply";
  io::write_ply(dir / p.cloud, scene.cloud);
  p.point_features = "point_features.htns";
  const Matrix& pf = scene.point_features;
  io::write_tensor(dir / p.point_features, io::make_f32({pf.rows(), pf.cols()}, pf.data()));
  p.partition = "partition.json";
  io::write_partition(dir / p.partition, "partition.htns", scene.partition);
  const auto tensor3 = [](const Tensor3& t) {
    return io::make_f32({t.height(), t.width(), t.dim()}, t.data());
  };
  for (std::size_t v = 0; v < scene.views.size(); ++v) {
    const std::string i = std::to_string(v);
    p.views.push_back("views/view_" + i + ".json");
    io::write_view(dir / p.views.back(), "depth_" + i + ".htns", scene.views[v]);
    if (v < scene.dense_maps.size()) {
      p.dense_maps.push_back("features/dense_" + i + ".htns");
      io::write_tensor(dir / p.dense_maps.back(), tensor3(scene.dense_maps[v].values));
    }
    p.token_grids.push_back("features/tokens_" + i + ".htns");
    io::write_tensor(dir / p.token_grids.back(), tensor3(scene.token_grids[v].values));
    p.masks.push_back("masks/view_" + i + ".json");
    io::write_mask_manifest(dir / p.masks.back(), "view_" + i, scene.masks[v]);
  }
  p.text = "text.htns";
  const Matrix& t = scene.text.tokens;
  io::write_tensor(dir / p.text, io::make_f32({t.rows(), t.cols()}, t.data()));
  if (scene.params) {
    p.params = "params";
    io::write_parameters(dir / p.params, *scene.params);
  }
  if (scene.sample) {
    p.sample = "sample.json";
    const SampleInfo& s = *scene.sample;
    io::write_tensor(dir / "ground_truth.htns", io::make_u8({s.ground_truth.size()}, s.ground_truth));
    write_json(dir / p.sample, json{{"id", s.id},
                                    {"category", std::string(to_string(s.category))},
                                    {"has_distractor", s.has_distractor},
                                    {"ground_truth", "ground_truth.htns"}});
  }
  config.paths = std::move(p);
}

PipelineResult run_pipeline(const PipelineConfig& config, const SceneData& scene,
                            Backend backend) {
  return backend == Backend::kParallel ? run_with<ParallelKernels>(config, scene)
                                       : run_with<ReferenceKernels>(config, scene);
}

void write_outputs(const fs::path& out_dir, const PipelineResult& result) {
  fs::create_directories(out_dir);
  io::write_tensor(out_dir / "prediction.htns",
                   io::make_u8({result.prediction.size()}, result.prediction));
  const Matrix& logits = result.decoded.logits;
  io::write_tensor(out_dir / "logits.htns",
                   io::make_f32({logits.rows(), logits.cols()}, logits.data()));
  io::write_tensor(out_dir / "confidence.htns",
                   io::make_f32({result.decoded.confidence.size()}, result.decoded.confidence));
  write_json(out_dir / "report.json", result.report);
}

json to_json(const EvalReport& report) {
  json by_category = json::object();
  for (const auto& [cat, s] : report.by_category)
    by_category[std::string(to_string(cat))] = summary_json(s);
  json by_distractor = json::object();
  for (const auto& [cat, split] : report.by_distractor) {
    json inner = json::object();
    for (const auto& [flag, s] : split) inner[flag ? "with" : "without"] = summary_json(s);
    by_distractor[std::string(to_string(cat))] = inner;
  }
  return json{{"overall", summary_json(report.overall)},
              {"by_category", by_category},
              {"by_distractor", by_distractor},
              {"per_record_iou", report.per_record_iou}};
}

EvalReport evaluate_manifest(const fs::path& manifest_path, std::vector<double>* thresholds_out) {
  const json doc = read_json(manifest_path);
  const fs::path base = manifest_path.parent_path();
  std::vector<EvalRecord> records;
  std::vector<double> thresholds{0.25, 0.5};
  try {
    if (doc.contains("thresholds")) thresholds = doc.at("thresholds").get<std::vector<double>>();
    for (const auto& rec : doc.at("records")) {
      EvalRecord r;
      r.sample_id = rec.at("id").get<std::string>();
      r.prediction = io::to_mask(io::read_tensor(resolve(base, rec.at("prediction"))));
      r.ground_truth = io::to_mask(io::read_tensor(resolve(base, rec.at("ground_truth"))));
      r.category = parse_category(rec.at("category").get<std::string>());
      r.has_distractor = rec.value("has_distractor", false);
      records.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kValidation, manifest_path.string() + ": " + e.what());
  }
  if (thresholds_out) *thresholds_out = thresholds;
  return evaluate(records, thresholds);
}

}  // namespace liftseg
