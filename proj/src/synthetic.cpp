// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <random>

#include "liftseg/error.hpp"
#include "liftseg/io.hpp"

namespace liftseg {
namespace {

using nlohmann::json;

// Portable draws on top of mt19937_64; std distributions differ across
// standard libraries and fixtures must be byte-identical everywhere.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    if (spare_) {
      const double v = *spare_;
      spare_.reset();
      return v;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

double to_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Vec3 to_f32(Vec3 p) { return {to_f32(p.x), to_f32(p.y), to_f32(p.z)}; }

Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

Vec3 normalized(Vec3 v) { return (1.0 / std::sqrt(dot(v, v))) * v; }

// Orthonormal rows spread over every channel (Gram-Schmidt on Gaussian draws).
Matrix orthonormal_rows(std::size_t count, std::size_t dim, Rng& rng) {
  Matrix out(count, dim);
  for (std::size_t i = 0; i < count; ++i) {
    auto row = out.row(i);
    for (double& v : row) v = rng.normal();
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t j = 0; j < i; ++j) {
        const auto prev = out.row(j);
        double proj = 0.0;
        for (std::size_t c = 0; c < dim; ++c) proj += row[c] * prev[c];
        for (std::size_t c = 0; c < dim; ++c) row[c] -= proj * prev[c];
      }
    }
    double norm = 0.0;
    for (double v : row) norm += v * v;
    norm = std::sqrt(norm);
    for (double& v : row) v /= norm;
  }
  return out;
}

// Entry distance along the ray, or infinity when the box is missed.
double ray_box(Vec3 origin, Vec3 dir, const Box& box) {
  double t0 = 0.0;
  double t1 = std::numeric_limits<double>::infinity();
  const double o[3] = {origin.x, origin.y, origin.z};
  const double d[3] = {dir.x, dir.y, dir.z};
  const double lo[3] = {box.min.x, box.min.y, box.min.z};
  const double hi[3] = {box.max.x, box.max.y, box.max.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::numeric_limits<double>::infinity();
      continue;
    }
    double ta = (lo[a] - o[a]) / d[a];
    double tb = (hi[a] - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return std::numeric_limits<double>::infinity();
  }
  return t0 > 0.0 ? t0 : std::numeric_limits<double>::infinity();
}

// Five faces (no bottom): top, -x, +x, -y, +y. Each is sampled uniformly.
Vec3 face_point(const Box& b, int face, double s, double t) {
  const auto lerp = [](double lo, double hi, double f) { return lo + (hi - lo) * f; };
  switch (face) {
    case 0: return {lerp(b.min.x, b.max.x, s), lerp(b.min.y, b.max.y, t), b.max.z};
    case 1: return {b.min.x, lerp(b.min.y, b.max.y, s), lerp(b.min.z, b.max.z, t)};
    case 2: return {b.max.x, lerp(b.min.y, b.max.y, s), lerp(b.min.z, b.max.z, t)};
    case 3: return {lerp(b.min.x, b.max.x, s), b.min.y, lerp(b.min.z, b.max.z, t)};
    default: return {lerp(b.min.x, b.max.x, s), b.max.y, lerp(b.min.z, b.max.z, t)};
  }
}

double face_area(const Box& b, int face) {
  const Vec3 e = b.max - b.min;
  if (face == 0) return e.x * e.y;
  if (face <= 2) return e.y * e.z;
  return e.x * e.z;
}

constexpr int kFaces = 5;

CameraView make_camera(Vec3 eye, Vec3 target, const SyntheticSceneSpec& spec, Matrix depth) {
  const Vec3 forward = normalized(target - eye);
  const Vec3 right = normalized(cross(forward, {0.0, 0.0, 1.0}));
  const Vec3 down = cross(forward, right);
  Mat4 pose = identity4();
  const Vec3 axes[3] = {right, down, forward};
  for (int c = 0; c < 3; ++c) {
    pose[0][c] = axes[c].x;
    pose[1][c] = axes[c].y;
    pose[2][c] = axes[c].z;
  }
  pose[0][3] = eye.x;
  pose[1][3] = eye.y;
  pose[2][3] = eye.z;
  const double w = static_cast<double>(spec.image_width);
  const double h = static_cast<double>(spec.image_height);
  Mat3 k{};
  k[0][0] = k[1][1] = 0.9 * w;
  k[0][2] = (w - 1.0) / 2.0;
  k[1][2] = (h - 1.0) / 2.0;
  k[2][2] = 1.0;
  return CameraView(k, pose, std::move(depth));
}


}  // namespace

void SyntheticSceneSpec::validate() const {
  require(object_count >= 1, ErrorKind::kConfig, "scene needs at least one object");
  require(points_per_object >= kFaces, ErrorKind::kConfig,
          "points_per_object must cover all " + std::to_string(kFaces) + " faces");
  require(extent_min > 0.0 && extent_max >= extent_min, ErrorKind::kConfig,
          "object extents must satisfy 0 < min <= max");
  require(extent_max < 1.0, ErrorKind::kConfig, "object extents must stay below 1 m");
  require(feature_dim >= 3 * object_count + 2, ErrorKind::kConfig,
          "feature_dim too small for " + std::to_string(object_count) + " object signatures");
  require(view_count >= 1, ErrorKind::kConfig, "scene needs at least one view");
  require(image_width >= 8 && image_height >= 8, ErrorKind::kConfig, "image must be at least 8x8");
  require(patch_size >= 1 && image_width % patch_size == 0 && image_height % patch_size == 0,
          ErrorKind::kConfig, "patch_size must divide the image size");
  require(noise >= 0.0 && std::isfinite(noise), ErrorKind::kConfig, "noise must be >= 0");
  for (std::size_t t : targets)
    require(t < object_count, ErrorKind::kConfig, "target " + std::to_string(t) + " out of range");
  std::vector<std::size_t> sorted = targets;
  std::sort(sorted.begin(), sorted.end());
  require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), ErrorKind::kConfig,
          "duplicate target ids");
  if (distractor && !targets.empty()) {
    require(object_count >= 2, ErrorKind::kConfig, "a distractor needs a second object");
    require(std::find(targets.begin(), targets.end(), object_count - 1) == targets.end(),
            ErrorKind::kConfig, "the distractor (last object) cannot be a target");
  }
}

json to_json(const SyntheticSceneSpec& spec) {
  return json{{"object_count", spec.object_count},
              {"points_per_object", spec.points_per_object},
              {"extent_min", spec.extent_min},
              {"extent_max", spec.extent_max},
              {"feature_dim", spec.feature_dim},
              {"view_count", spec.view_count},
              {"image_width", spec.image_width},
              {"image_height", spec.image_height},
              {"patch_size", spec.patch_size},
              {"noise", spec.noise},
              {"targets", spec.targets},
              {"distractor", spec.distractor}};
}

SyntheticSceneSpec scene_spec_from_json(const json& doc) {
  require(doc.is_object(), ErrorKind::kConfig, "scene spec must be a JSON object");
  SyntheticSceneSpec spec;
  try {
    for (const auto& [key, value] : doc.items()) {
      if (key == "object_count") spec.object_count = value.get<std::size_t>();
      else if (key == "points_per_object") spec.points_per_object = value.get<std::size_t>();
      else if (key == "extent_min") spec.extent_min = value.get<double>();
      else if (key == "extent_max") spec.extent_max = value.get<double>();
      else if (key == "feature_dim") spec.feature_dim = value.get<std::size_t>();
      else if (key == "view_count") spec.view_count = value.get<std::size_t>();
      else if (key == "image_width") spec.image_width = value.get<std::size_t>();
      else if (key == "image_height") spec.image_height = value.get<std::size_t>();
      else if (key == "patch_size") spec.patch_size = value.get<std::size_t>();
      else if (key == "noise") spec.noise = value.get<double>();
      else if (key == "targets") spec.targets = value.get<std::vector<std::size_t>>();
      else if (key == "distractor") spec.distractor = value.get<bool>();
      else fail(ErrorKind::kConfig, "unknown scene spec key '" + key + "'");
    }
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, std::string("scene spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

ParameterBundle signature_matching_parameters(const FusionDims& dims,
                                              const MatchingCalibration& cal) {
  ParameterBundle p = ParameterBundle::zeros(dims);
  const auto eye = [](Matrix& w, double gain) {
    for (std::size_t i = 0; i < std::min(w.rows(), w.cols()); ++i) w(i, i) = gain;
  };
  // relu(x + s) - s == x while every entry stays above -s.
  const auto pass_through = [&](Mlp2& mlp) {
    eye(mlp.fc1.weight, 1.0);
    std::fill(mlp.fc1.bias.data().begin(), mlp.fc1.bias.data().end(), cal.mlp_shift);
    eye(mlp.fc2.weight, 1.0);
    std::fill(mlp.fc2.bias.data().begin(), mlp.fc2.bias.data().end(), -cal.mlp_shift);
  };
  const auto matcher = [&](AttentionParams& a, double output_gain) {
    eye(a.query.weight, cal.attention_gain);
    eye(a.key.weight, cal.attention_gain);
    eye(a.value.weight, 1.0);
    eye(a.output.weight, output_gain);
  };
  pass_through(p.adapter);
  pass_through(p.dense_mlp);
  pass_through(p.instance_mlp);
  matcher(p.intra_attention, 1.0);
  matcher(p.refine_attention, 1.0);
  eye(p.select_candidate.weight, 1.0);
  eye(p.select_text.weight, 1.0);
  for (auto& layer : p.decoder) matcher(layer.cross, cal.decoder_cross_gain);
  p.confidence.relevance_weight(0, 0) = cal.relevance_gain;
  p.confidence.affine.bias(0, 0) = -cal.relevance_gain * cal.relevance_threshold;
  p.for_each([](const std::string&, Matrix& m) {
    for (double& v : m.data()) v = to_f32(v);
  });
  return p;
}

SyntheticScene generate_scene(const SyntheticSceneSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const std::size_t n_obj = spec.object_count;
  const std::size_t dim = spec.feature_dim;
  SyntheticScene out;

  // Layout: jittered grid, 1.3 m pitch, centered on the origin.
  const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_obj))));
  const std::size_t grid_rows = (n_obj + cols - 1) / cols;
  constexpr double kPitch = 1.3;
  for (std::size_t k = 0; k < n_obj; ++k) {
    const double cx = (static_cast<double>(k % cols) - (static_cast<double>(cols) - 1) / 2) * kPitch +
                      rng.uniform(-0.1, 0.1);
    const double cy =
        (static_cast<double>(k / cols) - (static_cast<double>(grid_rows) - 1) / 2) * kPitch +
        rng.uniform(-0.1, 0.1);
    const Vec3 ext{rng.uniform(spec.extent_min, spec.extent_max),
                   rng.uniform(spec.extent_min, spec.extent_max),
                   rng.uniform(spec.extent_min, spec.extent_max)};
    out.boxes.push_back(
        {to_f32(Vec3{cx - ext.x / 2, cy - ext.y / 2, 0.0}), to_f32(Vec3{cx + ext.x / 2, cy + ext.y / 2, ext.z})});
  }

  // Feature basis: class, appearance and geometry directions per object, then
  // one direction for zero-target text and one for filler tokens.
  const Matrix basis = orthonormal_rows(3 * n_obj + 2, dim, rng);
  const auto basis_row = [&](std::size_t r) { return basis.row(r); };
  out.object_class.resize(n_obj);
  for (std::size_t k = 0; k < n_obj; ++k) out.object_class[k] = k;
  const bool has_distractor = spec.distractor && !spec.targets.empty();
  if (has_distractor) out.object_class[n_obj - 1] = out.object_class[spec.targets.front()];
  out.signatures = Matrix(n_obj, dim);
  for (std::size_t k = 0; k < n_obj; ++k) {
    const auto cls = basis_row(out.object_class[k]);
    const auto app = basis_row(n_obj + k);
    for (std::size_t c = 0; c < dim; ++c)
      out.signatures(k, c) = (cls[c] + app[c]) / std::numbers::sqrt2;
  }
  constexpr double kGeometryGain = 3.0;

  // Points, colors, superpoints (one per face) and 3D features.
  std::vector<Vec3> positions;
  std::vector<Vec3> colors;
  std::vector<std::int32_t> assignment;
  std::vector<double> feats;
  for (std::size_t k = 0; k < n_obj; ++k) {
    const Vec3 color{std::round(rng.uniform(0.2, 0.9) * 255) / 255,
                     std::round(rng.uniform(0.2, 0.9) * 255) / 255,
                     std::round(rng.uniform(0.2, 0.9) * 255) / 255};
    double total_area = 0.0;
    for (int f = 0; f < kFaces; ++f) total_area += face_area(out.boxes[k], f);
    std::size_t remaining = spec.points_per_object;
    for (int f = 0; f < kFaces; ++f) {
      std::size_t count = f + 1 == kFaces
                              ? remaining
                              : static_cast<std::size_t>(std::round(
                                    static_cast<double>(spec.points_per_object) *
                                    face_area(out.boxes[k], f) / total_area));
      count = std::clamp<std::size_t>(count, 1, remaining - static_cast<std::size_t>(kFaces - 1 - f));
      remaining -= count;
      for (std::size_t i = 0; i < count; ++i) {
        const double s = rng.uniform();
        const double t = rng.uniform();
        positions.push_back(to_f32(face_point(out.boxes[k], f, s, t)));
        colors.push_back(color);
        assignment.push_back(static_cast<std::int32_t>(k * kFaces + static_cast<std::size_t>(f)));
        out.point_object.push_back(k);
        const auto cls = basis_row(out.object_class[k]);
        const auto geo = basis_row(2 * n_obj + k);
        for (std::size_t c = 0; c < dim; ++c)
          feats.push_back(to_f32(cls[c] + kGeometryGain * geo[c] + spec.noise * rng.normal()));
      }
    }
  }
  const std::size_t n_points = positions.size();
  out.scene.cloud = PointCloud(positions, colors);
  out.scene.point_features = Matrix(n_points, dim, std::move(feats));
  out.scene.partition = SuperpointPartition(assignment, n_obj * kFaces);

  // Views: elevated cameras on a circle looking at the scene center.
  const std::size_t w = spec.image_width;
  const std::size_t h = spec.image_height;
  const std::size_t gw = w / spec.patch_size;
  const std::size_t gh = h / spec.patch_size;
  const Vec3 target{0.0, 0.0, 0.2};
  for (std::size_t v = 0; v < spec.view_count; ++v) {
    const double azimuth = std::numbers::pi / 4 +
                           2 * std::numbers::pi * static_cast<double>(v) /
                               static_cast<double>(spec.view_count) +
                           rng.uniform(-0.15, 0.15);
    const double radius = rng.uniform(2.8, 3.2);
    const Vec3 eye{radius * std::cos(azimuth), radius * std::sin(azimuth), rng.uniform(1.8, 2.0)};
    // Placeholder depth to obtain the pose, then render through it.
    const CameraView probe = make_camera(eye, target, spec, Matrix(h, w));
    const Mat3& kmat = probe.intrinsics();
    const Mat4& pose = probe.extrinsics();
    Matrix depth(h, w);
    std::vector<int> owner(h * w, -1);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const Vec3 dir_cam{(static_cast<double>(x) - kmat[0][2]) / kmat[0][0],
                           (static_cast<double>(y) - kmat[1][2]) / kmat[1][1], 1.0};
        const Vec3 dir{pose[0][0] * dir_cam.x + pose[0][1] * dir_cam.y + pose[0][2] * dir_cam.z,
                       pose[1][0] * dir_cam.x + pose[1][1] * dir_cam.y + pose[1][2] * dir_cam.z,
                       pose[2][0] * dir_cam.x + pose[2][1] * dir_cam.y + pose[2][2] * dir_cam.z};
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < n_obj; ++k) {
          const double t = ray_box(eye, dir, out.boxes[k]);
          if (t < best) {
            best = t;
            owner[y * w + x] = static_cast<int>(k);
          }
        }
        // dir_cam has unit z, so the ray parameter is the camera-frame depth.
        if (std::isfinite(best)) depth(y, x) = to_f32(best);
      }
    }
    out.scene.views.push_back(make_camera(eye, target, spec, std::move(depth)));

    FeatureMap dense{Tensor3(h, w, dim)};
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const int k = owner[y * w + x];
        if (k < 0) continue;
        auto px = dense.values.pixel(y, x);
        const auto sig = out.signatures.row(static_cast<std::size_t>(k));
        for (std::size_t c = 0; c < dim; ++c) px[c] = to_f32(sig[c] + spec.noise * rng.normal());
      }
    TokenGrid tokens{Tensor3(gh, gw, dim)};
    const double inv_area = 1.0 / static_cast<double>(spec.patch_size * spec.patch_size);
    for (std::size_t ty = 0; ty < gh; ++ty)
      for (std::size_t tx = 0; tx < gw; ++tx) {
        auto tok = tokens.values.pixel(ty, tx);
        for (std::size_t y = ty * spec.patch_size; y < (ty + 1) * spec.patch_size; ++y)
          for (std::size_t x = tx * spec.patch_size; x < (tx + 1) * spec.patch_size; ++x) {
            const auto px = dense.values.pixel(y, x);
            for (std::size_t c = 0; c < dim; ++c) tok[c] += px[c];
          }
        for (double& c : tok) c = to_f32(c * inv_area);
      }
    out.scene.dense_maps.push_back(std::move(dense));
    out.scene.token_grids.push_back(std::move(tokens));

    // Confident masks for visible objects plus one low-quality spurious mask.
    std::vector<InstanceMask> masks;
    for (std::size_t k = 0; k < n_obj; ++k) {
      InstanceMask m{ByteImage(h, w), 0.0, 0.0};
      std::size_t area = 0;
      for (std::size_t i = 0; i < h * w; ++i)
        if (owner[i] == static_cast<int>(k)) {
          m.mask.data[i] = 1;
          ++area;
        }
      if (area < 4) continue;
      m.pred_iou = to_f32(rng.uniform(0.85, 1.0));
      m.stability = to_f32(rng.uniform(0.92, 1.0));
      masks.push_back(std::move(m));
    }
    InstanceMask spurious{ByteImage(h, w), to_f32(rng.uniform(0.3, 0.75)),
                          to_f32(rng.uniform(0.5, 0.85))};
    const auto y0 = static_cast<std::size_t>(rng.uniform() * static_cast<double>(h * 3 / 4));
    const auto x0 = static_cast<std::size_t>(rng.uniform() * static_cast<double>(w * 3 / 4));
    for (std::size_t y = y0; y < y0 + h / 4; ++y)
      for (std::size_t x = x0; x < x0 + w / 4; ++x) spurious.mask.at(y, x) = 1;
    masks.push_back(std::move(spurious));
    out.scene.masks.push_back(std::move(masks));
  }

  // Text: one token per target signature (or the zero-target direction) plus
  // a filler token.
  const std::size_t n_tok = std::max<std::size_t>(1, spec.targets.size()) + 1;
  Matrix text(n_tok, dim);
  for (std::size_t i = 0; i + 1 < n_tok; ++i) {
    const auto src = spec.targets.empty() ? basis_row(3 * n_obj) : out.signatures.row(spec.targets[i]);
    for (std::size_t c = 0; c < dim; ++c) text(i, c) = to_f32(src[c]);
  }
  for (std::size_t c = 0; c < dim; ++c) text(n_tok - 1, c) = to_f32(basis_row(3 * n_obj + 1)[c]);
  out.scene.text = TextEmbedding{std::move(text)};

  SampleInfo sample;
  sample.id = "synthetic_" + std::to_string(seed);
  sample.ground_truth.assign(n_points, 0);
  for (std::size_t i = 0; i < n_points; ++i)
    for (std::size_t t : spec.targets)
      if (out.point_object[i] == t) sample.ground_truth[i] = 1;
  sample.category = spec.targets.empty()       ? TargetCategory::kZero
                    : spec.targets.size() == 1 ? TargetCategory::kSingle
                                               : TargetCategory::kMulti;
  sample.has_distractor = has_distractor;
  out.scene.sample = std::move(sample);

  PipelineConfig& cfg = out.config;
  cfg.dims = FusionDims{dim, dim, 8, 6};
  if (dim % 8 != 0) cfg.dims.heads = 1;
  cfg.dense_radius = 0.1;
  cfg.instance_radius = 0.1;
  cfg.logit_threshold = 0.6;
  cfg.rng_seed = seed;
  out.scene.params = signature_matching_parameters(cfg.dims);
  return out;
}

std::filesystem::path write_fixture(const std::filesystem::path& dir, const SyntheticScene& scene,
                                    const SyntheticSceneSpec& spec, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  PipelineConfig config = scene.config;
  write_scene(dir, scene.scene, config);
  json spec_doc = to_json(spec);
  spec_doc["seed"] = seed;
  io::write_file_atomic(dir / "scene_spec.json", spec_doc.dump(2) + "\n");
  const auto config_path = dir / "config.json";
  save_config(config_path, config);
  return config_path;
}

}  // namespace liftseg
