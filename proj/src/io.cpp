// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#include "liftseg/io.hpp"

#include <atomic>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "liftseg/error.hpp"

namespace liftseg::io {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "tensor and PLY codecs assume a little-endian host");

namespace {

constexpr char kMagic[4] = {'H', 'T', 'N', 'S'};

template <class T>
void append_le(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& origin) : bytes_(bytes), origin_(origin) {}

  template <class T>
  T take() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  void take_into(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::kValidation, origin_ + ": truncated data");
  }

  std::string_view bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::kF32: return 4;
    case DType::kU8: return 1;
    case DType::kI32: return 4;
  }
  return 0;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kValidation, path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  write_file_atomic(path, doc.dump(2) + "\n");
}

template <class T>
T json_get(const json& doc, const char* key, const fs::path& origin) {
  if (!doc.contains(key))
    fail(ErrorKind::kValidation, origin.string() + ": missing key '" + key + "'");
  try {
    return doc.at(key).get<T>();
  } catch (const json::exception& e) {
    fail(ErrorKind::kValidation, origin.string() + ": bad value for '" + key + "': " + e.what());
  }
}

void check_rank(const TensorFile& t, DType dtype, std::size_t rank, const char* what) {
  require(t.dtype == dtype && t.shape.size() == rank, ErrorKind::kValidation,
          std::string("expected ") + what + " tensor");
}

}  // namespace

std::uint64_t TensorFile::element_count() const {
  std::uint64_t n = 1;
  for (std::uint64_t d : shape) n *= d;
  return n;
}

std::string encode_tensor(const TensorFile& t) {
  require(t.shape.size() <= 255, ErrorKind::kValidation, "tensor rank exceeds 255");
  const std::uint64_t n = t.element_count();
  std::string out(kMagic, 4);
  append_le<std::uint8_t>(out, kTensorVersion);
  append_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dtype));
  append_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.shape.size()));
  for (std::uint64_t d : t.shape) append_le<std::uint64_t>(out, d);
  switch (t.dtype) {
    case DType::kF32:
      require(t.f32.size() == n, ErrorKind::kShape, "f32 payload size mismatch");
      out.append(reinterpret_cast<const char*>(t.f32.data()), n * 4);
      break;
    case DType::kU8:
      require(t.u8.size() == n, ErrorKind::kShape, "u8 payload size mismatch");
      out.append(reinterpret_cast<const char*>(t.u8.data()), n);
      break;
    case DType::kI32:
      require(t.i32.size() == n, ErrorKind::kShape, "i32 payload size mismatch");
      out.append(reinterpret_cast<const char*>(t.i32.data()), n * 4);
      break;
  }
  return out;
}

TensorFile decode_tensor(std::string_view bytes, const std::string& origin) {
  Reader r(bytes, origin);
  char magic[4];
  r.take_into(magic, 4);
  require(std::memcmp(magic, kMagic, 4) == 0, ErrorKind::kValidation, origin + ": bad magic");
  const auto version = r.take<std::uint8_t>();
  require(version == kTensorVersion, ErrorKind::kValidation,
          origin + ": unsupported tensor version " + std::to_string(version));
  const auto code = r.take<std::uint8_t>();
  require(code >= 1 && code <= 3, ErrorKind::kValidation,
          origin + ": unknown dtype code " + std::to_string(code));
  TensorFile t;
  t.dtype = static_cast<DType>(code);
  const auto rank = r.take<std::uint8_t>();
  t.shape.resize(rank);
  for (auto& d : t.shape) d = r.take<std::uint64_t>();
  const std::uint64_t n = t.element_count();
  require(n * dtype_size(t.dtype) == r.remaining(), ErrorKind::kValidation,
          origin + ": payload size does not match shape");
  switch (t.dtype) {
    case DType::kF32:
      t.f32.resize(n);
      r.take_into(t.f32.data(), n * 4);
      break;
    case DType::kU8:
      t.u8.resize(n);
      r.take_into(t.u8.data(), n);
      break;
    case DType::kI32:
      t.i32.resize(n);
      r.take_into(t.i32.data(), n * 4);
      break;
  }
  return t;
}

TensorFile read_tensor(const fs::path& path) { return decode_tensor(read_file(path), path.string()); }

void write_tensor(const fs::path& path, const TensorFile& tensor) {
  write_file_atomic(path, encode_tensor(tensor));
}

TensorFile make_f32(std::vector<std::uint64_t> shape, std::span<const double> values) {
  TensorFile t{DType::kF32, std::move(shape), {}, {}, {}};
  require(t.element_count() == values.size(), ErrorKind::kShape, "f32 tensor size mismatch");
  t.f32.assign(values.begin(), values.end());
  return t;
}

TensorFile make_u8(std::vector<std::uint64_t> shape, std::span<const std::uint8_t> values) {
  TensorFile t{DType::kU8, std::move(shape), {}, {}, {}};
  require(t.element_count() == values.size(), ErrorKind::kShape, "u8 tensor size mismatch");
  t.u8.assign(values.begin(), values.end());
  return t;
}

TensorFile make_i32(std::vector<std::uint64_t> shape, std::span<const std::int32_t> values) {
  TensorFile t{DType::kI32, std::move(shape), {}, {}, {}};
  require(t.element_count() == values.size(), ErrorKind::kShape, "i32 tensor size mismatch");
  t.i32.assign(values.begin(), values.end());
  return t;
}

Matrix to_matrix(const TensorFile& t) {
  check_rank(t, DType::kF32, 2, "rank-2 f32");
  return Matrix(t.shape[0], t.shape[1], std::vector<double>(t.f32.begin(), t.f32.end()));
}

Tensor3 to_tensor3(const TensorFile& t) {
  check_rank(t, DType::kF32, 3, "rank-3 f32");
  Tensor3 out(t.shape[0], t.shape[1], t.shape[2]);
  std::copy(t.f32.begin(), t.f32.end(), out.data().begin());
  return out;
}

ByteImage to_byte_image(const TensorFile& t) {
  check_rank(t, DType::kU8, 2, "rank-2 u8");
  ByteImage out(t.shape[0], t.shape[1]);
  out.data = t.u8;
  return out;
}

BinaryMask to_mask(const TensorFile& t) {
  check_rank(t, DType::kU8, 1, "rank-1 u8");
  return t.u8;
}

std::vector<double> to_vector(const TensorFile& t) {
  check_rank(t, DType::kF32, 1, "rank-1 f32");
  return {t.f32.begin(), t.f32.end()};
}

std::vector<std::int32_t> to_i32_vector(const TensorFile& t) {
  check_rank(t, DType::kI32, 1, "rank-1 i32");
  return t.i32;
}

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  static std::atomic<unsigned> counter{0};
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) fail(ErrorKind::kIo, "cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(counter.fetch_add(1));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) fail(ErrorKind::kIo, "failed writing " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorKind::kIo, "cannot move " + tmp.string() + " to " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

std::string encode_ply(const PointCloud& cloud) {
  std::string out = "ply\nformat binary_little_endian 1.0\nelement vertex " +
                    std::to_string(cloud.size()) +
                    "\nproperty float x\nproperty float y\nproperty float z\n";
  if (cloud.has_colors())
    out += "property uchar red\nproperty uchar green\nproperty uchar blue\n";
  out += "end_header\n";
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3 p = cloud.positions()[i];
    append_le<float>(out, static_cast<float>(p.x));
    append_le<float>(out, static_cast<float>(p.y));
    append_le<float>(out, static_cast<float>(p.z));
    if (cloud.has_colors()) {
      const Vec3 c = cloud.colors()[i];
      for (double ch : {c.x, c.y, c.z})
        append_le<std::uint8_t>(out, static_cast<std::uint8_t>(std::lround(ch * 255.0)));
    }
  }
  return out;
}

PointCloud decode_ply(std::string_view bytes, const std::string& origin) {
  const std::string_view end_marker = "end_header\n";
  const std::size_t header_end = bytes.find(end_marker);
  require(header_end != std::string_view::npos, ErrorKind::kValidation,
          origin + ": missing PLY end_header");
  std::istringstream header(std::string(bytes.substr(0, header_end)));
  std::string line;
  std::getline(header, line);
  require(line == "ply", ErrorKind::kValidation, origin + ": not a PLY file");

  std::size_t count = 0;
  std::vector<std::string> props;
  while (std::getline(header, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      require(fmt == "binary_little_endian", ErrorKind::kValidation,
              origin + ": only binary_little_endian PLY is supported");
    } else if (word == "element") {
      std::string name;
      ls >> name >> count;
      require(name == "vertex", ErrorKind::kValidation, origin + ": unexpected element " + name);
    } else if (word == "property") {
      std::string type;
      std::string name;
      ls >> type >> name;
      props.push_back(type + " " + name);
    }
  }
  const std::vector<std::string> xyz{"float x", "float y", "float z"};
  const std::vector<std::string> xyzrgb{"float x",     "float y",       "float z",
                                        "uchar red", "uchar green", "uchar blue"};
  const bool colored = props == xyzrgb;
  require(colored || props == xyz, ErrorKind::kValidation,
          origin + ": PLY must hold float x/y/z and optional uchar red/green/blue");

  Reader r(bytes.substr(header_end + end_marker.size()), origin);
  std::vector<Vec3> positions(count);
  std::vector<Vec3> colors(colored ? count : 0);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = r.take<float>();
    const double y = r.take<float>();
    const double z = r.take<float>();
    positions[i] = {x, y, z};
    if (colored) {
      const double cr = r.take<std::uint8_t>() / 255.0;
      const double cg = r.take<std::uint8_t>() / 255.0;
      const double cb = r.take<std::uint8_t>() / 255.0;
      colors[i] = {cr, cg, cb};
    }
  }
  require(r.remaining() == 0, ErrorKind::kValidation, origin + ": trailing PLY data");
  return PointCloud(std::move(positions), std::move(colors));
}

void write_ply(const fs::path& path, const PointCloud& cloud) {
  write_file_atomic(path, encode_ply(cloud));
}

PointCloud read_ply(const fs::path& path) { return decode_ply(read_file(path), path.string()); }

void write_view(const fs::path& json_path, const std::string& depth_file, const CameraView& view) {
  json doc;
  doc["intrinsics"] = view.intrinsics();
  doc["extrinsics"] = view.extrinsics();
  doc["width"] = view.width();
  doc["height"] = view.height();
  doc["depth"] = depth_file;
  const Matrix& d = view.depth();
  write_tensor(json_path.parent_path() / depth_file, make_f32({d.rows(), d.cols()}, d.data()));
  write_json(json_path, doc);
}

CameraView read_view(const fs::path& json_path) {
  const json doc = read_json(json_path);
  const auto k = json_get<Mat3>(doc, "intrinsics", json_path);
  const auto t = json_get<Mat4>(doc, "extrinsics", json_path);
  const auto width = json_get<std::size_t>(doc, "width", json_path);
  const auto height = json_get<std::size_t>(doc, "height", json_path);
  const auto depth_file = json_get<std::string>(doc, "depth", json_path);
  Matrix depth = to_matrix(read_tensor(json_path.parent_path() / depth_file));
  require(depth.rows() == height && depth.cols() == width, ErrorKind::kValidation,
          json_path.string() + ": depth tensor does not match width/height");
  return CameraView(k, t, std::move(depth));
}

void write_mask_manifest(const fs::path& json_path, const std::string& stem,
                         const std::vector<InstanceMask>& masks) {
  json list = json::array();
  for (std::size_t i = 0; i < masks.size(); ++i) {
    const std::string file = stem + "_" + std::to_string(i) + ".htns";
    const ByteImage& m = masks[i].mask;
    write_tensor(json_path.parent_path() / file, make_u8({m.height, m.width}, m.data));
    list.push_back({{"tensor", file}, {"pred_iou", masks[i].pred_iou},
                    {"stability", masks[i].stability}});
  }
  write_json(json_path, json{{"masks", list}});
}

std::vector<InstanceMask> read_mask_manifest(const fs::path& json_path) {
  const json doc = read_json(json_path);
  const auto list = json_get<json>(doc, "masks", json_path);
  std::vector<InstanceMask> out;
  for (const json& rec : list) {
    InstanceMask m;
    m.mask = to_byte_image(
        read_tensor(json_path.parent_path() / json_get<std::string>(rec, "tensor", json_path)));
    m.pred_iou = json_get<double>(rec, "pred_iou", json_path);
    m.stability = json_get<double>(rec, "stability", json_path);
    validate(m);
    out.push_back(std::move(m));
  }
  return out;
}

void write_partition(const fs::path& json_path, const std::string& tensor_file,
                     const SuperpointPartition& partition) {
  const auto& a = partition.assignment();
  write_tensor(json_path.parent_path() / tensor_file, make_i32({a.size()}, a));
  write_json(json_path, json{{"num_superpoints", partition.count()}, {"assignment", tensor_file}});
}

SuperpointPartition read_partition(const fs::path& json_path) {
  const json doc = read_json(json_path);
  const auto count = json_get<std::size_t>(doc, "num_superpoints", json_path);
  const auto file = json_get<std::string>(doc, "assignment", json_path);
  return SuperpointPartition(to_i32_vector(read_tensor(json_path.parent_path() / file)), count);
}

void write_parameters(const fs::path& dir, const ParameterBundle& params) {
  json tensors = json::object();
  params.for_each([&](const std::string& name, const Matrix& m) {
    const std::string file = name + ".htns";
    write_tensor(dir / file, make_f32({m.rows(), m.cols()}, m.data()));
    tensors[name] = file;
  });
  const json manifest{
      {"format", "liftseg-params"},
      {"rng_seed", params.rng_seed},
      {"dims",
       {{"point_dim", params.dims.point_dim},
        {"dim", params.dims.dim},
        {"heads", params.dims.heads},
        {"layers", params.dims.layers}}},
      {"tensors", tensors}};
  write_json(dir / "manifest.json", manifest);
}

ParameterBundle read_parameters(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  const json doc = read_json(manifest_path);
  const auto dims_doc = json_get<json>(doc, "dims", manifest_path);
  FusionDims dims;
  dims.point_dim = json_get<std::size_t>(dims_doc, "point_dim", manifest_path);
  dims.dim = json_get<std::size_t>(dims_doc, "dim", manifest_path);
  dims.heads = json_get<std::size_t>(dims_doc, "heads", manifest_path);
  dims.layers = json_get<std::size_t>(dims_doc, "layers", manifest_path);
  ParameterBundle params = ParameterBundle::zeros(dims);
  params.rng_seed = json_get<std::uint64_t>(doc, "rng_seed", manifest_path);
  const auto tensors = json_get<json>(doc, "tensors", manifest_path);
  params.for_each([&](const std::string& name, Matrix& m) {
    const auto file = json_get<std::string>(tensors, name.c_str(), manifest_path);
    Matrix loaded = to_matrix(read_tensor(dir / file));
    require(loaded.rows() == m.rows() && loaded.cols() == m.cols(), ErrorKind::kValidation,
            manifest_path.string() + ": tensor " + name + " has the wrong shape");
    m = std::move(loaded);
  });
  params.validate();
  return params;
}

}  // namespace liftseg::io
