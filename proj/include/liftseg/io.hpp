// Copyright 2026 The liftseg Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef LIFTSEG_IO_HPP
#define LIFTSEG_IO_HPP

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "liftseg/fusion.hpp"
#include "liftseg/geometry.hpp"
#include "liftseg/imagefeat.hpp"
#include "liftseg/superpoint.hpp"
#include "liftseg/tensor.hpp"

namespace liftseg::io {

namespace fs = std::filesystem;

// Tensor file layout (all integers little-endian):
//   "HTNS" | u8 version=1 | u8 dtype | u8 rank | rank x u64 dims | payload
// The payload is row-major.
enum class DType : std::uint8_t { kF32 = 1, kU8 = 2, kI32 = 3 };

inline constexpr std::uint8_t kTensorVersion = 1;

struct TensorFile {
  DType dtype = DType::kF32;
  std::vector<std::uint64_t> shape;
  std::vector<float> f32;
  std::vector<std::uint8_t> u8;
  std::vector<std::int32_t> i32;

  std::uint64_t element_count() const;
};

std::string encode_tensor(const TensorFile& tensor);
TensorFile decode_tensor(std::string_view bytes, const std::string& origin = "<memory>");

TensorFile read_tensor(const fs::path& path);
void write_tensor(const fs::path& path, const TensorFile& tensor);

TensorFile make_f32(std::vector<std::uint64_t> shape, std::span<const double> values);
TensorFile make_u8(std::vector<std::uint64_t> shape, std::span<const std::uint8_t> values);
TensorFile make_i32(std::vector<std::uint64_t> shape, std::span<const std::int32_t> values);

// Typed views; each checks dtype and rank and throws kValidation.
Matrix to_matrix(const TensorFile& t);    // f32 rank 2
Tensor3 to_tensor3(const TensorFile& t);  // f32 rank 3
ByteImage to_byte_image(const TensorFile& t);  // u8 rank 2
BinaryMask to_mask(const TensorFile& t);  // u8 rank 1
std::vector<double> to_vector(const TensorFile& t);  // f32 rank 1
std::vector<std::int32_t> to_i32_vector(const TensorFile& t);  // i32 rank 1

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
void write_file_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

// PLY, binary little-endian: float x/y/z and optional uchar red/green/blue.
std::string encode_ply(const PointCloud& cloud);
PointCloud decode_ply(std::string_view bytes, const std::string& origin = "<memory>");
void write_ply(const fs::path& path, const PointCloud& cloud);
PointCloud read_ply(const fs::path& path);

// Camera view JSON: {intrinsics 3x3, extrinsics 4x4 (camera to world), width,
// height, depth: tensor path relative to the JSON file}.
void write_view(const fs::path& json_path, const std::string& depth_file, const CameraView& view);
CameraView read_view(const fs::path& json_path);

// Instance mask manifest: {masks: [{tensor, pred_iou, stability}]}, uint8 tensors.
void write_mask_manifest(const fs::path& json_path, const std::string& stem,
                         const std::vector<InstanceMask>& masks);
std::vector<InstanceMask> read_mask_manifest(const fs::path& json_path);

// Partition: {num_superpoints, assignment: int32 tensor path}.
void write_partition(const fs::path& json_path, const std::string& tensor_file,
                     const SuperpointPartition& partition);
SuperpointPartition read_partition(const fs::path& json_path);

// Parameter archive: directory holding manifest.json plus one f32 tensor per
// named matrix.
void write_parameters(const fs::path& dir, const ParameterBundle& params);
ParameterBundle read_parameters(const fs::path& dir);

}  // namespace liftseg::io

#endif  // LIFTSEG_IO_HPP
