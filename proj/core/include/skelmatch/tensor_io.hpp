#pragma once

#include <filesystem>
#include <iosfwd>

#include "skelmatch/feature_map.hpp"

namespace skelmatch {

// Binary tensor file format (".stsk"):
//
//   offset  size  field
//   0       4     magic "STSK" (53 54 53 4B)
//   4       2     u16 version, little-endian (currently 1)
//   6       1     u8 dtype: 1 = f32, 2 = f64
//   7       1     u8 ndim (always 3)
//   8       12    three u32 dims, little-endian: C, N, T
//   20      1     u8 spatial_scale
//   21      1     u8 temporal_scale
//   22      2     reserved, must be zero
//   24      -     payload, little-endian, row-major with T fastest
enum class TensorDType : unsigned char { kF32 = 1, kF64 = 2 };

FeatureMap read_tensor(std::istream& in, const std::string& origin = "<stream>");
FeatureMap read_tensor(const std::filesystem::path& file);

void write_tensor(const FeatureMap& map, std::ostream& out,
                  TensorDType dtype = TensorDType::kF64);
void write_tensor(const FeatureMap& map, const std::filesystem::path& file,
                  TensorDType dtype = TensorDType::kF64);

}  // namespace skelmatch
