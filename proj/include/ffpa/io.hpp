// Copyright 2026 The ffpa Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FFPA__IO_HPP_
#define FFPA__IO_HPP_

#include <filesystem>
#include <string>

#include "ffpa/geometry.hpp"
#include "ffpa/imagefeat.hpp"
#include "ffpa/nn.hpp"

namespace ffpa::io
{

/// KITTI velodyne scan: little-endian f32 (x, y, z, reflectance) records, no header.
geometry::PointCloud read_velodyne(const std::filesystem::path & path);
geometry::PointCloud parse_velodyne(std::string_view bytes);
void write_velodyne(const std::filesystem::path & path, const geometry::PointCloud & cloud);

geometry::CalibrationSet read_calibration(const std::filesystem::path & path);

/// 8-bit RGB (or gray/RGBA, converted) PNG decoded to [0, 1] floats, 3 channels.
imagefeat::Image read_png(const std::filesystem::path & path);
/// Values are clamped to [0, 1] and quantized to 8 bits.
void write_png(const std::filesystem::path & path, const imagefeat::Image & image);

/// Feature dump: "FFPA", u32 version (1), u32 rows, u32 cols, row-major f32, little-endian.
std::string serialize_features(const nn::Matrix & features);
nn::Matrix deserialize_features(std::string_view bytes);
void dump_features(const nn::Matrix & features, const std::filesystem::path & path);
nn::Matrix read_features(const std::filesystem::path & path);

}  // namespace ffpa::io

#endif  // FFPA__IO_HPP_
