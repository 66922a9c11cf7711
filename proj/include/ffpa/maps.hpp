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

#ifndef FFPA__MAPS_HPP_
#define FFPA__MAPS_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "ffpa/geometry.hpp"
#include "ffpa/nn.hpp"

namespace ffpa::maps
{

using geometry::Cell;

/// Paired XYZ map and u*v* map over one spherical grid, with a shared validity mask.
///
/// Both maps are addressed by the same (row, col) cell. For every valid cell, projecting the
/// stored XYZ through the calibration reproduces the stored u*v*; invalid cells hold zeros.
/// Reflectance rides along so the first encoder level can lift (x, y, z, r).
class SyncedMaps
{
public:
  SyncedMaps() = default;
  SyncedMaps(const geometry::SphericalGrid & grid, const geometry::CalibrationSet & calib,
    const geometry::ImageExtent & extent);

  int height() const noexcept { return grid_.height; }
  int width() const noexcept { return grid_.width; }
  std::size_t cell_count() const noexcept { return grid_.cell_count(); }
  const geometry::SphericalGrid & grid() const noexcept { return grid_; }
  const geometry::CalibrationSet & calibration() const noexcept { return calib_; }
  const geometry::ImageExtent & image_extent() const noexcept { return extent_; }

  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.row) * grid_.width + c.col; }
  Cell cell(std::size_t index) const
  {
    return {static_cast<int>(index / grid_.width), static_cast<int>(index % grid_.width)};
  }
  bool contains(Cell c) const
  {
    return c.row >= 0 && c.row < grid_.height && c.col >= 0 && c.col < grid_.width;
  }

  bool valid(std::size_t i) const { return valid_[i] != 0; }
  bool valid(Cell c) const { return valid(index(c)); }
  Eigen::Vector3d xyz(std::size_t i) const { return {xyz_[3 * i], xyz_[3 * i + 1], xyz_[3 * i + 2]}; }
  Eigen::Vector2d uv(std::size_t i) const { return {uv_[2 * i], uv_[2 * i + 1]}; }
  float reflectance(std::size_t i) const { return reflectance_[i]; }

  /// Linear indices of valid cells, row-major. Feature rows follow this order.
  std::vector<std::size_t> valid_indices() const;
  std::size_t valid_count() const;

  const std::vector<double> & xyz_data() const noexcept { return xyz_; }
  const std::vector<double> & uv_data() const noexcept { return uv_; }
  const std::vector<std::uint8_t> & mask() const noexcept { return valid_; }

  void set(std::size_t i, const Eigen::Vector3d & xyz, const geometry::PixelCoord & uv,
    float reflectance);

  friend bool operator==(const SyncedMaps & a, const SyncedMaps & b);

private:
  geometry::SphericalGrid grid_;
  geometry::CalibrationSet calib_;
  geometry::ImageExtent extent_;
  std::vector<double> xyz_;
  std::vector<double> uv_;
  std::vector<float> reflectance_;
  std::vector<std::uint8_t> valid_;
};

struct BuildOptions
{
  geometry::CropBox crop;
  geometry::ImageExtent image_extent;
};

/// Places each cropped point at its spherical cell. On collisions the smallest Euclidean range
/// wins, ties to the earlier input point. A cell is valid only if its winner also lands inside
/// the padded image. Throws EmptyCloud when nothing survives the crop.
SyncedMaps build_synced_maps(const geometry::PointCloud & cloud,
  const geometry::CalibrationSet & calib, const geometry::SphericalGrid & grid,
  const BuildOptions & options = {});

double occupancy(const SyncedMaps & maps);

/// Keeps cells (r, c) with r % row_stride == 0 and c % col_stride == 0 in both maps and the
/// mask. The output grid's angular resolution is scaled by the strides so that its cells still
/// index the projection of their stored XYZ.
SyncedMaps subsample(const SyncedMaps & maps, int row_stride, int col_stride);

/// Largest |project_to_image(xyz) - uv| over valid cells; +inf if any valid cell no longer
/// projects.
double synchronization_error(const SyncedMaps & maps);

/// Binary container: "FFPM", u32 version, u32 H, u32 W, u32 C, H*W*3 f32 xyz, H*W*2 f32 uv,
/// H*W u8 mask, then valid_count * C f32 features (row-major in valid-cell order) when C > 0.
/// A text side-car at `<path>.txt` records the grid and calibration as key = value lines.
void write_maps_container(const std::filesystem::path & path, const SyncedMaps & maps,
  const nn::Matrix * features = nullptr);

struct MapsContainer
{
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> xyz;
  std::vector<float> uv;
  std::vector<std::uint8_t> mask;
  nn::Matrix features;
};

MapsContainer read_maps_container(const std::filesystem::path & path);

}  // namespace ffpa::maps

#endif  // FFPA__MAPS_HPP_
