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

#ifndef FFPA__GEOMETRY_HPP_
#define FFPA__GEOMETRY_HPP_

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ffpa::geometry
{

struct Point
{
  float x = 0.0f;
  float y = 0.0f;
  float z = 0.0f;
  float reflectance = 0.0f;  // unitless, [0, 1]

  Eigen::Vector3d position() const { return {x, y, z}; }
  friend bool operator==(const Point &, const Point &) = default;
};

using PointCloud = std::vector<Point>;

/// Axis-aligned crop in the LiDAR frame, meters. Bounds are inclusive.
struct CropBox
{
  double x_min = 0.0;
  double x_max = 70.4;
  double y_min = -40.0;
  double y_max = 40.0;
  double z_min = -1.0;
  double z_max = 3.0;

  bool contains(const Eigen::Vector3d & p) const;
};

/// Keeps finite points inside the box, preserving input order.
PointCloud crop(const PointCloud & cloud, const CropBox & box);

using Matrix34 = Eigen::Matrix<double, 3, 4, Eigen::RowMajor>;

struct CalibrationSet
{
  Matrix34 cam_projection = Matrix34::Zero();         // P2
  Eigen::Matrix3d rectification = Eigen::Matrix3d::Identity();  // R0_rect
  Matrix34 lidar_to_cam = Matrix34::Zero();           // Tr_velo_to_cam
  Matrix34 composed = Matrix34::Zero();               // P2 * R0 * Tr, homogeneous LiDAR -> pixels

  static CalibrationSet from_parts(
    const Matrix34 & p2, const Eigen::Matrix3d & r0, const Matrix34 & tr);
};

/// Parses a KITTI object-detection calib file. Needs P2, R0_rect and Tr_velo_to_cam; other keys
/// are ignored. Separators may be any mix of blanks, and the colon after the key is optional.
CalibrationSet parse_calibration(std::string_view text);

/// Writes the three source matrices back in KITTI layout with round-trip precision.
std::string serialize_calibration(const CalibrationSet & calib);

/// Largest |R R^T - I| entry; KITTI stores R0_rect with about seven significant digits.
double rectification_orthonormality_error(const CalibrationSet & calib);

enum class GridPreset
{
  k37x180,
  k40x275,
  k46x420,
};

/// Angular field of view the projection grid covers, radians.
struct FieldOfView
{
  double azimuth_min;
  double azimuth_max;
  double elevation_min;
  double elevation_max;

  /// Horizontal half-plane in front of the sensor (the crop box has x >= 0) and the
  /// HDL-64E vertical aperture used for KITTI (+2.0 to -24.9 degrees).
  static FieldOfView kitti_front();
};

struct SphericalGrid
{
  int height = 0;
  int width = 0;
  double delta_theta = 0.0;  // radians per column
  double delta_phi = 0.0;    // radians per row
  double theta_origin = 0.0;
  double phi_origin = 0.0;

  static SphericalGrid covering(int height, int width, const FieldOfView & fov);
  static SphericalGrid preset(GridPreset preset);

  void validate() const;
  std::size_t cell_count() const { return static_cast<std::size_t>(height) * width; }
  friend bool operator==(const SphericalGrid &, const SphericalGrid &) = default;
};

const char * preset_name(GridPreset preset);
std::optional<GridPreset> parse_preset(std::string_view name);

struct Cell
{
  int row = 0;
  int col = 0;
  friend bool operator==(const Cell &, const Cell &) = default;
};

/// Azimuth atan2(y, x) and elevation asin(z / |p|) quantized onto the grid. Absent when the cell
/// falls outside [0, W) x [0, H). Throws ZeroNormPoint for the origin.
std::optional<Cell> project_spherical(const Eigen::Vector3d & p, const SphericalGrid & grid);

struct ImageExtent
{
  int width = 1280;
  int height = 384;
  friend bool operator==(const ImageExtent &, const ImageExtent &) = default;
};

struct PixelCoord
{
  double u = 0.0;
  double v = 0.0;
};

/// Perspective projection through the composed matrix. Absent behind the camera (depth <= 0)
/// or outside [0, width) x [0, height).
std::optional<PixelCoord> project_to_image(
  const Eigen::Vector3d & p, const CalibrationSet & calib, const ImageExtent & extent = {});

}  // namespace ffpa::geometry

#endif  // FFPA__GEOMETRY_HPP_
