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

#include "ffpa/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include "ffpa/error.hpp"

namespace ffpa::geometry
{

namespace
{

bool is_blank(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v'; }

struct ParsedLine
{
  std::vector<double> values;
  int line = 0;
};

std::map<std::string, ParsedLine, std::less<>> tokenize_calibration(std::string_view text)
{
  std::map<std::string, ParsedLine, std::less<>> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    const std::string_view line = text.substr(pos, eol - pos);
    ++line_no;
    pos = eol + 1;

    std::size_t i = 0;
    while (i < line.size() && is_blank(line[i])) {
      ++i;
    }
    if (i == line.size()) {
      continue;
    }
    std::size_t key_end = i;
    while (key_end < line.size() && !is_blank(line[key_end]) && line[key_end] != ':') {
      ++key_end;
    }
    ParsedLine parsed;
    parsed.line = line_no;
    const std::string key(line.substr(i, key_end - i));
    i = key_end;
    while (i < line.size() && is_blank(line[i])) {
      ++i;
    }
    if (i < line.size() && line[i] == ':') {
      ++i;
    }
    while (true) {
      while (i < line.size() && is_blank(line[i])) {
        ++i;
      }
      if (i >= line.size()) {
        break;
      }
      std::size_t tok_end = i;
      while (tok_end < line.size() && !is_blank(line[tok_end])) {
        ++tok_end;
      }
      double value = 0.0;
      const char * first = line.data() + i;
      const char * last = line.data() + tok_end;
      if (*first == '+') {
        ++first;
      }
      auto [ptr, ec] = std::from_chars(first, last, value);
      if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
        throw Error(ErrorCode::kMalformedNumber, "key " + key + " at line " +
          std::to_string(line_no) + ", column " + std::to_string(i + 1));
      }
      parsed.values.push_back(value);
      i = tok_end;
    }
    entries[key] = std::move(parsed);
  }
  return entries;
}

const std::vector<double> & require(
  const std::map<std::string, ParsedLine, std::less<>> & entries, const std::string & key,
  std::size_t count)
{
  auto it = entries.find(key);
  if (it == entries.end()) {
    throw Error(ErrorCode::kMissingKey, key);
  }
  if (it->second.values.size() != count) {
    throw Error(ErrorCode::kMalformedNumber, "key " + key + " at line " +
      std::to_string(it->second.line) + " has " + std::to_string(it->second.values.size()) +
      " values, expected " + std::to_string(count));
  }
  return it->second.values;
}

Matrix34 to_matrix34(const std::vector<double> & v)
{
  Matrix34 m;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      m(r, c) = v[r * 4 + c];
    }
  }
  return m;
}

void append_row_major(std::string & out, const char * key, const double * v, int n)
{
  out += key;
  out += ':';
  char buf[40];
  for (int i = 0; i < n; ++i) {
    std::snprintf(buf, sizeof(buf), " %.17g", v[i]);
    out += buf;
  }
  out += '\n';
}

double degrees(double d) { return d * std::numbers::pi / 180.0; }

}  // namespace

bool CropBox::contains(const Eigen::Vector3d & p) const
{
  return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max &&
    p.z() >= z_min && p.z() <= z_max;
}

PointCloud crop(const PointCloud & cloud, const CropBox & box)
{
  PointCloud out;
  out.reserve(cloud.size() / 4);
  for (const auto & p : cloud) {
    const auto pos = p.position();
    if (pos.allFinite() && box.contains(pos)) {
      out.push_back(p);
    }
  }
  return out;
}

CalibrationSet CalibrationSet::from_parts(
  const Matrix34 & p2, const Eigen::Matrix3d & r0, const Matrix34 & tr)
{
  CalibrationSet c;
  c.cam_projection = p2;
  c.rectification = r0;
  c.lidar_to_cam = tr;
  Eigen::Matrix4d r_h = Eigen::Matrix4d::Identity();
  r_h.topLeftCorner<3, 3>() = r0;
  Eigen::Matrix4d tr_h = Eigen::Matrix4d::Identity();
  tr_h.topRows<3>() = tr;
  c.composed = p2 * r_h * tr_h;
  return c;
}

CalibrationSet parse_calibration(std::string_view text)
{
  const auto entries = tokenize_calibration(text);
  const auto & p2 = require(entries, "P2", 12);
  const auto & r0 = require(entries, "R0_rect", 9);
  const auto & tr = require(entries, "Tr_velo_to_cam", 12);
  Eigen::Matrix3d rect;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      rect(r, c) = r0[r * 3 + c];
    }
  }
  return CalibrationSet::from_parts(to_matrix34(p2), rect, to_matrix34(tr));
}

std::string serialize_calibration(const CalibrationSet & calib)
{
  std::string out;
  append_row_major(out, "P2", calib.cam_projection.data(), 12);
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r0 = calib.rectification;
  append_row_major(out, "R0_rect", r0.data(), 9);
  append_row_major(out, "Tr_velo_to_cam", calib.lidar_to_cam.data(), 12);
  return out;
}

double rectification_orthonormality_error(const CalibrationSet & calib)
{
  const Eigen::Matrix3d e =
    calib.rectification * calib.rectification.transpose() - Eigen::Matrix3d::Identity();
  return e.cwiseAbs().maxCoeff();
}

FieldOfView FieldOfView::kitti_front()
{
  return {-std::numbers::pi / 2.0, std::numbers::pi / 2.0, degrees(-24.9), degrees(2.0)};
}

SphericalGrid SphericalGrid::covering(int height, int width, const FieldOfView & fov)
{
  SphericalGrid g;
  g.height = height;
  g.width = width;
  g.theta_origin = fov.azimuth_min;
  g.phi_origin = fov.elevation_min;
  g.delta_theta = (fov.azimuth_max - fov.azimuth_min) / width;
  g.delta_phi = (fov.elevation_max - fov.elevation_min) / height;
  g.validate();
  return g;
}

SphericalGrid SphericalGrid::preset(GridPreset preset)
{
  const auto fov = FieldOfView::kitti_front();
  switch (preset) {
    case GridPreset::k37x180:
      return covering(37, 180, fov);
    case GridPreset::k40x275:
      return covering(40, 275, fov);
    case GridPreset::k46x420:
      return covering(46, 420, fov);
  }
  throw Error(ErrorCode::kConfigError, "unknown grid preset");
}

void SphericalGrid::validate() const
{
  if (height < 1 || width < 1) {
    throw Error(ErrorCode::kConfigError, "grid extents must be positive");
  }
  if (!(delta_theta > 0.0) || !(delta_phi > 0.0)) {
    throw Error(ErrorCode::kConfigError, "grid resolutions must be positive");
  }
  if (!std::isfinite(theta_origin) || !std::isfinite(phi_origin)) {
    throw Error(ErrorCode::kConfigError, "grid origins must be finite");
  }
}

const char * preset_name(GridPreset preset)
{
  switch (preset) {
    case GridPreset::k37x180:
      return "37x180";
    case GridPreset::k40x275:
      return "40x275";
    case GridPreset::k46x420:
      return "46x420";
  }
  return "?";
}

std::optional<GridPreset> parse_preset(std::string_view name)
{
  for (auto p : {GridPreset::k37x180, GridPreset::k40x275, GridPreset::k46x420}) {
    if (name == preset_name(p)) {
      return p;
    }
  }
  return std::nullopt;
}

std::optional<Cell> project_spherical(const Eigen::Vector3d & p, const SphericalGrid & grid)
{
  const double range = p.norm();
  if (!(range > 0.0)) {
    throw Error(ErrorCode::kZeroNormPoint, "cannot take the direction of the origin");
  }
  const double azimuth = std::atan2(p.y(), p.x());
  const double elevation = std::asin(std::clamp(p.z() / range, -1.0, 1.0));
  const double col = std::floor((azimuth - grid.theta_origin) / grid.delta_theta);
  const double row = std::floor((elevation - grid.phi_origin) / grid.delta_phi);
  if (col < 0.0 || col >= grid.width || row < 0.0 || row >= grid.height) {
    return std::nullopt;
  }
  return Cell{static_cast<int>(row), static_cast<int>(col)};
}

std::optional<PixelCoord> project_to_image(
  const Eigen::Vector3d & p, const CalibrationSet & calib, const ImageExtent & extent)
{
  const Eigen::Vector3d h = calib.composed * p.homogeneous();
  if (!(h.z() > 0.0)) {
    return std::nullopt;
  }
  const PixelCoord px{h.x() / h.z(), h.y() / h.z()};
  if (!(px.u >= 0.0 && px.u < extent.width && px.v >= 0.0 && px.v < extent.height)) {
    return std::nullopt;
  }
  return px;
}

}  // namespace ffpa::geometry
