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

#include "ffpa/maps.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "binary_io.hpp"
#include "ffpa/error.hpp"

namespace ffpa::maps
{

namespace
{

constexpr char kMapsMagic[4] = {'F', 'F', 'P', 'M'};
constexpr std::uint32_t kMapsVersion = 1;

}  // namespace

SyncedMaps::SyncedMaps(const geometry::SphericalGrid & grid,
  const geometry::CalibrationSet & calib, const geometry::ImageExtent & extent)
: grid_(grid),
  calib_(calib),
  extent_(extent),
  xyz_(grid.cell_count() * 3, 0.0),
  uv_(grid.cell_count() * 2, 0.0),
  reflectance_(grid.cell_count(), 0.0f),
  valid_(grid.cell_count(), 0)
{
  grid_.validate();
}

std::vector<std::size_t> SyncedMaps::valid_indices() const
{
  std::vector<std::size_t> out;
  out.reserve(valid_count());
  for (std::size_t i = 0; i < valid_.size(); ++i) {
    if (valid_[i]) {
      out.push_back(i);
    }
  }
  return out;
}

std::size_t SyncedMaps::valid_count() const
{
  std::size_t n = 0;
  for (auto v : valid_) {
    n += v ? 1 : 0;
  }
  return n;
}

void SyncedMaps::set(
  std::size_t i, const Eigen::Vector3d & xyz, const geometry::PixelCoord & uv, float reflectance)
{
  xyz_[3 * i] = xyz.x();
  xyz_[3 * i + 1] = xyz.y();
  xyz_[3 * i + 2] = xyz.z();
  uv_[2 * i] = uv.u;
  uv_[2 * i + 1] = uv.v;
  reflectance_[i] = reflectance;
  valid_[i] = 1;
}

bool operator==(const SyncedMaps & a, const SyncedMaps & b)
{
  return a.grid_ == b.grid_ && a.extent_ == b.extent_ &&
    a.calib_.composed == b.calib_.composed && a.xyz_ == b.xyz_ && a.uv_ == b.uv_ &&
    a.reflectance_ == b.reflectance_ && a.valid_ == b.valid_;
}

SyncedMaps build_synced_maps(const geometry::PointCloud & cloud,
  const geometry::CalibrationSet & calib, const geometry::SphericalGrid & grid,
  const BuildOptions & options)
{
  const geometry::PointCloud cropped = geometry::crop(cloud, options.crop);
  if (cropped.empty()) {
    throw Error(ErrorCode::kEmptyCloud, "no point survives the crop box");
  }

  constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
  std::vector<double> best_range(grid.cell_count(), std::numeric_limits<double>::infinity());
  std::vector<std::size_t> winner(grid.cell_count(), kNone);
  for (std::size_t i = 0; i < cropped.size(); ++i) {
    const Eigen::Vector3d p = cropped[i].position();
    const double range = p.norm();
    if (!(range > 0.0)) {
      continue;
    }
    const auto cell = geometry::project_spherical(p, grid);
    if (!cell) {
      continue;
    }
    const std::size_t idx = static_cast<std::size_t>(cell->row) * grid.width + cell->col;
    if (range < best_range[idx]) {
      best_range[idx] = range;
      winner[idx] = i;
    }
  }

  SyncedMaps maps(grid, calib, options.image_extent);
  for (std::size_t idx = 0; idx < winner.size(); ++idx) {
    if (winner[idx] == kNone) {
      continue;
    }
    const auto & pt = cropped[winner[idx]];
    const Eigen::Vector3d p = pt.position();
    if (const auto px = geometry::project_to_image(p, calib, options.image_extent)) {
      maps.set(idx, p, *px, pt.reflectance);
    }
  }
  return maps;
}

double occupancy(const SyncedMaps & maps)
{
  if (maps.cell_count() == 0) {
    return 0.0;
  }
  return static_cast<double>(maps.valid_count()) / static_cast<double>(maps.cell_count());
}

SyncedMaps subsample(const SyncedMaps & maps, int row_stride, int col_stride)
{
  if (row_stride < 1 || col_stride < 1) {
    throw Error(ErrorCode::kConfigError, "subsample strides must be >= 1");
  }
  geometry::SphericalGrid grid = maps.grid();
  grid.height = (maps.height() + row_stride - 1) / row_stride;
  grid.width = (maps.width() + col_stride - 1) / col_stride;
  grid.delta_phi *= row_stride;
  grid.delta_theta *= col_stride;

  SyncedMaps out(grid, maps.calibration(), maps.image_extent());
  for (int r = 0; r < grid.height; ++r) {
    for (int c = 0; c < grid.width; ++c) {
      const std::size_t src = maps.index({r * row_stride, c * col_stride});
      const std::size_t dst = out.index({r, c});
      if (maps.valid(src)) {
        const auto uv = maps.uv(src);
        out.set(dst, maps.xyz(src), {uv.x(), uv.y()}, maps.reflectance(src));
      }
    }
  }
  return out;
}

double synchronization_error(const SyncedMaps & maps)
{
  double worst = 0.0;
  for (std::size_t i = 0; i < maps.cell_count(); ++i) {
    if (!maps.valid(i)) {
      continue;
    }
    const auto px = geometry::project_to_image(maps.xyz(i), maps.calibration(), maps.image_extent());
    if (!px) {
      return std::numeric_limits<double>::infinity();
    }
    const auto uv = maps.uv(i);
    worst = std::max({worst, std::abs(px->u - uv.x()), std::abs(px->v - uv.y())});
  }
  return worst;
}

void write_maps_container(
  const std::filesystem::path & path, const SyncedMaps & maps, const nn::Matrix * features)
{
  const std::uint32_t channels = features ? static_cast<std::uint32_t>(features->cols()) : 0;
  if (features && features->rows() != maps.valid_count()) {
    throw_dimension_mismatch("level features rows", maps.valid_count(), features->rows());
  }
  std::string out(kMapsMagic, 4);
  detail::put_u32(out, kMapsVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(maps.height()));
  detail::put_u32(out, static_cast<std::uint32_t>(maps.width()));
  detail::put_u32(out, channels);
  for (double v : maps.xyz_data()) {
    detail::put_f32(out, static_cast<float>(v));
  }
  for (double v : maps.uv_data()) {
    detail::put_f32(out, static_cast<float>(v));
  }
  for (auto m : maps.mask()) {
    out.push_back(static_cast<char>(m));
  }
  if (features) {
    for (float v : features->values()) {
      detail::put_f32(out, v);
    }
  }
  detail::write_file(path, out);

  const auto & g = maps.grid();
  std::string side;
  char buf[128];
  auto line = [&](const char * key, double v) {
    std::snprintf(buf, sizeof(buf), "%s = %.17g\n", key, v);
    side += buf;
  };
  line("height", g.height);
  line("width", g.width);
  line("channels", channels);
  line("valid_cells", static_cast<double>(maps.valid_count()));
  line("delta_theta", g.delta_theta);
  line("delta_phi", g.delta_phi);
  line("theta_origin", g.theta_origin);
  line("phi_origin", g.phi_origin);
  line("image_width", maps.image_extent().width);
  line("image_height", maps.image_extent().height);
  const auto & m = maps.calibration().composed;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::snprintf(buf, sizeof(buf), "composed_%d%d = %.17g\n", r, c, m(r, c));
      side += buf;
    }
  }
  auto side_path = path;
  side_path += ".txt";
  detail::write_file(side_path, side);
}

MapsContainer read_maps_container(const std::filesystem::path & path)
{
  const std::string bytes = detail::read_file(path);
  detail::ByteReader r(bytes);
  if (r.take(4) != std::string_view(kMapsMagic, 4)) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": bad maps magic");
  }
  if (r.u32() != kMapsVersion) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": unsupported maps version");
  }
  MapsContainer c;
  c.height = r.u32();
  c.width = r.u32();
  c.channels = r.u32();
  const std::size_t cells = static_cast<std::size_t>(c.height) * c.width;
  if (cells * 21 > r.remaining()) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": truncated maps payload");
  }
  c.xyz.resize(cells * 3);
  for (auto & v : c.xyz) {
    v = r.f32();
  }
  c.uv.resize(cells * 2);
  for (auto & v : c.uv) {
    v = r.f32();
  }
  auto mask = r.take(cells);
  c.mask.assign(mask.begin(), mask.end());
  std::size_t valid = 0;
  for (auto m : c.mask) {
    valid += m ? 1 : 0;
  }
  if (c.channels > 0) {
    c.features = nn::Matrix(valid, c.channels);
    for (auto & v : c.features.values()) {
      v = r.f32();
    }
  }
  if (!r.done()) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": trailing bytes");
  }
  return c;
}

}  // namespace ffpa::maps
