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

#ifndef FFPA__SYNTH_HPP_
#define FFPA__SYNTH_HPP_

#include <cstdint>
#include <filesystem>
#include <string>

#include "ffpa/geometry.hpp"
#include "ffpa/imagefeat.hpp"

namespace ffpa::synth
{

/// Ray-cast street scene seen by a 64-beam spinning LiDAR and a forward camera, written in the
/// KITTI object-detection layout. Used for tests and benchmarks when real frames are absent.
struct SceneOptions
{
  int beams = 64;
  double elevation_max_deg = 2.0;
  double elevation_min_deg = -24.9;
  int azimuth_steps = 2083;
  double sensor_height = 1.73;
  double max_range = 120.0;
  double dropout = 0.05;
  int image_width = 1242;
  int image_height = 375;
};

struct Frame
{
  geometry::PointCloud cloud;
  imagefeat::Image image;
  std::string calib_text;
};

/// Deterministic in (seed, index): no global state, no platform-dependent distributions.
Frame make_frame(std::uint64_t seed, int index, const SceneOptions & options = {});

std::string frame_id(int index);

/// Writes velodyne/<id>.bin, image_2/<id>.png and calib/<id>.txt below `root`.
void write_kitti_frame(const std::filesystem::path & root, const std::string & id, const Frame & frame);

/// Generates frames 000000 .. count - 1.
void write_kitti_dataset(const std::filesystem::path & root, std::uint64_t seed, int count,
  const SceneOptions & options = {});

}  // namespace ffpa::synth

#endif  // FFPA__SYNTH_HPP_
