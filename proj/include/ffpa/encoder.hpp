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

#ifndef FFPA__ENCODER_HPP_
#define FFPA__ENCODER_HPP_

#include <Eigen/Core>

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ffpa/maps.hpp"
#include "ffpa/nn.hpp"

namespace ffpa::encoder
{

using geometry::Cell;

/// Sliding-kernel geometry for one encoder level.
struct KernelSpec
{
  int kh = 9;        // window rows, odd
  int kw = 13;       // window columns, odd
  int stride_h = 2;
  int stride_w = 2;
  int k = 16;        // neighbors per center
  double range = 0.5;  // meters; neighbors farther than this from the center are dropped

  void validate() const;
};

/// Features at one pyramid level. Row i of `features` belongs to cell `cells[i]`; rows follow
/// the row-major order of the valid cells of `maps`.
struct LevelState
{
  maps::SyncedMaps maps;
  nn::Matrix features;
  std::vector<std::size_t> cells;

  std::size_t size() const noexcept { return cells.size(); }
  Eigen::Vector3d position(std::size_t row) const { return maps.xyz(cells[row]); }
  std::vector<Eigen::Vector3d> positions() const;
  /// cell index -> feature row, -1 for invalid cells.
  std::vector<int> row_lookup() const;
};

/// Valid cells at stride-aligned positions (row % stride_h == 0, col % stride_w == 0),
/// row-major.
std::vector<Cell> sample_centers(const maps::SyncedMaps & maps, const KernelSpec & spec);

/// Range-limited KNN inside the kh x kw window around `center`: valid cells within `range`
/// meters of the center, sorted by distance then row-major cell order, truncated to k and padded
/// to exactly k by repeating the nearest survivor.
std::vector<Cell> knn_in_kernel(const maps::SyncedMaps & maps, Cell center, const KernelSpec & spec);
std::vector<std::size_t> knn_in_kernel_indices(
  const maps::SyncedMaps & maps, std::size_t center, const KernelSpec & spec);

/// Same window walk, but distances are 2D in image pixels between u*v* entries and no range
/// cutoff applies.
std::vector<std::size_t> pixel_knn_in_kernel(
  const maps::SyncedMaps & maps, std::size_t center, const KernelSpec & spec);

/// Shared layers of one encoder level: FC over the 3D offset, then one dense layer over
/// [FC(offset), neighbor feature, center feature], both with ReLU.
struct EncoderLayer
{
  nn::DenseLayer offset;
  nn::DenseLayer shared;

  std::size_t in_channels() const;
  std::size_t out_channels() const { return shared.out; }

  static EncoderLayer load(nn::ParamProvider & params, const std::string & prefix,
    std::size_t in_channels, std::size_t out_channels, std::size_t offset_width);
};

/// Max-pooled grouped features for explicit neighbor lists.
///
/// `neighbors` holds k row indices into `features` per center. Output row s is
/// max_k ReLU(shared(ReLU(offset(x_nk - x_cs)) ++ f_nk ++ f_cs)).
nn::Matrix aggregate_neighbors(const nn::Matrix & features,
  std::span<const Eigen::Vector3d> positions, std::span<const std::size_t> centers,
  std::span<const std::size_t> neighbors, std::size_t k, const EncoderLayer & layer,
  int threads = 1);

/// Full-resolution level: per-point (x, y, z, reflectance) lifted by `lift` with ReLU.
LevelState make_input_level(maps::SyncedMaps maps, const nn::DenseLayer & lift, int threads = 1);

/// One stride-based encoder step: sample centers, group neighbors with the in-kernel KNN,
/// aggregate, and carry the stride-subsampled maps.
LevelState encode_level(
  const LevelState & state, const KernelSpec & spec, const EncoderLayer & layer, int threads = 1);

/// Inverse-distance weights of the 3 nearest coarse points for one query.
struct Interpolation
{
  std::array<std::size_t, 3> source{};
  std::array<double, 3> weight{};
  std::size_t count = 0;
};

inline constexpr double kInterpolationEpsilon = 1e-8;

std::vector<Interpolation> interpolation_weights(std::span<const Eigen::Vector3d> coarse,
  std::span<const Eigen::Vector3d> queries, int threads = 1);

/// Blends coarse rows per the weights; queries without sources receive zeros.
nn::Matrix interpolate(const nn::Matrix & coarse_features,
  std::span<const Interpolation> weights);

struct DecoderLayer
{
  nn::DenseLayer mix;  // [interpolated coarse ++ fine skip] -> fine width, ReLU

  static DecoderLayer load(nn::ParamProvider & params, const std::string & prefix,
    std::size_t coarse_channels, std::size_t fine_channels, std::size_t out_channels);
};

/// Propagates coarse features back to the finest level. `coarse_to_fine` ends with the
/// full-resolution level; layers[i] lifts level i onto level i + 1.
nn::Matrix decode_to_full(std::span<const LevelState> coarse_to_fine,
  std::span<const DecoderLayer> layers, int threads = 1);

}  // namespace ffpa::encoder

#endif  // FFPA__ENCODER_HPP_
