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

#ifndef FFPA__FUSION_HPP_
#define FFPA__FUSION_HPP_

#include <Eigen/Core>

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ffpa/encoder.hpp"
#include "ffpa/nn.hpp"

namespace ffpa::fusion
{

/// (u, v, u', v', u - u', v - v', |(u, v) - (u', v')|), pixels.
using EuclideanInfo = std::array<double, 7>;

EuclideanInfo euclidean_info(const Eigen::Vector2d & x, const Eigen::Vector2d & y);

// ---------------------------------------------------------------------------------------------
// LiCamFuse

struct LiCamFuseParams
{
  nn::DenseLayer point_fc;   // C -> C
  nn::DenseLayer image_fc;   // C -> C
  nn::DenseLayer euclid_fc;  // 7 -> C
  nn::DenseLayer gate_fc;    // C -> C

  std::size_t width() const { return gate_fc.out; }
  static LiCamFuseParams load(nn::ParamProvider & params, const std::string & prefix,
    std::size_t width);
};

struct LiCamFuseResult
{
  std::vector<float> fused;
  std::vector<double> gate;
};

/// Gated blend: w = sigmoid(gate(tanh(point(F_L) + image(F_I) + euclid(F_E)))),
/// output = w * F_I + (1 - w) * F_L.
LiCamFuseResult licamfuse(std::span<const float> point_feature, std::span<const float> image_feature,
  const EuclideanInfo & info, const LiCamFuseParams & params);

// ---------------------------------------------------------------------------------------------
// BiLiCamFuse

/// Per-neighbor embedding over [F_E ++ F_cross ++ F_center] and the two-layer logit head over
/// [F_E ++ embedding].
struct CrossAttentionParams
{
  nn::DenseLayer embed;   // 7 + 2C -> C, ReLU
  nn::DenseLayer hidden;  // 7 + C -> C, ReLU
  nn::DenseLayer logit;   // C -> 1

  static CrossAttentionParams load(nn::ParamProvider & params, const std::string & prefix,
    std::size_t width);
};

/// Logit head over [F_neighbor ++ F_E ++ F_center].
struct NeighborAttentionParams
{
  nn::DenseLayer hidden;  // 2C + 7 -> C, ReLU
  nn::DenseLayer logit;   // C -> 1

  static NeighborAttentionParams load(nn::ParamProvider & params, const std::string & prefix,
    std::size_t width);
};

struct DirectionParams
{
  CrossAttentionParams stage1;
  NeighborAttentionParams stage2;
};

struct BiLiCamFuseParams
{
  DirectionParams lidar;  // points query pixels
  DirectionParams image;  // pixels query points
  nn::DenseLayer mix;     // 2C -> C
  nn::BatchNorm norm;
  int k = 16;             // same-domain neighbors
  int m = 8;              // cross-domain neighbors

  std::size_t width() const { return mix.out; }
  static BiLiCamFuseParams load(nn::ParamProvider & params, const std::string & prefix,
    std::size_t width, int k, int m);
};

struct Neighbor
{
  std::span<const float> feature;
  EuclideanInfo info;
};

struct AttentionResult
{
  std::vector<float> feature;
  std::vector<double> weights;  // softmax over the neighbors
};

/// Embeds each cross-domain neighbor with the center feature, then softmax-weights the
/// embeddings. Output is one vector per (center, same-domain neighbor) pair.
AttentionResult bilicamfuse_stage1(std::span<const float> center_feature,
  std::span<const Neighbor> cross_neighbors, const CrossAttentionParams & params);

/// Softmax-weighted sum of the stage-1 vectors of the same-domain neighbors.
AttentionResult bilicamfuse_stage2(std::span<const float> center_feature,
  std::span<const Neighbor> neighbors, const NeighborAttentionParams & params);

/// ReLU(norm(mix(F_O ++ F_O'))).
std::vector<float> bilicamfuse_combine(std::span<const float> lidar_out,
  std::span<const float> image_out, const BiLiCamFuseParams & params);

/// Neighbor tables for one level, as feature-row indices. Point-domain neighbors come from the
/// in-kernel 3D KNN, pixel-domain neighbors from the same window with 2D u*v* distance.
struct NeighborTables
{
  std::size_t k = 0;
  std::size_t m = 0;
  std::vector<std::size_t> point_k;  // rows x k, 3D
  std::vector<std::size_t> point_m;  // rows x m, 3D
  std::vector<std::size_t> pixel_k;  // rows x k, 2D
  std::vector<std::size_t> pixel_m;  // rows x m, 2D
};

NeighborTables build_neighbor_tables(const encoder::LevelState & level,
  const encoder::KernelSpec & window, int k, int m, int threads = 1);

/// Both directions over one level. Row i of `pixel_features` is the image feature sampled at
/// the u*v* entry of level row i, already at the point feature width.
nn::Matrix bilicamfuse(const encoder::LevelState & points, const nn::Matrix & pixel_features,
  const NeighborTables & tables, const BiLiCamFuseParams & params, int threads = 1);

nn::Matrix bilicamfuse(const encoder::LevelState & points, const nn::Matrix & pixel_features,
  const encoder::KernelSpec & window, const BiLiCamFuseParams & params, int threads = 1);

}  // namespace ffpa::fusion

#endif  // FFPA__FUSION_HPP_
