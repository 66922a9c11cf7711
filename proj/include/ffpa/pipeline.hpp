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

#ifndef FFPA__PIPELINE_HPP_
#define FFPA__PIPELINE_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ffpa/encoder.hpp"
#include "ffpa/fusion.hpp"
#include "ffpa/geometry.hpp"
#include "ffpa/imagefeat.hpp"
#include "ffpa/nn.hpp"

namespace ffpa::pipeline
{

inline constexpr int kLevels = 4;

enum class FusionMode
{
  kNone,
  kLiCamFuse,
  kBiLiCamFuse,
};

const char * fusion_name(FusionMode mode);
std::optional<FusionMode> parse_fusion(std::string_view name);

struct PipelineConfig
{
  std::string grid_name = "40x275";
  geometry::SphericalGrid grid = geometry::SphericalGrid::preset(geometry::GridPreset::k40x275);
  geometry::CropBox crop;
  // [9, 13] windows for the first two levels, [9, 5] for the last two, strides 2.
  std::array<encoder::KernelSpec, kLevels> kernels{{
    {9, 13, 2, 2, 16, 0.5},
    {9, 13, 2, 2, 16, 1.0},
    {9, 5, 2, 2, 16, 2.0},
    {9, 5, 2, 2, 16, 4.0},
  }};
  FusionMode fusion = FusionMode::kLiCamFuse;
  int k = 16;
  int m = 8;
  std::uint64_t seed = 20220921;
  std::optional<std::filesystem::path> params_path;
  geometry::ImageExtent image_extent;
  std::array<int, kLevels> point_widths{128, 256, 512, 1024};
  std::array<int, kLevels> image_widths{64, 128, 256, 512};
  int input_width = 128;
  int offset_width = 64;
  int threads = 1;

  void validate() const;
  /// Applies one `key = value` setting; throws ConfigError for unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
};

/// Reads `key = value` lines over the defaults. '#' starts a comment.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path & path, PipelineConfig base = {});

struct FrameBundle
{
  std::filesystem::path velodyne;
  std::filesystem::path image;
  std::filesystem::path calibration;
  std::string id;

  /// velodyne/<id>.bin, image_2/<id>.png, calib/<id>.txt under `root`. Throws IoError if any
  /// file is missing.
  static FrameBundle kitti(const std::filesystem::path & root, const std::string & id);
};

struct LoadedFrame
{
  geometry::PointCloud cloud;
  imagefeat::Image image;
  geometry::CalibrationSet calib;
};

LoadedFrame load_frame(const FrameBundle & frame);

/// Every learned tensor of the front-end, built from one parameter source.
struct Model
{
  nn::DenseLayer input_lift;
  std::vector<encoder::EncoderLayer> encoder;
  imagefeat::ImageBackbone image;
  std::vector<nn::DenseLayer> image_proj;
  std::vector<fusion::LiCamFuseParams> licamfuse;
  std::vector<fusion::BiLiCamFuseParams> bilicamfuse;
  std::vector<encoder::DecoderLayer> decoder;
  nn::DenseLayer final_image_proj;
  fusion::LiCamFuseParams final_fusion;
  FusionMode fusion = FusionMode::kNone;

  static Model load(const PipelineConfig & config, nn::ParamProvider & params);
  static Model from_config(const PipelineConfig & config);
};

nn::ParamProvider make_param_provider(const PipelineConfig & config);

struct StageTiming
{
  std::string name;
  double ms = 0.0;
};

struct BaselineComparison
{
  std::size_t points = 0;
  std::size_t centers = 0;
  std::size_t repeats = 0;
  std::size_t max_stride_neighbors = 0;
  std::size_t max_global_neighbors = 0;
  std::vector<double> stride_ms;
  std::vector<double> global_ms;
  double stride_median_ms = 0.0;
  double global_median_ms = 0.0;
};

struct BenchReport
{
  std::string frame_id;
  std::string preset;
  std::string fusion;
  std::vector<StageTiming> stages;
  double total_ms = 0.0;
  double occupancy = 0.0;
  std::size_t cropped_points = 0;
  std::vector<std::size_t> level_points;  // level 0 (full resolution) .. 4
  std::optional<BaselineComparison> baseline;

  double stage_sum_ms() const;
  std::string to_json() const;
};

struct FrameResult
{
  nn::Matrix features;  // valid cells of the full-resolution maps x output width
  BenchReport report;
};

/// Fused per-point features for one frame. Deterministic for a fixed config, parameter source
/// and frame, independent of `config.threads`.
FrameResult run_frame(const PipelineConfig & config, const FrameBundle & frame);
FrameResult run_frame(const PipelineConfig & config, const LoadedFrame & frame, const Model & model,
  const std::string & frame_id = "");

struct EncodedFrame
{
  std::vector<encoder::LevelState> levels;  // level 0 (full resolution) .. kLevels, fused
  std::vector<imagefeat::FeatureGrid> pyramid;  // empty when fusion is none
};

/// Maps, image pyramid and the fused encoder levels. Appends stage timings to `report` if given.
EncodedFrame encode_frame(const PipelineConfig & config, const LoadedFrame & frame,
  const Model & model, BenchReport * report = nullptr);

/// Stride-based sampling + windowed KNN vs. farthest point sampling + global KNN on the same
/// cropped cloud. One warm-up run of each path is discarded; medians over `repeats` timed runs.
BenchReport bench_sampling(const PipelineConfig & config, const FrameBundle & frame, int repeats);
BaselineComparison compare_sampling(const PipelineConfig & config, const LoadedFrame & frame,
  int repeats);

/// Textbook O(N * S) farthest point sampling starting from index 0.
std::vector<std::size_t> farthest_point_sampling(
  std::span<const Eigen::Vector3d> points, std::size_t count);

/// Brute-force range-limited KNN over the whole cloud, padded like the in-kernel search.
std::vector<std::size_t> global_knn(std::span<const Eigen::Vector3d> points,
  std::size_t center, std::size_t k, double range);

void dump_features(const nn::Matrix & features, const std::filesystem::path & path);

}  // namespace ffpa::pipeline

#endif  // FFPA__PIPELINE_HPP_
