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

#ifndef FFPA__IMAGEFEAT_HPP_
#define FFPA__IMAGEFEAT_HPP_

#include <array>
#include <span>
#include <string>
#include <vector>

#include "ffpa/geometry.hpp"
#include "ffpa/nn.hpp"

namespace ffpa::imagefeat
{

/// Channel-last (H x W x C) grid. With downscale 1 it is an image; feature grids record how
/// many padded-image pixels one node spans.
struct FeatureGrid
{
  int width = 0;
  int height = 0;
  int channels = 0;
  int downscale = 1;
  std::vector<float> data;

  FeatureGrid() = default;
  FeatureGrid(int w, int h, int c, int scale = 1)
  : width(w), height(h), channels(c), downscale(scale),
    data(static_cast<std::size_t>(w) * h * c, 0.0f)
  {
  }

  std::size_t offset(int y, int x) const
  {
    return (static_cast<std::size_t>(y) * width + x) * channels;
  }
  float & at(int y, int x, int c) { return data[offset(y, x) + c]; }
  float at(int y, int x, int c) const { return data[offset(y, x) + c]; }
  std::span<const float> node(int y, int x) const { return {data.data() + offset(y, x),
    static_cast<std::size_t>(channels)}; }

  friend bool operator==(const FeatureGrid &, const FeatureGrid &) = default;
};

using Image = FeatureGrid;

/// Zero-pads bottom/right up to `extent`. Throws OversizeImage if the input is larger.
Image pad_image(const Image & raw, const geometry::ImageExtent & extent = {});

/// 3 x 3 (or k x k) convolution with same padding. Weights are [ky][kx][cin][cout].
struct Conv2d
{
  int kernel = 3;
  int in = 0;
  int out = 0;
  int stride = 1;
  std::vector<float> weight;
  std::vector<float> bias;

  static Conv2d load(nn::ParamProvider & params, const std::string & prefix, int in, int out,
    int stride, int kernel = 3);
  float & w(int ky, int kx, int ci, int co)
  {
    return weight[((static_cast<std::size_t>(ky) * kernel + kx) * in + ci) * out + co];
  }
};

FeatureGrid conv2d(const FeatureGrid & input, const Conv2d & conv, int threads = 1);

/// conv(stride 2) -> BN -> ReLU -> conv(stride 2): padded image to a 1/4-scale grid.
struct StemParams
{
  Conv2d conv1;
  nn::BatchNorm bn1;
  Conv2d conv2;
};

FeatureGrid extract_image_features(const Image & padded, const StemParams & params, int threads = 1);

/// conv(stride 2) -> BN -> ReLU, one per deeper pyramid level.
struct StageParams
{
  Conv2d conv;
  nn::BatchNorm bn;
};

struct ImageBackbone
{
  StemParams stem;
  std::vector<StageParams> stages;

  /// widths[0] is the stem width; each later entry adds one stage.
  static ImageBackbone load(nn::ParamProvider & params, const std::string & prefix,
    std::span<const int> widths);
};

/// Stem output followed by every stage output, finest first.
std::vector<FeatureGrid> extract_image_pyramid(
  const Image & padded, const ImageBackbone & backbone, int threads = 1);

struct BilinearTaps
{
  std::array<int, 4> x{};
  std::array<int, 4> y{};
  std::array<double, 4> weight{};
};

/// Four-tap stencil for padded-image pixel (u, v): scaled by 1 / downscale, clamped to the
/// node box. Weights are nonnegative and sum to one.
BilinearTaps bilinear_taps(const FeatureGrid & grid, double u, double v);

std::vector<float> bilinear_sample(const FeatureGrid & grid, double u, double v);

/// Padded-image coordinates of the grid node nearest to (u, v).
geometry::PixelCoord nearest_node_pixel(const FeatureGrid & grid, double u, double v);

}  // namespace ffpa::imagefeat

#endif  // FFPA__IMAGEFEAT_HPP_
