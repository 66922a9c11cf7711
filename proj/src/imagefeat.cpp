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

#include "ffpa/imagefeat.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "ffpa/error.hpp"
#include "ffpa/parallel.hpp"

namespace ffpa::imagefeat
{

Image pad_image(const Image & raw, const geometry::ImageExtent & extent)
{
  if (raw.width > extent.width || raw.height > extent.height) {
    throw Error(ErrorCode::kOversizeImage, std::to_string(raw.width) + "x" +
      std::to_string(raw.height) + " exceeds " + std::to_string(extent.width) + "x" +
      std::to_string(extent.height));
  }
  Image out(extent.width, extent.height, raw.channels, raw.downscale);
  for (int y = 0; y < raw.height; ++y) {
    std::copy_n(raw.data.begin() + static_cast<std::ptrdiff_t>(raw.offset(y, 0)),
      static_cast<std::size_t>(raw.width) * raw.channels,
      out.data.begin() + static_cast<std::ptrdiff_t>(out.offset(y, 0)));
  }
  return out;
}

Conv2d Conv2d::load(
  nn::ParamProvider & params, const std::string & prefix, int in, int out, int stride, int kernel)
{
  Conv2d c;
  c.kernel = kernel;
  c.in = in;
  c.out = out;
  c.stride = stride;
  const auto k = static_cast<std::uint32_t>(kernel);
  c.weight = params.get(prefix + ".weight",
    {k, k, static_cast<std::uint32_t>(in), static_cast<std::uint32_t>(out)}, nn::Init::kWeight)
               .values;
  c.bias = params.get(prefix + ".bias", {static_cast<std::uint32_t>(out)}, nn::Init::kBias).values;
  return c;
}

FeatureGrid conv2d(const FeatureGrid & input, const Conv2d & conv, int threads)
{
  if (input.channels != conv.in) {
    throw_dimension_mismatch("conv input channels", conv.in, input.channels);
  }
  if (conv.weight.size() != static_cast<std::size_t>(conv.kernel) * conv.kernel * conv.in * conv.out ||
    conv.bias.size() != static_cast<std::size_t>(conv.out))
  {
    throw_dimension_mismatch("conv weights", static_cast<std::size_t>(conv.kernel) * conv.kernel *
      conv.in * conv.out, conv.weight.size());
  }
  const int pad = conv.kernel / 2;
  const int out_w = (input.width + 2 * pad - conv.kernel) / conv.stride + 1;
  const int out_h = (input.height + 2 * pad - conv.kernel) / conv.stride + 1;
  FeatureGrid out(out_w, out_h, conv.out, input.downscale * conv.stride);

  using RowMajor = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const int taps = conv.kernel * conv.kernel * conv.in;
  const Eigen::Map<const RowMajor> weights(conv.weight.data(), taps, conv.out);
  const Eigen::Map<const Eigen::RowVectorXf> bias(conv.bias.data(), conv.out);

  // One im2col row block per output row, then a single GEMM.
  parallel_for(static_cast<std::size_t>(out_h), threads, [&](std::size_t begin, std::size_t end) {
    RowMajor patches(out_w, taps);
    for (std::size_t oy = begin; oy < end; ++oy) {
      patches.setZero();
      for (int ox = 0; ox < out_w; ++ox) {
        float * dst = patches.row(ox).data();
        for (int ky = 0; ky < conv.kernel; ++ky) {
          const int iy = static_cast<int>(oy) * conv.stride + ky - pad;
          if (iy < 0 || iy >= input.height) {
            continue;
          }
          for (int kx = 0; kx < conv.kernel; ++kx) {
            const int ix = ox * conv.stride + kx - pad;
            if (ix < 0 || ix >= input.width) {
              continue;
            }
            const float * src = input.data.data() + input.offset(iy, ix);
            std::copy(src, src + conv.in, dst + (ky * conv.kernel + kx) * conv.in);
          }
        }
      }
      Eigen::Map<RowMajor> rows(out.data.data() + out.offset(static_cast<int>(oy), 0), out_w, conv.out);
      rows.noalias() = patches * weights;
      rows.rowwise() += bias;
    }
  });
  return out;
}

namespace
{

void normalize_relu(FeatureGrid & grid, const nn::BatchNorm & bn)
{
  for (int y = 0; y < grid.height; ++y) {
    for (int x = 0; x < grid.width; ++x) {
      std::span<float> v(grid.data.data() + grid.offset(y, x), static_cast<std::size_t>(grid.channels));
      bn.apply(v);
      nn::relu_inplace(v);
    }
  }
}

}  // namespace

FeatureGrid extract_image_features(const Image & padded, const StemParams & params, int threads)
{
  FeatureGrid hidden = conv2d(padded, params.conv1, threads);
  normalize_relu(hidden, params.bn1);
  return conv2d(hidden, params.conv2, threads);
}

ImageBackbone ImageBackbone::load(
  nn::ParamProvider & params, const std::string & prefix, std::span<const int> widths)
{
  if (widths.empty()) {
    throw Error(ErrorCode::kConfigError, "image backbone needs at least one width");
  }
  ImageBackbone b;
  b.stem.conv1 = Conv2d::load(params, prefix + ".stem.conv1", 3, widths[0], 2);
  b.stem.bn1 = nn::BatchNorm::load(params, prefix + ".stem.bn1", static_cast<std::size_t>(widths[0]));
  b.stem.conv2 = Conv2d::load(params, prefix + ".stem.conv2", widths[0], widths[0], 2);
  for (std::size_t i = 1; i < widths.size(); ++i) {
    const std::string p = prefix + ".stage" + std::to_string(i + 1);
    b.stages.push_back({Conv2d::load(params, p + ".conv", widths[i - 1], widths[i], 2),
      nn::BatchNorm::load(params, p + ".bn", static_cast<std::size_t>(widths[i]))});
  }
  return b;
}

std::vector<FeatureGrid> extract_image_pyramid(
  const Image & padded, const ImageBackbone & backbone, int threads)
{
  std::vector<FeatureGrid> levels;
  levels.push_back(extract_image_features(padded, backbone.stem, threads));
  for (const auto & stage : backbone.stages) {
    FeatureGrid next = conv2d(levels.back(), stage.conv, threads);
    normalize_relu(next, stage.bn);
    levels.push_back(std::move(next));
  }
  return levels;
}

BilinearTaps bilinear_taps(const FeatureGrid & grid, double u, double v)
{
  const double gx = std::clamp(u / grid.downscale, 0.0, static_cast<double>(grid.width - 1));
  const double gy = std::clamp(v / grid.downscale, 0.0, static_cast<double>(grid.height - 1));
  const int x0 = static_cast<int>(std::floor(gx));
  const int y0 = static_cast<int>(std::floor(gy));
  const int x1 = std::min(x0 + 1, grid.width - 1);
  const int y1 = std::min(y0 + 1, grid.height - 1);
  const double fx = gx - x0;
  const double fy = gy - y0;
  BilinearTaps t;
  t.x = {x0, x1, x0, x1};
  t.y = {y0, y0, y1, y1};
  t.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return t;
}

std::vector<float> bilinear_sample(const FeatureGrid & grid, double u, double v)
{
  const auto taps = bilinear_taps(grid, u, v);
  std::vector<float> out(static_cast<std::size_t>(grid.channels));
  for (int c = 0; c < grid.channels; ++c) {
    double acc = 0.0;
    for (int t = 0; t < 4; ++t) {
      acc += taps.weight[t] * grid.at(taps.y[t], taps.x[t], c);
    }
    out[c] = static_cast<float>(acc);
  }
  return out;
}

geometry::PixelCoord nearest_node_pixel(const FeatureGrid & grid, double u, double v)
{
  const double gx = std::clamp(u / grid.downscale, 0.0, static_cast<double>(grid.width - 1));
  const double gy = std::clamp(v / grid.downscale, 0.0, static_cast<double>(grid.height - 1));
  return {std::round(gx) * grid.downscale, std::round(gy) * grid.downscale};
}

}  // namespace ffpa::imagefeat
