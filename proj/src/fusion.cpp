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

#include "ffpa/fusion.hpp"

#include <algorithm>
#include <cmath>

#include "ffpa/error.hpp"
#include "ffpa/parallel.hpp"

namespace ffpa::fusion
{

namespace
{

std::array<float, 7> as_float(const EuclideanInfo & e)
{
  std::array<float, 7> f;
  for (std::size_t i = 0; i < 7; ++i) {
    f[i] = static_cast<float>(e[i]);
  }
  return f;
}

void check_width(const char * what, std::size_t expected, std::size_t actual)
{
  if (expected != actual) {
    throw_dimension_mismatch(what, expected, actual);
  }
}

float logit_of(const nn::DenseLayer & logit, std::span<const float> hidden)
{
  float y = 0.0f;
  logit.apply(hidden, std::span<float>(&y, 1));
  return y;
}

// Softmax-weighted sum of rows; weights accumulate in double.
std::vector<float> weighted_sum(
  std::span<const double> weights, std::span<const std::span<const float>> rows, std::size_t width)
{
  std::vector<double> acc(width, 0.0);
  for (std::size_t n = 0; n < rows.size(); ++n) {
    for (std::size_t c = 0; c < width; ++c) {
      acc[c] += weights[n] * rows[n][c];
    }
  }
  return {acc.begin(), acc.end()};
}

}  // namespace

EuclideanInfo euclidean_info(const Eigen::Vector2d & x, const Eigen::Vector2d & y)
{
  const Eigen::Vector2d d = x - y;
  return {x.x(), x.y(), y.x(), y.y(), d.x(), d.y(), d.norm()};
}

LiCamFuseParams LiCamFuseParams::load(
  nn::ParamProvider & params, const std::string & prefix, std::size_t width)
{
  LiCamFuseParams p;
  p.point_fc = nn::DenseLayer::load(params, prefix + ".point_fc", width, width);
  p.image_fc = nn::DenseLayer::load(params, prefix + ".image_fc", width, width);
  p.euclid_fc = nn::DenseLayer::load(params, prefix + ".euclid_fc", 7, width);
  p.gate_fc = nn::DenseLayer::load(params, prefix + ".gate_fc", width, width);
  return p;
}

LiCamFuseResult licamfuse(std::span<const float> point_feature,
  std::span<const float> image_feature, const EuclideanInfo & info, const LiCamFuseParams & params)
{
  const std::size_t c = params.width();
  check_width("licamfuse point feature", c, point_feature.size());
  check_width("licamfuse image feature", c, image_feature.size());
  check_width("licamfuse point_fc", c, params.point_fc.in);
  check_width("licamfuse image_fc", c, params.image_fc.in);
  check_width("licamfuse euclid_fc", 7, params.euclid_fc.in);
  check_width("licamfuse gate_fc", c, params.gate_fc.in);

  std::vector<float> joint(c);
  std::vector<float> tmp(c);
  params.point_fc.apply(point_feature, joint);
  params.image_fc.apply(image_feature, tmp);
  for (std::size_t i = 0; i < c; ++i) {
    joint[i] += tmp[i];
  }
  const auto e = as_float(info);
  params.euclid_fc.apply(e, tmp);
  for (std::size_t i = 0; i < c; ++i) {
    joint[i] = std::tanh(joint[i] + tmp[i]);
  }

  LiCamFuseResult out;
  out.gate.resize(c);
  out.fused.resize(c);
  params.gate_fc.apply(joint, tmp);
  for (std::size_t i = 0; i < c; ++i) {
    const double w = 1.0 / (1.0 + std::exp(-static_cast<double>(tmp[i])));
    out.gate[i] = w;
    out.fused[i] = static_cast<float>(w * image_feature[i] + (1.0 - w) * point_feature[i]);
  }
  return out;
}

CrossAttentionParams CrossAttentionParams::load(
  nn::ParamProvider & params, const std::string & prefix, std::size_t width)
{
  CrossAttentionParams p;
  p.embed = nn::DenseLayer::load(params, prefix + ".embed", 7 + 2 * width, width);
  p.hidden = nn::DenseLayer::load(params, prefix + ".weight_hidden", 7 + width, width);
  p.logit = nn::DenseLayer::load(params, prefix + ".weight_logit", width, 1);
  return p;
}

NeighborAttentionParams NeighborAttentionParams::load(
  nn::ParamProvider & params, const std::string & prefix, std::size_t width)
{
  NeighborAttentionParams p;
  p.hidden = nn::DenseLayer::load(params, prefix + ".weight_hidden", 2 * width + 7, width);
  p.logit = nn::DenseLayer::load(params, prefix + ".weight_logit", width, 1);
  return p;
}

BiLiCamFuseParams BiLiCamFuseParams::load(
  nn::ParamProvider & params, const std::string & prefix, std::size_t width, int k, int m)
{
  if (k < 1 || m < 1) {
    throw Error(ErrorCode::kConfigError, "BiLiCamFuse neighbor counts must be >= 1");
  }
  BiLiCamFuseParams p;
  p.lidar.stage1 = CrossAttentionParams::load(params, prefix + ".lidar.stage1", width);
  p.lidar.stage2 = NeighborAttentionParams::load(params, prefix + ".lidar.stage2", width);
  p.image.stage1 = CrossAttentionParams::load(params, prefix + ".image.stage1", width);
  p.image.stage2 = NeighborAttentionParams::load(params, prefix + ".image.stage2", width);
  p.mix = nn::DenseLayer::load(params, prefix + ".mix", 2 * width, width);
  p.norm = nn::BatchNorm::load(params, prefix + ".norm", width);
  p.k = k;
  p.m = m;
  return p;
}

AttentionResult bilicamfuse_stage1(std::span<const float> center_feature,
  std::span<const Neighbor> cross_neighbors, const CrossAttentionParams & params)
{
  const std::size_t c = params.embed.out;
  check_width("stage1 center feature", c, center_feature.size());
  check_width("stage1 embed input", 7 + 2 * c, params.embed.in);
  check_width("stage1 hidden input", 7 + c, params.hidden.in);
  check_width("stage1 logit", 1, params.logit.out);
  if (cross_neighbors.empty()) {
    throw_dimension_mismatch("stage1 cross neighbors", 1, 0);
  }

  std::vector<std::vector<float>> embeds;
  std::vector<double> logits;
  std::vector<float> hidden(params.hidden.out);
  for (const auto & n : cross_neighbors) {
    check_width("stage1 cross feature", c, n.feature.size());
    const auto e = as_float(n.info);
    std::vector<float> embed(params.embed.bias);
    params.embed.accumulate_block(0, e, embed);
    params.embed.accumulate_block(7, n.feature, embed);
    params.embed.accumulate_block(7 + c, center_feature, embed);
    nn::relu_inplace(embed);

    std::copy(params.hidden.bias.begin(), params.hidden.bias.end(), hidden.begin());
    params.hidden.accumulate_block(0, e, hidden);
    params.hidden.accumulate_block(7, embed, hidden);
    nn::relu_inplace(hidden);
    logits.push_back(logit_of(params.logit, hidden));
    embeds.push_back(std::move(embed));
  }

  AttentionResult out;
  out.weights = nn::softmax(logits);
  std::vector<std::span<const float>> rows(embeds.begin(), embeds.end());
  out.feature = weighted_sum(out.weights, rows, c);
  return out;
}

AttentionResult bilicamfuse_stage2(std::span<const float> center_feature,
  std::span<const Neighbor> neighbors, const NeighborAttentionParams & params)
{
  const std::size_t c = params.hidden.out;
  check_width("stage2 center feature", c, center_feature.size());
  check_width("stage2 hidden input", 2 * c + 7, params.hidden.in);
  check_width("stage2 logit", 1, params.logit.out);
  if (neighbors.empty()) {
    throw_dimension_mismatch("stage2 neighbors", 1, 0);
  }

  std::vector<double> logits;
  std::vector<float> hidden(c);
  std::vector<std::span<const float>> rows;
  for (const auto & n : neighbors) {
    check_width("stage2 neighbor feature", c, n.feature.size());
    const auto e = as_float(n.info);
    std::copy(params.hidden.bias.begin(), params.hidden.bias.end(), hidden.begin());
    params.hidden.accumulate_block(0, n.feature, hidden);
    params.hidden.accumulate_block(c, e, hidden);
    params.hidden.accumulate_block(c + 7, center_feature, hidden);
    nn::relu_inplace(hidden);
    logits.push_back(logit_of(params.logit, hidden));
    rows.push_back(n.feature);
  }

  AttentionResult out;
  out.weights = nn::softmax(logits);
  out.feature = weighted_sum(out.weights, rows, c);
  return out;
}

std::vector<float> bilicamfuse_combine(
  std::span<const float> lidar_out, std::span<const float> image_out, const BiLiCamFuseParams & params)
{
  const std::size_t c = params.width();
  check_width("combine lidar branch", c, lidar_out.size());
  check_width("combine image branch", c, image_out.size());
  check_width("combine mix input", 2 * c, params.mix.in);
  std::vector<float> y(params.mix.bias);
  params.mix.accumulate_block(0, lidar_out, y);
  params.mix.accumulate_block(c, image_out, y);
  params.norm.apply(y);
  nn::relu_inplace(y);
  return y;
}

NeighborTables build_neighbor_tables(
  const encoder::LevelState & level, const encoder::KernelSpec & window, int k, int m, int threads)
{
  encoder::KernelSpec spec_k = window;
  spec_k.k = k;
  encoder::KernelSpec spec_m = window;
  spec_m.k = m;
  spec_k.validate();
  spec_m.validate();

  NeighborTables t;
  t.k = static_cast<std::size_t>(k);
  t.m = static_cast<std::size_t>(m);
  const std::size_t n = level.size();
  t.point_k.resize(n * t.k);
  t.pixel_k.resize(n * t.k);
  t.point_m.resize(n * t.m);
  t.pixel_m.resize(n * t.m);
  const auto lookup = level.row_lookup();
  auto fill = [&](std::vector<std::size_t> & dst, std::size_t row, std::size_t width,
                const std::vector<std::size_t> & cells) {
    for (std::size_t j = 0; j < width; ++j) {
      dst[row * width + j] = static_cast<std::size_t>(lookup[cells[j]]);
    }
  };
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const std::size_t cell = level.cells[i];
      fill(t.point_k, i, t.k, encoder::knn_in_kernel_indices(level.maps, cell, spec_k));
      fill(t.point_m, i, t.m, encoder::knn_in_kernel_indices(level.maps, cell, spec_m));
      fill(t.pixel_k, i, t.k, encoder::pixel_knn_in_kernel(level.maps, cell, spec_k));
      fill(t.pixel_m, i, t.m, encoder::pixel_knn_in_kernel(level.maps, cell, spec_m));
    }
  });
  return t;
}

namespace
{

// One direction of BiLiCamFuse over a whole level. The layers are linear over their
// concatenated inputs, so the per-row blocks are evaluated once and shared by every pair that
// references the row; only the Euclidean block and the stage-1 weight head are per pair.
nn::Matrix fuse_direction(const nn::Matrix & own, const nn::Matrix & cross,
  std::span<const Eigen::Vector2d> uv, std::span<const std::size_t> same_table, std::size_t k,
  std::span<const std::size_t> cross_table, std::size_t m, const DirectionParams & params,
  int threads)
{
  const std::size_t n = own.rows();
  const std::size_t c = own.cols();
  const auto & s1 = params.stage1;
  const auto & s2 = params.stage2;

  nn::Matrix embed_cross(n, c);
  nn::Matrix embed_center(n, c);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      s1.embed.accumulate_block(7, cross.row(r), embed_cross.row(r));
      auto center = embed_center.row(r);
      std::copy(s1.embed.bias.begin(), s1.embed.bias.end(), center.begin());
      s1.embed.accumulate_block(7 + c, own.row(r), center);
    }
  });

  nn::Matrix stage1(n, c);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<float> embed_rows(m * c);
    std::vector<float> hidden(s1.hidden.out);
    std::vector<double> logits(m);
    for (std::size_t j = begin; j < end; ++j) {
      for (std::size_t t = 0; t < m; ++t) {
        const std::size_t q = cross_table[j * m + t];
        const auto e = as_float(euclidean_info(uv[j], uv[q]));
        std::span<float> embed(embed_rows.data() + t * c, c);
        const auto ec = embed_center.row(j);
        const auto ex = embed_cross.row(q);
        for (std::size_t i = 0; i < c; ++i) {
          embed[i] = ec[i] + ex[i];
        }
        s1.embed.accumulate_block(0, e, embed);
        nn::relu_inplace(embed);

        std::copy(s1.hidden.bias.begin(), s1.hidden.bias.end(), hidden.begin());
        s1.hidden.accumulate_block(0, e, hidden);
        s1.hidden.accumulate_block(7, embed, hidden);
        nn::relu_inplace(hidden);
        logits[t] = logit_of(s1.logit, hidden);
      }
      const auto w = nn::softmax(logits);
      auto dst = stage1.row(j);
      for (std::size_t i = 0; i < c; ++i) {
        double acc = 0.0;
        for (std::size_t t = 0; t < m; ++t) {
          acc += w[t] * embed_rows[t * c + i];
        }
        dst[i] = static_cast<float>(acc);
      }
    }
  });

  nn::Matrix hidden_neighbor(n, c);
  nn::Matrix hidden_center(n, c);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t r = begin; r < end; ++r) {
      s2.hidden.accumulate_block(0, stage1.row(r), hidden_neighbor.row(r));
      auto center = hidden_center.row(r);
      std::copy(s2.hidden.bias.begin(), s2.hidden.bias.end(), center.begin());
      s2.hidden.accumulate_block(c + 7, own.row(r), center);
    }
  });

  nn::Matrix out(n, c);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    std::vector<float> hidden(c);
    std::vector<double> logits(k);
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t t = 0; t < k; ++t) {
        const std::size_t nb = same_table[i * k + t];
        const auto e = as_float(euclidean_info(uv[i], uv[nb]));
        const auto hc = hidden_center.row(i);
        const auto hn = hidden_neighbor.row(nb);
        for (std::size_t x = 0; x < c; ++x) {
          hidden[x] = hc[x] + hn[x];
        }
        s2.hidden.accumulate_block(c, e, hidden);
        nn::relu_inplace(hidden);
        logits[t] = logit_of(s2.logit, hidden);
      }
      const auto w = nn::softmax(logits);
      auto dst = out.row(i);
      for (std::size_t x = 0; x < c; ++x) {
        double acc = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
          acc += w[t] * stage1(same_table[i * k + t], x);
        }
        dst[x] = static_cast<float>(acc);
      }
    }
  });
  return out;
}

}  // namespace

nn::Matrix bilicamfuse(const encoder::LevelState & points, const nn::Matrix & pixel_features,
  const NeighborTables & tables, const BiLiCamFuseParams & params, int threads)
{
  const std::size_t n = points.size();
  const std::size_t c = params.width();
  check_width("bilicamfuse point rows", n, points.features.rows());
  check_width("bilicamfuse pixel rows", n, pixel_features.rows());
  check_width("bilicamfuse point width", c, points.features.cols());
  check_width("bilicamfuse pixel width", c, pixel_features.cols());
  check_width("bilicamfuse point_k table", n * tables.k, tables.point_k.size());
  check_width("bilicamfuse pixel_m table", n * tables.m, tables.pixel_m.size());
  check_width("bilicamfuse pixel_k table", n * tables.k, tables.pixel_k.size());
  check_width("bilicamfuse point_m table", n * tables.m, tables.point_m.size());
  for (const auto * d : {&params.lidar, &params.image}) {
    check_width("bilicamfuse stage1 embed", 7 + 2 * c, d->stage1.embed.in);
    check_width("bilicamfuse stage1 hidden", 7 + c, d->stage1.hidden.in);
    check_width("bilicamfuse stage2 hidden", 2 * c + 7, d->stage2.hidden.in);
    check_width("bilicamfuse stage2 width", c, d->stage2.hidden.out);
  }
  check_width("bilicamfuse mix input", 2 * c, params.mix.in);

  std::vector<Eigen::Vector2d> uv(n);
  for (std::size_t i = 0; i < n; ++i) {
    uv[i] = points.maps.uv(points.cells[i]);
  }

  // Points query point neighbors, each of which queries pixel neighbors; then the mirror.
  const nn::Matrix lidar_out = fuse_direction(points.features, pixel_features, uv, tables.point_k,
    tables.k, tables.pixel_m, tables.m, params.lidar, threads);
  const nn::Matrix image_out = fuse_direction(pixel_features, points.features, uv, tables.pixel_k,
    tables.k, tables.point_m, tables.m, params.image, threads);

  nn::Matrix out(n, c);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto y = bilicamfuse_combine(lidar_out.row(i), image_out.row(i), params);
      std::copy(y.begin(), y.end(), out.row(i).begin());
    }
  });
  return out;
}

nn::Matrix bilicamfuse(const encoder::LevelState & points, const nn::Matrix & pixel_features,
  const encoder::KernelSpec & window, const BiLiCamFuseParams & params, int threads)
{
  const auto tables = build_neighbor_tables(points, window, params.k, params.m, threads);
  return bilicamfuse(points, pixel_features, tables, params, threads);
}

}  // namespace ffpa::fusion
