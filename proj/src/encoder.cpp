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

#include "ffpa/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ffpa/error.hpp"
#include "ffpa/parallel.hpp"

namespace ffpa::encoder
{

namespace
{

struct Candidate
{
  double dist2;
  std::size_t index;

  bool operator<(const Candidate & o) const
  {
    return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
  }
};

// Walks the window row-major, so candidates arrive in cell order.
template <typename Distance>
std::vector<std::size_t> window_knn(const maps::SyncedMaps & maps, std::size_t center,
  const KernelSpec & spec, Distance && dist2, double max_dist2)
{
  const Cell c = maps.cell(center);
  const int r0 = std::max(0, c.row - spec.kh / 2);
  const int r1 = std::min(maps.height() - 1, c.row + spec.kh / 2);
  const int c0 = std::max(0, c.col - spec.kw / 2);
  const int c1 = std::min(maps.width() - 1, c.col + spec.kw / 2);

  std::vector<Candidate> found;
  found.reserve(static_cast<std::size_t>(spec.kh) * spec.kw);
  for (int r = r0; r <= r1; ++r) {
    for (int col = c0; col <= c1; ++col) {
      const std::size_t idx = maps.index({r, col});
      if (!maps.valid(idx)) {
        continue;
      }
      const double d2 = dist2(idx);
      if (d2 <= max_dist2) {
        found.push_back({d2, idx});
      }
    }
  }
  const std::size_t k = static_cast<std::size_t>(spec.k);
  const std::size_t keep = std::min(k, found.size());
  std::partial_sort(found.begin(), found.begin() + keep, found.end());

  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < keep; ++i) {
    out.push_back(found[i].index);
  }
  // The center always survives at distance zero, so `out` is non-empty for valid centers.
  const std::size_t pad = out.empty() ? center : out.front();
  out.resize(k, pad);
  return out;
}

}  // namespace

void KernelSpec::validate() const
{
  if (kh < 1 || kw < 1 || kh % 2 == 0 || kw % 2 == 0) {
    throw Error(ErrorCode::kConfigError, "kernel extents must be odd and >= 1");
  }
  if (stride_h < 1 || stride_w < 1) {
    throw Error(ErrorCode::kConfigError, "kernel strides must be >= 1");
  }
  if (k < 1) {
    throw Error(ErrorCode::kConfigError, "neighbor count must be >= 1");
  }
  if (!(range > 0.0)) {
    throw Error(ErrorCode::kConfigError, "neighbor range must be positive");
  }
}

std::vector<Eigen::Vector3d> LevelState::positions() const
{
  std::vector<Eigen::Vector3d> out;
  out.reserve(cells.size());
  for (auto c : cells) {
    out.push_back(maps.xyz(c));
  }
  return out;
}

std::vector<int> LevelState::row_lookup() const
{
  std::vector<int> lookup(maps.cell_count(), -1);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    lookup[cells[i]] = static_cast<int>(i);
  }
  return lookup;
}

std::vector<Cell> sample_centers(const maps::SyncedMaps & maps, const KernelSpec & spec)
{
  std::vector<Cell> centers;
  for (int r = 0; r < maps.height(); r += spec.stride_h) {
    for (int c = 0; c < maps.width(); c += spec.stride_w) {
      if (maps.valid(Cell{r, c})) {
        centers.push_back({r, c});
      }
    }
  }
  return centers;
}

std::vector<std::size_t> knn_in_kernel_indices(
  const maps::SyncedMaps & maps, std::size_t center, const KernelSpec & spec)
{
  const Eigen::Vector3d origin = maps.xyz(center);
  return window_knn(
    maps, center, spec, [&](std::size_t idx) { return (maps.xyz(idx) - origin).squaredNorm(); },
    spec.range * spec.range);
}

std::vector<Cell> knn_in_kernel(const maps::SyncedMaps & maps, Cell center, const KernelSpec & spec)
{
  std::vector<Cell> out;
  for (auto idx : knn_in_kernel_indices(maps, maps.index(center), spec)) {
    out.push_back(maps.cell(idx));
  }
  return out;
}

std::vector<std::size_t> pixel_knn_in_kernel(
  const maps::SyncedMaps & maps, std::size_t center, const KernelSpec & spec)
{
  const Eigen::Vector2d origin = maps.uv(center);
  return window_knn(
    maps, center, spec, [&](std::size_t idx) { return (maps.uv(idx) - origin).squaredNorm(); },
    std::numeric_limits<double>::infinity());
}

std::size_t EncoderLayer::in_channels() const
{
  return (shared.in - offset.out) / 2;
}

EncoderLayer EncoderLayer::load(nn::ParamProvider & params, const std::string & prefix,
  std::size_t in_channels, std::size_t out_channels, std::size_t offset_width)
{
  EncoderLayer layer;
  layer.offset = nn::DenseLayer::load(params, prefix + ".offset", 3, offset_width);
  layer.shared =
    nn::DenseLayer::load(params, prefix + ".shared", offset_width + 2 * in_channels, out_channels);
  return layer;
}

nn::Matrix aggregate_neighbors(const nn::Matrix & features,
  std::span<const Eigen::Vector3d> positions, std::span<const std::size_t> centers,
  std::span<const std::size_t> neighbors, std::size_t k, const EncoderLayer & layer, int threads)
{
  const std::size_t c_in = features.cols();
  const std::size_t c_off = layer.offset.out;
  const std::size_t c_out = layer.shared.out;
  if (layer.offset.in != 3) {
    throw_dimension_mismatch("offset layer input", 3, layer.offset.in);
  }
  if (layer.shared.in != c_off + 2 * c_in) {
    throw_dimension_mismatch("shared layer input", c_off + 2 * c_in, layer.shared.in);
  }
  if (positions.size() != features.rows()) {
    throw_dimension_mismatch("positions", features.rows(), positions.size());
  }
  if (neighbors.size() != centers.size() * k) {
    throw_dimension_mismatch("neighbor table", centers.size() * k, neighbors.size());
  }

  // The shared layer is linear over its concatenated input, so the neighbor block can be
  // evaluated once per input row and reused by every center that groups it.
  nn::Matrix neighbor_term(features.rows(), c_out);
  parallel_for(features.rows(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t n = begin; n < end; ++n) {
      layer.shared.accumulate_block(c_off, features.row(n), neighbor_term.row(n));
    }
  });

  nn::Matrix out(centers.size(), c_out);
  parallel_for(centers.size(), threads, [&](std::size_t begin, std::size_t end) {
    std::vector<float> center_term(c_out);
    std::vector<float> pre(c_out);
    std::vector<float> embed(c_off);
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t cs = centers[s];
      std::copy(layer.shared.bias.begin(), layer.shared.bias.end(), center_term.begin());
      layer.shared.accumulate_block(c_off + c_in, features.row(cs), center_term);

      auto pooled = out.row(s);
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t nk = neighbors[s * k + j];
        const Eigen::Vector3d d = positions[nk] - positions[cs];
        const float offset[3] = {
          static_cast<float>(d.x()), static_cast<float>(d.y()), static_cast<float>(d.z())};
        layer.offset.apply(offset, embed);
        nn::relu_inplace(embed);

        const auto nrow = neighbor_term.row(nk);
        for (std::size_t c = 0; c < c_out; ++c) {
          pre[c] = center_term[c] + nrow[c];
        }
        layer.shared.accumulate_block(0, embed, pre);
        for (std::size_t c = 0; c < c_out; ++c) {
          const float v = pre[c] > 0.0f ? pre[c] : 0.0f;
          pooled[c] = j == 0 ? v : std::max(pooled[c], v);
        }
      }
    }
  });
  return out;
}

LevelState make_input_level(maps::SyncedMaps maps, const nn::DenseLayer & lift, int threads)
{
  if (lift.in != 4) {
    throw_dimension_mismatch("input lift layer", 4, lift.in);
  }
  LevelState state;
  state.cells = maps.valid_indices();
  state.features = nn::Matrix(state.cells.size(), lift.out);
  parallel_for(state.cells.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto p = maps.xyz(state.cells[i]);
      const float in[4] = {static_cast<float>(p.x()), static_cast<float>(p.y()),
        static_cast<float>(p.z()), maps.reflectance(state.cells[i])};
      auto row = state.features.row(i);
      lift.apply(in, row);
      nn::relu_inplace(row);
    }
  });
  state.maps = std::move(maps);
  return state;
}

LevelState encode_level(
  const LevelState & state, const KernelSpec & spec, const EncoderLayer & layer, int threads)
{
  spec.validate();
  if (state.features.rows() != state.cells.size()) {
    throw_dimension_mismatch("level features", state.cells.size(), state.features.rows());
  }
  if (layer.in_channels() != state.features.cols() ||
    layer.shared.in != layer.offset.out + 2 * state.features.cols())
  {
    throw_dimension_mismatch("encoder layer input channels", state.features.cols(),
      layer.in_channels());
  }
  const auto lookup = state.row_lookup();
  const auto center_cells = sample_centers(state.maps, spec);
  const std::size_t k = static_cast<std::size_t>(spec.k);

  std::vector<std::size_t> centers(center_cells.size());
  std::vector<std::size_t> neighbors(center_cells.size() * k);
  parallel_for(center_cells.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t s = begin; s < end; ++s) {
      const std::size_t idx = state.maps.index(center_cells[s]);
      centers[s] = static_cast<std::size_t>(lookup[idx]);
      const auto nbrs = knn_in_kernel_indices(state.maps, idx, spec);
      for (std::size_t j = 0; j < k; ++j) {
        neighbors[s * k + j] = static_cast<std::size_t>(lookup[nbrs[j]]);
      }
    }
  });

  const auto positions = state.positions();
  LevelState next;
  next.features =
    aggregate_neighbors(state.features, positions, centers, neighbors, k, layer, threads);
  next.maps = maps::subsample(state.maps, spec.stride_h, spec.stride_w);
  next.cells = next.maps.valid_indices();
  if (next.cells.size() != next.features.rows()) {
    throw_dimension_mismatch("subsampled level rows", next.cells.size(), next.features.rows());
  }
  return next;
}

std::vector<Interpolation> interpolation_weights(std::span<const Eigen::Vector3d> coarse,
  std::span<const Eigen::Vector3d> queries, int threads)
{
  std::vector<Interpolation> out(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      // Three best (distance, index) pairs; strict < keeps the lower index on ties.
      std::array<Candidate, 3> best;
      best.fill({std::numeric_limits<double>::infinity(), std::numeric_limits<std::size_t>::max()});
      for (std::size_t i = 0; i < coarse.size(); ++i) {
        const Candidate cand{(coarse[i] - queries[q]).squaredNorm(), i};
        if (cand < best[2]) {
          best[2] = cand;
          for (int j = 2; j > 0 && best[j] < best[j - 1]; --j) {
            std::swap(best[j], best[j - 1]);
          }
        }
      }
      auto & interp = out[q];
      interp.count = std::min<std::size_t>(3, coarse.size());
      double total = 0.0;
      for (std::size_t j = 0; j < interp.count; ++j) {
        interp.source[j] = best[j].index;
        interp.weight[j] = 1.0 / (std::sqrt(best[j].dist2) + kInterpolationEpsilon);
        total += interp.weight[j];
      }
      for (std::size_t j = 0; j < interp.count; ++j) {
        interp.weight[j] /= total;
      }
    }
  });
  return out;
}

nn::Matrix interpolate(const nn::Matrix & coarse_features, std::span<const Interpolation> weights)
{
  nn::Matrix out(weights.size(), coarse_features.cols());
  for (std::size_t q = 0; q < weights.size(); ++q) {
    auto row = out.row(q);
    const auto & w = weights[q];
    for (std::size_t c = 0; c < row.size(); ++c) {
      double acc = 0.0;
      for (std::size_t j = 0; j < w.count; ++j) {
        acc += w.weight[j] * coarse_features(w.source[j], c);
      }
      row[c] = static_cast<float>(acc);
    }
  }
  return out;
}

DecoderLayer DecoderLayer::load(nn::ParamProvider & params, const std::string & prefix,
  std::size_t coarse_channels, std::size_t fine_channels, std::size_t out_channels)
{
  return {nn::DenseLayer::load(params, prefix + ".mix", coarse_channels + fine_channels,
    out_channels)};
}

nn::Matrix decode_to_full(
  std::span<const LevelState> coarse_to_fine, std::span<const DecoderLayer> layers, int threads)
{
  if (coarse_to_fine.empty()) {
    return {};
  }
  if (layers.size() + 1 != coarse_to_fine.size()) {
    throw_dimension_mismatch("decoder layers", coarse_to_fine.size() - 1, layers.size());
  }
  nn::Matrix current = coarse_to_fine.front().features;
  auto current_positions = coarse_to_fine.front().positions();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto & fine = coarse_to_fine[i + 1];
    const auto & mix = layers[i].mix;
    if (mix.in != current.cols() + fine.features.cols()) {
      throw_dimension_mismatch("decoder mix input", current.cols() + fine.features.cols(), mix.in);
    }
    auto fine_positions = fine.positions();
    const auto weights = interpolation_weights(current_positions, fine_positions, threads);
    const nn::Matrix lifted = interpolate(current, weights);

    nn::Matrix next(fine.size(), mix.out);
    parallel_for(fine.size(), threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t q = begin; q < end; ++q) {
        auto row = next.row(q);
        std::copy(mix.bias.begin(), mix.bias.end(), row.begin());
        mix.accumulate_block(0, lifted.row(q), row);
        mix.accumulate_block(lifted.cols(), fine.features.row(q), row);
        nn::relu_inplace(row);
      }
    });
    current = std::move(next);
    current_positions = std::move(fine_positions);
  }
  return current;
}

}  // namespace ffpa::encoder
