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

// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ffpa/encoder.hpp"
#include "ffpa/fusion.hpp"
#include "ffpa/io.hpp"
#include "ffpa/maps.hpp"
#include "ffpa/pipeline.hpp"
#include "ffpa/synth.hpp"
#include "gen.hpp"
#include "oracles.hpp"

using namespace ffpa;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace
{

constexpr int kFrames = 5;
constexpr int kCalibFiles = 10;
constexpr std::uint64_t kSceneSeed = 20260;

int failures = 0;

void report(int id, const std::string & name, bool ok, const std::string & detail)
{
  std::printf("%s [%d] %s: %s\n", ok ? "PASS" : "FAIL", id, name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double seconds_since(Clock::time_point t)
{
  return std::chrono::duration<double>(Clock::now() - t).count();
}

double median(std::vector<double> v)
{
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(const char * f, auto... args)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

std::string slurp(const fs::path & p)
{
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

oracle::Calib oracle_calib(const fs::path & path)
{
  const auto c = oracle::parse_calib(slurp(path));
  if (!c) {
    throw std::runtime_error("oracle could not parse " + path.string());
  }
  return *c;
}

std::vector<unsigned char> mask_of(const maps::SyncedMaps & m)
{
  return {m.mask().begin(), m.mask().end()};
}

encoder::EncoderLayer random_layer(gen::Rng & rng, std::size_t c_in, std::size_t c_out, std::size_t c_off)
{
  return {gen::dense(rng, 3, c_off, 2.0), gen::dense(rng, c_off + 2 * c_in, c_out, 0.5)};
}

std::vector<std::vector<double>> rows_of(const nn::Matrix & m)
{
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out.push_back(gen::to_double(m.row(i)));
  }
  return out;
}

double max_abs_diff(const nn::Matrix & a, const nn::Matrix & b)
{
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    return 1e30;
  }
  double d = 0;
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    d = std::max(d, static_cast<double>(std::abs(a.values()[i] - b.values()[i])));
  }
  return d;
}

pipeline::FrameBundle frame(const fs::path & root, int i)
{
  return pipeline::FrameBundle::kitti(root, synth::frame_id(i));
}

// 1: in-kernel KNN against brute force over the window.
void knn_equivalence(const fs::path & root)
{
  const auto start = Clock::now();
  gen::Rng rng(1);
  std::size_t centers = 0;
  std::size_t mismatches = 0;
  double library_s = 0;

  auto check = [&](const maps::SyncedMaps & m, const encoder::KernelSpec & spec, std::size_t count) {
    auto valid = m.valid_indices();
    std::shuffle(valid.begin(), valid.end(), rng.engine());
    valid.resize(std::min(valid.size(), count));
    const auto & shape = m.grid();
    for (auto c : valid) {
      const auto t = Clock::now();
      const auto got = encoder::knn_in_kernel_indices(m, c, spec);
      library_s += seconds_since(t);
      const auto want = oracle::window_knn(m.xyz_data(), mask_of(m), shape.height, shape.width, c,
        spec.kh, spec.kw, spec.k, spec.range);
      mismatches += got == want ? 0 : 1;
      ++centers;
    }
  };

  // Synthetic 20k cloud on a fine grid spanning its field of view.
  const auto cloud = gen::cloud(rng, 20000);
  const auto grid = geometry::SphericalGrid::covering(64, 1024, {-0.6, 0.6, -0.08, 0.03});
  const auto dense = maps::build_synced_maps(cloud, gen::front_camera(), grid);
  for (const auto & spec : pipeline::PipelineConfig{}.kernels) {
    check(dense, spec, 250);
  }
  check(dense, {5, 7, 1, 1, 4, 0.1}, 250);

  // Synthetic KITTI-layout frames at every preset.
  for (int i = 0; i < kFrames; ++i) {
    const auto loaded = pipeline::load_frame(frame(root, i));
    for (auto preset : {geometry::GridPreset::k37x180, geometry::GridPreset::k40x275,
           geometry::GridPreset::k46x420}) {
      const auto m = maps::build_synced_maps(loaded.cloud, loaded.calib,
        geometry::SphericalGrid::preset(preset));
      check(m, {9, 13, 2, 2, 16, 0.5}, 100);
      check(m, {9, 5, 2, 2, 16, 4.0}, 100);
    }
  }
  const double total_s = seconds_since(start);
  report(1, "knn_oracle_equivalence",
    centers >= 500 && mismatches == 0 && total_s < 10.0,
    fmt("%zu centers, %zu mismatches, library %.3f s, total with oracle %.3f s (limit 10 s)",
      centers, mismatches, library_s, total_s));
}

// 2: u*v* stays the projection of xyz after building and four stride-2 subsamples.
void synchronization(const fs::path & root)
{
  std::size_t cells = 0;
  std::size_t within = 0;
  double worst = 0;
  for (int i = 0; i < kFrames; ++i) {
    const auto bundle = frame(root, i);
    const auto loaded = pipeline::load_frame(bundle);
    const auto composed = oracle::compose(oracle_calib(bundle.calibration));
    for (auto preset : {geometry::GridPreset::k37x180, geometry::GridPreset::k40x275,
           geometry::GridPreset::k46x420}) {
      auto m = maps::build_synced_maps(loaded.cloud, loaded.calib, geometry::SphericalGrid::preset(preset));
      for (int step = 0; step <= 4; ++step) {
        if (step > 0) {
          m = maps::subsample(m, 2, 2);
        }
        for (auto c : m.valid_indices()) {
          const auto p = m.xyz(c);
          const auto want = oracle::project(composed, p.x(), p.y(), p.z(), 1280, 384);
          const double err = want
            ? std::hypot(m.uv(c).x() - want->first, m.uv(c).y() - want->second)
            : 1e30;
          worst = std::max(worst, err);
          within += err <= 1e-5 ? 1 : 0;
          ++cells;
        }
      }
    }
  }
  report(2, "map_synchronization", cells > 0 && within == cells,
    fmt("%zu/%zu valid cells within 1e-5 px over %d frames x 3 presets x 5 levels, worst %.3g px",
      within, cells, kFrames, worst));
}

std::vector<double> f32_info(const fusion::EuclideanInfo & e)
{
  std::vector<double> v;
  for (double x : e) {
    v.push_back(static_cast<float>(x));
  }
  return v;
}

fusion::EuclideanInfo random_info(gen::Rng & rng)
{
  return fusion::euclidean_info({rng.uniform(0, 1280), rng.uniform(0, 384)},
    {rng.uniform(0, 1280), rng.uniform(0, 384)});
}

// 3: fusion numerics against the scalar references.
void fusion_numerics()
{
  gen::Rng rng(3);
  constexpr int kInstances = 20;
  double licam_err = 0;
  double stage_err = 0;
  double level_err = 0;
  double weight_sum_err = 0;
  double euclid_err = 0;
  bool gates_open = true;
  std::size_t gates = 0;

  for (int t = 0; t < kInstances; ++t) {
    const Eigen::Vector2d x(rng.uniform(0, 1280), rng.uniform(0, 384));
    const Eigen::Vector2d y(rng.uniform(0, 1280), rng.uniform(0, 384));
    const auto e = fusion::euclidean_info(x, y);
    const auto want = oracle::euclid(x.x(), x.y(), y.x(), y.y());
    for (int i = 0; i < 7; ++i) {
      euclid_err = std::max(euclid_err, std::abs(e[i] - want[i]));
    }
  }

  for (int t = 0; t < kInstances; ++t) {
    const auto c = static_cast<std::size_t>(rng.integer(4, 16));
    const auto p = gen::licam(rng, c);
    const auto fl = rng.floats(c, -3, 3);
    const auto fi = rng.floats(c, -3, 3);
    const auto e = random_info(rng);
    const auto got = fusion::licamfuse(fl, fi, e, p);
    const auto want = oracle::licamfuse(gen::to_oracle(p), gen::to_double(fl), gen::to_double(fi), f32_info(e));
    for (std::size_t i = 0; i < c; ++i) {
      licam_err = std::max(licam_err, std::abs(got.fused[i] - want.fused[i]));
      licam_err = std::max(licam_err, std::abs(got.gate[i] - want.gate[i]));
      gates_open = gates_open && got.gate[i] > 0.0 && got.gate[i] < 1.0;
      ++gates;
    }
  }

  for (int t = 0; t < kInstances; ++t) {
    const auto c = static_cast<std::size_t>(rng.integer(4, 16));
    const auto p1 = gen::cross_attention(rng, c);
    const auto p2 = gen::neighbor_attention(rng, c);
    const auto center = rng.floats(c);
    for (std::size_t n : {std::size_t{4}, std::size_t{8}, std::size_t{16}}) {
      std::vector<std::vector<float>> xs;
      for (std::size_t j = 0; j < n; ++j) {
        xs.push_back(rng.floats(c));
      }
      std::vector<fusion::Neighbor> nb;
      std::vector<std::vector<double>> oxs;
      std::vector<std::vector<double>> oes;
      for (std::size_t j = 0; j < n; ++j) {
        const auto e = random_info(rng);
        nb.push_back({xs[j], e});
        oxs.push_back(gen::to_double(xs[j]));
        oes.push_back(f32_info(e));
      }
      const auto g1 = fusion::bilicamfuse_stage1(center, nb, p1);
      const auto w1 = oracle::stage1({gen::to_oracle(p1.embed), gen::to_oracle(p1.hidden),
        gen::to_oracle(p1.logit)}, gen::to_double(center), oxs, oes);
      const auto g2 = fusion::bilicamfuse_stage2(center, nb, p2);
      const auto w2 = oracle::stage2({gen::to_oracle(p2.hidden), gen::to_oracle(p2.logit)},
        gen::to_double(center), oxs, oes);
      for (std::size_t i = 0; i < c; ++i) {
        stage_err = std::max(stage_err, std::abs(g1.feature[i] - w1.feature[i]));
        stage_err = std::max(stage_err, std::abs(g2.feature[i] - w2.feature[i]));
      }
      for (std::size_t j = 0; j < n; ++j) {
        stage_err = std::max(stage_err, std::abs(g1.weights[j] - w1.weights[j]));
        stage_err = std::max(stage_err, std::abs(g2.weights[j] - w2.weights[j]));
      }
      weight_sum_err = std::max(weight_sum_err,
        std::abs(std::accumulate(g1.weights.begin(), g1.weights.end(), 0.0) - 1.0));
      weight_sum_err = std::max(weight_sum_err,
        std::abs(std::accumulate(g2.weights.begin(), g2.weights.end(), 0.0) - 1.0));
    }
  }

  for (int t = 0; t < kInstances; ++t) {
    const std::size_t c = 16;
    const int k = 16;
    const int m = 8;
    encoder::LevelState level;
    level.maps = gen::dense_maps(rng, 6, 9, 0.3);
    level.cells = level.maps.valid_indices();
    level.features = nn::Matrix(level.cells.size(), c);
    nn::Matrix pixels(level.cells.size(), c);
    for (auto & v : level.features.values()) {
      v = rng.f();
    }
    for (auto & v : pixels.values()) {
      v = rng.f();
    }
    const auto p = gen::bilicam(rng, c, k, m);
    const auto tables = fusion::build_neighbor_tables(level, {9, 13, 1, 1, k, 0.5}, k, m);
    const auto got = fusion::bilicamfuse(level, pixels, tables, p);
    std::vector<std::pair<double, double>> uv;
    for (auto cell : level.cells) {
      uv.emplace_back(level.maps.uv(cell).x(), level.maps.uv(cell).y());
    }
    const auto want = oracle::bilicamfuse(gen::to_oracle(p), rows_of(level.features), rows_of(pixels),
      uv, tables.point_k, tables.pixel_m, tables.pixel_k, tables.point_m, k, m);
    for (std::size_t i = 0; i < got.rows(); ++i) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        level_err = std::max(level_err, std::abs(got(i, ch) - want[i][ch]));
      }
    }
  }

  const double worst = std::max({euclid_err, licam_err, stage_err, level_err});
  report(3, "fusion_numerics",
    worst <= 1e-5 && weight_sum_err <= 1e-6 && gates_open,
    fmt("%d small instances each (C 4..16, M/K 4..16); max |err| euclid %.2g, licamfuse %.2g, stages %.2g, bilicamfuse level "
        "%.2g (tol 1e-5); softmax sum err %.2g (tol 1e-6); %zu gates %s (0,1)",
      kInstances, euclid_err, licam_err, stage_err, level_err, weight_sum_err, gates,
      gates_open ? "all in" : "NOT all in"));
}

// 4: permutation invariance of encode_level and fusion.
void permutation_invariance(const fs::path & root)
{
  gen::Rng rng(4);
  const auto loaded = std::make_unique<pipeline::LoadedFrame>(pipeline::load_frame(frame(root, 0)));
  std::array<pipeline::PipelineConfig, 2> small;
  for (std::size_t i = 0; i < 2; ++i) {
    small[i].fusion = i == 0 ? pipeline::FusionMode::kLiCamFuse : pipeline::FusionMode::kBiLiCamFuse;
    small[i].input_width = 8;
    small[i].offset_width = 8;
    small[i].point_widths = {8, 8, 16, 16};
    small[i].image_widths = {4, 8, 8, 8};
  }
  const std::array<pipeline::Model, 2> models = {
    pipeline::Model::from_config(small[0]), pipeline::Model::from_config(small[1])};
  constexpr int kTrials = 100;
  double encode_cloud = 0;
  double encode_neighbors = 0;
  double fuse_tables = 0;
  double fuse_points = 0;

  for (int t = 0; t < kTrials; ++t) {
    // Input order of the cloud.
    auto cloud = gen::cloud(rng, 1500);
    const auto grid = geometry::SphericalGrid::covering(32, 256, {-0.6, 0.6, -0.08, 0.03});
    const auto lift = gen::dense(rng, 4, 8);
    const auto layer = random_layer(rng, 8, 8, 4);
    const encoder::KernelSpec spec{5, 9, 2, 2, 8, 2.0};
    const auto a = encoder::encode_level(
      encoder::make_input_level(maps::build_synced_maps(cloud, gen::front_camera(), grid), lift), spec, layer);
    std::shuffle(cloud.begin(), cloud.end(), rng.engine());
    const auto b = encoder::encode_level(
      encoder::make_input_level(maps::build_synced_maps(cloud, gen::front_camera(), grid), lift), spec, layer);
    encode_cloud = std::max(encode_cloud, max_abs_diff(a.features, b.features));

    // Order within each neighbor group.
    const std::size_t n = 40;
    const std::size_t k = 8;
    nn::Matrix f(n, 8);
    for (auto & v : f.values()) {
      v = rng.f();
    }
    std::vector<Eigen::Vector3d> pos;
    for (std::size_t i = 0; i < n; ++i) {
      pos.emplace_back(rng.uniform(0, 2), rng.uniform(0, 2), rng.uniform(0, 2));
    }
    std::vector<std::size_t> centers;
    std::vector<std::size_t> nbrs;
    for (std::size_t s = 0; s < 10; ++s) {
      centers.push_back(static_cast<std::size_t>(rng.integer(0, n - 1)));
      for (std::size_t j = 0; j < k; ++j) {
        nbrs.push_back(static_cast<std::size_t>(rng.integer(0, n - 1)));
      }
    }
    const auto g1 = encoder::aggregate_neighbors(f, pos, centers, nbrs, k, layer);
    auto shuffled = nbrs;
    for (std::size_t s = 0; s < centers.size(); ++s) {
      std::shuffle(shuffled.begin() + s * k, shuffled.begin() + (s + 1) * k, rng.engine());
    }
    const auto g2 = encoder::aggregate_neighbors(f, pos, centers, shuffled, k, layer);
    encode_neighbors = std::max(encode_neighbors, max_abs_diff(g1, g2));

    // Order within each fusion neighbor table row.
    encoder::LevelState level;
    level.maps = gen::dense_maps(rng, 5, 7, 0.3);
    level.cells = level.maps.valid_indices();
    level.features = nn::Matrix(level.cells.size(), 6);
    nn::Matrix pixels(level.cells.size(), 6);
    for (auto & v : level.features.values()) {
      v = rng.f();
    }
    for (auto & v : pixels.values()) {
      v = rng.f();
    }
    const auto p = gen::bilicam(rng, 6, 16, 8);
    const auto tables = fusion::build_neighbor_tables(level, {5, 7, 1, 1, 16, 0.5}, 16, 8);
    auto perm = tables;
    auto shuffle_rows = [&](std::vector<std::size_t> & table, std::size_t width) {
      for (std::size_t r = 0; r < level.size(); ++r) {
        std::shuffle(table.begin() + r * width, table.begin() + (r + 1) * width, rng.engine());
      }
    };
    shuffle_rows(perm.point_k, tables.k);
    shuffle_rows(perm.point_m, tables.m);
    shuffle_rows(perm.pixel_k, tables.k);
    shuffle_rows(perm.pixel_m, tables.m);
    const auto fa = fusion::bilicamfuse(level, pixels, tables, p);
    fuse_tables = std::max(fuse_tables, max_abs_diff(fa, fusion::bilicamfuse(level, pixels, perm, p)));

    // Cloud order through the fused encoder, alternating fusion modes.
    auto shuffled_frame = *loaded;
    std::shuffle(shuffled_frame.cloud.begin(), shuffled_frame.cloud.end(), rng.engine());
    const int mode = t % 2;
    const auto ea = pipeline::encode_frame(small[mode], *loaded, models[mode]);
    const auto eb = pipeline::encode_frame(small[mode], shuffled_frame, models[mode]);
    for (std::size_t l = 0; l < ea.levels.size(); ++l) {
      fuse_points = std::max(fuse_points, max_abs_diff(ea.levels[l].features, eb.levels[l].features));
    }
  }
  const double worst = std::max({encode_cloud, encode_neighbors, fuse_tables, fuse_points});
  report(4, "permutation_invariance", worst <= 1e-6,
    fmt("%d trials; max |diff| encode_level(cloud order) %.2g, encode_level(neighbor order) %.2g, "
        "bilicamfuse(neighbor order) %.2g, fused encode_frame(cloud order, licamfuse/bilicamfuse) %.2g "
        "(tol 1e-6)",
      kTrials, encode_cloud, encode_neighbors, fuse_tables, fuse_points));
}

// 5: finer grids keep more points and cost more.
void preset_monotonicity(const fs::path & root)
{
  constexpr int kRepeats = 11;
  const std::vector<std::string> presets = {"37x180", "40x275", "46x420"};
  pipeline::PipelineConfig base;
  const auto model = pipeline::Model::from_config(base);
  bool ok = true;
  std::string detail;
  for (int i = 0; i < kFrames; ++i) {
    const auto loaded = pipeline::load_frame(frame(root, i));
    std::vector<pipeline::PipelineConfig> configs;
    for (const auto & p : presets) {
      configs.push_back(base);
      configs.back().set("preset", p);
    }
    std::vector<std::vector<double>> ms(presets.size());
    std::vector<std::size_t> rows(presets.size());
    pipeline::run_frame(configs[0], loaded, model);  // warm-up
    for (int r = 0; r < kRepeats; ++r) {
      for (std::size_t p = 0; p < presets.size(); ++p) {
        const auto start = Clock::now();
        const auto result = pipeline::run_frame(configs[p], loaded, model);
        ms[p].push_back(1e3 * seconds_since(start));
        rows[p] = result.features.rows();
      }
    }
    std::vector<double> med;
    for (auto & v : ms) {
      med.push_back(median(v));
    }
    const bool frame_ok = rows[0] <= rows[1] && rows[1] <= rows[2] && med[0] <= med[1] && med[1] <= med[2];
    ok = ok && frame_ok;
    detail += fmt("%sframe %d points %zu/%zu/%zu ms %.1f/%.1f/%.1f%s", i ? "; " : "", i, rows[0], rows[1],
      rows[2], med[0], med[1], med[2], frame_ok ? "" : " (violated)");
  }
  report(5, "preset_monotonicity", ok,
    fmt("%d frames, median of %d runs, 37x180/40x275/46x420: ", kFrames, kRepeats) + detail);
}

// 6: stride sampling + windowed KNN vs FPS + global KNN.
void sampling_benchmark(const fs::path & root)
{
  constexpr int kRepeats = 5;
  bool ok = true;
  std::string detail;
  for (int i = 0; i < kFrames; ++i) {
    const auto r = pipeline::bench_sampling(pipeline::PipelineConfig{}, frame(root, i), kRepeats);
    const auto & b = *r.baseline;
    const bool frame_ok = b.repeats >= 5 && b.stride_median_ms < b.global_median_ms;
    ok = ok && frame_ok;
    detail += fmt("%sframe %d: %zu pts %zu centers stride %.2f ms vs fps %.2f ms", i ? "; " : "", i,
      b.points, b.centers, b.stride_median_ms, b.global_median_ms);
  }
  report(6, "bench_sampling", ok, fmt("median of %d repeats; ", kRepeats) + detail);
}

// 7: dumps are bit-identical across processes and thread counts.
void determinism(const fs::path & root, const fs::path & work, const std::string & cli)
{
  bool ok = true;
  std::string detail;
  for (const char * mode : {"none", "licamfuse", "bilicamfuse"}) {
    std::vector<std::string> dumps;
    for (auto [run, threads] : std::vector<std::pair<int, int>>{{0, 1}, {1, 1}, {2, 2}, {3, 4}}) {
      const auto out = work / fmt("det_%s_%d.bin", mode, run);
      const std::string cmd = fmt("\"%s\" run --frame-dir \"%s\" --frame-id %s --fusion %s --threads %d "
        "--out \"%s\" --report \"%s.json\" > /dev/null", cli.c_str(), root.c_str(),
        synth::frame_id(1).c_str(), mode, threads, out.c_str(), out.c_str());
      if (std::system(cmd.c_str()) != 0) {
        ok = false;
        detail += fmt("[%s run %d failed] ", mode, run);
        continue;
      }
      dumps.push_back(slurp(out));
    }
    const bool same = dumps.size() == 4 &&
      std::all_of(dumps.begin(), dumps.end(), [&](const auto & d) { return d == dumps[0]; });
    ok = ok && same && !dumps[0].empty();
    detail += fmt("%s%s: %zu bytes x4 %s", detail.empty() ? "" : "; ", mode,
      dumps.empty() ? 0 : dumps[0].size(), same ? "identical" : "DIFFER");
  }
  report(7, "bit_identical_dumps", ok, "2 runs at 1 thread + 2 and 4 threads; " + detail);
}

// 8: calibration parsing and velodyne sizes.
void calibration(const fs::path & root)
{
  double worst = 0;
  bool counts_ok = true;
  std::size_t points = 0;
  for (int i = 0; i < kCalibFiles; ++i) {
    const auto bundle = frame(root, i);
    const auto calib = io::read_calibration(bundle.calibration);
    const auto want = oracle::compose(oracle_calib(bundle.calibration));
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 4; ++c) {
        worst = std::max(worst, std::abs(calib.composed(r, c) - want[r][c]));
      }
    }
    const auto cloud = io::read_velodyne(bundle.velodyne);
    counts_ok = counts_ok && cloud.size() * 16 == fs::file_size(bundle.velodyne);
    points += cloud.size();
  }
  report(8, "calibration_and_velodyne", worst <= 1e-9 && counts_ok,
    fmt("%d calib files, max |composed - oracle| %.3g (tol 1e-9); velodyne count == size/16 %s "
        "(%zu points)", kCalibFiles, worst, counts_ok ? "for all" : "VIOLATED", points));
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"ffpa acceptance checks"};
  std::string work = "acceptance_data";
  std::string cli;
  app.add_option("--work-dir", work, "scratch directory for generated frames");
  app.add_option("--cli", cli, "path to the ffpa binary")->required();
  CLI11_PARSE(app, argc, argv);

  const fs::path root = fs::path(work) / "kitti";
  fs::remove_all(work);
  fs::create_directories(work);
  synth::write_kitti_dataset(root, kSceneSeed, std::max(kFrames, kCalibFiles));

  const std::vector<std::pair<const char *, std::function<void()>>> checks = {
    {"knn", [&] { knn_equivalence(root); }},
    {"sync", [&] { synchronization(root); }},
    {"fusion", [&] { fusion_numerics(); }},
    {"perm", [&] { permutation_invariance(root); }},
    {"presets", [&] { preset_monotonicity(root); }},
    {"bench", [&] { sampling_benchmark(root); }},
    {"determinism", [&] { determinism(root, work, cli); }},
    {"calib", [&] { calibration(root); }},
  };
  int id = 0;
  for (const auto & [name, fn] : checks) {
    ++id;
    try {
      fn();
    } catch (const std::exception & e) {
      report(id, name, false, std::string("exception: ") + e.what());
    }
  }
  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
