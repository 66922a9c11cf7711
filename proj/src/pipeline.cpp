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

#include "ffpa/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "binary_io.hpp"
#include "ffpa/error.hpp"
#include "ffpa/io.hpp"
#include "ffpa/maps.hpp"
#include "ffpa/parallel.hpp"

namespace ffpa::pipeline
{

namespace
{

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

double median(std::vector<double> v)
{
  if (v.empty()) {
    return 0.0;
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string_view trim(std::string_view s)
{
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value)
{
  throw Error(ErrorCode::kConfigError,
    "invalid value '" + std::string(value) + "' for key '" + std::string(key) + "'");
}

template <typename T>
T parse_number(std::string_view key, std::string_view value)
{
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    bad_value(key, value);
  }
  return out;
}

// Samples the image grid at each row's u*v* entry and lifts it to the point feature width.
nn::Matrix sample_pixels(const encoder::LevelState & level, const imagefeat::FeatureGrid & grid,
  const nn::DenseLayer & proj, int threads)
{
  nn::Matrix out(level.size(), proj.out);
  parallel_for(level.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto uv = level.maps.uv(level.cells[i]);
      const auto sampled = imagefeat::bilinear_sample(grid, uv.x(), uv.y());
      proj.apply(sampled, out.row(i));
    }
  });
  return out;
}

nn::Matrix licamfuse_level(const encoder::LevelState & level, const nn::Matrix & pixels,
  const imagefeat::FeatureGrid & grid, const fusion::LiCamFuseParams & params, int threads)
{
  nn::Matrix out(level.size(), params.width());
  parallel_for(level.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto uv = level.maps.uv(level.cells[i]);
      const auto node = imagefeat::nearest_node_pixel(grid, uv.x(), uv.y());
      const auto info = fusion::euclidean_info(uv, Eigen::Vector2d(node.u, node.v));
      const auto fused = fusion::licamfuse(level.features.row(i), pixels.row(i), info, params);
      std::copy(fused.fused.begin(), fused.fused.end(), out.row(i).begin());
    }
  });
  return out;
}

}  // namespace

const char * fusion_name(FusionMode mode)
{
  switch (mode) {
    case FusionMode::kNone:
      return "none";
    case FusionMode::kLiCamFuse:
      return "licamfuse";
    case FusionMode::kBiLiCamFuse:
      return "bilicamfuse";
  }
  return "?";
}

std::optional<FusionMode> parse_fusion(std::string_view name)
{
  for (auto m : {FusionMode::kNone, FusionMode::kLiCamFuse, FusionMode::kBiLiCamFuse}) {
    if (name == fusion_name(m)) {
      return m;
    }
  }
  return std::nullopt;
}

void PipelineConfig::validate() const
{
  try {
    grid.validate();
    for (const auto & spec : kernels) {
      spec.validate();
    }
  } catch (const Error & e) {
    throw Error(ErrorCode::kConfigError, e.what());
  }
  if (k < 1 || m < 1) {
    throw Error(ErrorCode::kConfigError, "k and m must be >= 1");
  }
  if (image_extent.width < 1 || image_extent.height < 1) {
    throw Error(ErrorCode::kConfigError, "image extent must be positive");
  }
  for (int w : point_widths) {
    if (w < 1) {
      throw Error(ErrorCode::kConfigError, "point feature widths must be positive");
    }
  }
  for (int w : image_widths) {
    if (w < 1) {
      throw Error(ErrorCode::kConfigError, "image feature widths must be positive");
    }
  }
  if (input_width < 1 || offset_width < 1) {
    throw Error(ErrorCode::kConfigError, "input and offset widths must be positive");
  }
  if (!(crop.x_min <= crop.x_max && crop.y_min <= crop.y_max && crop.z_min <= crop.z_max)) {
    throw Error(ErrorCode::kConfigError, "crop box bounds are inverted");
  }
}

void PipelineConfig::set(std::string_view key, std::string_view value)
{
  value = trim(value);
  if (key == "preset") {
    const auto p = geometry::parse_preset(value);
    if (!p) {
      bad_value(key, value);
    }
    grid_name = std::string(value);
    grid = geometry::SphericalGrid::preset(*p);
  } else if (key == "grid.height" || key == "grid.width") {
    const int v = parse_number<int>(key, value);
    if (v < 1) {
      bad_value(key, value);
    }
    const int h = key == "grid.height" ? v : grid.height;
    const int w = key == "grid.width" ? v : grid.width;
    grid = geometry::SphericalGrid::covering(h, w, geometry::FieldOfView::kitti_front());
    grid_name = std::to_string(h) + "x" + std::to_string(w);
  } else if (key == "fusion") {
    const auto f = parse_fusion(value);
    if (!f) {
      bad_value(key, value);
    }
    fusion = *f;
  } else if (key == "k") {
    k = parse_number<int>(key, value);
    for (auto & spec : kernels) {
      spec.k = k;
    }
  } else if (key == "m") {
    m = parse_number<int>(key, value);
  } else if (key == "seed") {
    seed = parse_number<std::uint64_t>(key, value);
    params_path.reset();
  } else if (key == "params") {
    params_path = std::filesystem::path(std::string(value));
  } else if (key == "threads") {
    threads = parse_number<int>(key, value);
    if (threads < 1) {
      bad_value(key, value);
    }
  } else if (key == "image.width") {
    image_extent.width = parse_number<int>(key, value);
  } else if (key == "image.height") {
    image_extent.height = parse_number<int>(key, value);
  } else if (key == "input_width") {
    input_width = parse_number<int>(key, value);
  } else if (key == "offset_width") {
    offset_width = parse_number<int>(key, value);
  } else if (key.starts_with("crop.")) {
    const double v = parse_number<double>(key, value);
    const auto field = key.substr(5);
    if (field == "x_min") {
      crop.x_min = v;
    } else if (field == "x_max") {
      crop.x_max = v;
    } else if (field == "y_min") {
      crop.y_min = v;
    } else if (field == "y_max") {
      crop.y_max = v;
    } else if (field == "z_min") {
      crop.z_min = v;
    } else if (field == "z_max") {
      crop.z_max = v;
    } else {
      throw Error(ErrorCode::kConfigError, "unknown key '" + std::string(key) + "'");
    }
  } else if (key.size() > 7 && key.starts_with("level") && key[6] == '.') {
    const int level = key[5] - '0';
    if (level < 1 || level > kLevels) {
      throw Error(ErrorCode::kConfigError, "unknown key '" + std::string(key) + "'");
    }
    auto & spec = kernels[level - 1];
    const auto field = key.substr(7);
    if (field == "kh") {
      spec.kh = parse_number<int>(key, value);
    } else if (field == "kw") {
      spec.kw = parse_number<int>(key, value);
    } else if (field == "stride_h") {
      spec.stride_h = parse_number<int>(key, value);
    } else if (field == "stride_w") {
      spec.stride_w = parse_number<int>(key, value);
    } else if (field == "k") {
      spec.k = parse_number<int>(key, value);
    } else if (field == "range") {
      spec.range = parse_number<double>(key, value);
    } else if (field == "point_width") {
      point_widths[level - 1] = parse_number<int>(key, value);
    } else if (field == "image_width") {
      image_widths[level - 1] = parse_number<int>(key, value);
    } else {
      throw Error(ErrorCode::kConfigError, "unknown key '" + std::string(key) + "'");
    }
  } else {
    throw Error(ErrorCode::kConfigError, "unknown key '" + std::string(key) + "'");
  }
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base)
{
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::kConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    base.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

PipelineConfig load_config(const std::filesystem::path & path, PipelineConfig base)
{
  return parse_config(detail::read_file(path), std::move(base));
}

FrameBundle FrameBundle::kitti(const std::filesystem::path & root, const std::string & id)
{
  FrameBundle f;
  f.id = id;
  f.velodyne = root / "velodyne" / (id + ".bin");
  f.image = root / "image_2" / (id + ".png");
  f.calibration = root / "calib" / (id + ".txt");
  for (const auto * p : {&f.velodyne, &f.image, &f.calibration}) {
    if (!std::filesystem::is_regular_file(*p)) {
      throw Error(ErrorCode::kIoError, "frame " + id + ": missing " + p->string());
    }
  }
  return f;
}

LoadedFrame load_frame(const FrameBundle & frame)
{
  try {
    LoadedFrame out;
    out.cloud = io::read_velodyne(frame.velodyne);
    out.calib = io::read_calibration(frame.calibration);
    out.image = io::read_png(frame.image);
    return out;
  } catch (const Error & e) {
    throw Error(e.code(), "frame " + frame.id + ": " + e.what());
  }
}

nn::ParamProvider make_param_provider(const PipelineConfig & config)
{
  if (config.params_path) {
    return nn::ParamProvider::from_store(nn::ParamStore::load(*config.params_path));
  }
  return nn::ParamProvider::seeded(config.seed);
}

Model Model::load(const PipelineConfig & config, nn::ParamProvider & params)
{
  config.validate();
  Model model;
  model.fusion = config.fusion;
  const auto width = [](int w) { return static_cast<std::size_t>(w); };
  model.input_lift = nn::DenseLayer::load(params, "encoder.input", 4, width(config.input_width));
  std::size_t c_in = width(config.input_width);
  for (int l = 0; l < kLevels; ++l) {
    const std::string prefix = "encoder.level" + std::to_string(l + 1);
    model.encoder.push_back(encoder::EncoderLayer::load(
      params, prefix, c_in, width(config.point_widths[l]), width(config.offset_width)));
    c_in = width(config.point_widths[l]);
  }
  // Decoder runs coarse -> fine: level 4 onto 3, ..., level 1 onto the full-resolution points.
  for (int l = kLevels - 1; l >= 0; --l) {
    const std::size_t coarse = width(config.point_widths[l]);
    const std::size_t fine = l == 0 ? width(config.input_width) : width(config.point_widths[l - 1]);
    model.decoder.push_back(encoder::DecoderLayer::load(
      params, "decoder.up" + std::to_string(l + 1), coarse, fine, fine));
  }
  if (config.fusion == FusionMode::kNone) {
    return model;
  }
  model.image = imagefeat::ImageBackbone::load(params, "image", config.image_widths);
  for (int l = 0; l < kLevels; ++l) {
    const std::string prefix = "fusion.level" + std::to_string(l + 1);
    const std::size_t c = width(config.point_widths[l]);
    model.image_proj.push_back(
      nn::DenseLayer::load(params, prefix + ".image_proj", width(config.image_widths[l]), c));
    if (config.fusion == FusionMode::kLiCamFuse) {
      model.licamfuse.push_back(fusion::LiCamFuseParams::load(params, prefix + ".licamfuse", c));
    } else {
      model.bilicamfuse.push_back(fusion::BiLiCamFuseParams::load(
        params, prefix + ".bilicamfuse", c, config.k, config.m));
    }
  }
  model.final_image_proj = nn::DenseLayer::load(
    params, "fusion.final.image_proj", width(config.image_widths[0]), width(config.input_width));
  model.final_fusion =
    fusion::LiCamFuseParams::load(params, "fusion.final.licamfuse", width(config.input_width));
  return model;
}

Model Model::from_config(const PipelineConfig & config)
{
  auto params = make_param_provider(config);
  return load(config, params);
}

double BenchReport::stage_sum_ms() const
{
  double s = 0.0;
  for (const auto & st : stages) {
    s += st.ms;
  }
  return s;
}

std::string BenchReport::to_json() const
{
  nlohmann::ordered_json j;
  j["frame_id"] = frame_id;
  j["preset"] = preset;
  j["fusion"] = fusion;
  nlohmann::ordered_json stage_json = nlohmann::ordered_json::object();
  for (const auto & s : stages) {
    stage_json[s.name] = s.ms;
  }
  j["stages_ms"] = stage_json;
  j["total_ms"] = total_ms;
  j["occupancy"] = occupancy;
  j["cropped_points"] = cropped_points;
  j["level_points"] = level_points;
  if (baseline) {
    nlohmann::ordered_json b;
    b["points"] = baseline->points;
    b["centers"] = baseline->centers;
    b["repeats"] = baseline->repeats;
    b["max_stride_neighbors"] = baseline->max_stride_neighbors;
    b["max_global_neighbors"] = baseline->max_global_neighbors;
    b["stride_median_ms"] = baseline->stride_median_ms;
    b["global_median_ms"] = baseline->global_median_ms;
    b["stride_ms"] = baseline->stride_ms;
    b["global_ms"] = baseline->global_ms;
    j["baseline"] = b;
  }
  return j.dump(2);
}

EncodedFrame encode_frame(const PipelineConfig & config, const LoadedFrame & frame,
  const Model & model, BenchReport * report)
{
  config.validate();
  if (model.fusion != config.fusion) {
    throw Error(ErrorCode::kConfigError, "model was built for a different fusion mode");
  }
  const int threads = config.threads;
  BenchReport scratch;
  BenchReport & out = report ? *report : scratch;
  auto timed = [&](const char * name, auto && fn) {
    const auto start = Clock::now();
    fn();
    out.stages.push_back({name, elapsed_ms(start)});
  };

  EncodedFrame encoded;
  maps::SyncedMaps full;
  timed("maps", [&] {
    out.cropped_points = geometry::crop(frame.cloud, config.crop).size();
    full = maps::build_synced_maps(frame.cloud, frame.calib, config.grid,
      {config.crop, config.image_extent});
  });
  out.occupancy = maps::occupancy(full);

  auto & pyramid = encoded.pyramid;
  if (config.fusion != FusionMode::kNone) {
    timed("image_features", [&] {
      pyramid = imagefeat::extract_image_pyramid(
        imagefeat::pad_image(frame.image, config.image_extent), model.image, threads);
    });
  }

  auto & levels = encoded.levels;
  double encoder_ms = 0.0;
  double fusion_ms = 0.0;
  {
    auto start = Clock::now();
    levels.push_back(encoder::make_input_level(std::move(full), model.input_lift, threads));
    encoder_ms += elapsed_ms(start);
  }
  for (int l = 0; l < kLevels; ++l) {
    auto start = Clock::now();
    encoder::LevelState next =
      encoder::encode_level(levels.back(), config.kernels[l], model.encoder[l], threads);
    encoder_ms += elapsed_ms(start);

    if (config.fusion != FusionMode::kNone) {
      start = Clock::now();
      const nn::Matrix pixels = sample_pixels(next, pyramid[l], model.image_proj[l], threads);
      if (config.fusion == FusionMode::kLiCamFuse) {
        next.features = licamfuse_level(next, pixels, pyramid[l], model.licamfuse[l], threads);
      } else {
        next.features =
          fusion::bilicamfuse(next, pixels, config.kernels[l], model.bilicamfuse[l], threads);
      }
      fusion_ms += elapsed_ms(start);
    }
    levels.push_back(std::move(next));
  }
  out.stages.push_back({"encoder", encoder_ms});
  if (config.fusion != FusionMode::kNone) {
    out.stages.push_back({"fusion", fusion_ms});
  }
  out.level_points.clear();
  for (const auto & level : levels) {
    out.level_points.push_back(level.size());
  }
  return encoded;
}

FrameResult run_frame(const PipelineConfig & config, const LoadedFrame & frame, const Model & model,
  const std::string & frame_id)
{
  const int threads = config.threads;
  FrameResult result;
  auto & report = result.report;
  report.frame_id = frame_id;
  report.preset = config.grid_name;
  report.fusion = fusion_name(config.fusion);
  const auto total_start = Clock::now();
  auto timed = [&](const char * name, auto && fn) {
    const auto start = Clock::now();
    fn();
    report.stages.push_back({name, elapsed_ms(start)});
  };

  EncodedFrame encoded = encode_frame(config, frame, model, &report);
  auto & levels = encoded.levels;
  const auto & pyramid = encoded.pyramid;

  timed("decoder", [&] {
    std::vector<encoder::LevelState> coarse_to_fine(levels.rbegin(), levels.rend());
    result.features = encoder::decode_to_full(coarse_to_fine, model.decoder, threads);
  });

  if (config.fusion != FusionMode::kNone) {
    timed("final_fusion", [&] {
      encoder::LevelState full_level = levels.front();
      full_level.features = std::move(result.features);
      const nn::Matrix pixels =
        sample_pixels(full_level, pyramid.front(), model.final_image_proj, threads);
      result.features =
        licamfuse_level(full_level, pixels, pyramid.front(), model.final_fusion, threads);
    });
  }
  report.total_ms = elapsed_ms(total_start);
  return result;
}

FrameResult run_frame(const PipelineConfig & config, const FrameBundle & frame)
{
  const auto start = Clock::now();
  LoadedFrame loaded = load_frame(frame);
  const double load_ms = elapsed_ms(start);

  const auto params_start = Clock::now();
  const Model model = Model::from_config(config);
  const double params_ms = elapsed_ms(params_start);

  FrameResult result = run_frame(config, loaded, model, frame.id);
  auto & stages = result.report.stages;
  stages.insert(stages.begin(), {{"load", load_ms}, {"params", params_ms}});
  result.report.total_ms = elapsed_ms(start);
  return result;
}

std::vector<std::size_t> farthest_point_sampling(
  std::span<const Eigen::Vector3d> points, std::size_t count)
{
  std::vector<std::size_t> picked;
  if (points.empty() || count == 0) {
    return picked;
  }
  count = std::min(count, points.size());
  picked.reserve(count);
  std::vector<double> nearest(points.size(), std::numeric_limits<double>::infinity());
  std::size_t last = 0;
  picked.push_back(last);
  while (picked.size() < count) {
    std::size_t best = 0;
    double best_dist = -1.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      const double d = (points[i] - points[last]).squaredNorm();
      if (d < nearest[i]) {
        nearest[i] = d;
      }
      if (nearest[i] > best_dist) {
        best_dist = nearest[i];
        best = i;
      }
    }
    last = best;
    picked.push_back(last);
  }
  return picked;
}

std::vector<std::size_t> global_knn(
  std::span<const Eigen::Vector3d> points, std::size_t center, std::size_t k, double range)
{
  std::vector<std::pair<double, std::size_t>> found;
  const double r2 = range * range;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double d = (points[i] - points[center]).squaredNorm();
    if (d <= r2) {
      found.emplace_back(d, i);
    }
  }
  const std::size_t keep = std::min(k, found.size());
  std::partial_sort(found.begin(), found.begin() + keep, found.end());
  std::vector<std::size_t> out;
  out.reserve(k);
  for (std::size_t i = 0; i < keep; ++i) {
    out.push_back(found[i].second);
  }
  out.resize(k, out.empty() ? center : out.front());
  return out;
}

BaselineComparison compare_sampling(const PipelineConfig & config, const LoadedFrame & frame,
  int repeats)
{
  if (repeats < 3) {
    throw Error(ErrorCode::kConfigError, "bench needs at least 3 repeats");
  }
  config.validate();
  const auto & spec = config.kernels[0];
  const geometry::PointCloud cropped = geometry::crop(frame.cloud, config.crop);
  std::vector<Eigen::Vector3d> positions;
  positions.reserve(cropped.size());
  for (const auto & p : cropped) {
    positions.push_back(p.position());
  }

  BaselineComparison cmp;
  cmp.points = cropped.size();
  cmp.repeats = static_cast<std::size_t>(repeats);

  auto stride_path = [&] {
    const auto m = maps::build_synced_maps(cropped, frame.calib, config.grid,
      {config.crop, config.image_extent});
    const auto centers = encoder::sample_centers(m, spec);
    std::size_t widest = 0;
    for (const auto & c : centers) {
      widest = std::max(widest, encoder::knn_in_kernel_indices(m, m.index(c), spec).size());
    }
    cmp.centers = centers.size();
    cmp.max_stride_neighbors = widest;
  };
  auto global_path = [&] {
    const auto picked = farthest_point_sampling(positions, std::max<std::size_t>(cmp.centers, 1));
    std::size_t widest = 0;
    for (auto c : picked) {
      widest = std::max(widest, global_knn(positions, c, static_cast<std::size_t>(spec.k), spec.range).size());
    }
    cmp.max_global_neighbors = widest;
  };

  // Warm-up; also fixes the center count the global path has to match.
  stride_path();
  global_path();
  for (int r = 0; r < repeats; ++r) {
    auto start = Clock::now();
    stride_path();
    cmp.stride_ms.push_back(elapsed_ms(start));
    start = Clock::now();
    global_path();
    cmp.global_ms.push_back(elapsed_ms(start));
  }
  cmp.stride_median_ms = median(cmp.stride_ms);
  cmp.global_median_ms = median(cmp.global_ms);
  return cmp;
}

BenchReport bench_sampling(const PipelineConfig & config, const FrameBundle & frame, int repeats)
{
  const auto start = Clock::now();
  const LoadedFrame loaded = load_frame(frame);
  BenchReport report;
  report.frame_id = frame.id;
  report.preset = config.grid_name;
  report.fusion = fusion_name(config.fusion);
  report.stages.push_back({"load", elapsed_ms(start)});

  const auto maps_start = Clock::now();
  const auto full = maps::build_synced_maps(loaded.cloud, loaded.calib, config.grid,
    {config.crop, config.image_extent});
  report.stages.push_back({"maps", elapsed_ms(maps_start)});
  report.occupancy = maps::occupancy(full);
  report.level_points.push_back(full.valid_count());

  const auto cmp_start = Clock::now();
  report.baseline = compare_sampling(config, loaded, repeats);
  report.stages.push_back({"sampling_comparison", elapsed_ms(cmp_start)});
  report.cropped_points = report.baseline->points;
  report.total_ms = elapsed_ms(start);
  return report;
}

void dump_features(const nn::Matrix & features, const std::filesystem::path & path)
{
  io::dump_features(features, path);
}

}  // namespace ffpa::pipeline
