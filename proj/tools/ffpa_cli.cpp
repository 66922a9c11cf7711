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

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ffpa/error.hpp"
#include "ffpa/geometry.hpp"
#include "ffpa/io.hpp"
#include "ffpa/maps.hpp"
#include "ffpa/pipeline.hpp"
#include "ffpa/synth.hpp"

namespace fs = std::filesystem;
using namespace ffpa;

namespace
{

struct Common
{
  std::string config_path;
  std::string frame_dir;
  std::string frame_id = "000000";
  std::string preset;
  std::string fusion;
  std::optional<std::uint64_t> seed;
  std::string params;
  std::optional<int> threads;
  std::vector<std::string> overrides;
};

void add_common(CLI::App * cmd, Common & c, bool needs_frame = true)
{
  cmd->add_option("--config", c.config_path, "key = value config file");
  auto * dir = cmd->add_option("--frame-dir", c.frame_dir, "KITTI-layout root (velodyne/, image_2/, calib/)");
  if (needs_frame) {
    dir->required();
  }
  cmd->add_option("--frame-id", c.frame_id, "frame id, e.g. 000042");
  cmd->add_option("--preset", c.preset, "projection grid: 37x180, 40x275 or 46x420");
  cmd->add_option("--fusion", c.fusion, "none, licamfuse or bilicamfuse");
  cmd->add_option("--seed", c.seed, "seed for generated parameters");
  cmd->add_option("--params", c.params, "parameter file (FFPW)");
  cmd->add_option("--threads", c.threads, "worker threads");
  cmd->add_option("--set", c.overrides, "extra key=value overrides");
}

pipeline::PipelineConfig resolve(const Common & c)
{
  pipeline::PipelineConfig cfg;
  if (!c.config_path.empty()) {
    cfg = pipeline::load_config(c.config_path);
  }
  if (!c.preset.empty()) {
    cfg.set("preset", c.preset);
  }
  if (!c.fusion.empty()) {
    cfg.set("fusion", c.fusion);
  }
  if (c.seed) {
    cfg.set("seed", std::to_string(*c.seed));
  }
  if (!c.params.empty()) {
    cfg.set("params", c.params);
  }
  if (c.threads) {
    cfg.set("threads", std::to_string(*c.threads));
  }
  for (const auto & kv : c.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kConfigError, "--set expects key=value, got '" + kv + "'");
    }
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

void write_text(const std::string & path, const std::string & text)
{
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::FILE * f = std::fopen(path.c_str(), "wb");
  if (!f) {
    throw Error(ErrorCode::kIoError, "cannot open " + path);
  }
  std::fwrite(text.data(), 1, text.size(), f);
  std::fputc('\n', f);
  std::fclose(f);
}

std::string matrix_text(const Eigen::MatrixXd & m)
{
  std::string out;
  char buf[64];
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out += "  ";
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), " % .12e", m(r, c));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"ffpa: spherical LiDAR maps, stride encoder and LiDAR-camera fusion"};
  app.require_subcommand(1);

  Common run_opts;
  std::string run_out;
  std::string run_report;
  auto * run = app.add_subcommand("run", "encode and fuse one frame, dump per-point features");
  add_common(run, run_opts);
  run->add_option("--out", run_out, "feature dump path (FFPA container)")->required();
  run->add_option("--report", run_report, "bench report JSON path (default stdout)");

  Common bench_opts;
  int repeats = 5;
  std::string bench_out;
  bool with_pipeline = false;
  auto * bench = app.add_subcommand("bench", "stride sampling + windowed KNN vs FPS + global KNN");
  add_common(bench, bench_opts);
  bench->add_option("--repeats", repeats, "timed repeats (>= 3)");
  bench->add_option("--out", bench_out, "report JSON path (default stdout)");
  bench->add_flag("--pipeline", with_pipeline, "also time full pipeline runs");

  Common dump_opts;
  std::string dump_out;
  int dump_level = 0;
  auto * dump = app.add_subcommand("dump-maps", "write the synchronized maps of one level");
  add_common(dump, dump_opts);
  dump->add_option("--out", dump_out, "maps container path")->required();
  dump->add_option("--level", dump_level, "0 = full resolution, 1..4 = encoder levels")
    ->check(CLI::Range(0, pipeline::kLevels));

  std::string calib_path;
  Common calib_opts;
  auto * calib = app.add_subcommand("inspect-calib", "parse a calib file and print P2 * R0 * Tr");
  calib->add_option("calib", calib_path, "calib file (or use --frame-dir/--frame-id)");
  calib->add_option("--frame-dir", calib_opts.frame_dir);
  calib->add_option("--frame-id", calib_opts.frame_id);

  std::string synth_out;
  int synth_count = 5;
  std::uint64_t synth_seed = 7;
  auto * synth = app.add_subcommand("synth", "generate a synthetic KITTI-layout dataset");
  synth->add_option("--out", synth_out, "dataset root")->required();
  synth->add_option("--count", synth_count, "number of frames")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "scene seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp & e) {
    return app.exit(e);
  } catch (const CLI::ParseError & e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run) {
      const auto cfg = resolve(run_opts);
      const auto frame = pipeline::FrameBundle::kitti(run_opts.frame_dir, run_opts.frame_id);
      const auto result = pipeline::run_frame(cfg, frame);
      pipeline::dump_features(result.features, run_out);
      write_text(run_report, result.report.to_json());
    } else if (*bench) {
      const auto cfg = resolve(bench_opts);
      const auto frame = pipeline::FrameBundle::kitti(bench_opts.frame_dir, bench_opts.frame_id);
      auto report = pipeline::bench_sampling(cfg, frame, repeats);
      auto json = nlohmann::ordered_json::parse(report.to_json());
      if (with_pipeline) {
        const auto loaded = pipeline::load_frame(frame);
        const auto model = pipeline::Model::from_config(cfg);
        std::vector<double> totals;
        for (int r = 0; r < repeats; ++r) {
          totals.push_back(pipeline::run_frame(cfg, loaded, model, frame.id).report.total_ms);
        }
        json["pipeline_ms"] = totals;
        std::sort(totals.begin(), totals.end());
        json["pipeline_median_ms"] = totals[totals.size() / 2];
      }
      write_text(bench_out, json.dump(2));
    } else if (*dump) {
      const auto cfg = resolve(dump_opts);
      const auto frame = pipeline::FrameBundle::kitti(dump_opts.frame_dir, dump_opts.frame_id);
      const auto loaded = pipeline::load_frame(frame);
      if (dump_level == 0) {
        const auto m = maps::build_synced_maps(loaded.cloud, loaded.calib, cfg.grid,
          {cfg.crop, cfg.image_extent});
        maps::write_maps_container(dump_out, m);
      } else {
        const auto model = pipeline::Model::from_config(cfg);
        const auto encoded = pipeline::encode_frame(cfg, loaded, model);
        const auto & level = encoded.levels[static_cast<std::size_t>(dump_level)];
        maps::write_maps_container(dump_out, level.maps, &level.features);
      }
    } else if (*calib) {
      fs::path path = calib_path;
      if (path.empty()) {
        if (calib_opts.frame_dir.empty()) {
          throw Error(ErrorCode::kConfigError, "inspect-calib needs a file or --frame-dir");
        }
        path = fs::path(calib_opts.frame_dir) / "calib" / (calib_opts.frame_id + ".txt");
      }
      const auto c = io::read_calibration(path);
      std::cout << "P2:\n" << matrix_text(c.cam_projection);
      std::cout << "R0_rect:\n" << matrix_text(c.rectification);
      std::cout << "Tr_velo_to_cam:\n" << matrix_text(c.lidar_to_cam);
      std::cout << "P2 * R0 * Tr:\n" << matrix_text(c.composed);
      std::printf("R0 orthonormality error: %.3e\n", geometry::rectification_orthonormality_error(c));
    } else if (*synth) {
      synth::write_kitti_dataset(synth_out, synth_seed, synth_count);
      std::printf("wrote %d frames to %s\n", synth_count, synth_out.c_str());
    }
  } catch (const Error & e) {
    std::fprintf(stderr, "ffpa: %s: %s\n", to_string(e.code()), e.what());
    return exit_code_for(e.code());
  } catch (const std::exception & e) {
    std::fprintf(stderr, "ffpa: %s\n", e.what());
    return 3;
  }
  return 0;
}
