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

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <string>

#include "ffpa/encoder.hpp"
#include "ffpa/error.hpp"
#include "ffpa/fusion.hpp"
#include "ffpa/geometry.hpp"
#include "ffpa/io.hpp"
#include "ffpa/maps.hpp"
#include "ffpa/pipeline.hpp"
#include "ffpa/synth.hpp"

namespace py = pybind11;
using namespace ffpa;

namespace
{

using F32 = py::array_t<float, py::array::c_style | py::array::forcecast>;
using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;

geometry::PointCloud to_cloud(const F32 & points)
{
  if (points.ndim() != 2 || points.shape(1) != 4) {
    throw Error(ErrorCode::kDimensionMismatch, "points must have shape (N, 4)");
  }
  const auto p = points.unchecked<2>();
  geometry::PointCloud cloud(static_cast<std::size_t>(p.shape(0)));
  for (py::ssize_t i = 0; i < p.shape(0); ++i) {
    cloud[i] = {p(i, 0), p(i, 1), p(i, 2), p(i, 3)};
  }
  return cloud;
}

F32 from_cloud(const geometry::PointCloud & cloud)
{
  F32 out({static_cast<py::ssize_t>(cloud.size()), py::ssize_t{4}});
  auto o = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    o(i, 0) = cloud[i].x;
    o(i, 1) = cloud[i].y;
    o(i, 2) = cloud[i].z;
    o(i, 3) = cloud[i].reflectance;
  }
  return out;
}

F32 from_matrix(const nn::Matrix & m)
{
  F32 out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  std::copy(m.values().begin(), m.values().end(), out.mutable_data());
  return out;
}

F64 from_eigen(const Eigen::MatrixXd & m)
{
  F64 out({static_cast<py::ssize_t>(m.rows()), static_cast<py::ssize_t>(m.cols())});
  auto o = out.mutable_unchecked<2>();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      o(r, c) = m(r, c);
    }
  }
  return out;
}

pipeline::PipelineConfig make_config(const std::map<std::string, std::string> & settings)
{
  pipeline::PipelineConfig cfg;
  for (const auto & [k, v] : settings) {
    cfg.set(k, v);
  }
  cfg.validate();
  return cfg;
}

geometry::SphericalGrid grid_for(const std::string & preset)
{
  const auto p = geometry::parse_preset(preset);
  if (!p) {
    throw Error(ErrorCode::kConfigError, "unknown preset '" + preset + "'");
  }
  return geometry::SphericalGrid::preset(*p);
}

}  // namespace

PYBIND11_MODULE(_ffpa, m)
{
  m.doc() = "Spherical LiDAR maps, stride encoder and LiDAR-camera fusion";

  static py::exception<Error> error(m, "Error");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) {
        std::rethrow_exception(p);
      }
    } catch (const Error & e) {
      py::set_error(error, (std::string(to_string(e.code())) + ": " + e.what()).c_str());
    }
  });

  py::class_<geometry::CalibrationSet>(m, "Calibration")
    .def_property_readonly("P2", [](const geometry::CalibrationSet & c) { return from_eigen(c.cam_projection); })
    .def_property_readonly("R0_rect", [](const geometry::CalibrationSet & c) { return from_eigen(c.rectification); })
    .def_property_readonly("Tr_velo_to_cam", [](const geometry::CalibrationSet & c) { return from_eigen(c.lidar_to_cam); })
    .def_property_readonly("composed", [](const geometry::CalibrationSet & c) { return from_eigen(c.composed); });

  m.def("parse_calibration", [](const std::string & text) { return geometry::parse_calibration(text); });
  m.def("read_calibration", [](const std::string & path) { return io::read_calibration(path); });
  m.def("read_velodyne", [](const std::string & path) { return from_cloud(io::read_velodyne(path)); });
  m.def("crop", [](const F32 & points) { return from_cloud(geometry::crop(to_cloud(points), {})); });

  m.def("project_spherical", [](double x, double y, double z, const std::string & preset) {
    const auto c = geometry::project_spherical({x, y, z}, grid_for(preset));
    return c ? py::object(py::make_tuple(c->row, c->col)) : py::object(py::none());
  }, py::arg("x"), py::arg("y"), py::arg("z"), py::arg("preset") = "40x275");

  py::class_<maps::SyncedMaps>(m, "SyncedMaps")
    .def_property_readonly("height", &maps::SyncedMaps::height)
    .def_property_readonly("width", &maps::SyncedMaps::width)
    .def_property_readonly("valid_count", &maps::SyncedMaps::valid_count)
    .def_property_readonly("xyz", [](const maps::SyncedMaps & s) {
      F64 out({s.height(), s.width(), 3});
      std::copy(s.xyz_data().begin(), s.xyz_data().end(), out.mutable_data());
      return out;
    })
    .def_property_readonly("uv", [](const maps::SyncedMaps & s) {
      F64 out({s.height(), s.width(), 2});
      std::copy(s.uv_data().begin(), s.uv_data().end(), out.mutable_data());
      return out;
    })
    .def_property_readonly("mask", [](const maps::SyncedMaps & s) {
      py::array_t<bool> out({s.height(), s.width()});
      std::transform(s.mask().begin(), s.mask().end(), out.mutable_data(), [](auto v) { return v != 0; });
      return out;
    })
    .def("occupancy", [](const maps::SyncedMaps & s) { return maps::occupancy(s); })
    .def("synchronization_error", [](const maps::SyncedMaps & s) { return maps::synchronization_error(s); })
    .def("subsample", [](const maps::SyncedMaps & s, int sh, int sw) { return maps::subsample(s, sh, sw); },
      py::arg("row_stride") = 2, py::arg("col_stride") = 2)
    .def("knn", [](const maps::SyncedMaps & s, int row, int col, int kh, int kw, int k, double range) {
      encoder::KernelSpec spec{kh, kw, 2, 2, k, range};
      spec.validate();
      const geometry::Cell c{row, col};
      if (!s.contains(c) || !s.valid(c)) {
        throw Error(ErrorCode::kConfigError, "center cell is not a valid cell");
      }
      std::vector<std::pair<int, int>> out;
      for (const auto & n : encoder::knn_in_kernel(s, c, spec)) {
        out.emplace_back(n.row, n.col);
      }
      return out;
    }, py::arg("row"), py::arg("col"), py::arg("kh") = 9, py::arg("kw") = 13, py::arg("k") = 16,
      py::arg("range") = 0.5);

  m.def("build_synced_maps", [](const F32 & points, const geometry::CalibrationSet & calib,
                                 const std::string & preset) {
    return maps::build_synced_maps(to_cloud(points), calib, grid_for(preset));
  }, py::arg("points"), py::arg("calibration"), py::arg("preset") = "40x275");

  m.def("euclidean_info", [](double xu, double xv, double yu, double yv) {
    const auto e = fusion::euclidean_info({xu, xv}, {yu, yv});
    return std::vector<double>(e.begin(), e.end());
  });

  m.def("run_frame", [](const std::string & frame_dir, const std::string & frame_id,
                         const std::map<std::string, std::string> & settings) {
    const auto cfg = make_config(settings);
    const auto frame = pipeline::FrameBundle::kitti(frame_dir, frame_id);
    pipeline::FrameResult result;
    {
      py::gil_scoped_release release;
      result = pipeline::run_frame(cfg, frame);
    }
    return py::make_tuple(from_matrix(result.features), result.report.to_json());
  }, py::arg("frame_dir"), py::arg("frame_id") = "000000",
    py::arg("settings") = std::map<std::string, std::string>{});

  m.def("bench_sampling", [](const std::string & frame_dir, const std::string & frame_id, int repeats,
                              const std::map<std::string, std::string> & settings) {
    const auto cfg = make_config(settings);
    const auto frame = pipeline::FrameBundle::kitti(frame_dir, frame_id);
    py::gil_scoped_release release;
    return pipeline::bench_sampling(cfg, frame, repeats).to_json();
  }, py::arg("frame_dir"), py::arg("frame_id") = "000000", py::arg("repeats") = 5,
    py::arg("settings") = std::map<std::string, std::string>{});

  m.def("read_features", [](const std::string & path) { return from_matrix(io::read_features(path)); });

  m.def("write_synthetic_dataset", [](const std::string & root, std::uint64_t seed, int count) {
    synth::write_kitti_dataset(root, seed, count);
  }, py::arg("root"), py::arg("seed") = 7, py::arg("count") = 1);
}
