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

#include "ffpa/synth.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "ffpa/error.hpp"
#include "ffpa/io.hpp"

namespace ffpa::synth
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

class Rng
{
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Irwin-Hall approximation; portable unlike std::normal_distribution.
  double normal(double sigma)
  {
    double s = 0.0;
    for (int i = 0; i < 12; ++i) {
      s += uniform();
    }
    return (s - 6.0) * sigma;
  }

private:
  std::mt19937_64 gen_;
};

struct Box
{
  Eigen::Vector3d center;
  Eigen::Vector3d half;
  double yaw;
  Eigen::Vector3d color;
  double reflectance;
};

struct Cylinder
{
  Eigen::Vector2d center;
  double radius;
  double z_min;
  double z_max;
  Eigen::Vector3d color;
  double reflectance;
};

struct Hit
{
  double t = kInf;
  Eigen::Vector3d color = Eigen::Vector3d::Zero();
  double reflectance = 0.0;
  Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
};

struct Scene
{
  double ground_z;
  std::vector<Box> boxes;
  std::vector<Cylinder> cylinders;

  Hit cast(const Eigen::Vector3d & o, const Eigen::Vector3d & d, double max_range) const
  {
    Hit best;
    best.t = max_range;
    bool any = false;
    if (d.z() < -1e-9) {
      const double t = (ground_z - o.z()) / d.z();
      if (t > 0 && t < best.t) {
        best.t = t;
        const Eigen::Vector3d p = o + t * d;
        const double checker = (static_cast<int>(std::floor(p.x() / 2.0) + std::floor(p.y() / 2.0)) & 1)
          ? 0.05 : 0.0;
        best.color = Eigen::Vector3d(0.32, 0.31, 0.30) + Eigen::Vector3d::Constant(checker);
        best.reflectance = 0.25;
        best.normal = Eigen::Vector3d::UnitZ();
        any = true;
      }
    }
    for (const auto & b : boxes) {
      const double c = std::cos(-b.yaw);
      const double s = std::sin(-b.yaw);
      const Eigen::Vector3d rel = o - b.center;
      const Eigen::Vector3d lo(c * rel.x() - s * rel.y(), s * rel.x() + c * rel.y(), rel.z());
      const Eigen::Vector3d ld(c * d.x() - s * d.y(), s * d.x() + c * d.y(), d.z());
      double t0 = 0.0;
      double t1 = best.t;
      int axis = -1;
      bool miss = false;
      for (int a = 0; a < 3 && !miss; ++a) {
        if (std::abs(ld[a]) < 1e-12) {
          miss = std::abs(lo[a]) > b.half[a];
          continue;
        }
        double ta = (-b.half[a] - lo[a]) / ld[a];
        double tb = (b.half[a] - lo[a]) / ld[a];
        if (ta > tb) {
          std::swap(ta, tb);
        }
        if (ta > t0) {
          t0 = ta;
          axis = a;
        }
        t1 = std::min(t1, tb);
        miss = t0 > t1;
      }
      if (!miss && axis >= 0 && t0 < best.t) {
        best.t = t0;
        best.color = b.color;
        best.reflectance = b.reflectance;
        Eigen::Vector3d n = Eigen::Vector3d::Zero();
        n[axis] = ld[axis] > 0 ? -1.0 : 1.0;
        best.normal = Eigen::Vector3d(c * n.x() + s * n.y(), -s * n.x() + c * n.y(), n.z());
        any = true;
      }
    }
    for (const auto & cyl : cylinders) {
      const Eigen::Vector2d od(o.x() - cyl.center.x(), o.y() - cyl.center.y());
      const Eigen::Vector2d dd(d.x(), d.y());
      const double a = dd.squaredNorm();
      if (a < 1e-12) {
        continue;
      }
      const double bq = 2.0 * od.dot(dd);
      const double cq = od.squaredNorm() - cyl.radius * cyl.radius;
      const double disc = bq * bq - 4 * a * cq;
      if (disc < 0) {
        continue;
      }
      const double t = (-bq - std::sqrt(disc)) / (2 * a);
      if (t <= 0 || t >= best.t) {
        continue;
      }
      const double z = o.z() + t * d.z();
      if (z < cyl.z_min || z > cyl.z_max) {
        continue;
      }
      best.t = t;
      best.color = cyl.color;
      best.reflectance = cyl.reflectance;
      const Eigen::Vector2d n2 = (od + t * dd).normalized();
      best.normal = Eigen::Vector3d(n2.x(), n2.y(), 0.0);
      any = true;
    }
    if (!any) {
      best.t = kInf;
    }
    return best;
  }
};

Eigen::Vector3d random_color(Rng & rng)
{
  return {rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
}

Scene make_scene(Rng & rng, const SceneOptions & opt)
{
  Scene scene;
  scene.ground_z = -opt.sensor_height;
  const double g = scene.ground_z;
  // Street canyon: building blocks on both sides with gaps.
  for (int side : {-1, 1}) {
    const double offset = rng.uniform(9.0, 15.0);
    double x = -20.0;
    while (x < 90.0) {
      const double len = rng.uniform(8.0, 20.0);
      const double height = rng.uniform(4.0, 12.0);
      scene.boxes.push_back({Eigen::Vector3d(x + len / 2, side * (offset + 4.0), g + height / 2),
        Eigen::Vector3d(len / 2, 4.0, height / 2), 0.0, random_color(rng), rng.uniform(0.2, 0.6)});
      x += len + rng.uniform(1.0, 6.0);
    }
  }
  const int cars = 6 + static_cast<int>(rng.uniform() * 8);
  for (int i = 0; i < cars; ++i) {
    const double x = rng.uniform(4.0, 60.0);
    const double y = rng.uniform(-8.0, 8.0);
    const double yaw = rng.uniform(-0.4, 0.4) + (rng.uniform() < 0.2 ? std::numbers::pi / 2 : 0.0);
    scene.boxes.push_back({Eigen::Vector3d(x, y, g + 0.78), Eigen::Vector3d(2.0, 0.9, 0.78), yaw,
      random_color(rng), rng.uniform(0.3, 0.9)});
  }
  const int people = 2 + static_cast<int>(rng.uniform() * 5);
  for (int i = 0; i < people; ++i) {
    scene.boxes.push_back({Eigen::Vector3d(rng.uniform(3.0, 35.0), rng.uniform(-9.0, 9.0), g + 0.85),
      Eigen::Vector3d(0.3, 0.3, 0.85), rng.uniform(0.0, 3.0), random_color(rng), rng.uniform(0.2, 0.5)});
  }
  const int poles = 6 + static_cast<int>(rng.uniform() * 10);
  for (int i = 0; i < poles; ++i) {
    const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
    scene.cylinders.push_back({Eigen::Vector2d(rng.uniform(2.0, 70.0), side * rng.uniform(7.0, 9.0)),
      rng.uniform(0.1, 0.5), g, g + rng.uniform(3.0, 8.0), random_color(rng), rng.uniform(0.3, 0.8)});
  }
  return scene;
}

double round_significant(double v, int digits)
{
  if (v == 0.0) {
    return 0.0;
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*e", digits - 1, v);
  return std::strtod(buf, nullptr);
}

struct CameraRig
{
  geometry::Matrix34 p2;
  Eigen::Matrix3d r0;
  geometry::Matrix34 tr;
};

// Nominal values follow the published KITTI rig (2011_09_26), perturbed per frame and rounded to
// the seven significant digits KITTI files carry.
CameraRig make_rig(Rng & rng)
{
  CameraRig rig;
  const double f = 721.5377 * (1.0 + rng.uniform(-0.005, 0.005));
  const double cx = 609.5593 + rng.uniform(-2.0, 2.0);
  const double cy = 172.854 + rng.uniform(-2.0, 2.0);
  rig.p2 << f, 0.0, cx, 44.85728, 0.0, f, cy, 0.2163791, 0.0, 0.0, 1.0, 0.002745884;

  const Eigen::Matrix3d rect =
    (Eigen::AngleAxisd(rng.uniform(-0.01, 0.01), Eigen::Vector3d::UnitX()) *
      Eigen::AngleAxisd(rng.uniform(-0.01, 0.01), Eigen::Vector3d::UnitY()) *
      Eigen::AngleAxisd(rng.uniform(-0.01, 0.01), Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
  rig.r0 = rect;

  Eigen::Matrix3d velo_to_cam;
  velo_to_cam << 0, -1, 0, 0, 0, -1, 1, 0, 0;
  const Eigen::Matrix3d jitter =
    (Eigen::AngleAxisd(rng.uniform(-0.004, 0.004), Eigen::Vector3d::UnitX()) *
      Eigen::AngleAxisd(rng.uniform(-0.004, 0.004), Eigen::Vector3d::UnitY()) *
      Eigen::AngleAxisd(rng.uniform(-0.004, 0.004), Eigen::Vector3d::UnitZ()))
      .toRotationMatrix();
  const Eigen::Matrix3d rot = jitter * velo_to_cam;
  rig.tr.leftCols<3>() = rot;
  rig.tr.col(3) = Eigen::Vector3d(-0.004069766, -0.07631618, -0.2717806) +
    Eigen::Vector3d(rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01), rng.uniform(-0.01, 0.01));

  for (int i = 0; i < 12; ++i) {
    rig.p2.data()[i] = round_significant(rig.p2.data()[i], 7);
    rig.tr.data()[i] = round_significant(rig.tr.data()[i], 7);
  }
  for (int i = 0; i < 9; ++i) {
    rig.r0.data()[i] = round_significant(rig.r0.data()[i], 7);
  }
  return rig;
}

std::string format_calib(const CameraRig & rig)
{
  std::string out;
  char buf[40];
  auto row = [&](const char * key, const double * v, int n) {
    out += key;
    out += ':';
    for (int i = 0; i < n; ++i) {
      std::snprintf(buf, sizeof(buf), " %.12e", v[i]);
      out += buf;
    }
    out += '\n';
  };
  geometry::Matrix34 p0 = rig.p2;
  p0(0, 3) = 0.0;
  p0(1, 3) = 0.0;
  p0(2, 3) = 0.0;
  geometry::Matrix34 p3 = rig.p2;
  p3(0, 3) = -339.5242;
  p3(1, 3) = 2.199936;
  p3(2, 3) = 0.002729905;
  row("P0", p0.data(), 12);
  row("P1", p0.data(), 12);
  row("P2", rig.p2.data(), 12);
  row("P3", p3.data(), 12);
  Eigen::Matrix<double, 3, 3, Eigen::RowMajor> r0 = rig.r0;
  row("R0_rect", r0.data(), 9);
  row("Tr_velo_to_cam", rig.tr.data(), 12);
  const double imu[12] = {0.9999976, 0.0007553071, -0.002035826, -0.8086759, -0.0007854027,
    0.9998898, -0.01482298, 0.3195559, 0.002024406, 0.01482454, 0.9998881, -0.7997231};
  row("Tr_imu_to_velo", imu, 12);
  return out;
}

}  // namespace

Frame make_frame(std::uint64_t seed, int index, const SceneOptions & options)
{
  Rng rng(seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(index) * 0xd1b54a32d192ed03ULL + 1);
  const Scene scene = make_scene(rng, options);
  const CameraRig rig = make_rig(rng);

  Frame frame;
  frame.calib_text = format_calib(rig);

  const double deg = std::numbers::pi / 180.0;
  frame.cloud.reserve(static_cast<std::size_t>(options.beams) * options.azimuth_steps);
  for (int b = 0; b < options.beams; ++b) {
    const double elev = (options.elevation_max_deg +
      (options.elevation_min_deg - options.elevation_max_deg) * b / (options.beams - 1)) * deg;
    for (int a = 0; a < options.azimuth_steps; ++a) {
      const double az = -std::numbers::pi + 2.0 * std::numbers::pi * (a + 0.5) / options.azimuth_steps;
      const Eigen::Vector3d dir(std::cos(elev) * std::cos(az), std::cos(elev) * std::sin(az), std::sin(elev));
      const Hit hit = scene.cast(Eigen::Vector3d::Zero(), dir, options.max_range);
      const double drop = rng.uniform();
      const double noise = rng.normal(0.01);
      const double refl_noise = rng.normal(0.03);
      if (!std::isfinite(hit.t) || drop < options.dropout) {
        continue;
      }
      const Eigen::Vector3d p = (hit.t + noise) * dir;
      geometry::Point pt;
      pt.x = static_cast<float>(p.x());
      pt.y = static_cast<float>(p.y());
      pt.z = static_cast<float>(p.z());
      pt.reflectance = static_cast<float>(std::clamp(hit.reflectance + refl_noise, 0.0, 1.0));
      frame.cloud.push_back(pt);
    }
  }

  // Camera rays: pixel -> rectified ray -> camera -> velodyne frame.
  const Eigen::Matrix3d k = rig.p2.leftCols<3>();
  const Eigen::Matrix3d rot = rig.tr.leftCols<3>();
  const Eigen::Vector3d origin = -rot.transpose() * rig.tr.col(3);
  const Eigen::Matrix3d to_velo = rot.transpose() * rig.r0.transpose() * k.inverse();
  const Eigen::Vector3d light = Eigen::Vector3d(0.3, 0.2, 0.9).normalized();
  frame.image = imagefeat::Image(options.image_width, options.image_height, 3);
  for (int v = 0; v < options.image_height; ++v) {
    for (int u = 0; u < options.image_width; ++u) {
      const Eigen::Vector3d dir = (to_velo * Eigen::Vector3d(u + 0.5, v + 0.5, 1.0)).normalized();
      const Hit hit = scene.cast(origin, dir, 200.0);
      Eigen::Vector3d color;
      if (std::isfinite(hit.t)) {
        const double shade = 0.55 + 0.45 * std::abs(hit.normal.dot(light));
        const double fog = std::exp(-hit.t / 150.0);
        color = hit.color * shade * fog + Eigen::Vector3d(0.7, 0.75, 0.8) * (1.0 - fog);
      } else {
        color = Eigen::Vector3d(0.55, 0.7, 0.95) * (0.8 + 0.2 * dir.z());
      }
      for (int c = 0; c < 3; ++c) {
        frame.image.at(v, u, c) =
          static_cast<float>(std::clamp(color[c] + rng.normal(0.01), 0.0, 1.0));
      }
    }
  }
  return frame;
}

std::string frame_id(int index)
{
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06d", index);
  return buf;
}

void write_kitti_frame(const std::filesystem::path & root, const std::string & id, const Frame & frame)
{
  std::error_code ec;
  for (const char * sub : {"velodyne", "image_2", "calib"}) {
    std::filesystem::create_directories(root / sub, ec);
    if (ec) {
      throw Error(ErrorCode::kIoError, "cannot create " + (root / sub).string());
    }
  }
  io::write_velodyne(root / "velodyne" / (id + ".bin"), frame.cloud);
  io::write_png(root / "image_2" / (id + ".png"), frame.image);
  const auto calib_path = root / "calib" / (id + ".txt");
  std::FILE * f = std::fopen(calib_path.c_str(), "wb");
  if (!f) {
    throw Error(ErrorCode::kIoError, "cannot write " + calib_path.string());
  }
  const bool ok = std::fwrite(frame.calib_text.data(), 1, frame.calib_text.size(), f) ==
    frame.calib_text.size();
  std::fclose(f);
  if (!ok) {
    throw Error(ErrorCode::kIoError, "short write to " + calib_path.string());
  }
}

void write_kitti_dataset(
  const std::filesystem::path & root, std::uint64_t seed, int count, const SceneOptions & options)
{
  for (int i = 0; i < count; ++i) {
    write_kitti_frame(root, frame_id(i), make_frame(seed, i, options));
  }
}

}  // namespace ffpa::synth
