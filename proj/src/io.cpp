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

#include "ffpa/io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>

#include "binary_io.hpp"
#include "ffpa/error.hpp"

namespace ffpa::io
{

namespace
{

constexpr char kFeatureMagic[4] = {'F', 'F', 'P', 'A'};
constexpr std::uint32_t kFeatureVersion = 1;

}  // namespace

geometry::PointCloud parse_velodyne(std::string_view bytes)
{
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorCode::kMalformedFile,
      "velodyne payload of " + std::to_string(bytes.size()) + " bytes is not a multiple of 16");
  }
  detail::ByteReader r(bytes);
  geometry::PointCloud cloud(bytes.size() / 16);
  for (auto & p : cloud) {
    p.x = r.f32();
    p.y = r.f32();
    p.z = r.f32();
    p.reflectance = r.f32();
  }
  return cloud;
}

geometry::PointCloud read_velodyne(const std::filesystem::path & path)
{
  return parse_velodyne(detail::read_file(path));
}

void write_velodyne(const std::filesystem::path & path, const geometry::PointCloud & cloud)
{
  std::string out;
  out.reserve(cloud.size() * 16);
  for (const auto & p : cloud) {
    detail::put_f32(out, p.x);
    detail::put_f32(out, p.y);
    detail::put_f32(out, p.z);
    detail::put_f32(out, p.reflectance);
  }
  detail::write_file(path, out);
}

geometry::CalibrationSet read_calibration(const std::filesystem::path & path)
{
  return geometry::parse_calibration(detail::read_file(path));
}

imagefeat::Image read_png(const std::filesystem::path & path)
{
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str())) {
    throw Error(ErrorCode::kMalformedFile, path.string() + ": " + png.message);
  }
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> pixels(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, pixels.data(), 0, nullptr)) {
    const std::string message = png.message;
    png_image_free(&png);
    throw Error(ErrorCode::kMalformedFile, path.string() + ": " + message);
  }
  imagefeat::Image img(static_cast<int>(png.width), static_cast<int>(png.height), 3);
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    img.data[i] = static_cast<float>(pixels[i]) / 255.0f;
  }
  return img;
}

void write_png(const std::filesystem::path & path, const imagefeat::Image & image)
{
  if (image.channels != 3) {
    throw_dimension_mismatch("png channels", 3, static_cast<std::size_t>(image.channels));
  }
  std::vector<unsigned char> pixels(image.data.size());
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    pixels[i] = static_cast<unsigned char>(std::lround(std::clamp(image.data[i], 0.0f, 1.0f) * 255.0f));
  }
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&png, path.c_str(), 0, pixels.data(), 0, nullptr)) {
    throw Error(ErrorCode::kIoError, path.string() + ": " + png.message);
  }
}

std::string serialize_features(const nn::Matrix & features)
{
  std::string out(kFeatureMagic, 4);
  detail::put_u32(out, kFeatureVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(features.rows()));
  detail::put_u32(out, static_cast<std::uint32_t>(features.cols()));
  out.reserve(out.size() + features.values().size() * 4);
  for (float v : features.values()) {
    detail::put_f32(out, v);
  }
  return out;
}

nn::Matrix deserialize_features(std::string_view bytes)
{
  detail::ByteReader r(bytes);
  if (r.take(4) != std::string_view(kFeatureMagic, 4)) {
    throw Error(ErrorCode::kMalformedFile, "feature dump has bad magic");
  }
  if (auto v = r.u32(); v != kFeatureVersion) {
    throw Error(ErrorCode::kMalformedFile, "unsupported feature dump version " + std::to_string(v));
  }
  const std::size_t rows = r.u32();
  const std::size_t cols = r.u32();
  if (r.remaining() != rows * cols * 4) {
    throw Error(ErrorCode::kMalformedFile, "feature dump payload size does not match header");
  }
  nn::Matrix m(rows, cols);
  for (auto & v : m.values()) {
    v = r.f32();
  }
  return m;
}

void dump_features(const nn::Matrix & features, const std::filesystem::path & path)
{
  detail::write_file(path, serialize_features(features));
}

nn::Matrix read_features(const std::filesystem::path & path)
{
  return deserialize_features(detail::read_file(path));
}

}  // namespace ffpa::io
