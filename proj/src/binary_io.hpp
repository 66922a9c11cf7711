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

#ifndef FFPA__SRC__BINARY_IO_HPP_
#define FFPA__SRC__BINARY_IO_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>

#include "ffpa/error.hpp"

namespace ffpa::detail
{

static_assert(
  std::endian::native == std::endian::little, "container formats assume a little-endian host");

inline void put_u32(std::string & out, std::uint32_t v)
{
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_f32(std::string & out, float v)
{
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

/// Sequential reader over a byte buffer; throws MalformedFile on truncation.
class ByteReader
{
public:
  explicit ByteReader(std::string_view bytes) : bytes_(bytes) {}

  std::string_view take(std::size_t n)
  {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::kMalformedFile, "truncated container at byte " + std::to_string(pos_));
    }
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::uint32_t u32()
  {
    std::uint32_t v;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }

  float f32()
  {
    float v;
    std::memcpy(&v, take(4).data(), 4);
    return v;
  }

  bool done() const noexcept { return pos_ == bytes_.size(); }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path & path);
void write_file(const std::filesystem::path & path, std::string_view bytes);

}  // namespace ffpa::detail

#endif  // FFPA__SRC__BINARY_IO_HPP_
