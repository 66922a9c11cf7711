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

#include "ffpa/error.hpp"

namespace ffpa
{

const char * to_string(ErrorCode code)
{
  switch (code) {
    case ErrorCode::kMissingKey:
      return "MissingKey";
    case ErrorCode::kMalformedNumber:
      return "MalformedNumber";
    case ErrorCode::kMalformedFile:
      return "MalformedFile";
    case ErrorCode::kZeroNormPoint:
      return "ZeroNormPoint";
    case ErrorCode::kEmptyCloud:
      return "EmptyCloud";
    case ErrorCode::kDimensionMismatch:
      return "DimensionMismatch";
    case ErrorCode::kOversizeImage:
      return "OversizeImage";
    case ErrorCode::kIoError:
      return "IoError";
    case ErrorCode::kConfigError:
      return "ConfigError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string & message)
: std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code)
{
}

int exit_code_for(ErrorCode code) noexcept
{
  switch (code) {
    case ErrorCode::kConfigError:
    case ErrorCode::kDimensionMismatch:
      return 2;
    case ErrorCode::kIoError:
      return 3;
    default:
      return 1;
  }
}

void throw_dimension_mismatch(const std::string & what, std::size_t expected, std::size_t actual)
{
  throw Error(
    ErrorCode::kDimensionMismatch,
    what + ": expected " + std::to_string(expected) + ", got " + std::to_string(actual));
}

}  // namespace ffpa
