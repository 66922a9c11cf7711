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

#ifndef FFPA__ERROR_HPP_
#define FFPA__ERROR_HPP_

#include <stdexcept>
#include <string>

namespace ffpa
{

enum class ErrorCode
{
  kMissingKey,
  kMalformedNumber,
  kMalformedFile,
  kZeroNormPoint,
  kEmptyCloud,
  kDimensionMismatch,
  kOversizeImage,
  kIoError,
  kConfigError,
};

const char * to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error
{
public:
  Error(ErrorCode code, const std::string & message);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

/// CLI exit status for an error: 1 parse, 2 config, 3 I/O.
int exit_code_for(ErrorCode code) noexcept;

[[noreturn]] void throw_dimension_mismatch(
  const std::string & what, std::size_t expected, std::size_t actual);

}  // namespace ffpa

#endif  // FFPA__ERROR_HPP_
