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

#ifndef FFPA__PARALLEL_HPP_
#define FFPA__PARALLEL_HPP_

#include <cstddef>
#include <functional>

namespace ffpa
{

/// Splits [0, n) into contiguous chunks and runs them on up to `threads` workers.
/// Work items must write disjoint outputs; results never depend on the thread count.
void parallel_for(
  std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)> & body);

}  // namespace ffpa

#endif  // FFPA__PARALLEL_HPP_
