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

#include "ffpa/parallel.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace ffpa
{

void parallel_for(
  std::size_t n, int threads, const std::function<void(std::size_t, std::size_t)> & body)
{
  if (n == 0) {
    return;
  }
  const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, n);
  if (workers == 1) {
    body(0, n);
    return;
  }
  const std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) {
      break;
    }
    pool.emplace_back([&, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto & t : pool) {
    t.join();
  }
  for (auto & e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

}  // namespace ffpa
