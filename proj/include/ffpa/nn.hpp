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

#ifndef FFPA__NN_HPP_
#define FFPA__NN_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ffpa::nn
{

/// Dense row-major float matrix. Rows are points, columns are channels.
class Matrix
{
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f)
  : rows_(rows), cols_(cols), data_(rows * cols, fill)
  {
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<float> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const float> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  float & operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  float operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<float> values() { return data_; }
  std::span<const float> values() const { return data_; }

  friend bool operator==(const Matrix &, const Matrix &) = default;

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

struct Tensor
{
  std::vector<std::uint32_t> dims;
  std::vector<float> values;

  std::size_t element_count() const;
  friend bool operator==(const Tensor &, const Tensor &) = default;
};

enum class Init
{
  kWeight,    // uniform, bound sqrt(6 / fan_in)
  kBias,      // uniform, bound 0.1
  kZeros,
  kOnes,
};

/// Named tensor collection with the binary container used for parameter files.
///
/// Container layout (little-endian): "FFPW", u32 version, u32 tensor count, then per tensor:
/// u32 name length, name bytes, u32 rank, rank x u32 dims, f32 payload.
class ParamStore
{
public:
  void insert(const std::string & name, Tensor tensor);
  bool contains(const std::string & name) const;
  const Tensor & at(const std::string & name) const;
  std::vector<std::string> names() const;
  std::size_t size() const noexcept { return tensors_.size(); }

  std::string serialize() const;
  static ParamStore deserialize(std::string_view bytes);

  void save(const std::filesystem::path & path) const;
  static ParamStore load(const std::filesystem::path & path);

  friend bool operator==(const ParamStore &, const ParamStore &) = default;

private:
  std::map<std::string, Tensor> tensors_;
};

/// Hands out parameter tensors either from a loaded store or generated from a 64-bit seed.
///
/// Seeded tensors depend only on (seed, name, dims), so the order in which layers request
/// their parameters never changes the values. Every tensor handed out is recorded and can be
/// written back to disk.
class ParamProvider
{
public:
  static ParamProvider seeded(std::uint64_t seed);
  static ParamProvider from_store(ParamStore store);

  const Tensor & get(const std::string & name, const std::vector<std::uint32_t> & dims, Init init);

  const ParamStore & recorded() const noexcept { return recorded_; }
  bool is_seeded() const noexcept { return !source_.has_value(); }

private:
  std::uint64_t seed_ = 0;
  std::optional<ParamStore> source_;
  ParamStore recorded_;
};

Tensor seeded_tensor(
  std::uint64_t seed, const std::string & name, const std::vector<std::uint32_t> & dims, Init init);

/// Fully connected layer y = W x + b with weights stored input-major (in x out).
struct DenseLayer
{
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<float> weight;
  std::vector<float> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim);

  static DenseLayer load(ParamProvider & params, const std::string & prefix, std::size_t in_dim,
    std::size_t out_dim);

  float w(std::size_t i, std::size_t j) const { return weight[i * out + j]; }
  float & w(std::size_t i, std::size_t j) { return weight[i * out + j]; }

  // y = b + W x
  void apply(std::span<const float> x, std::span<float> y) const;
  // y += W[rows offset .. offset + x.size()) x, i.e. the contribution of one concatenated block.
  void accumulate_block(std::size_t offset, std::span<const float> x, std::span<float> y) const;
  std::vector<float> operator()(std::span<const float> x) const;
};

/// Inference-mode batch normalization with stored statistics.
struct BatchNorm
{
  std::vector<float> mean;
  std::vector<float> var;
  std::vector<float> gamma;
  std::vector<float> beta;
  float eps = 1e-5f;

  BatchNorm() = default;
  explicit BatchNorm(std::size_t channels);

  static BatchNorm load(ParamProvider & params, const std::string & prefix, std::size_t channels);

  std::size_t channels() const noexcept { return mean.size(); }
  void apply(std::span<float> x) const;
};

void relu_inplace(std::span<float> x);
float sigmoid(float x);

/// Softmax over logits computed in double; returns weights that sum to one.
std::vector<double> softmax(std::span<const double> logits);

}  // namespace ffpa::nn

#endif  // FFPA__NN_HPP_
