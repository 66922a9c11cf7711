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

#include "ffpa/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "ffpa/error.hpp"

namespace ffpa::nn
{

namespace
{

constexpr char kParamMagic[4] = {'F', 'F', 'P', 'W'};
constexpr std::uint32_t kParamVersion = 1;

std::uint64_t splitmix64(std::uint64_t x)
{
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string dims_string(const std::vector<std::uint32_t> & dims)
{
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    s += (i ? "," : "") + std::to_string(dims[i]);
  }
  return s + "]";
}

}  // namespace

std::size_t Tensor::element_count() const
{
  return std::accumulate(
    dims.begin(), dims.end(), std::size_t{1},
    [](std::size_t a, std::uint32_t b) { return a * b; });
}

void ParamStore::insert(const std::string & name, Tensor tensor)
{
  if (tensor.element_count() != tensor.values.size()) {
    throw_dimension_mismatch("tensor " + name, tensor.element_count(), tensor.values.size());
  }
  tensors_[name] = std::move(tensor);
}

bool ParamStore::contains(const std::string & name) const { return tensors_.count(name) != 0; }

const Tensor & ParamStore::at(const std::string & name) const
{
  auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw Error(ErrorCode::kMissingKey, "parameter tensor '" + name + "' not found");
  }
  return it->second;
}

std::vector<std::string> ParamStore::names() const
{
  std::vector<std::string> out;
  out.reserve(tensors_.size());
  for (const auto & [name, _] : tensors_) {
    out.push_back(name);
  }
  return out;
}

std::string ParamStore::serialize() const
{
  std::string out(kParamMagic, 4);
  detail::put_u32(out, kParamVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(tensors_.size()));
  for (const auto & [name, t] : tensors_) {
    detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) {
      detail::put_u32(out, d);
    }
    for (float v : t.values) {
      detail::put_f32(out, v);
    }
  }
  return out;
}

ParamStore ParamStore::deserialize(std::string_view bytes)
{
  detail::ByteReader r(bytes);
  if (r.take(4) != std::string_view(kParamMagic, 4)) {
    throw Error(ErrorCode::kMalformedFile, "parameter container has bad magic");
  }
  if (auto v = r.u32(); v != kParamVersion) {
    throw Error(ErrorCode::kMalformedFile, "unsupported parameter container version " +
      std::to_string(v));
  }
  const std::uint32_t count = r.u32();
  ParamStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.take(r.u32()));
    Tensor t;
    t.dims.resize(r.u32());
    for (auto & d : t.dims) {
      d = r.u32();
    }
    const std::size_t n = t.element_count();
    if (n > r.remaining() / 4) {
      throw Error(ErrorCode::kMalformedFile, "tensor " + name + " payload truncated");
    }
    t.values.resize(n);
    for (auto & v : t.values) {
      v = r.f32();
    }
    store.insert(name, std::move(t));
  }
  if (!r.done()) {
    throw Error(ErrorCode::kMalformedFile, "trailing bytes after parameter container");
  }
  return store;
}

void ParamStore::save(const std::filesystem::path & path) const
{
  detail::write_file(path, serialize());
}

ParamStore ParamStore::load(const std::filesystem::path & path)
{
  return deserialize(detail::read_file(path));
}

Tensor seeded_tensor(
  std::uint64_t seed, const std::string & name, const std::vector<std::uint32_t> & dims, Init init)
{
  Tensor t;
  t.dims = dims;
  t.values.assign(t.element_count(), 0.0f);
  if (init == Init::kZeros) {
    return t;
  }
  if (init == Init::kOnes) {
    std::fill(t.values.begin(), t.values.end(), 1.0f);
    return t;
  }
  // Fan-in is the leading dimension product for weights ({in, out} or {k, k, cin, cout}).
  double bound = 0.1;
  if (init == Init::kWeight) {
    std::size_t fan_in = 1;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      fan_in *= dims[i];
    }
    bound = std::sqrt(6.0 / static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  }
  std::mt19937_64 gen(splitmix64(seed ^ fnv1a(name)));
  for (auto & v : t.values) {
    // Top 24 bits give an exactly representable float in [0, 1) on every platform.
    const double unit = static_cast<double>(gen() >> 40) * 0x1.0p-24;
    v = static_cast<float>((2.0 * unit - 1.0) * bound);
  }
  return t;
}

ParamProvider ParamProvider::seeded(std::uint64_t seed)
{
  ParamProvider p;
  p.seed_ = seed;
  return p;
}

ParamProvider ParamProvider::from_store(ParamStore store)
{
  ParamProvider p;
  p.source_ = std::move(store);
  return p;
}

const Tensor & ParamProvider::get(
  const std::string & name, const std::vector<std::uint32_t> & dims, Init init)
{
  if (recorded_.contains(name)) {
    const auto & t = recorded_.at(name);
    if (t.dims != dims) {
      throw Error(ErrorCode::kDimensionMismatch, "parameter " + name + " requested as " +
        dims_string(dims) + " but already issued as " + dims_string(t.dims));
    }
    return t;
  }
  if (source_) {
    const auto & t = source_->at(name);
    if (t.dims != dims) {
      throw Error(ErrorCode::kDimensionMismatch, "parameter " + name + " has shape " +
        dims_string(t.dims) + ", expected " + dims_string(dims));
    }
    recorded_.insert(name, t);
  } else {
    recorded_.insert(name, seeded_tensor(seed_, name, dims, init));
  }
  return recorded_.at(name);
}

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim)
: in(in_dim), out(out_dim), weight(in_dim * out_dim, 0.0f), bias(out_dim, 0.0f)
{
}

DenseLayer DenseLayer::load(
  ParamProvider & params, const std::string & prefix, std::size_t in_dim, std::size_t out_dim)
{
  DenseLayer layer;
  layer.in = in_dim;
  layer.out = out_dim;
  const auto i = static_cast<std::uint32_t>(in_dim);
  const auto o = static_cast<std::uint32_t>(out_dim);
  layer.weight = params.get(prefix + ".weight", {i, o}, Init::kWeight).values;
  layer.bias = params.get(prefix + ".bias", {o}, Init::kBias).values;
  return layer;
}

void DenseLayer::apply(std::span<const float> x, std::span<float> y) const
{
  if (x.size() != in) {
    throw_dimension_mismatch("dense input", in, x.size());
  }
  if (y.size() != out) {
    throw_dimension_mismatch("dense output", out, y.size());
  }
  std::copy(bias.begin(), bias.end(), y.begin());
  accumulate_block(0, x, y);
}

void DenseLayer::accumulate_block(
  std::size_t offset, std::span<const float> x, std::span<float> y) const
{
  if (offset + x.size() > in) {
    throw_dimension_mismatch("dense block", in, offset + x.size());
  }
  float * __restrict dst = y.data();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const float xi = x[i];
    if (xi == 0.0f) {
      continue;
    }
    const float * __restrict wrow = weight.data() + (offset + i) * out;
    for (std::size_t j = 0; j < out; ++j) {
      dst[j] += xi * wrow[j];
    }
  }
}

std::vector<float> DenseLayer::operator()(std::span<const float> x) const
{
  std::vector<float> y(out);
  apply(x, y);
  return y;
}

BatchNorm::BatchNorm(std::size_t channels)
: mean(channels, 0.0f), var(channels, 1.0f), gamma(channels, 1.0f), beta(channels, 0.0f)
{
}

BatchNorm BatchNorm::load(ParamProvider & params, const std::string & prefix, std::size_t channels)
{
  const auto c = static_cast<std::uint32_t>(channels);
  BatchNorm bn;
  bn.mean = params.get(prefix + ".running_mean", {c}, Init::kZeros).values;
  bn.var = params.get(prefix + ".running_var", {c}, Init::kOnes).values;
  bn.gamma = params.get(prefix + ".gamma", {c}, Init::kOnes).values;
  bn.beta = params.get(prefix + ".beta", {c}, Init::kZeros).values;
  return bn;
}

void BatchNorm::apply(std::span<float> x) const
{
  if (x.size() != mean.size()) {
    throw_dimension_mismatch("batch norm channels", mean.size(), x.size());
  }
  for (std::size_t c = 0; c < x.size(); ++c) {
    x[c] = gamma[c] * (x[c] - mean[c]) / std::sqrt(var[c] + eps) + beta[c];
  }
}

void relu_inplace(std::span<float> x)
{
  for (auto & v : x) {
    v = v > 0.0f ? v : 0.0f;
  }
}

float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

std::vector<double> softmax(std::span<const double> logits)
{
  std::vector<double> w(logits.size());
  if (logits.empty()) {
    return w;
  }
  const double peak = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(logits[i] - peak);
    total += w[i];
  }
  for (auto & v : w) {
    v /= total;
  }
  return w;
}

}  // namespace ffpa::nn
