// Copyright 2026 The scrisk Authors
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

#include "scrisk/params.hpp"

#include "scrisk/errors.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace scrisk::tensor
{

Parameter & ParamStore::ensure(const std::string & name, std::size_t rows, std::size_t cols, Init init)
{
  if (auto it = index_.find(name); it != index_.end()) {
    Parameter & p = params_[it->second];
    if (p.value.rows != rows || p.value.cols != cols) {
      throw ConfigMismatch(
        "parameter " + name + " has shape " + std::to_string(p.value.rows) + "x" +
        std::to_string(p.value.cols) + ", model expects " + std::to_string(rows) + "x" +
        std::to_string(cols));
    }
    return p;
  }
  if (frozen_) {
    throw ConfigMismatch("parameter " + name + " is missing from the checkpoint");
  }
  Parameter p;
  p.name = name;
  p.value = Tensor(rows, cols);
  switch (init) {
    case Init::kXavier: {
      const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
      for (auto & v : p.value.data) {
        v = rng_.uniform(-bound, bound);
      }
      break;
    }
    case Init::kZeros:
      break;
    case Init::kOnes:
      std::fill(p.value.data.begin(), p.value.data.end(), 1.0);
      break;
  }
  p.grad = Tensor(rows, cols);
  p.m = Tensor(rows, cols);
  p.v = Tensor(rows, cols);
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back();
}

Parameter & ParamStore::at(const std::string & name) { return params_[index_of(name)]; }

const Parameter & ParamStore::at(const std::string & name) const { return params_[index_of(name)]; }

std::size_t ParamStore::index_of(const std::string & name) const
{
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigMismatch("unknown parameter " + name);
  }
  return it->second;
}

void ParamStore::zero_grad()
{
  for (auto & p : params_) {
    std::fill(p.grad.data.begin(), p.grad.data.end(), 0.0);
  }
}

std::size_t ParamStore::numel() const
{
  std::size_t n = 0;
  for (const auto & p : params_) {
    n += p.value.size();
  }
  return n;
}

void adamw_step(ParamStore & store, const AdamWConfig & c)
{
  store.steps += 1;
  const double t = static_cast<double>(store.steps);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (auto & p : store.params()) {
    if (p.grad.size() != p.value.size()) {
      p.grad = Tensor(p.value.rows, p.value.cols);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad.data[i];
      p.m.data[i] = c.beta1 * p.m.data[i] + (1.0 - c.beta1) * g;
      p.v.data[i] = c.beta2 * p.v.data[i] + (1.0 - c.beta2) * g * g;
      const double m_hat = p.m.data[i] / bc1;
      const double v_hat = p.v.data[i] / bc2;
      p.value.data[i] -= c.lr * c.weight_decay * p.value.data[i];
      p.value.data[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
  store.zero_grad();
}

bool gradients_finite(const ParamStore & store)
{
  for (const auto & p : store.params()) {
    for (double g : p.grad.data) {
      if (!std::isfinite(g)) {
        return false;
      }
    }
  }
  return true;
}

namespace
{

void put_le(std::string & out, double v)
{
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  for (int b = 0; b < 8; ++b) {
    out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
  }
}

double get_le(const unsigned char * p)
{
  std::uint64_t bits = 0;
  for (int b = 7; b >= 0; --b) {
    bits = (bits << 8) | p[b];
  }
  double v;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

std::string serialize_checkpoint(const ParamStore & store, const nlohmann::json & meta)
{
  nlohmann::json header;
  header["schema"] = kCheckpointSchema;
  header["meta"] = meta;
  header["steps"] = store.steps;
  nlohmann::json manifest = nlohmann::json::array();
  std::size_t offset = 0;
  for (const auto & p : store.params()) {
    manifest.push_back({{"name", p.name}, {"offset", offset}, {"shape", {p.value.rows, p.value.cols}}});
    offset += p.value.size();
  }
  header["params"] = manifest;
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + 8 * offset);
  for (const auto & p : store.params()) {
    for (double v : p.value.data) {
      put_le(out, v);
    }
  }
  return out;
}

nlohmann::json deserialize_checkpoint(const std::string & bytes, ParamStore & store)
{
  const auto nl = bytes.find('\n');
  if (nl == std::string::npos) {
    throw FormatError("checkpoint header line missing");
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, nl));
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("schema", "") != kCheckpointSchema) {
    throw FormatError("checkpoint schema is not " + std::string(kCheckpointSchema));
  }
  const auto * blob = reinterpret_cast<const unsigned char *>(bytes.data() + nl + 1);
  const std::size_t n_values = (bytes.size() - nl - 1) / 8;
  if ((bytes.size() - nl - 1) % 8 != 0) {
    throw FormatError("checkpoint blob is not a whole number of float64 values");
  }
  store = ParamStore();
  try {
    for (const auto & entry : header.at("params")) {
      const std::size_t rows = entry.at("shape").at(0).get<std::size_t>();
      const std::size_t cols = entry.at("shape").at(1).get<std::size_t>();
      const std::size_t offset = entry.at("offset").get<std::size_t>();
      if (offset + rows * cols > n_values) {
        throw FormatError("checkpoint blob is shorter than its manifest");
      }
      Parameter & p = store.ensure(entry.at("name").get<std::string>(), rows, cols, Init::kZeros);
      for (std::size_t i = 0; i < rows * cols; ++i) {
        p.value.data[i] = get_le(blob + 8 * (offset + i));
      }
    }
    store.steps = header.at("steps").get<std::uint64_t>();
  } catch (const nlohmann::json::exception & e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  store.freeze();
  return header.at("meta");
}

void save_checkpoint(const std::string & path, const ParamStore & store, const nlohmann::json & meta)
{
  const std::string bytes = serialize_checkpoint(store, meta);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write checkpoint " + path);
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw IoError("failed writing checkpoint " + path);
  }
}

nlohmann::json load_checkpoint(const std::string & path, ParamStore & store)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read checkpoint " + path);
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str(), store);
}

}  // namespace scrisk::tensor
