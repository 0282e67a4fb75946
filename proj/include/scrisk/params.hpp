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

#ifndef SCRISK__PARAMS_HPP_
#define SCRISK__PARAMS_HPP_

#include "scrisk/rng.hpp"
#include "scrisk/tensor.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace scrisk::tensor
{

enum class Init {
  kXavier,  ///< uniform in +-sqrt(6 / (rows + cols))
  kZeros,
  kOnes
};

struct Parameter
{
  std::string name;
  Tensor value;
  Tensor grad;
  Tensor m;  ///< AdamW first moment
  Tensor v;  ///< AdamW second moment
};

/// Named parameters in creation order.
class ParamStore
{
public:
  explicit ParamStore(std::uint64_t init_seed = 0) : rng_(init_seed) {}

  /// Returns the parameter, creating it when absent. Throws ConfigMismatch
  /// when the stored shape differs or the store is frozen and lacks `name`.
  Parameter & ensure(const std::string & name, std::size_t rows, std::size_t cols, Init init = Init::kXavier);
  Parameter & at(const std::string & name);
  const Parameter & at(const std::string & name) const;
  std::size_t index_of(const std::string & name) const;
  bool contains(const std::string & name) const { return index_.count(name) > 0; }

  std::vector<Parameter> & params() { return params_; }
  const std::vector<Parameter> & params() const { return params_; }
  Parameter & operator[](std::size_t i) { return params_[i]; }

  /// A frozen store refuses to create parameters (loaded checkpoints).
  void freeze(bool frozen = true) { frozen_ = frozen; }
  bool frozen() const { return frozen_; }

  void zero_grad();
  std::size_t numel() const;
  std::uint64_t steps = 0;  ///< AdamW steps taken

private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t> index_;
  Rng rng_;
  bool frozen_ = false;
};

struct AdamWConfig
{
  double lr = 1e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Decoupled weight decay then the bias-corrected Adam update:
///   p -= lr * wd * p;  p -= lr * m_hat / (sqrt(v_hat) + eps)
/// Gradients are zeroed afterwards.
void adamw_step(ParamStore & store, const AdamWConfig & config);

bool gradients_finite(const ParamStore & store);

inline constexpr const char * kCheckpointSchema = "scrisk-ckpt/1";

/// Checkpoint bytes: one line of JSON header {schema, meta, steps, params:
/// [{name, offset, shape}]} followed by the parameter values as a
/// little-endian float64 blob in manifest order.
std::string serialize_checkpoint(const ParamStore & store, const nlohmann::json & meta);
/// Parses checkpoint bytes into a frozen store; returns the meta object.
/// Throws FormatError.
nlohmann::json deserialize_checkpoint(const std::string & bytes, ParamStore & store);

void save_checkpoint(const std::string & path, const ParamStore & store, const nlohmann::json & meta);
nlohmann::json load_checkpoint(const std::string & path, ParamStore & store);

}  // namespace scrisk::tensor

#endif  // SCRISK__PARAMS_HPP_
