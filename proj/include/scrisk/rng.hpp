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

#ifndef SCRISK__RNG_HPP_
#define SCRISK__RNG_HPP_

#include <cstdint>
#include <random>
#include <span>

namespace scrisk
{

/// SplitMix64 finalizer. Used to derive independent child seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed of the `index`-th child stream of `master`:
/// mix64(master + (index + 1) * 0x9E3779B97F4A7C15).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

/// Portable random source.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. Distributions are implemented here rather than taken from
/// <random>, whose algorithms are implementation-defined, so that a seed
/// reproduces the same values on every platform.
class Rng
{
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller; caches the second variate.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  bool bernoulli(double p) { return uniform() < p; }
  /// Index drawn with probability proportional to `weights` (non-negative).
  std::size_t categorical(std::span<const double> weights);

private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace scrisk

#endif  // SCRISK__RNG_HPP_
