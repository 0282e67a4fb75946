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

#ifndef SCRISK__TENSOR_HPP_
#define SCRISK__TENSOR_HPP_

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace scrisk::tensor
{

/// Dense row-major float64 matrix. Vectors are 1 x n rows, scalars 1 x 1.
struct Tensor
{
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values);
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor scalar(double v) { return Tensor(1, 1, v); }

  std::vector<std::size_t> shape() const { return {rows, cols}; }
  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  double & operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  const double * row(std::size_t r) const { return data.data() + r * cols; }
  double * row(std::size_t r) { return data.data() + r * cols; }
  bool same_shape(const Tensor & o) const { return rows == o.rows && cols == o.cols; }
  bool operator==(const Tensor &) const = default;
};

/// C = A B. Loops run i-k-j with a fixed summation order, so results are
/// reproducible bit for bit.
Tensor matmul(const Tensor & a, const Tensor & b);
/// C = A B^T
Tensor matmul_nt(const Tensor & a, const Tensor & b);
/// C = A^T B
Tensor matmul_tn(const Tensor & a, const Tensor & b);
Tensor transpose(const Tensor & a);

/// Row-wise softmax; entries whose mask is false get exactly zero weight. A
/// row without any admissible entry is all zeros.
Tensor softmax_rows(const Tensor & x, const std::vector<bool> * col_mask = nullptr);

/// Sinusoidal encoding of each row of `values` (n x c) into n x dim features:
/// dim / c channels per coordinate, half sine and half cosine, with
/// frequencies 1 / temperature^(2k / (dim / c)) applied to value / scale.
Tensor sinusoidal_encoding(const Tensor & values, std::size_t dim, double scale = 1.0, double temperature = 10000.0);

}  // namespace scrisk::tensor

#endif  // SCRISK__TENSOR_HPP_
