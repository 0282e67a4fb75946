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

#include "scrisk/tensor.hpp"

#include "scrisk/errors.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace scrisk::tensor
{

namespace
{

std::string shape_str(const Tensor & t)
{
  return "(" + std::to_string(t.rows) + "x" + std::to_string(t.cols) + ")";
}

}  // namespace

Tensor::Tensor(std::size_t r, std::size_t c, std::vector<double> values)
: rows(r), cols(c), data(std::move(values))
{
  if (data.size() != r * c) {
    throw ShapeError("tensor data length " + std::to_string(data.size()) + " does not match shape");
  }
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows_in)
{
  Tensor t;
  t.rows = rows_in.size();
  t.cols = t.rows ? rows_in.begin()->size() : 0;
  for (const auto & r : rows_in) {
    if (r.size() != t.cols) {
      throw ShapeError("ragged rows");
    }
    t.data.insert(t.data.end(), r.begin(), r.end());
  }
  return t;
}

Tensor matmul(const Tensor & a, const Tensor & b)
{
  if (a.cols != b.rows) {
    throw ShapeError("matmul " + shape_str(a) + " x " + shape_str(b));
  }
  Tensor c(a.rows, b.cols);
  const std::size_t n = b.cols;
  for (std::size_t i = 0; i < a.rows; ++i) {
    double * __restrict ci = c.row(i);
    const double * ai = a.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = ai[k];
      const double * __restrict bk = b.row(k);
      for (std::size_t j = 0; j < n; ++j) {
        ci[j] += aik * bk[j];
      }
    }
  }
  return c;
}

Tensor matmul_nt(const Tensor & a, const Tensor & b)
{
  if (a.cols != b.cols) {
    throw ShapeError("matmul_nt " + shape_str(a) + " x " + shape_str(b) + "^T");
  }
  // same summation order as matmul, which vectorizes
  return matmul(a, transpose(b));
}

Tensor matmul_tn(const Tensor & a, const Tensor & b)
{
  if (a.rows != b.rows) {
    throw ShapeError("matmul_tn " + shape_str(a) + "^T x " + shape_str(b));
  }
  Tensor c(a.cols, b.cols);
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double * ak = a.row(k);
    const double * __restrict bk = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = ak[i];
      double * __restrict ci = c.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) {
        ci[j] += aki * bk[j];
      }
    }
  }
  return c;
}

Tensor transpose(const Tensor & a)
{
  Tensor t(a.cols, a.rows);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) {
      t(j, i) = a(i, j);
    }
  }
  return t;
}

Tensor softmax_rows(const Tensor & x, const std::vector<bool> * col_mask)
{
  if (col_mask && col_mask->size() != x.cols) {
    throw ShapeError("softmax mask length does not match columns");
  }
  Tensor y(x.rows, x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const double * xi = x.row(i);
    double * yi = y.row(i);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols; ++j) {
      if (!col_mask || (*col_mask)[j]) {
        mx = std::max(mx, xi[j]);
      }
    }
    if (!std::isfinite(mx)) {
      continue;  // nothing admissible: zero row
    }
    double z = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
      if (!col_mask || (*col_mask)[j]) {
        yi[j] = std::exp(xi[j] - mx);
        z += yi[j];
      }
    }
    for (std::size_t j = 0; j < x.cols; ++j) {
      yi[j] /= z;
    }
  }
  return y;
}

Tensor sinusoidal_encoding(const Tensor & values, std::size_t dim, double scale, double temperature)
{
  const std::size_t c = values.cols;
  if (c == 0 || dim % (2 * c) != 0) {
    throw ShapeError("encoding width " + std::to_string(dim) + " must be a multiple of 2 x " + std::to_string(c));
  }
  const std::size_t per = dim / c;
  const std::size_t half = per / 2;
  Tensor out(values.rows, dim);
  for (std::size_t i = 0; i < values.rows; ++i) {
    for (std::size_t a = 0; a < c; ++a) {
      const double p = values(i, a) / scale;
      for (std::size_t k = 0; k < half; ++k) {
        const double freq = std::pow(temperature, -2.0 * static_cast<double>(k) / static_cast<double>(per));
        out(i, a * per + k) = std::sin(p * freq);
        out(i, a * per + half + k) = std::cos(p * freq);
      }
    }
  }
  return out;
}

}  // namespace scrisk::tensor
