// Copyright 2026 The saim Authors.
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

#ifndef SAIM_NUMERICS_HPP_
#define SAIM_NUMERICS_HPP_

// Dense/sparse containers, the handful of forward/backward primitives the
// two-layer network needs, Adam, and the seeded random stream.

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace saim {

using Vector = std::vector<double>;

/// Sparse feature vector. Indices are strictly increasing, all < dim, and no
/// explicit zeros are stored.
struct SparseVector {
  std::vector<std::uint32_t> indices;
  std::vector<double> values;
  std::size_t dim = 0;

  std::size_t nnz() const { return indices.size(); }
  double norm() const;
  Vector to_dense() const;

  /// Throws ContractError/BoundsError if any invariant is broken.
  void validate() const;

  static SparseVector from_dense(std::span<const double> dense);

  friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

/// Row-major dense matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  void fill(double v);
  Matrix transpose() const;
  /// Copies the listed rows, in order.
  Matrix gather_rows(std::span<const std::size_t> idx) const;
  void append_row(std::span<const double> r);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Dense product a * b.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Deterministic random stream. Uses std::mt19937_64 for the raw bits; the
/// real-valued draws are computed here rather than through the standard
/// distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }

  /// Independent stream keyed by (seed, label).
  Rng derive(std::string_view label) const;
  Rng derive(std::string_view label, std::uint64_t index) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via the polar method.
  double normal();
  /// Uniform integer on [0, n). n must be > 0.
  std::size_t below(std::size_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// 64-bit FNV-1a; used for stream labels and config hashes.
std::uint64_t fnv1a64(std::string_view bytes);

/// Returns x W + b for each sparse row x. Products accumulate in ascending
/// index order.
Matrix affine_forward(std::span<const SparseVector> x, const Matrix& w,
                      std::span<const double> b);
Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b);

double sigmoid(double a);
Matrix sigmoid(const Matrix& a);

/// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

struct SoftmaxXent {
  double loss = 0.0;  // mean negative log-likelihood
  Matrix probs;
};

/// `labels` must be one-hot rows.
SoftmaxXent softmax_xent(const Matrix& logits, const Matrix& labels);

Matrix one_hot(std::span<const int> labels, std::size_t classes);

/// Index of the largest entry; ties go to the lower index.
std::size_t argmax(std::span<const double> v);

// Backward primitives. The accumulate-into variants add to dw/db.

/// d(scale * mean xent)/d logits.
Matrix softmax_xent_backward(const Matrix& probs, const Matrix& labels, double scale);
/// dout * s * (1 - s) where s is the sigmoid output.
Matrix sigmoid_backward(const Matrix& out, const Matrix& dout);
/// Accumulates dW += x^T dout, db += colsum(dout) and returns dout W^T.
Matrix affine_backward(const Matrix& x, const Matrix& w, const Matrix& dout, Matrix& dw,
                       Vector& db);
/// Sparse-input version; the input gradient is not needed and not formed.
void affine_backward(std::span<const SparseVector> x, const Matrix& dout, Matrix& dw,
                     Vector& db);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  explicit AdamState(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update; increments state.t.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg);

/// Glorot-uniform fill in +-sqrt(6 / (fan_in + fan_out)).
void glorot_uniform(Matrix& w, Rng& rng);

}  // namespace saim

#endif  // SAIM_NUMERICS_HPP_
