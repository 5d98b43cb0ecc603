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

#include "saim/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "saim/errors.hpp"

namespace saim {

// ---------------------------------------------------------------- SparseVector

double SparseVector::norm() const {
  double s = 0.0;
  for (double v : values) s += v * v;
  return std::sqrt(s);
}

Vector SparseVector::to_dense() const {
  Vector out(dim, 0.0);
  for (std::size_t k = 0; k < indices.size(); ++k) out[indices[k]] = values[k];
  return out;
}

void SparseVector::validate() const {
  if (indices.size() != values.size())
    throw ContractError("sparse vector: index/value length mismatch");
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] >= dim)
      throw BoundsError("sparse vector: index " + std::to_string(indices[k]) +
                        " >= dim " + std::to_string(dim));
    if (k > 0 && indices[k] <= indices[k - 1])
      throw ContractError("sparse vector: indices not strictly increasing");
    if (values[k] == 0.0) throw ContractError("sparse vector: explicit zero stored");
    if (!std::isfinite(values[k])) throw ContractError("sparse vector: non-finite value");
  }
}

SparseVector SparseVector::from_dense(std::span<const double> dense) {
  SparseVector out;
  out.dim = dense.size();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0) {
      out.indices.push_back(static_cast<std::uint32_t>(i));
      out.values.push_back(dense[i]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------- Matrix

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) throw ShapeError("matrix: data length != rows*cols");
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("matrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

Matrix Matrix::transpose() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::gather_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows_) throw BoundsError("gather_rows: row index out of range");
    std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(idx[i] * cols_), cols_,
                out.data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
  }
  return out;
}

void Matrix::append_row(std::span<const double> r) {
  if (rows_ == 0 && cols_ == 0) cols_ = r.size();
  if (r.size() != cols_) throw ShapeError("append_row: width mismatch");
  data_.insert(data_.end(), r.begin(), r.end());
  ++rows_;
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto o = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double av = a(i, k);
      auto br = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) o[j] += av * br[j];
    }
  }
  return out;
}

// ------------------------------------------------------------------------- Rng

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::derive(std::string_view label) const {
  return Rng(splitmix64(seed_ ^ splitmix64(fnv1a64(label))));
}

Rng Rng::derive(std::string_view label, std::uint64_t index) const {
  return Rng(splitmix64(seed_ ^ splitmix64(fnv1a64(label) + splitmix64(index))));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::size_t Rng::below(std::size_t n) {
  if (n == 0) throw ContractError("Rng::below: n must be positive");
  const std::uint64_t range = n;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return static_cast<std::size_t>(x % range);
}

// ------------------------------------------------------------------ Forward ops

Matrix affine_forward(std::span<const SparseVector> x, const Matrix& w,
                      std::span<const double> b) {
  if (b.size() != w.cols()) throw ShapeError("affine_forward: bias length != W cols");
  Matrix out(x.size(), w.cols());
  for (std::size_t r = 0; r < x.size(); ++r) {
    const SparseVector& xr = x[r];
    if (xr.dim != w.rows())
      throw ShapeError("affine_forward: input dim " + std::to_string(xr.dim) +
                       " != W rows " + std::to_string(w.rows()));
    auto o = out.row(r);
    std::copy(b.begin(), b.end(), o.begin());
    for (std::size_t k = 0; k < xr.nnz(); ++k) {
      const double v = xr.values[k];
      auto wr = w.row(xr.indices[k]);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += v * wr[j];
    }
  }
  return out;
}

Matrix affine_forward(const Matrix& x, const Matrix& w, std::span<const double> b) {
  if (x.cols() != w.rows()) throw ShapeError("affine_forward: x cols != W rows");
  if (b.size() != w.cols()) throw ShapeError("affine_forward: bias length != W cols");
  Matrix out(x.rows(), w.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto o = out.row(r);
    std::copy(b.begin(), b.end(), o.begin());
    auto xr = x.row(r);
    for (std::size_t k = 0; k < xr.size(); ++k) {
      const double v = xr[k];
      if (v == 0.0) continue;  // same summation sequence as the sparse path
      auto wr = w.row(k);
      for (std::size_t j = 0; j < o.size(); ++j) o[j] += v * wr[j];
    }
  }
  return out;
}

double sigmoid(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& a) {
  Matrix out(a.rows(), a.cols());
  auto src = a.data();
  auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = sigmoid(src[i]);
  return out;
}

Matrix softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    auto in = logits.row(r);
    auto o = out.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (double& v : o) v /= sum;
  }
  return out;
}

namespace {

std::size_t one_hot_class(std::span<const double> row) {
  std::size_t hot = row.size();
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (row[j] == 1.0) {
      if (hot != row.size()) throw ContractError("label row is not one-hot");
      hot = j;
    } else if (row[j] != 0.0) {
      throw ContractError("label row is not one-hot");
    }
  }
  if (hot == row.size()) throw ContractError("label row is not one-hot");
  return hot;
}

}  // namespace

SoftmaxXent softmax_xent(const Matrix& logits, const Matrix& labels) {
  if (logits.rows() != labels.rows() || logits.cols() != labels.cols())
    throw ShapeError("softmax_xent: logits and labels differ in shape");
  SoftmaxXent out;
  out.probs = Matrix(logits.rows(), logits.cols());
  double total = 0.0;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const std::size_t y = one_hot_class(labels.row(r));
    auto in = logits.row(r);
    auto p = out.probs.row(r);
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t j = 0; j < in.size(); ++j) {
      p[j] = std::exp(in[j] - mx);
      sum += p[j];
    }
    for (double& v : p) v /= sum;
    // log-sum-exp form keeps the saturated case finite
    total += std::log(sum) - (in[y] - mx);
  }
  out.loss = logits.rows() ? total / static_cast<double>(logits.rows()) : 0.0;
  return out;
}

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix out(labels.size(), classes);
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= classes)
      throw BoundsError("one_hot: label " + std::to_string(labels[r]) + " out of range");
    out(r, static_cast<std::size_t>(labels[r])) = 1.0;
  }
  return out;
}

std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < v.size(); ++j)
    if (v[j] > v[best]) best = j;
  return best;
}

// ----------------------------------------------------------------- Backward ops

Matrix softmax_xent_backward(const Matrix& probs, const Matrix& labels, double scale) {
  if (probs.rows() != labels.rows() || probs.cols() != labels.cols())
    throw ShapeError("softmax_xent_backward: shape mismatch");
  Matrix d(probs.rows(), probs.cols());
  if (probs.rows() == 0) return d;
  const double f = scale / static_cast<double>(probs.rows());
  auto p = probs.data();
  auto y = labels.data();
  auto o = d.data();
  for (std::size_t i = 0; i < p.size(); ++i) o[i] = f * (p[i] - y[i]);
  return d;
}

Matrix sigmoid_backward(const Matrix& out, const Matrix& dout) {
  if (out.rows() != dout.rows() || out.cols() != dout.cols())
    throw ShapeError("sigmoid_backward: shape mismatch");
  Matrix d(out.rows(), out.cols());
  auto s = out.data();
  auto g = dout.data();
  auto o = d.data();
  for (std::size_t i = 0; i < s.size(); ++i) o[i] = g[i] * s[i] * (1.0 - s[i]);
  return d;
}

Matrix affine_backward(const Matrix& x, const Matrix& w, const Matrix& dout, Matrix& dw,
                       Vector& db) {
  if (x.rows() != dout.rows() || x.cols() != w.rows() || dout.cols() != w.cols() ||
      dw.rows() != w.rows() || dw.cols() != w.cols() || db.size() != w.cols())
    throw ShapeError("affine_backward: shape mismatch");
  Matrix dx(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto g = dout.row(r);
    auto xr = x.row(r);
    auto dxr = dx.row(r);
    for (std::size_t j = 0; j < g.size(); ++j) db[j] += g[j];
    for (std::size_t k = 0; k < xr.size(); ++k) {
      auto dwr = dw.row(k);
      auto wr = w.row(k);
      double acc = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) {
        dwr[j] += xr[k] * g[j];
        acc += wr[j] * g[j];
      }
      dxr[k] = acc;
    }
  }
  return dx;
}

void affine_backward(std::span<const SparseVector> x, const Matrix& dout, Matrix& dw,
                     Vector& db) {
  if (x.size() != dout.rows() || dout.cols() != dw.cols() || db.size() != dw.cols())
    throw ShapeError("affine_backward: shape mismatch");
  for (std::size_t r = 0; r < x.size(); ++r) {
    if (x[r].dim != dw.rows()) throw ShapeError("affine_backward: input dim mismatch");
    auto g = dout.row(r);
    for (std::size_t j = 0; j < g.size(); ++j) db[j] += g[j];
    for (std::size_t k = 0; k < x[r].nnz(); ++k) {
      const double v = x[r].values[k];
      auto dwr = dw.row(x[r].indices[k]);
      for (std::size_t j = 0; j < g.size(); ++j) dwr[j] += v * g[j];
    }
  }
}

// ------------------------------------------------------------------------ Adam

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size())
    throw ShapeError("adam_step: parameter/gradient/state sizes differ");
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void glorot_uniform(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& v : w.data()) v = rng.uniform(-limit, limit);
}

}  // namespace saim
