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

#include "saim/swd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "saim/errors.hpp"

namespace saim {

SliceSet SliceSet::sample(std::size_t count, std::size_t dim, Rng& rng) {
  if (dim == 0) throw ContractError("SliceSet::sample: dim must be > 0");
  SliceSet s;
  s.seed = rng.seed();
  s.directions = Matrix(count, dim);
  for (std::size_t l = 0; l < count; ++l) {
    auto row = s.directions.row(l);
    double nn = 0.0;
    while (nn == 0.0) {
      nn = 0.0;
      for (double& v : row) {
        v = rng.normal();
        nn += v * v;
      }
    }
    const double inv = 1.0 / std::sqrt(nn);
    for (double& v : row) v *= inv;
  }
  return s;
}

double wasserstein2_1d(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("wasserstein2_1d: lengths differ");
  if (!std::is_sorted(a.begin(), a.end()) || !std::is_sorted(b.begin(), b.end()))
    throw ContractError("wasserstein2_1d: inputs must be sorted ascending");
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

namespace {

void check_inputs(const Matrix& xs, const Matrix& ys, const SliceSet& slices) {
  if (xs.rows() != ys.rows())
    throw ContractError("swd: sample counts differ (" + std::to_string(xs.rows()) + " vs " +
                        std::to_string(ys.rows()) + ")");
  if (xs.cols() != slices.dim() || ys.cols() != slices.dim())
    throw ShapeError("swd: sample width does not match slice dimension");
  if (slices.count() == 0) throw ContractError("swd: no slices");
}

// n x L matrix of projections.
Matrix project(const Matrix& samples, const SliceSet& slices) {
  Matrix out(samples.rows(), slices.count());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    auto s = samples.row(i);
    auto o = out.row(i);
    for (std::size_t l = 0; l < slices.count(); ++l) {
      auto d = slices.directions.row(l);
      o[l] = std::inner_product(s.begin(), s.end(), d.begin(), 0.0);
    }
  }
  return out;
}

std::vector<std::size_t> sorted_order(const Matrix& proj, std::size_t l) {
  std::vector<std::size_t> order(proj.rows());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return proj(a, l) < proj(b, l); });
  return order;
}

SwdValue evaluate(const Matrix& xs, const Matrix& ys, const SliceSet& slices,
                  const Matrix& px, const Matrix& py, const SwdPairing& pairing) {
  const std::size_t n = xs.rows();
  const std::size_t count = slices.count();
  SwdValue out;
  out.grad_x = Matrix(n, xs.cols());
  out.grad_y = Matrix(n, ys.cols());
  if (n == 0) return out;
  const double inv_nl = 1.0 / (static_cast<double>(n) * static_cast<double>(count));
  double total = 0.0;
  for (std::size_t l = 0; l < count; ++l) {
    const auto& ox = pairing.x_order[l];
    const auto& oy = pairing.y_order[l];
    auto dir = slices.directions.row(l);
    for (std::size_t r = 0; r < n; ++r) {
      const std::size_t i = ox[r];
      const std::size_t j = oy[r];
      const double diff = px(i, l) - py(j, l);
      total += diff * diff;
      const double c = 2.0 * diff * inv_nl;
      auto gx = out.grad_x.row(i);
      auto gy = out.grad_y.row(j);
      for (std::size_t d = 0; d < dir.size(); ++d) {
        gx[d] += c * dir[d];
        gy[d] -= c * dir[d];
      }
    }
  }
  out.value = total * inv_nl;
  return out;
}

}  // namespace

SwdPairing swd_pairing(const Matrix& xs, const Matrix& ys, const SliceSet& slices) {
  check_inputs(xs, ys, slices);
  const Matrix px = project(xs, slices);
  const Matrix py = project(ys, slices);
  SwdPairing p;
  p.x_order.reserve(slices.count());
  p.y_order.reserve(slices.count());
  for (std::size_t l = 0; l < slices.count(); ++l) {
    p.x_order.push_back(sorted_order(px, l));
    p.y_order.push_back(sorted_order(py, l));
  }
  return p;
}

SwdValue swd(const Matrix& xs, const Matrix& ys, const SliceSet& slices) {
  check_inputs(xs, ys, slices);
  const Matrix px = project(xs, slices);
  const Matrix py = project(ys, slices);
  SwdPairing p;
  p.x_order.reserve(slices.count());
  p.y_order.reserve(slices.count());
  for (std::size_t l = 0; l < slices.count(); ++l) {
    p.x_order.push_back(sorted_order(px, l));
    p.y_order.push_back(sorted_order(py, l));
  }
  return evaluate(xs, ys, slices, px, py, p);
}

SwdValue swd(const Matrix& xs, const Matrix& ys, const SliceSet& slices,
             const SwdPairing& pairing) {
  check_inputs(xs, ys, slices);
  if (pairing.x_order.size() != slices.count() || pairing.y_order.size() != slices.count())
    throw ContractError("swd: pairing does not match slice count");
  for (std::size_t l = 0; l < slices.count(); ++l)
    if (pairing.x_order[l].size() != xs.rows() || pairing.y_order[l].size() != ys.rows())
      throw ContractError("swd: pairing does not match sample count");
  return evaluate(xs, ys, slices, project(xs, slices), project(ys, slices), pairing);
}

namespace {

std::vector<std::size_t> canonical_rows(const Matrix& m) {
  std::vector<std::size_t> idx(m.rows());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    auto ra = m.row(a);
    auto rb = m.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  return idx;
}

std::vector<std::size_t> draw_subset(std::vector<std::size_t> pool, std::size_t m, Rng& rng) {
  if (m >= pool.size()) return pool;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(m);
  return pool;
}

}  // namespace

double swd_between_sets(const Matrix& a, const Matrix& b, std::size_t slices, Rng& rng,
                        std::size_t repeats) {
  if (a.rows() == 0 || b.rows() == 0) throw ContractError("swd_between_sets: empty sample");
  if (a.cols() != b.cols()) throw ShapeError("swd_between_sets: widths differ");
  if (repeats == 0) throw ContractError("swd_between_sets: repeats must be > 0");
  const std::size_t m = std::min(a.rows(), b.rows());
  const std::vector<std::size_t> ca = canonical_rows(a);
  const std::vector<std::size_t> cb = canonical_rows(b);
  double total = 0.0;
  for (std::size_t r = 0; r < repeats; ++r) {
    const Matrix sa = a.gather_rows(draw_subset(ca, m, rng));
    const Matrix sb = b.gather_rows(draw_subset(cb, m, rng));
    const SliceSet s = SliceSet::sample(slices, a.cols(), rng);
    total += swd(sa, sb, s).value;
  }
  return total / static_cast<double>(repeats);
}

}  // namespace saim
