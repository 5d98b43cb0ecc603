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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "saim/errors.hpp"
#include "saim/swd.hpp"
#include "test_util.hpp"

namespace saim {
namespace {

using testing::random_matrix;
using testing::rel_error;

// Exhaustive min-cost assignment over all n! pairings.
double brute_force_w2(const Vector& a, const Vector& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[perm[i]]) * (a[i] - b[perm[i]]);
    best = std::min(best, s / static_cast<double>(a.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

Vector project(const Matrix& m, std::span<const double> dir) {
  Vector out(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    out[r] = std::inner_product(row.begin(), row.end(), dir.begin(), 0.0);
  }
  return out;
}

SliceSet fixed_slices(Matrix dirs) {
  SliceSet s;
  s.directions = std::move(dirs);
  return s;
}

TEST(SliceSet, DirectionsAreUnitNorm) {
  Rng rng(1);
  SliceSet s = SliceSet::sample(128, 50, rng);
  EXPECT_EQ(s.count(), 128u);
  for (std::size_t l = 0; l < s.count(); ++l) {
    double nn = 0.0;
    for (double v : s.directions.row(l)) nn += v * v;
    EXPECT_NEAR(std::sqrt(nn), 1.0, 1e-12);
  }
}

TEST(Wasserstein1d, BasicCases) {
  Vector a{0.0, 1.0, 5.0};
  EXPECT_EQ(wasserstein2_1d(a, a), 0.0);
  EXPECT_EQ(wasserstein2_1d(Vector{0.0}, Vector{1.0}), 1.0);
  EXPECT_THROW(wasserstein2_1d(Vector{0.0, 1.0}, Vector{1.0}), ContractError);
  EXPECT_THROW(wasserstein2_1d(Vector{1.0, 0.0}, Vector{0.0, 1.0}), ContractError);
}

TEST(Wasserstein1d, MatchesExhaustiveAssignment) {
  Rng rng(2);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(8);
    Vector a(n), b(n);
    for (auto& v : a) v = rng.normal();
    for (auto& v : b) v = 2.0 * rng.normal() + 0.5;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(wasserstein2_1d(a, b), brute_force_w2(a, b));
  }
}

TEST(Swd, SlicedTransportMatchesExhaustiveAssignmentPerDirection) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(7), p = 1 + rng.below(4);
    Matrix xs = random_matrix(n, p, rng), ys = random_matrix(n, p, rng, 1.5);
    SliceSet s = SliceSet::sample(3, p, rng);
    double oracle = 0.0;
    for (std::size_t l = 0; l < s.count(); ++l) {
      Vector a = project(xs, s.directions.row(l)), b = project(ys, s.directions.row(l));
      // sorted first so the identity pairing sums in the same order
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      const double bf = brute_force_w2(a, b);
      EXPECT_EQ(wasserstein2_1d(a, b), bf);
      oracle += bf;
    }
    EXPECT_NEAR(swd(xs, ys, s).value, oracle / 3.0, 1e-12 * (1.0 + oracle));
  }
}

TEST(Swd, IdenticalSamplesGiveZeroAndZeroGradient) {
  Rng rng(4);
  Matrix xs = random_matrix(10, 5, rng);
  SliceSet s = SliceSet::sample(32, 5, rng);
  SwdValue v = swd(xs, xs, s);
  EXPECT_EQ(v.value, 0.0);
  for (double g : v.grad_x.data()) EXPECT_EQ(g, 0.0);
  for (double g : v.grad_y.data()) EXPECT_EQ(g, 0.0);
}

TEST(Swd, ConstantOffsetIn1d) {
  Rng rng(5);
  const double c = 1.7;
  Matrix xs = random_matrix(9, 1, rng), ys = xs;
  for (double& v : ys.data()) v += c;
  SliceSet s = fixed_slices(Matrix{{1.0}, {-1.0}});
  EXPECT_NEAR(swd(xs, ys, s).value, c * c, 1e-12);
}

TEST(Swd, GradientMatchesFiniteDifferencesWithFrozenPairing) {
  Rng rng(6);
  constexpr double h = 1e-6;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix xs = random_matrix(5, 3, rng), ys = random_matrix(5, 3, rng);
    SliceSet s = SliceSet::sample(16, 3, rng);
    SwdPairing pairing = swd_pairing(xs, ys, s);
    SwdValue v = swd(xs, ys, s, pairing);
    EXPECT_EQ(v.value, swd(xs, ys, s).value);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Matrix p = xs, m = xs;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd = (swd(p, ys, s, pairing).value - swd(m, ys, s, pairing).value) / (2 * h);
      EXPECT_LT(rel_error(v.grad_x.data()[i], fd), 1e-4);
    }
    for (std::size_t i = 0; i < ys.size(); ++i) {
      Matrix p = ys, m = ys;
      p.data()[i] += h;
      m.data()[i] -= h;
      const double fd = (swd(xs, p, s, pairing).value - swd(xs, m, s, pairing).value) / (2 * h);
      EXPECT_LT(rel_error(v.grad_y.data()[i], fd), 1e-4);
    }
  }
}

TEST(Swd, SymmetricAndNonNegative) {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix xs = random_matrix(12, 4, rng), ys = random_matrix(12, 4, rng, 2.0);
    SliceSet s = SliceSet::sample(8, 4, rng);
    const double ab = swd(xs, ys, s).value;
    EXPECT_EQ(ab, swd(ys, xs, s).value);
    EXPECT_GE(ab, 0.0);
  }
}

TEST(Swd, InvariantToRowOrder) {
  Rng rng(8);
  Matrix xs = random_matrix(15, 4, rng), ys = random_matrix(15, 4, rng);
  SliceSet s = SliceSet::sample(20, 4, rng);
  std::vector<std::size_t> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  SwdValue base = swd(xs, ys, s);
  SwdValue moved = swd(xs.gather_rows(perm), ys, s);
  EXPECT_EQ(base.value, moved.value);
  for (std::size_t r = 0; r < 15; ++r)
    for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(moved.grad_x(r, c), base.grad_x(perm[r], c));
  EXPECT_EQ(base.value, swd(xs, ys.gather_rows(perm), s).value);
}

TEST(Swd, DisjointSupportsHaveNonVanishingGradient) {
  Rng rng(9);
  Matrix xs = random_matrix(20, 5, rng, 0.01), ys = random_matrix(20, 5, rng, 0.01);
  for (std::size_t r = 0; r < 20; ++r) ys(r, 0) += 10.0;
  SwdValue v = swd(xs, ys, SliceSet::sample(16, 5, rng));
  double nn = 0.0;
  for (double g : v.grad_x.data()) nn += g * g;
  EXPECT_GT(std::sqrt(nn), 1e-3);
}

TEST(Swd, MismatchedCountsThrow) {
  Rng rng(10);
  SliceSet s = SliceSet::sample(4, 3, rng);
  EXPECT_THROW(swd(Matrix(4, 3), Matrix(5, 3), s), ContractError);
  EXPECT_THROW(swd(Matrix(4, 2), Matrix(4, 2), s), ShapeError);
}

TEST(Swd, VarianceShrinksWithMoreSlices) {
  Rng rng(11);
  Matrix xs = random_matrix(64, 10, rng), ys = random_matrix(64, 10, rng);
  std::vector<double> var;
  for (std::size_t L : {4u, 64u, 512u}) {
    std::vector<double> vals;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Rng r(seed);
      vals.push_back(swd(xs, ys, SliceSet::sample(L, 10, r)).value);
    }
    const double m = std::accumulate(vals.begin(), vals.end(), 0.0) / vals.size();
    double v = 0.0;
    for (double x : vals) v += (x - m) * (x - m);
    var.push_back(v / (vals.size() - 1));
  }
  EXPECT_GT(var[0], var[1]);
  EXPECT_GT(var[1], var[2]);
}

TEST(SwdBetweenSets, SameSetGivesZero) {
  Rng rng(12);
  Matrix a = random_matrix(30, 6, rng);
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  Rng r(1);
  EXPECT_EQ(swd_between_sets(a, a.gather_rows(perm), 32, r, 5), 0.0);
}

TEST(SwdBetweenSets, SeparatedGaussiansMatchAnalyticValue) {
  // Offset d along a fixed axis: E[(theta . u)^2] = 1/p for uniform unit theta.
  Rng rng(13);
  const std::size_t p = 50;
  const double d = 3.0;
  Matrix a = random_matrix(200, p, rng, 1e-3), b = random_matrix(200, p, rng, 1e-3);
  for (std::size_t r = 0; r < 200; ++r) b(r, 7) += d;
  Rng r(2);
  const double v = swd_between_sets(a, b, 512, r, 1);
  EXPECT_NEAR(v, d * d / p, 0.1 * d * d / p);
}

TEST(SwdBetweenSets, MonotoneInOffset) {
  Rng rng(14);
  Matrix a = random_matrix(80, 5, rng), base = random_matrix(100, 5, rng);
  double prev = -1.0;
  for (double off : {0.0, 0.5, 1.0, 2.0, 4.0}) {
    Matrix b = base;
    for (std::size_t r = 0; r < b.rows(); ++r) b(r, 0) += off;
    Rng r(3);
    const double v = swd_between_sets(a, b, 64, r, 3);
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(SwdBetweenSets, DeterministicAndRowOrderInvariant) {
  Rng rng(15);
  Matrix a = random_matrix(40, 4, rng), b = random_matrix(25, 4, rng);
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(std::span<std::size_t>(perm));
  Rng r1(9), r2(9);
  EXPECT_EQ(swd_between_sets(a, b, 16, r1, 4), swd_between_sets(a.gather_rows(perm), b, 16, r2, 4));
  Rng r3(9);
  EXPECT_THROW(swd_between_sets(Matrix(0, 4), b, 16, r3, 1), ContractError);
}

}  // namespace
}  // namespace saim
