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

#ifndef SAIM_SWD_HPP_
#define SAIM_SWD_HPP_

// Sliced Wasserstein distance between equal-size empirical samples. The
// value is the mean over slices of the squared 2-Wasserstein distance of the
// projected samples, whose optimal 1D coupling pairs order statistics.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "saim/numerics.hpp"

namespace saim {

/// Projection directions, one unit-norm row per slice.
struct SliceSet {
  Matrix directions;
  std::uint64_t seed = 0;

  std::size_t count() const { return directions.rows(); }
  std::size_t dim() const { return directions.cols(); }

  /// Directions uniform on the sphere (normalized Gaussian draws).
  static SliceSet sample(std::size_t count, std::size_t dim, Rng& rng);
};

/// Mean squared difference of two ascending sequences of equal length.
/// Throws ContractError on unequal lengths or unsorted input.
double wasserstein2_1d(std::span<const double> a, std::span<const double> b);

/// Sorted order of each sample's projections, per slice. Holding a pairing
/// fixed turns the distance into a smooth function of the samples.
struct SwdPairing {
  std::vector<std::vector<std::size_t>> x_order;
  std::vector<std::vector<std::size_t>> y_order;
};

struct SwdValue {
  double value = 0.0;
  Matrix grad_x;  // d value / d xs
  Matrix grad_y;  // d value / d ys
};

/// Projects both samples onto every slice and returns the ascending orders.
SwdPairing swd_pairing(const Matrix& xs, const Matrix& ys, const SliceSet& slices);

/// Sliced distance with gradients w.r.t. both samples. Rows are samples.
SwdValue swd(const Matrix& xs, const Matrix& ys, const SliceSet& slices);
/// Same, with the 1D pairings held fixed.
SwdValue swd(const Matrix& xs, const Matrix& ys, const SliceSet& slices,
             const SwdPairing& pairing);

/// Full-set diagnostic: averages swd over `repeats` draws of equal-size
/// subsamples (size min(|a|, |b|)) with fresh slices each time. Rows are put
/// in a canonical order first, so the result does not depend on row order.
double swd_between_sets(const Matrix& a, const Matrix& b, std::size_t slices, Rng& rng,
                        std::size_t repeats);

}  // namespace saim

#endif  // SAIM_SWD_HPP_
