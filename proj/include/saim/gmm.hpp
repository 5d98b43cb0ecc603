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

#ifndef SAIM_GMM_HPP_
#define SAIM_GMM_HPP_

// Class-conditional Gaussian mixture in the embedding space, estimated in
// closed form from correctly classified source samples, and the confidence
// filtered pseudo-dataset drawn from it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "saim/featurize.hpp"
#include "saim/model.hpp"
#include "saim/numerics.hpp"

namespace saim {

/// One Gaussian component per class. `chol[j]` is the lower Cholesky factor
/// of cov[j] + eps[j] * I.
class GmmModel {
 public:
  GmmModel() = default;
  /// Validates the weights and factors every regularized covariance. Throws
  /// NumericError when a covariance is not positive definite.
  GmmModel(Vector weights, Matrix means, std::vector<Matrix> covariances, Vector eps);

  std::size_t components() const { return weights_.size(); }
  std::size_t dim() const { return means_.cols(); }
  const Vector& weights() const { return weights_; }
  const Matrix& means() const { return means_; }
  std::span<const double> mean(std::size_t j) const { return means_.row(j); }
  const Matrix& covariance(std::size_t j) const { return covs_[j]; }
  const Matrix& cholesky(std::size_t j) const { return chol_[j]; }
  const Vector& eps() const { return eps_; }

  /// eps = 1e-6 * trace(cov) / dim, the default diagonal loading.
  static double default_eps(const Matrix& cov);

 private:
  Vector weights_;
  Matrix means_;
  std::vector<Matrix> covs_;
  std::vector<Matrix> chol_;
  Vector eps_;
};

/// Lower-triangular L with L L^T = a. Throws NumericError if a is not
/// positive definite.
Matrix cholesky(const Matrix& a);

/// Source rows of each class that the model also predicts as that class.
struct SupportSet {
  std::vector<std::vector<std::size_t>> members;

  std::size_t classes() const { return members.size(); }
  std::size_t total() const;
};

/// Throws DegenerateError if some class ends up with no members.
SupportSet build_support_sets(const ModelParams& params, const LabeledDataset& data);

/// Work counters for one estimation call.
struct EstimationProbe {
  std::size_t embedding_passes = 0;
  std::size_t rows_embedded = 0;
};

/// Weight |S_j| / N, mean and (1/|S_j|-normalized) covariance of the
/// embeddings of each support set, accumulated in a single streaming pass.
/// Requires |S_j| >= 2.
GmmModel estimate_gmm(const ModelParams& params, const LabeledDataset& data,
                      const SupportSet& supports, EstimationProbe* probe = nullptr);

/// Component j with probability weight_j, then mean_j + L_j u with u ~ N(0, I).
Matrix sample_gmm(const GmmModel& gmm, std::size_t n, Rng& rng);
/// Same, also reporting the component of each row.
Matrix sample_gmm(const GmmModel& gmm, std::size_t n, Rng& rng,
                  std::vector<std::size_t>* components);

/// log sum_j weight_j N(z; mean_j, cov_j + eps_j I), via log-sum-exp.
double gmm_log_density(const GmmModel& gmm, std::span<const double> z);

struct PseudoDataset {
  Matrix z;                 // N_p x p embeddings
  std::vector<int> labels;  // classifier argmax
  double tau = 0.0;
  std::size_t attempted = 0;
  std::size_t accepted = 0;
  std::size_t requested = 0;
  bool shortfall = false;

  std::size_t size() const { return labels.size(); }
  Matrix one_hot_labels(std::size_t classes) const { return one_hot(labels, classes); }
};

/// Rejection sampling: keep draws whose top class probability exceeds tau,
/// labeled by argmax, until `n_target` are accepted or
/// max_draw_factor * n_target draws were made (then `shortfall` is set).
PseudoDataset generate_pseudo_dataset(const GmmModel& gmm, const ModelParams& params,
                                      std::size_t n_target, double tau, Rng& rng,
                                      std::size_t max_draw_factor = 100);

std::string gmm_to_json(const GmmModel& gmm);
GmmModel gmm_from_json(const std::string& text);
void save_gmm(const std::filesystem::path& path, const GmmModel& gmm);
GmmModel load_gmm(const std::filesystem::path& path);

std::string pseudo_to_json(const PseudoDataset& pseudo);
PseudoDataset pseudo_from_json(const std::string& text);
void save_pseudo(const std::filesystem::path& path, const PseudoDataset& pseudo);
PseudoDataset load_pseudo(const std::filesystem::path& path);

}  // namespace saim

#endif  // SAIM_GMM_HPP_
