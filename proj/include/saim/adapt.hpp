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

#ifndef SAIM_ADAPT_HPP_
#define SAIM_ADAPT_HPP_

// Model adaptation: the margin-inducing objective (source and pseudo-data
// cross-entropy plus sliced alignment of the source and target embeddings to
// the pseudo-data), the alignment-only baseline, and the computable terms of
// the target-error bound.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "saim/featurize.hpp"
#include "saim/gmm.hpp"
#include "saim/model.hpp"
#include "saim/numerics.hpp"
#include "saim/swd.hpp"

namespace saim {

enum class AdaptMode { kSaim2, kAlignmentOnly, kSourceOnly };

std::string_view mode_name(AdaptMode mode);  // "saim2", "ao", "so"
AdaptMode parse_mode(std::string_view name);
/// Loss-term labels recorded per epoch for a mode (4, 2 and 1 terms).
std::vector<std::string> loss_term_names(AdaptMode mode);

struct AdaptConfig {
  AdaptMode mode = AdaptMode::kSaim2;
  double lambda = 1e-2;
  double tau = 0.99;
  double lr = 1e-3;
  std::size_t epochs = 30;
  std::size_t batch = 32;
  std::size_t slices = 128;
  std::size_t n_pseudo = 0;  // 0: same as the source size
  std::size_t max_draw_factor = 100;
  std::size_t bound_repeats = 5;
  std::uint64_t seed = 0;

  /// Throws ContractError for lambda < 0, tau outside [0, 1), zero batch,
  /// epochs or slices.
  void validate() const;
  std::string to_json() const;
  std::uint64_t hash() const;
};

struct EpochLosses {
  std::size_t epoch = 0;
  std::vector<double> terms;  // unweighted, averaged over the epoch's steps
};

/// Computable right-hand-side terms of the target-error bound.
struct BoundReport {
  double source_error = 0.0;
  double swd_source_pseudo = 0.0;
  double swd_target_pseudo = 0.0;
  double one_minus_tau = 0.0;
  /// Source error plus pseudo-data error of the current model; stands in for
  /// the joint-optimal error, which it upper-bounds.
  double joint_error_proxy = 0.0;
  std::size_t n_source = 0;
  std::size_t n_target = 0;
  std::size_t n_pseudo = 0;

  double computable_sum() const {
    return source_error + swd_source_pseudo + swd_target_pseudo + one_minus_tau +
           joint_error_proxy;
  }
  std::string to_json() const;
};

struct RunReport {
  AdaptMode mode = AdaptMode::kSaim2;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  std::vector<EpochLosses> epochs;
  std::optional<double> target_accuracy_before;
  std::optional<double> target_accuracy_after;
  std::optional<BoundReport> bound_before;
  std::optional<BoundReport> bound_after;
  double wall_seconds = 0.0;

  /// One JSON record per epoch and a final summary record. Timing is left
  /// out unless requested, so reports of equal runs compare byte-for-byte.
  std::string to_jsonl(bool include_timing = false) const;
};

/// One optimization step's worth of data.
struct StepBatch {
  std::span<const SparseVector> source_x;
  Matrix source_labels;  // one-hot
  std::span<const SparseVector> target_x;
  Matrix pseudo_z;
  Matrix pseudo_labels;  // one-hot
};

/// Sorted pairings for the (up to two) alignment terms of a mode.
struct FrozenPairings {
  std::optional<SwdPairing> first;   // saim2: target/pseudo, ao: source/target
  std::optional<SwdPairing> second;  // saim2: source/pseudo
};

struct ObjectiveResult {
  std::vector<double> terms;  // in loss_term_names order, unweighted
  double total = 0.0;         // cross-entropies + lambda * distances
  Gradients grads;
  FrozenPairings pairings;
};

/// Evaluates the per-step objective of `mode` and its gradient. Alignment
/// terms are skipped when the pseudo batch (saim2) or target batch is empty.
/// With `frozen` the 1D pairings are held fixed instead of re-sorted.
ObjectiveResult evaluate_objective(const ModelParams& params, const StepBatch& batch,
                                   AdaptMode mode, double lambda, const SliceSet& slices,
                                   const FrozenPairings* frozen = nullptr);

/// Cycles through a shuffled index list, reshuffling when it runs out.
class BatchStream {
 public:
  BatchStream(std::size_t size, Rng rng);
  std::vector<std::size_t> next(std::size_t count);

 private:
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
  Rng rng_;
};

ModelParams adapt_saim2(const ModelParams& init, const LabeledDataset& source,
                        const UnlabeledDataset& target, const PseudoDataset& pseudo,
                        const AdaptConfig& cfg, RunReport* report = nullptr);

ModelParams adapt_alignment_only(const ModelParams& init, const LabeledDataset& source,
                                 const UnlabeledDataset& target, const AdaptConfig& cfg,
                                 RunReport* report = nullptr);

BoundReport compute_bound_terms(const ModelParams& params, const LabeledDataset& source,
                                const UnlabeledDataset& target, const PseudoDataset& pseudo,
                                double tau, const AdaptConfig& cfg);

// ------------------------------------------------------------- Experiments

struct TaskData {
  std::string name;
  LabeledDataset source;
  UnlabeledDataset target;  // training split; labels are never handed over
  LabeledDataset target_test;
  LabeledDataset source_test;  // optional, may be empty
};

/// Initial training and mixture estimation for one seed; shared by every mode.
struct SourceStage {
  ModelParams params;
  GmmModel gmm;
  TrainLog log;
};

SourceStage prepare_source_stage(const TaskData& task, const TrainConfig& train,
                                 std::uint64_t seed);

struct ExperimentResult {
  AdaptMode mode = AdaptMode::kSaim2;
  std::uint64_t seed = 0;
  ModelParams params;
  double target_accuracy = 0.0;
  double source_test_accuracy = 0.0;  // NaN without a source test split
  bool pseudo_partial = false;
  std::size_t pseudo_size = 0;
  RunReport report;
};

/// Runs one mode from a prepared source stage. cfg.seed drives adaptation.
ExperimentResult run_mode(const TaskData& task, const SourceStage& stage,
                          const AdaptConfig& cfg, bool with_bounds = false);

/// prepare_source_stage + run_mode with train.seed = cfg.seed.
ExperimentResult run_experiment(const TaskData& task, const AdaptConfig& cfg,
                                const TrainConfig& train, bool with_bounds = false);

struct SweepRow {
  double tau = 0.0;
  std::vector<double> accuracies;  // per seed
  double mean = 0.0;
  std::optional<double> std;       // sample std, needs >= 2 seeds
  std::size_t partial_cells = 0;   // seeds whose pseudo-set fell short
};

/// SAIM2 accuracy per (tau, seed).
std::vector<SweepRow> tau_sweep(const TaskData& task, std::span<const double> grid,
                                std::span<const std::uint64_t> seeds, const AdaptConfig& cfg,
                                const TrainConfig& train);

std::string sweep_to_csv(std::span<const SweepRow> rows);

double mean_of(std::span<const double> v);
/// Sample standard deviation; nullopt for fewer than two values.
std::optional<double> sample_std(std::span<const double> v);

}  // namespace saim

#endif  // SAIM_ADAPT_HPP_
