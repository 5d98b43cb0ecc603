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

#ifndef SAIM_HARNESS_HPP_
#define SAIM_HARNESS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "saim/adapt.hpp"
#include "saim/featurize.hpp"
#include "saim/gmm.hpp"
#include "saim/model.hpp"

namespace saim {

/// Two isotropic Gaussian classes at +-separation/2 (in sigma units) along
/// the first axis. The target domain is the source rotated by `rotation_deg`
/// in the plane of the first two axes and then translated by `shift`.
struct SyntheticConfig {
  std::size_t input_dim = 10;
  double separation = 4.0;
  double sigma = 1.0;
  std::vector<double> shift;  // in sigma units; padded with zeros to input_dim
  double rotation_deg = 0.0;
  std::size_t n_source = 1000;
  std::size_t n_source_test = 1000;
  std::size_t n_target = 1000;
  std::size_t n_test = 2000;

  std::string to_json() const;
};

/// The shifted task used by the tests and the default suite.
SyntheticConfig default_synthetic_config();

struct SyntheticTask {
  TaskData data;
  LabeledDataset target_train_labeled;  // hidden labels, for imbalance only
  double bayes_accuracy = 0.0;
};

/// Standard normal CDF.
double normal_cdf(double x);

SyntheticTask make_synthetic_task(const SyntheticConfig& cfg, Rng& rng);

/// Subsamples so that `majority_class` makes up `majority_fraction` of the
/// result, keeping the largest such subset. Relative row order is preserved.
/// Throws ContractError when the minority class cannot supply a sample.
LabeledDataset apply_imbalance(const LabeledDataset& target, double majority_fraction,
                               Rng& rng, int majority_class = 0);

/// Raw review corpus to task splits. The vocabulary is fit on the source
/// training split, plus the target training split unless `source_only_vocab`.
struct RawSplitConfig {
  std::size_t dim = 5000;
  std::size_t n_source = 2000;
  std::size_t n_target = 2000;
  bool source_only_vocab = false;
  std::uint64_t seed = 0;
};

struct PreparedTask {
  TaskData data;
  LabeledDataset target_train_labeled;
  Vocabulary vocab;
};

PreparedTask prepare_task_from_raw(const std::vector<Document>& source_docs,
                                   const std::vector<Document>& target_docs,
                                   const RawSplitConfig& cfg, std::string name);

struct TaskSpec {
  std::string source;  // B, D, E, K or "synthetic"
  std::string target;  // B, D, E, K or "synthetic"
  std::size_t dim = 5000;
  double imbalance = 0.5;  // majority fraction of the target training split

  std::string name() const;
  bool synthetic() const { return source == "synthetic"; }
  std::string to_json() const;
  /// "synthetic" or "S:T" (e.g. "D:K").
  static TaskSpec parse(const std::string& text, std::size_t dim, double imbalance);
};

/// The twelve ordered pairs of the four review domains.
std::vector<TaskSpec> amazon_tasks(std::size_t dim, double imbalance = 0.5);

struct ResultRow {
  std::string task;
  AdaptMode mode = AdaptMode::kSaim2;
  std::vector<std::uint64_t> seeds;
  std::vector<double> accuracies;
  double mean = 0.0;
  std::optional<double> std;
  std::size_t partial_cells = 0;
  std::string skipped;  // reason when the task could not run
};

struct ResultTable {
  std::vector<ResultRow> rows;

  const ResultRow* find(const std::string& task, AdaptMode mode) const;
  /// Columns: task,mode,n_seeds,mean_accuracy,std,partial_cells,status,per_seed
  std::string to_csv() const;
};

struct SuiteOptions {
  AdaptConfig adapt;
  TrainConfig train;
  SyntheticConfig synthetic = default_synthetic_config();
  std::uint64_t data_seed = 20240101;  // fixes synthetic data and raw splits
  std::size_t raw_n_source = 2000;     // raw corpora: labeled source rows
  std::size_t raw_n_target = 2000;     // raw corpora: unlabeled target rows
  std::filesystem::path data_root;     // empty: $SAIM_DATA_ROOT
  std::filesystem::path cache_dir;     // empty: no restart cache
  std::size_t workers = 1;
};

/// Resolves a task's data: synthetic, pre-featurized directory
/// <root>/<S><T>_<dim>/{source_train,target_train,target_test}.svm, or raw
/// <root>/<S>.tsv + <root>/<T>.tsv. Returns nullopt with `reason` set when
/// nothing is found. Imbalance is applied to the target training split.
std::optional<TaskData> load_task(const TaskSpec& spec, const SuiteOptions& opts,
                                  std::string* reason, double* bayes_accuracy = nullptr);

/// Runs every (task, mode, seed) cell. The source stage is shared between the
/// modes of a (task, seed). With a cache directory, finished cells are stored
/// under a content hash and skipped on rerun.
ResultTable run_suite(const std::vector<TaskSpec>& tasks, const std::vector<AdaptMode>& modes,
                      const std::vector<std::uint64_t>& seeds, const SuiteOptions& opts);

/// Rows ready for CSV export: embeddings of a dataset with a tag.
struct EmbeddingBlock {
  std::string tag;
  Matrix z;
  std::vector<int> labels;  // -1 is written as "?"
};

EmbeddingBlock embed_block(const ModelParams& params, std::string tag,
                           const LabeledDataset& data);
EmbeddingBlock embed_block(const ModelParams& params, std::string tag,
                           const UnlabeledDataset& data);
EmbeddingBlock embed_block(std::string tag, const PseudoDataset& pseudo);

/// CSV: tag,label,z0..z{p-1}. An empty block list gives a header-only file.
std::string embeddings_to_csv(std::size_t width, const std::vector<EmbeddingBlock>& blocks);
void export_embeddings(const std::filesystem::path& path, const ModelParams& params,
                       const std::vector<EmbeddingBlock>& blocks);

}  // namespace saim

#endif  // SAIM_HARNESS_HPP_
