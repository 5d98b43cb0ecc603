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
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "saim/errors.hpp"
#include "saim/harness.hpp"
#include "test_util.hpp"

namespace saim {
namespace {

SyntheticConfig small_synthetic() {
  SyntheticConfig cfg = default_synthetic_config();
  cfg.n_source = 200;
  cfg.n_source_test = 200;
  cfg.n_target = 200;
  cfg.n_test = 400;
  return cfg;
}

SuiteOptions small_options() {
  SuiteOptions o;
  o.synthetic = small_synthetic();
  o.train.epochs = 5;
  o.adapt.epochs = 3;
  o.adapt.slices = 16;
  return o;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

TEST(Synthetic, NormalCdfKnownValues) {
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_cdf(1.96), 0.9750021048517795, 1e-12);
  EXPECT_NEAR(normal_cdf(-1.0), 0.15865525393145707, 1e-12);
}

TEST(Synthetic, SeparationFourGivesBayesAccuracy0977) {
  SyntheticConfig cfg = default_synthetic_config();
  cfg.separation = 4.0;
  Rng rng(1);
  SyntheticTask t = make_synthetic_task(cfg, rng);
  EXPECT_NEAR(t.bayes_accuracy, 0.97725, 5e-5);
}

TEST(Synthetic, EmpiricalBayesRuleMatchesClosedForm) {
  // The Bayes rule on the source is sign(x0); its accuracy on fresh samples
  // must agree with the closed form within sampling error.
  SyntheticConfig cfg = default_synthetic_config();
  cfg.n_source = 20000;
  Rng rng(2);
  SyntheticTask t = make_synthetic_task(cfg, rng);
  std::size_t right = 0;
  for (std::size_t i = 0; i < t.data.source.size(); ++i) {
    const SparseVector& v = t.data.source.features[i];
    double x0 = 0.0;
    for (std::size_t k = 0; k < v.indices.size(); ++k)
      if (v.indices[k] == 0) x0 = v.values[k];
    right += (x0 > 0.0 ? 1 : 0) == t.data.source.labels[i];
  }
  const double acc = static_cast<double>(right) / static_cast<double>(t.data.source.size());
  const double se = std::sqrt(t.bayes_accuracy * (1 - t.bayes_accuracy) / 20000.0);
  EXPECT_NEAR(acc, t.bayes_accuracy, 4 * se);
}

TEST(Synthetic, FixedSeedGivesIdenticalData) {
  Rng a(3), b(3);
  SyntheticTask x = make_synthetic_task(small_synthetic(), a);
  SyntheticTask y = make_synthetic_task(small_synthetic(), b);
  EXPECT_EQ(x.data.source.features, y.data.source.features);
  EXPECT_EQ(x.data.source.labels, y.data.source.labels);
  EXPECT_EQ(x.data.target.features, y.data.target.features);
  EXPECT_EQ(x.data.target_test.features, y.data.target_test.features);
}

TEST(Synthetic, SplitSizesAndBalance) {
  Rng rng(4);
  SyntheticTask t = make_synthetic_task(small_synthetic(), rng);
  EXPECT_EQ(t.data.source.size(), 200u);
  EXPECT_EQ(t.data.source_test.size(), 200u);
  EXPECT_EQ(t.data.target.size(), 200u);
  EXPECT_EQ(t.data.target_test.size(), 400u);
  EXPECT_EQ(t.target_train_labeled.size(), 200u);
  EXPECT_EQ(t.target_train_labeled.strip_labels().features, t.data.target.features);
  int ones = 0;
  for (int y : t.data.source.labels) ones += y;
  EXPECT_EQ(ones, 100);
}

TEST(Synthetic, ZeroShiftMakesDomainsIdenticallyDistributed) {
  SyntheticConfig cfg = small_synthetic();
  cfg.shift.clear();
  cfg.n_source = 4000;
  cfg.n_target = 4000;
  Rng rng(5);
  SyntheticTask t = make_synthetic_task(cfg, rng);
  std::vector<double> ms(cfg.input_dim), mt(cfg.input_dim);
  for (const auto& v : t.data.source.features)
    for (std::size_t k = 0; k < v.indices.size(); ++k) ms[v.indices[k]] += v.values[k] / 4000.0;
  for (const auto& v : t.data.target.features)
    for (std::size_t k = 0; k < v.indices.size(); ++k) mt[v.indices[k]] += v.values[k] / 4000.0;
  // Means agree within 5 standard errors of a difference of two sample means.
  for (std::size_t d = 0; d < cfg.input_dim; ++d) EXPECT_NEAR(ms[d], mt[d], 5 * 3.0 / std::sqrt(2000.0));
}

TEST(Synthetic, ShiftMovesTargetMean) {
  SyntheticConfig cfg = small_synthetic();
  cfg.n_target = 4000;
  Rng rng(6);
  SyntheticTask t = make_synthetic_task(cfg, rng);
  double m1 = 0.0;
  for (const auto& v : t.data.target.features)
    for (std::size_t k = 0; k < v.indices.size(); ++k)
      if (v.indices[k] == 1) m1 += v.values[k] / 4000.0;
  EXPECT_NEAR(m1, cfg.shift[1] * cfg.sigma, 0.2);
}

TEST(Imbalance, BalancedRatioKeepsEverything) {
  Rng rng(7);
  SyntheticConfig cfg = small_synthetic();
  SyntheticTask t = make_synthetic_task(cfg, rng);
  LabeledDataset out = apply_imbalance(t.target_train_labeled, 0.5, rng);
  EXPECT_EQ(out.size(), t.target_train_labeled.size());
}

TEST(Imbalance, NinetyTenOnTwoThousand) {
  SyntheticConfig cfg = small_synthetic();
  cfg.n_target = 2000;
  Rng rng(8);
  SyntheticTask t = make_synthetic_task(cfg, rng);
  LabeledDataset out = apply_imbalance(t.target_train_labeled, 0.9, rng);
  std::size_t major = 0, minor = 0;
  for (int y : out.labels) (y == 0 ? major : minor)++;
  EXPECT_EQ(major, 1000u);
  EXPECT_EQ(minor, 111u);
  // Largest set: one more minority sample would break the ratio.
  EXPECT_GE(static_cast<double>(major) / static_cast<double>(major + minor), 0.9);
  EXPECT_LT(1000.0 / 1112.0, 0.9);
}

TEST(Imbalance, EightyTwentyAndOrderPreserved) {
  SyntheticConfig cfg = small_synthetic();
  cfg.n_target = 2000;
  Rng rng(9);
  SyntheticTask t = make_synthetic_task(cfg, rng);
  LabeledDataset out = apply_imbalance(t.target_train_labeled, 0.8, rng);
  std::size_t minor = 0;
  for (int y : out.labels) minor += y == 1;
  EXPECT_EQ(minor, 250u);
  // Rows appear in their original relative order.
  std::size_t j = 0;
  for (const auto& row : out.features) {
    while (j < t.target_train_labeled.size() && !(t.target_train_labeled.features[j] == row)) ++j;
    ASSERT_LT(j, t.target_train_labeled.size());
    ++j;
  }
}

TEST(Imbalance, InsufficientMinorityThrows) {
  LabeledDataset d;
  d.dim = 1;
  for (int i = 0; i < 5; ++i) {
    d.features.push_back(SparseVector{{0}, {1.0}, 1});
    d.labels.push_back(0);
  }
  d.features.push_back(SparseVector{{0}, {2.0}, 1});
  d.labels.push_back(1);
  Rng rng(10);
  EXPECT_THROW(apply_imbalance(d, 0.9, rng), ContractError);
  EXPECT_THROW(apply_imbalance(d, 0.3, rng), ContractError);
  EXPECT_THROW(apply_imbalance(d, 1.0, rng), ContractError);
}

TEST(TaskSpec, ParseAndNames) {
  TaskSpec s = TaskSpec::parse("D:K", 5000, 0.5);
  EXPECT_EQ(s.source, "D");
  EXPECT_EQ(s.target, "K");
  EXPECT_EQ(s.name(), "D->K@5000");
  EXPECT_EQ(TaskSpec::parse("B:E", 30000, 0.9).name(), "B->E@30000/0.9");
  EXPECT_TRUE(TaskSpec::parse("synthetic", 0, 0.5).synthetic());
  EXPECT_THROW(TaskSpec::parse("D:D", 5000, 0.5), ContractError);
  EXPECT_THROW(TaskSpec::parse("X:K", 5000, 0.5), ContractError);
  EXPECT_THROW(TaskSpec::parse("DK", 5000, 0.5), ContractError);
}

TEST(TaskSpec, TwelveDistinctAmazonPairs) {
  auto tasks = amazon_tasks(5000);
  ASSERT_EQ(tasks.size(), 12u);
  std::set<std::string> names;
  for (const auto& t : tasks) {
    EXPECT_NE(t.source, t.target);
    names.insert(t.name());
  }
  EXPECT_EQ(names.size(), 12u);
}

TEST(LoadTask, MissingDataGivesReason) {
  testing::TempDir dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  SuiteOptions o = small_options();
  o.data_root = dir.path();
  std::string reason;
  EXPECT_FALSE(load_task(TaskSpec::parse("D:K", 5000, 0.5), o, &reason).has_value());
  EXPECT_NE(reason.find("D->K"), std::string::npos);
}

TEST(LoadTask, ReadsPrefeaturizedDirectory) {
  testing::TempDir dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  Rng rng(11);
  SyntheticTask t = make_synthetic_task(small_synthetic(), rng);
  const auto sub = dir.path() / "DK_10";
  std::filesystem::create_directories(sub);
  save_sparse_file(sub / "source_train.svm", t.data.source);
  save_sparse_file(sub / "target_train.svm", t.target_train_labeled);
  save_sparse_file(sub / "target_test.svm", t.data.target_test);
  SuiteOptions o = small_options();
  o.data_root = dir.path();
  std::string reason;
  auto data = load_task(TaskSpec::parse("D:K", 10, 0.5), o, &reason);
  ASSERT_TRUE(data.has_value()) << reason;
  EXPECT_EQ(data->source.labels, t.data.source.labels);
  EXPECT_EQ(data->target.features, t.data.target.features);
  auto imb = load_task(TaskSpec::parse("D:K", 10, 0.8), o, &reason);
  ASSERT_TRUE(imb.has_value());
  EXPECT_EQ(imb->target.size(), 125u);
}

TEST(LoadTask, ReadsRawReviews) {
  testing::TempDir dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  auto write = [&](const std::string& name, const std::string& good, const std::string& bad) {
    std::ofstream out(dir.path() / name);
    for (int i = 0; i < 30; ++i) {
      out << good << " item " << i << "\t5\n";
      out << bad << " item " << i << "\t1\n";
    }
  };
  write("B.tsv", "great book loved it", "boring book hated it");
  write("K.tsv", "great blender loved it", "broken blender hated it");
  SuiteOptions o = small_options();
  o.data_root = dir.path();
  o.raw_n_source = 40;
  o.raw_n_target = 40;
  TaskSpec spec = TaskSpec::parse("B:K", 50, 0.5);
  std::string reason;
  ::setenv("SAIM_DATA_ROOT", "/nonexistent", 1);
  auto data = load_task(spec, o, &reason);
  ::unsetenv("SAIM_DATA_ROOT");
  ASSERT_TRUE(data.has_value()) << reason;
  EXPECT_EQ(data->source.dim, data->target.dim);
  EXPECT_LE(data->source.dim, 50u);
  EXPECT_EQ(data->source.size(), 40u);
  EXPECT_EQ(data->target.size(), 40u);
  EXPECT_EQ(data->target_test.size(), 20u);
}

TEST(Suite, SourceOnlyGivesOneRowPerTask) {
  SuiteOptions o = small_options();
  testing::TempDir dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  o.data_root = dir.path();
  std::vector<TaskSpec> tasks{TaskSpec::parse("synthetic", 0, 0.5),
                              TaskSpec::parse("synthetic", 0, 0.8),
                              TaskSpec::parse("B:D", 5000, 0.5)};
  const std::vector<std::uint64_t> seeds{1, 2};
  ResultTable table = run_suite(tasks, {AdaptMode::kSourceOnly}, seeds, o);
  ASSERT_EQ(table.rows.size(), 3u);
  EXPECT_EQ(table.rows[0].accuracies.size(), 2u);
  EXPECT_TRUE(table.rows[0].std.has_value());
  EXPECT_FALSE(table.rows[2].skipped.empty());
  EXPECT_TRUE(table.rows[2].accuracies.empty());
  EXPECT_NE(table.to_csv().find("skipped"), std::string::npos);
}

TEST(Suite, MeansRecomputeExactlyFromPerSeedValues) {
  SuiteOptions o = small_options();
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  ResultTable table =
      run_suite({TaskSpec::parse("synthetic", 0, 0.5)},
                {AdaptMode::kSourceOnly, AdaptMode::kAlignmentOnly, AdaptMode::kSaim2}, seeds, o);
  ASSERT_EQ(table.rows.size(), 3u);
  std::istringstream csv(table.to_csv());
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "task,mode,n_seeds,mean_accuracy,std,partial_cells,status,per_seed");
  while (std::getline(csv, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    ASSERT_EQ(cols.size(), 8u);
    std::vector<double> per;
    std::stringstream ps(cols[7]);
    for (std::string c; std::getline(ps, c, ';');) per.push_back(std::stod(c));
    ASSERT_EQ(per.size(), 3u);
    double sum = 0.0;
    for (double v : per) sum += v;
    EXPECT_EQ(std::stod(cols[3]), sum / 3.0);
  }
  for (const ResultRow& r : table.rows) {
    EXPECT_EQ(r.mean, mean_of(r.accuracies));
    EXPECT_EQ(*r.std, *sample_std(r.accuracies));
  }
}

TEST(Suite, SingleSeedStdIsNotAvailable) {
  SuiteOptions o = small_options();
  const std::vector<std::uint64_t> seeds{4};
  ResultTable table = run_suite({TaskSpec::parse("synthetic", 0, 0.5)}, {AdaptMode::kSourceOnly}, seeds, o);
  EXPECT_FALSE(table.rows[0].std.has_value());
  EXPECT_NE(table.to_csv().find(",n/a,"), std::string::npos);
}

TEST(Suite, RestartReusesCompletedCells) {
  testing::TempDir dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  SuiteOptions o = small_options();
  o.cache_dir = dir.path() / "cache";
  const std::vector<std::uint64_t> seeds{1, 2};
  const std::vector<TaskSpec> tasks{TaskSpec::parse("synthetic", 0, 0.5)};
  ResultTable first = run_suite(tasks, {AdaptMode::kSourceOnly}, seeds, o);
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(o.cache_dir)) {
    ++files;
    // Overwrite the stored value: a rerun that reads it proves the cell was skipped.
    auto j = nlohmann::json::parse(read_file(e.path()));
    j["accuracy"] = 0.125;
    std::ofstream(e.path()) << j.dump();
  }
  EXPECT_EQ(files, 2u);
  ResultTable second = run_suite(tasks, {AdaptMode::kSourceOnly}, seeds, o);
  EXPECT_EQ(second.rows[0].accuracies, (std::vector<double>{0.125, 0.125}));
  // A changed configuration hashes to new cells.
  o.adapt.lambda = 0.5;
  ResultTable third = run_suite(tasks, {AdaptMode::kSourceOnly}, seeds, o);
  EXPECT_EQ(third.rows[0].accuracies, first.rows[0].accuracies);
}

TEST(Suite, WorkerCountDoesNotChangeResults) {
  SuiteOptions o = small_options();
  const std::vector<std::uint64_t> seeds{1, 2, 3};
  const std::vector<TaskSpec> tasks{TaskSpec::parse("synthetic", 0, 0.5)};
  const std::vector<AdaptMode> modes{AdaptMode::kSourceOnly, AdaptMode::kSaim2};
  ResultTable a = run_suite(tasks, modes, seeds, o);
  o.workers = 3;
  ResultTable b = run_suite(tasks, modes, seeds, o);
  EXPECT_EQ(a.to_csv(), b.to_csv());
}

TEST(HiddenLabels, StrippedAndCarriedTargetsGiveIdenticalRuns) {
  Rng rng(12);
  SyntheticTask t = make_synthetic_task(small_synthetic(), rng);
  TaskData stripped = t.data;
  stripped.target = t.target_train_labeled.strip_labels();
  TaskData relabeled = t.data;
  // Scramble the hidden labels; adaptation must not notice.
  LabeledDataset scrambled = t.target_train_labeled;
  for (int& y : scrambled.labels) y = 1 - y;
  relabeled.target = scrambled.strip_labels();
  TrainConfig tc;
  tc.epochs = 5;
  AdaptConfig c;
  c.epochs = 3;
  c.slices = 16;
  for (AdaptMode m : {AdaptMode::kAlignmentOnly, AdaptMode::kSaim2}) {
    c.mode = m;
    ExperimentResult a = run_experiment(stripped, c, tc);
    ExperimentResult b = run_experiment(relabeled, c, tc);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.report.to_jsonl(), b.report.to_jsonl());
  }
}

TEST(Embeddings, EmptyListGivesHeaderOnly) {
  EXPECT_EQ(embeddings_to_csv(3, {}), "tag,label,z0,z1,z2\n");
}

TEST(Embeddings, SourcePlusPseudoRowCountsAndDeterminism) {
  testing::TempDir dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
  Rng rng(13);
  SyntheticTask t = make_synthetic_task(small_synthetic(), rng);
  TrainConfig tc;
  tc.epochs = 5;
  SourceStage st = prepare_source_stage(t.data, tc, 1);
  Rng prng(14);
  PseudoDataset pseudo = generate_pseudo_dataset(st.gmm, st.params, 50, 0.5, prng);
  std::vector<EmbeddingBlock> blocks{embed_block(st.params, "source", t.data.source),
                                     embed_block(st.params, "target", t.data.target),
                                     embed_block("pseudo", pseudo)};
  export_embeddings(dir.path() / "a.csv", st.params, blocks);
  export_embeddings(dir.path() / "b.csv", st.params, blocks);
  const std::string a = read_file(dir.path() / "a.csv");
  EXPECT_EQ(a, read_file(dir.path() / "b.csv"));
  std::istringstream in(a);
  std::string line;
  std::size_t rows = 0, unlabeled = 0;
  std::getline(in, line);
  std::size_t commas = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  EXPECT_EQ(commas, 1 + st.params.hidden());
  while (std::getline(in, line)) {
    ++rows;
    unlabeled += line.rfind("target,?,", 0) == 0;
  }
  EXPECT_EQ(rows, t.data.source.size() + t.data.target.size() + pseudo.size());
  EXPECT_EQ(unlabeled, t.data.target.size());
}

}  // namespace
}  // namespace saim
