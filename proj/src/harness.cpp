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

#include "saim/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

#include <json.hpp>

#include "saim/errors.hpp"
#include "saim/io.hpp"

namespace saim {

using json = nlohmann::json;

// ---------------------------------------------------------------- Synthetic

std::string SyntheticConfig::to_json() const {
  json j{{"input_dim", input_dim},       {"separation", separation},
         {"sigma", sigma},               {"shift", shift},
         {"rotation_deg", rotation_deg}, {"n_source", n_source},
         {"n_source_test", n_source_test}, {"n_target", n_target},
         {"n_test", n_test}};
  return j.dump();
}

SyntheticConfig default_synthetic_config() {
  SyntheticConfig cfg;
  cfg.shift = {2.0, 4.0};
  return cfg;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Balanced labels in shuffled order, features drawn per label.
LabeledDataset draw_domain(const SyntheticConfig& cfg, std::size_t n, bool shifted, Rng& rng,
                           const std::string& domain) {
  const std::size_t d = cfg.input_dim;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % 2);
  rng.shuffle(std::span<int>(labels));

  const double angle = cfg.rotation_deg * std::numbers::pi / 180.0;
  const double c = std::cos(angle), s = std::sin(angle);
  LabeledDataset out;
  out.dim = d;
  out.domain = domain;
  out.labels = labels;
  Vector x(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : x) v = cfg.sigma * rng.normal();
    x[0] += (labels[i] == 1 ? 0.5 : -0.5) * cfg.separation * cfg.sigma;
    if (shifted) {
      if (d >= 2) {
        const double x0 = x[0], x1 = x[1];
        x[0] = c * x0 - s * x1;
        x[1] = s * x0 + c * x1;
      }
      for (std::size_t k = 0; k < cfg.shift.size() && k < d; ++k) x[k] += cfg.shift[k] * cfg.sigma;
    }
    out.features.push_back(SparseVector::from_dense(x));
  }
  return out;
}

}  // namespace

SyntheticTask make_synthetic_task(const SyntheticConfig& cfg, Rng& rng) {
  if (!(cfg.separation > 0.0)) throw ContractError("synthetic task: separation must be > 0");
  if (!(cfg.sigma > 0.0)) throw ContractError("synthetic task: sigma must be > 0");
  if (cfg.input_dim == 0) throw ContractError("synthetic task: input_dim must be > 0");
  Rng src_rng = rng.derive("synthetic/source");
  Rng src_test_rng = rng.derive("synthetic/source-test");
  Rng tgt_rng = rng.derive("synthetic/target");
  Rng test_rng = rng.derive("synthetic/target-test");

  SyntheticTask task;
  task.data.name = "synthetic";
  task.data.source = draw_domain(cfg, cfg.n_source, false, src_rng, "synthetic-source");
  task.data.source_test = draw_domain(cfg, cfg.n_source_test, false, src_test_rng, "synthetic-source");
  task.target_train_labeled = draw_domain(cfg, cfg.n_target, true, tgt_rng, "synthetic-target");
  task.data.target = task.target_train_labeled.strip_labels();
  task.data.target_test = draw_domain(cfg, cfg.n_test, true, test_rng, "synthetic-target");
  // rigid motions keep the class overlap, so both domains share this optimum
  task.bayes_accuracy = normal_cdf(cfg.separation / 2.0);
  return task;
}

// ---------------------------------------------------------------- Imbalance

LabeledDataset apply_imbalance(const LabeledDataset& target, double majority_fraction,
                               Rng& rng, int majority_class) {
  if (!(majority_fraction >= 0.5 && majority_fraction < 1.0))
    throw ContractError("apply_imbalance: majority fraction must be in [0.5, 1)");
  std::vector<std::size_t> major, minor;
  for (std::size_t i = 0; i < target.size(); ++i)
    (target.labels[i] == majority_class ? major : minor).push_back(i);

  const double ratio = (1.0 - majority_fraction) / majority_fraction;
  std::size_t n_major = major.size();
  auto n_minor = static_cast<std::size_t>(std::floor(static_cast<double>(n_major) * ratio + 1e-9));
  if (n_minor > minor.size()) {
    n_minor = minor.size();
    n_major = std::min(major.size(), static_cast<std::size_t>(std::floor(
                                         static_cast<double>(n_minor) / ratio + 1e-9)));
  }
  if (n_minor == 0 || n_major == 0)
    throw ContractError("apply_imbalance: not enough minority samples for the requested ratio");

  auto pick = [&rng](std::vector<std::size_t> pool, std::size_t m) {
    for (std::size_t i = 0; i < m; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    pool.resize(m);
    return pool;
  };
  std::vector<std::size_t> keep = pick(major, n_major);
  std::vector<std::size_t> keep_minor = pick(minor, n_minor);
  keep.insert(keep.end(), keep_minor.begin(), keep_minor.end());
  std::sort(keep.begin(), keep.end());
  return target.subset(keep);
}

// -------------------------------------------------------------- Raw corpora

PreparedTask prepare_task_from_raw(const std::vector<Document>& source_docs,
                                   const std::vector<Document>& target_docs,
                                   const RawSplitConfig& cfg, std::string name) {
  if (source_docs.size() < cfg.n_source)
    throw ContractError("raw task: source corpus has fewer than n_source documents");
  if (target_docs.size() <= cfg.n_target)
    throw ContractError("raw task: target corpus leaves no test documents");
  Rng root(cfg.seed);
  auto shuffled = [](const std::vector<Document>& docs, Rng rng) {
    std::vector<std::size_t> idx(docs.size());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    return idx;
  };
  const auto si = shuffled(source_docs, root.derive("split/source"));
  const auto ti = shuffled(target_docs, root.derive("split/target"));

  std::vector<Document> fit;
  for (std::size_t i = 0; i < cfg.n_source; ++i) fit.push_back(source_docs[si[i]]);
  if (!cfg.source_only_vocab)
    for (std::size_t i = 0; i < cfg.n_target; ++i) fit.push_back(target_docs[ti[i]]);

  PreparedTask out;
  out.vocab = fit_vocabulary(fit, cfg.dim);
  auto build = [&](const std::vector<Document>& docs, std::span<const std::size_t> rows,
                   const std::string& domain) {
    LabeledDataset d;
    d.dim = out.vocab.size();
    d.domain = domain;
    for (std::size_t r : rows) {
      d.features.push_back(vectorize(docs[r], out.vocab));
      d.labels.push_back(docs[r].resolved_label());
    }
    return d;
  };
  out.data.name = std::move(name);
  out.data.source = build(source_docs, std::span(si).first(cfg.n_source), "source");
  out.target_train_labeled = build(target_docs, std::span(ti).first(cfg.n_target), "target");
  out.data.target = out.target_train_labeled.strip_labels();
  out.data.target_test = build(target_docs, std::span(ti).subspan(cfg.n_target), "target");
  return out;
}

// -------------------------------------------------------------------- Tasks

std::string TaskSpec::name() const {
  std::string n = synthetic() ? std::string("synthetic") : source + "->" + target;
  if (!synthetic()) n += "@" + std::to_string(dim);
  if (imbalance != 0.5) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "/%g", imbalance);
    n += buf;
  }
  return n;
}

std::string TaskSpec::to_json() const {
  return json{{"source", source}, {"target", target}, {"dim", dim}, {"imbalance", imbalance}}
      .dump();
}

TaskSpec TaskSpec::parse(const std::string& text, std::size_t dim, double imbalance) {
  if (text == "synthetic") return TaskSpec{"synthetic", "synthetic", dim, imbalance};
  auto colon = text.find(':');
  if (colon == std::string::npos) throw ContractError("task '" + text + "': expected S:T or synthetic");
  TaskSpec t{text.substr(0, colon), text.substr(colon + 1), dim, imbalance};
  const std::string domains = "BDEK";
  if (t.source.size() != 1 || t.target.size() != 1 ||
      domains.find(t.source) == std::string::npos || domains.find(t.target) == std::string::npos)
    throw ContractError("task '" + text + "': domains must be one of B, D, E, K");
  if (t.source == t.target) throw ContractError("task '" + text + "': source equals target");
  return t;
}

std::vector<TaskSpec> amazon_tasks(std::size_t dim, double imbalance) {
  const std::string d = "BDEK";
  std::vector<TaskSpec> out;
  for (char s : d)
    for (char t : d)
      if (s != t) out.push_back(TaskSpec{std::string(1, s), std::string(1, t), dim, imbalance});
  return out;
}

std::optional<TaskData> load_task(const TaskSpec& spec, const SuiteOptions& opts,
                                  std::string* reason, double* bayes_accuracy) {
  Rng data_rng(opts.data_seed);
  LabeledDataset target_labeled;
  TaskData data;
  if (spec.synthetic()) {
    SyntheticTask t = make_synthetic_task(opts.synthetic, data_rng);
    if (bayes_accuracy) *bayes_accuracy = t.bayes_accuracy;
    data = std::move(t.data);
    target_labeled = std::move(t.target_train_labeled);
  } else {
    std::filesystem::path root = opts.data_root;
    if (root.empty()) {
      const char* env = std::getenv("SAIM_DATA_ROOT");
      if (env) root = env;
    }
    if (root.empty()) {
      if (reason) *reason = "no data root (set SAIM_DATA_ROOT)";
      return std::nullopt;
    }
    const auto dir = root / (spec.source + spec.target + "_" + std::to_string(spec.dim));
    const auto raw_s = root / (spec.source + ".tsv");
    const auto raw_t = root / (spec.target + ".tsv");
    if (std::filesystem::exists(dir / "source_train.svm") &&
        std::filesystem::exists(dir / "target_train.svm") &&
        std::filesystem::exists(dir / "target_test.svm")) {
      data.name = spec.name();
      data.source = load_sparse_file(dir / "source_train.svm").labeled(spec.source);
      target_labeled = load_sparse_file(dir / "target_train.svm").labeled(spec.target);
      data.target = target_labeled.strip_labels();
      data.target_test = load_sparse_file(dir / "target_test.svm").labeled(spec.target);
    } else if (std::filesystem::exists(raw_s) && std::filesystem::exists(raw_t)) {
      RawSplitConfig rc;
      rc.dim = spec.dim;
      rc.seed = opts.data_seed;
      rc.n_source = opts.raw_n_source;
      rc.n_target = opts.raw_n_target;
      PreparedTask p = prepare_task_from_raw(load_tsv(raw_s), load_tsv(raw_t), rc, spec.name());
      data = std::move(p.data);
      target_labeled = std::move(p.target_train_labeled);
    } else {
      if (reason) *reason = "missing data for " + spec.name() + " under " + root.string();
      return std::nullopt;
    }
  }
  if (spec.imbalance != 0.5) {
    Rng imb = data_rng.derive("imbalance");
    data.target = apply_imbalance(target_labeled, spec.imbalance, imb).strip_labels();
  }
  data.name = spec.name();
  return data;
}

// -------------------------------------------------------------------- Suite

const ResultRow* ResultTable::find(const std::string& task, AdaptMode mode) const {
  for (const ResultRow& r : rows)
    if (r.task == task && r.mode == mode) return &r;
  return nullptr;
}

std::string ResultTable::to_csv() const {
  std::string out = "task,mode,n_seeds,mean_accuracy,std,partial_cells,status,per_seed\n";
  char buf[64];
  for (const ResultRow& r : rows) {
    out += r.task + "," + std::string(mode_name(r.mode)) + "," +
           std::to_string(r.accuracies.size()) + ",";
    if (!r.skipped.empty()) {
      out += ",,0,skipped: " + r.skipped + ",\n";
      continue;
    }
    std::snprintf(buf, sizeof buf, "%.17g", r.mean);
    out += std::string(buf) + ",";
    if (r.std) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.std);
      out += buf;
    } else {
      out += "n/a";
    }
    out += "," + std::to_string(r.partial_cells) + ",ok,";
    for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? ";" : "", r.accuracies[i]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

namespace {

struct CellOutcome {
  double accuracy = 0.0;
  bool partial = false;
};

std::filesystem::path cell_path(const SuiteOptions& opts, const TaskSpec& spec, AdaptMode mode,
                                std::uint64_t seed) {
  AdaptConfig c = opts.adapt;
  c.mode = mode;
  c.seed = seed;
  const TrainConfig& t = opts.train;
  json key{{"task", spec.to_json()},
           {"adapt", c.to_json()},
           {"train", json{{"hidden", t.hidden}, {"epochs", t.epochs}, {"batch", t.batch},
                          {"lr", t.lr}, {"patience", t.patience}, {"min_delta", t.min_delta}}},
           {"synthetic", spec.synthetic() ? opts.synthetic.to_json() : ""},
           {"raw", spec.synthetic() ? json() : json{opts.raw_n_source, opts.raw_n_target}},
           {"data_seed", opts.data_seed}};
  char name[32];
  std::snprintf(name, sizeof name, "%016llx.json",
                static_cast<unsigned long long>(fnv1a64(key.dump())));
  return opts.cache_dir / name;
}

std::optional<CellOutcome> read_cell(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) return std::nullopt;
  try {
    json j = json::parse(read_text_file(p));
    return CellOutcome{j.at("accuracy").get<double>(), j.at("partial").get<bool>()};
  } catch (const std::exception&) {
    return std::nullopt;  // unreadable entries are recomputed
  }
}

}  // namespace

ResultTable run_suite(const std::vector<TaskSpec>& tasks, const std::vector<AdaptMode>& modes,
                      const std::vector<std::uint64_t>& seeds, const SuiteOptions& opts) {
  opts.adapt.validate();
  const bool cached = !opts.cache_dir.empty();
  if (cached) std::filesystem::create_directories(opts.cache_dir);

  std::vector<std::optional<TaskData>> data(tasks.size());
  std::vector<std::string> reasons(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) data[t] = load_task(tasks[t], opts, &reasons[t]);

  // outcome[t][s][m]
  std::vector<std::vector<std::vector<CellOutcome>>> outcome(
      tasks.size(), std::vector<std::vector<CellOutcome>>(
                        seeds.size(), std::vector<CellOutcome>(modes.size())));
  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t t = 0; t < tasks.size(); ++t)
    if (data[t])
      for (std::size_t s = 0; s < seeds.size(); ++s) jobs.emplace_back(t, s);

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr first_error;
  auto worker = [&]() {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const auto [t, s] = jobs[j];
      try {
        std::vector<std::optional<CellOutcome>> have(modes.size());
        bool all = cached;
        for (std::size_t m = 0; m < modes.size() && cached; ++m) {
          have[m] = read_cell(cell_path(opts, tasks[t], modes[m], seeds[s]));
          all = all && have[m].has_value();
        }
        if (all) {
          for (std::size_t m = 0; m < modes.size(); ++m) outcome[t][s][m] = *have[m];
          continue;
        }
        const SourceStage stage = prepare_source_stage(*data[t], opts.train, seeds[s]);
        for (std::size_t m = 0; m < modes.size(); ++m) {
          if (have[m]) {
            outcome[t][s][m] = *have[m];
            continue;
          }
          AdaptConfig c = opts.adapt;
          c.mode = modes[m];
          c.seed = seeds[s];
          const ExperimentResult r = run_mode(*data[t], stage, c);
          outcome[t][s][m] = CellOutcome{r.target_accuracy, r.pseudo_partial};
          if (cached)
            write_text_file(cell_path(opts, tasks[t], modes[m], seeds[s]),
                            json{{"accuracy", r.target_accuracy}, {"partial", r.pseudo_partial}}
                                    .dump() + "\n");
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mu);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::max<std::size_t>(1, std::min(opts.workers, jobs.size()));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  ResultTable table;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t m = 0; m < modes.size(); ++m) {
      ResultRow row;
      row.task = tasks[t].name();
      row.mode = modes[m];
      if (!data[t]) {
        row.skipped = reasons[t];
        table.rows.push_back(std::move(row));
        continue;
      }
      row.seeds = seeds;
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        row.accuracies.push_back(outcome[t][s][m].accuracy);
        row.partial_cells += outcome[t][s][m].partial;
      }
      row.mean = mean_of(row.accuracies);
      row.std = sample_std(row.accuracies);
      table.rows.push_back(std::move(row));
    }
  }
  return table;
}

// --------------------------------------------------------------- Embeddings

EmbeddingBlock embed_block(const ModelParams& params, std::string tag,
                           const LabeledDataset& data) {
  return EmbeddingBlock{std::move(tag), encode(params, data.features), data.labels};
}

EmbeddingBlock embed_block(const ModelParams& params, std::string tag,
                           const UnlabeledDataset& data) {
  return EmbeddingBlock{std::move(tag), encode(params, data.features),
                        std::vector<int>(data.size(), -1)};
}

EmbeddingBlock embed_block(std::string tag, const PseudoDataset& pseudo) {
  return EmbeddingBlock{std::move(tag), pseudo.z, pseudo.labels};
}

std::string embeddings_to_csv(std::size_t width, const std::vector<EmbeddingBlock>& blocks) {
  std::string out = "tag,label";
  for (std::size_t c = 0; c < width; ++c) out += ",z" + std::to_string(c);
  out += "\n";
  char buf[40];
  for (const EmbeddingBlock& b : blocks) {
    if (b.z.cols() != width && b.z.rows() > 0)
      throw ShapeError("export_embeddings: block '" + b.tag + "' has the wrong width");
    if (b.labels.size() != b.z.rows())
      throw ShapeError("export_embeddings: block '" + b.tag + "' label count mismatch");
    for (std::size_t r = 0; r < b.z.rows(); ++r) {
      out += b.tag;
      out += b.labels[r] < 0 ? std::string(",?") : "," + std::to_string(b.labels[r]);
      for (double v : b.z.row(r)) {
        std::snprintf(buf, sizeof buf, ",%.17g", v);
        out += buf;
      }
      out += "\n";
    }
  }
  return out;
}

void export_embeddings(const std::filesystem::path& path, const ModelParams& params,
                       const std::vector<EmbeddingBlock>& blocks) {
  write_text_file(path, embeddings_to_csv(params.hidden(), blocks));
}

}  // namespace saim
