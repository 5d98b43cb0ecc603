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

// Command-line front end. Every subcommand reads and writes plain files so
// the stages can be chained from a shell script.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "saim/adapt.hpp"
#include "saim/errors.hpp"
#include "saim/featurize.hpp"
#include "saim/gmm.hpp"
#include "saim/harness.hpp"
#include "saim/io.hpp"
#include "saim/model.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace saim;

namespace {

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  for (std::string part; std::getline(in, part, sep);)
    if (!part.empty()) out.push_back(part);
  return out;
}

std::vector<double> parse_doubles(const std::string& text) {
  std::vector<double> out;
  for (const std::string& s : split(text, ',')) out.push_back(std::stod(s));
  return out;
}

/// "10" means seeds 0..9; "1,5,7" is an explicit list.
std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> out;
  if (text.find(',') == std::string::npos) {
    const std::uint64_t n = std::stoull(text);
    for (std::uint64_t s = 0; s < n; ++s) out.push_back(s);
  } else {
    for (const std::string& s : split(text, ',')) out.push_back(std::stoull(s));
  }
  return out;
}

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-")
    std::cout << text;
  else
    write_text_file(out_path, text);
}

std::uint64_t train_hash(const TrainConfig& t) {
  json j{{"hidden", t.hidden}, {"epochs", t.epochs}, {"batch", t.batch}, {"lr", t.lr},
         {"patience", t.patience}, {"min_delta", t.min_delta}};
  return fnv1a64(j.dump());
}

void add_train_flags(CLI::App* app, TrainConfig& t) {
  app->add_option("--hidden", t.hidden, "Embedding width")->capture_default_str();
  app->add_option("--train-epochs", t.epochs, "Source training epochs")->capture_default_str();
  app->add_option("--train-batch", t.batch, "Source training batch")->capture_default_str();
  app->add_option("--train-lr", t.lr, "Source training learning rate")->capture_default_str();
  app->add_option("--patience", t.patience, "Early-stopping patience in epochs")
      ->capture_default_str();
}

void add_adapt_flags(CLI::App* app, AdaptConfig& a) {
  app->add_option("--lambda", a.lambda, "Alignment weight")->capture_default_str();
  app->add_option("--tau", a.tau, "Pseudo-data confidence threshold")->capture_default_str();
  app->add_option("--epochs", a.epochs, "Adaptation epochs")->capture_default_str();
  app->add_option("--batch", a.batch, "Adaptation batch size")->capture_default_str();
  app->add_option("--lr", a.lr, "Adaptation learning rate")->capture_default_str();
  app->add_option("--slices", a.slices, "Projection directions per distance")
      ->capture_default_str();
  app->add_option("--np", a.n_pseudo, "Pseudo-dataset size (0: source size)")
      ->capture_default_str();
  app->add_option("--max-draw-factor", a.max_draw_factor, "Draw cap per requested sample")
      ->capture_default_str();
}

void add_synthetic_flags(CLI::App* app, SyntheticConfig& s) {
  app->add_option("--separation", s.separation, "Synthetic class separation (sigma units)")
      ->capture_default_str();
  app->add_option("--shift", s.shift, "Synthetic target shift (sigma units)");
  app->add_option("--rotation", s.rotation_deg, "Synthetic target rotation (degrees)")
      ->capture_default_str();
}

LabeledDataset load_labeled(const std::string& path) {
  return load_sparse_file(path).labeled(fs::path(path).stem().string());
}

UnlabeledDataset load_unlabeled(const std::string& path) {
  return load_sparse_file(path).unlabeled(fs::path(path).stem().string());
}

std::string eval_json(const EvalMetrics& m) {
  json j{{"accuracy", m.accuracy}, {"n", m.n}, {"correct", m.correct},
         {"mean_confidence", m.mean_confidence}};
  return j.dump() + "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"saim: margin-inducing sentiment domain adaptation"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();

  // featurize
  std::string f_source, f_target, f_out, f_scope = "union";
  RawSplitConfig f_cfg;
  auto* featurize = app.add_subcommand("featurize", "Raw review TSV files to sparse splits");
  featurize->add_option("--source", f_source, "Source TSV (text<TAB>stars)")->required();
  featurize->add_option("--target", f_target, "Target TSV (text<TAB>stars)")->required();
  featurize->add_option("--out", f_out, "Output directory")->required();
  featurize->add_option("--dim", f_cfg.dim, "Vocabulary size")->capture_default_str();
  featurize->add_option("--vocab-scope", f_scope, "source or union")
      ->check(CLI::IsMember({"source", "union"}))
      ->capture_default_str();
  featurize->add_option("--n-source", f_cfg.n_source, "Labeled source rows")
      ->capture_default_str();
  featurize->add_option("--n-target", f_cfg.n_target, "Unlabeled target rows")
      ->capture_default_str();

  // train-source
  std::string t_data, t_out, t_log;
  TrainConfig t_cfg;
  auto* train = app.add_subcommand("train-source", "Train the initial model on source data");
  train->add_option("--data", t_data, "Labeled sparse file")->required();
  train->add_option("--out", t_out, "Checkpoint path")->required();
  train->add_option("--log", t_log, "Per-epoch loss log (JSON lines)");
  add_train_flags(train, t_cfg);

  // estimate-gmm
  std::string g_ckpt, g_data, g_out;
  auto* gmm = app.add_subcommand("estimate-gmm", "Fit the per-class embedding mixture");
  gmm->add_option("--checkpoint", g_ckpt)->required();
  gmm->add_option("--data", g_data, "Labeled source sparse file")->required();
  gmm->add_option("--out", g_out, "Mixture JSON path")->required();

  // gen-pseudo
  std::string p_ckpt, p_gmm, p_out;
  double p_tau = 0.99;
  std::size_t p_np = 2000, p_factor = 100;
  auto* pseudo = app.add_subcommand("gen-pseudo", "Draw a confident pseudo-dataset");
  pseudo->add_option("--checkpoint", p_ckpt)->required();
  pseudo->add_option("--gmm", p_gmm)->required();
  pseudo->add_option("--out", p_out)->required();
  pseudo->add_option("--tau", p_tau)->capture_default_str();
  pseudo->add_option("--np", p_np)->capture_default_str();
  pseudo->add_option("--max-draw-factor", p_factor)->capture_default_str();

  // adapt
  std::string a_ckpt, a_source, a_target, a_pseudo, a_out, a_log, a_mode = "saim2";
  AdaptConfig a_cfg;
  auto* adapt = app.add_subcommand("adapt", "Adapt a source model to the target domain");
  adapt->add_option("--checkpoint", a_ckpt)->required();
  adapt->add_option("--source", a_source, "Labeled source sparse file")->required();
  adapt->add_option("--target", a_target, "Target sparse file (labels ignored)")->required();
  adapt->add_option("--pseudo", a_pseudo, "Pseudo-dataset JSON (saim2)");
  adapt->add_option("--mode", a_mode)->check(CLI::IsMember({"saim2", "ao"}))->capture_default_str();
  adapt->add_option("--out", a_out, "Adapted checkpoint path")->required();
  adapt->add_option("--log", a_log, "Run report (JSON lines)");
  add_adapt_flags(adapt, a_cfg);

  // evaluate
  std::string e_ckpt, e_data, e_out;
  auto* eval = app.add_subcommand("evaluate", "Accuracy on a labeled sparse file");
  eval->add_option("--checkpoint", e_ckpt)->required();
  eval->add_option("--data", e_data)->required();
  eval->add_option("--out", e_out, "JSON output (default stdout)");

  // bound-report
  std::string b_ckpt, b_source, b_target, b_pseudo, b_out;
  AdaptConfig b_cfg;
  auto* bound = app.add_subcommand("bound-report", "Computable target-error bound terms");
  bound->add_option("--checkpoint", b_ckpt)->required();
  bound->add_option("--source", b_source)->required();
  bound->add_option("--target", b_target)->required();
  bound->add_option("--pseudo", b_pseudo)->required();
  bound->add_option("--tau", b_cfg.tau)->capture_default_str();
  bound->add_option("--slices", b_cfg.slices)->capture_default_str();
  bound->add_option("--out", b_out, "JSON output (default stdout)");

  // suite
  std::string s_tasks = "synthetic", s_modes = "so,ao,saim2", s_seeds = "10", s_out, s_cache,
              s_root;
  double s_imbalance = 0.5;
  std::size_t s_dim = 5000;
  SuiteOptions s_opts;
  auto* suite = app.add_subcommand("suite", "Run (task, mode, seed) cells and aggregate");
  suite->add_option("--tasks", s_tasks, "Comma list: synthetic, S:T, or amazon")
      ->capture_default_str();
  suite->add_option("--modes", s_modes)->capture_default_str();
  suite->add_option("--seeds", s_seeds, "Count or comma list")->capture_default_str();
  suite->add_option("--imbalance", s_imbalance, "Target majority fraction")
      ->capture_default_str();
  suite->add_option("--dim", s_dim, "Feature dimension of review tasks")->capture_default_str();
  suite->add_option("--workers", s_opts.workers)->capture_default_str();
  suite->add_option("--cache", s_cache, "Directory of finished cells");
  suite->add_option("--data-root", s_root, "Overrides SAIM_DATA_ROOT");
  suite->add_option("--out", s_out, "CSV output (default stdout)");
  add_adapt_flags(suite, s_opts.adapt);
  add_train_flags(suite, s_opts.train);
  add_synthetic_flags(suite, s_opts.synthetic);

  // tau-sweep
  std::string w_task = "synthetic", w_grid = "0,0.5,0.9,0.99", w_seeds = "10", w_out, w_root;
  std::size_t w_dim = 5000;
  SuiteOptions w_opts;
  auto* sweep = app.add_subcommand("tau-sweep", "SAIM2 accuracy across confidence thresholds");
  sweep->add_option("--task", w_task)->capture_default_str();
  sweep->add_option("--grid", w_grid)->capture_default_str();
  sweep->add_option("--seeds", w_seeds, "Count or comma list")->capture_default_str();
  sweep->add_option("--dim", w_dim)->capture_default_str();
  sweep->add_option("--data-root", w_root, "Overrides SAIM_DATA_ROOT");
  sweep->add_option("--out", w_out, "CSV output (default stdout)");
  add_adapt_flags(sweep, w_opts.adapt);
  add_train_flags(sweep, w_opts.train);
  add_synthetic_flags(sweep, w_opts.synthetic);

  // export-embeddings
  std::string x_ckpt, x_source, x_target, x_pseudo, x_out;
  auto* exporter = app.add_subcommand("export-embeddings", "Embedding coordinates as CSV");
  exporter->add_option("--checkpoint", x_ckpt)->required();
  exporter->add_option("--source", x_source, "Labeled sparse file");
  exporter->add_option("--target", x_target, "Sparse file exported without labels");
  exporter->add_option("--pseudo", x_pseudo, "Pseudo-dataset JSON");
  exporter->add_option("--out", x_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*featurize) {
      f_cfg.seed = seed;
      f_cfg.source_only_vocab = f_scope == "source";
      const std::string name =
          fs::path(f_source).stem().string() + fs::path(f_target).stem().string();
      PreparedTask t = prepare_task_from_raw(load_tsv(f_source), load_tsv(f_target), f_cfg, name);
      fs::create_directories(f_out);
      const fs::path dir(f_out);
      save_sparse_file(dir / "source_train.svm", t.data.source);
      save_sparse_file(dir / "target_train.svm", t.target_train_labeled);
      save_sparse_file(dir / "target_test.svm", t.data.target_test);
      json vocab{{"terms", t.vocab.terms()}, {"idf", t.vocab.idf()},
                 {"requested_dim", t.vocab.requested_dim()}};
      write_text_file(dir / "vocab.json", vocab.dump() + "\n");
      std::cout << json{{"source", t.data.source.size()}, {"target", t.data.target.size()},
                        {"test", t.data.target_test.size()}, {"dim", t.data.source.dim}}
                       .dump()
                << "\n";
    } else if (*train) {
      t_cfg.seed = seed;
      TrainLog log;
      ModelParams p = train_source(load_labeled(t_data), t_cfg, &log);
      save_checkpoint(t_out, p, {seed, train_hash(t_cfg)});
      if (!t_log.empty()) {
        std::string lines;
        for (std::size_t e = 0; e < log.epoch_loss.size(); ++e)
          lines += json{{"type", "epoch"}, {"epoch", e + 1}, {"loss", log.epoch_loss[e]}}.dump() +
                   "\n";
        lines += json{{"type", "summary"}, {"initial_loss", log.initial_loss},
                      {"stopped_early", log.stopped_early}}
                     .dump() +
                 "\n";
        write_text_file(t_log, lines);
      }
    } else if (*gmm) {
      const LabeledDataset src = load_labeled(g_data);
      ModelParams p = load_checkpoint(g_ckpt, src.dim);
      save_gmm(g_out, estimate_gmm(p, src, build_support_sets(p, src)));
    } else if (*pseudo) {
      ModelParams p = load_checkpoint(p_ckpt);
      Rng rng = Rng(seed).derive("pseudo");
      PseudoDataset d = generate_pseudo_dataset(load_gmm(p_gmm), p, p_np, p_tau, rng, p_factor);
      save_pseudo(p_out, d);
      if (d.shortfall)
        std::cerr << "warning: accepted " << d.accepted << " of " << d.requested
                  << " pseudo-samples before the draw cap\n";
    } else if (*adapt) {
      a_cfg.seed = seed;
      a_cfg.mode = parse_mode(a_mode);
      a_cfg.validate();
      const LabeledDataset src = load_labeled(a_source);
      const UnlabeledDataset tgt = load_unlabeled(a_target);
      ModelParams init = load_checkpoint(a_ckpt, src.dim);
      RunReport report;
      ModelParams out;
      if (a_cfg.mode == AdaptMode::kSaim2) {
        if (a_pseudo.empty()) throw ContractError("adapt: --mode saim2 needs --pseudo");
        const PseudoDataset pd = load_pseudo(a_pseudo);
        report.bound_before = compute_bound_terms(init, src, tgt, pd, a_cfg.tau, a_cfg);
        out = adapt_saim2(init, src, tgt, pd, a_cfg, &report);
        report.bound_after = compute_bound_terms(out, src, tgt, pd, a_cfg.tau, a_cfg);
      } else {
        out = adapt_alignment_only(init, src, tgt, a_cfg, &report);
      }
      save_checkpoint(a_out, out, {seed, a_cfg.hash()});
      if (!a_log.empty()) write_text_file(a_log, report.to_jsonl());
    } else if (*eval) {
      const LabeledDataset d = load_labeled(e_data);
      emit(e_out, eval_json(evaluate(load_checkpoint(e_ckpt, d.dim), d)));
    } else if (*bound) {
      b_cfg.seed = seed;
      const LabeledDataset src = load_labeled(b_source);
      ModelParams p = load_checkpoint(b_ckpt, src.dim);
      BoundReport r = compute_bound_terms(p, src, load_unlabeled(b_target), load_pseudo(b_pseudo),
                                          b_cfg.tau, b_cfg);
      emit(b_out, r.to_json() + "\n");
    } else if (*suite) {
      std::vector<TaskSpec> tasks;
      for (const std::string& t : split(s_tasks, ',')) {
        if (t == "amazon") {
          for (const TaskSpec& a : amazon_tasks(s_dim, s_imbalance)) tasks.push_back(a);
        } else {
          tasks.push_back(TaskSpec::parse(t, s_dim, s_imbalance));
        }
      }
      std::vector<AdaptMode> modes;
      for (const std::string& m : split(s_modes, ',')) modes.push_back(parse_mode(m));
      s_opts.data_seed = seed;
      s_opts.data_root = s_root;
      s_opts.cache_dir = s_cache;
      ResultTable table = run_suite(tasks, modes, parse_seeds(s_seeds), s_opts);
      for (const ResultRow& r : table.rows)
        if (!r.skipped.empty()) std::cerr << "skipped " << r.task << ": " << r.skipped << "\n";
      emit(s_out, table.to_csv());
    } else if (*sweep) {
      w_opts.data_seed = seed;
      w_opts.data_root = w_root;
      std::string reason;
      auto data = load_task(TaskSpec::parse(w_task, w_dim, 0.5), w_opts, &reason);
      if (!data) throw IoError(reason);
      const std::vector<double> grid = parse_doubles(w_grid);
      const std::vector<std::uint64_t> seeds = parse_seeds(w_seeds);
      emit(w_out, sweep_to_csv(tau_sweep(*data, grid, seeds, w_opts.adapt, w_opts.train)));
    } else if (*exporter) {
      ModelParams p = load_checkpoint(x_ckpt);
      std::vector<EmbeddingBlock> blocks;
      if (!x_source.empty()) blocks.push_back(embed_block(p, "source", load_labeled(x_source)));
      if (!x_target.empty()) blocks.push_back(embed_block(p, "target", load_unlabeled(x_target)));
      if (!x_pseudo.empty()) blocks.push_back(embed_block("pseudo", load_pseudo(x_pseudo)));
      export_embeddings(x_out, p, blocks);
    }
  } catch (const std::exception& e) {
    std::cerr << "saim: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
