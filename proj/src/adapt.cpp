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

#include "saim/adapt.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "saim/errors.hpp"

namespace saim {

using json = nlohmann::json;

std::string_view mode_name(AdaptMode mode) {
  switch (mode) {
    case AdaptMode::kSaim2: return "saim2";
    case AdaptMode::kAlignmentOnly: return "ao";
    case AdaptMode::kSourceOnly: return "so";
  }
  return "?";
}

AdaptMode parse_mode(std::string_view name) {
  if (name == "saim2" || name == "SAIM2") return AdaptMode::kSaim2;
  if (name == "ao" || name == "AO") return AdaptMode::kAlignmentOnly;
  if (name == "so" || name == "SO") return AdaptMode::kSourceOnly;
  throw ContractError("unknown mode '" + std::string(name) + "' (expected saim2, ao or so)");
}

std::vector<std::string> loss_term_names(AdaptMode mode) {
  switch (mode) {
    case AdaptMode::kSaim2:
      return {"source_xent", "pseudo_xent", "swd_target_pseudo", "swd_source_pseudo"};
    case AdaptMode::kAlignmentOnly: return {"source_xent", "swd_source_target"};
    case AdaptMode::kSourceOnly: return {"source_xent"};
  }
  return {};
}

// ------------------------------------------------------------------ Config

void AdaptConfig::validate() const {
  if (!(lambda >= 0.0)) throw ContractError("adapt: lambda must be >= 0");
  if (!(tau >= 0.0 && tau < 1.0)) throw ContractError("adapt: tau must be in [0, 1)");
  if (batch == 0) throw ContractError("adapt: batch must be > 0");
  if (epochs == 0) throw ContractError("adapt: epochs must be > 0");
  if (slices == 0) throw ContractError("adapt: slices must be > 0");
  if (!(lr > 0.0)) throw ContractError("adapt: lr must be > 0");
  if (bound_repeats == 0) throw ContractError("adapt: bound_repeats must be > 0");
}

std::string AdaptConfig::to_json() const {
  json j;
  j["mode"] = mode_name(mode);
  j["lambda"] = lambda;
  j["tau"] = tau;
  j["lr"] = lr;
  j["epochs"] = epochs;
  j["batch"] = batch;
  j["slices"] = slices;
  j["n_pseudo"] = n_pseudo;
  j["max_draw_factor"] = max_draw_factor;
  j["bound_repeats"] = bound_repeats;
  j["seed"] = seed;
  return j.dump();
}

std::uint64_t AdaptConfig::hash() const { return fnv1a64(to_json()); }

// ----------------------------------------------------------------- Reports

namespace {

json bound_json(const BoundReport& b) {
  return json{{"source_error", b.source_error},
              {"swd_source_pseudo", b.swd_source_pseudo},
              {"swd_target_pseudo", b.swd_target_pseudo},
              {"one_minus_tau", b.one_minus_tau},
              {"joint_error_proxy", b.joint_error_proxy},
              {"computable_sum", b.computable_sum()},
              {"n_source", b.n_source},
              {"n_target", b.n_target},
              {"n_pseudo", b.n_pseudo}};
}

}  // namespace

std::string BoundReport::to_json() const { return bound_json(*this).dump(); }

std::string RunReport::to_jsonl(bool include_timing) const {
  const std::vector<std::string> names = loss_term_names(mode);
  std::string out;
  for (const EpochLosses& e : epochs) {
    json j;
    j["type"] = "epoch";
    j["mode"] = mode_name(mode);
    j["epoch"] = e.epoch;
    for (std::size_t t = 0; t < e.terms.size() && t < names.size(); ++t) j[names[t]] = e.terms[t];
    out += j.dump() + "\n";
  }
  json s;
  s["type"] = "summary";
  s["mode"] = mode_name(mode);
  s["seed"] = seed;
  s["config_hash"] = config_hash;
  s["epochs"] = epochs.size();
  if (target_accuracy_before) s["target_accuracy_before"] = *target_accuracy_before;
  if (target_accuracy_after) s["target_accuracy_after"] = *target_accuracy_after;
  if (bound_before) s["bound_before"] = bound_json(*bound_before);
  if (bound_after) s["bound_after"] = bound_json(*bound_after);
  if (include_timing) s["wall_seconds"] = wall_seconds;
  out += s.dump() + "\n";
  return out;
}

// --------------------------------------------------------------- Objective

namespace {

void scale_into(Matrix& dst, const Matrix& src, double s) {
  dst = Matrix(src.rows(), src.cols());
  auto d = dst.data();
  auto g = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = s * g[i];
}

SwdValue aligned(const Matrix& xs, const Matrix& ys, const SliceSet& slices,
                 const std::optional<SwdPairing>* frozen, std::optional<SwdPairing>& used) {
  if (frozen && frozen->has_value()) {
    used = **frozen;
  } else {
    used = swd_pairing(xs, ys, slices);
  }
  return swd(xs, ys, slices, *used);
}

}  // namespace

ObjectiveResult evaluate_objective(const ModelParams& params, const StepBatch& batch,
                                   AdaptMode mode, double lambda, const SliceSet& slices,
                                   const FrozenPairings* frozen) {
  ObjectiveResult r;
  r.grads = params.zeros_like();
  r.terms.assign(loss_term_names(mode).size(), 0.0);
  const std::size_t k = params.classes();
  if (batch.source_labels.rows() != batch.source_x.size() || batch.source_labels.cols() != k)
    throw ShapeError("objective: source labels do not match the source batch");

  const Tape source_tape = forward(params, batch.source_x);
  const SoftmaxXent source_xent = softmax_xent(source_tape.logits, batch.source_labels);
  r.terms[0] = source_xent.loss;
  const Matrix dlogits_source =
      softmax_xent_backward(source_xent.probs, batch.source_labels, 1.0);
  Matrix dz_source;
  double ce = source_xent.loss;
  double distances = 0.0;

  if (mode == AdaptMode::kSaim2 && batch.pseudo_z.rows() > 0) {
    // pseudo samples enter at the embedding: only the classifier sees them
    const Tape pseudo_tape = forward_classifier(params, batch.pseudo_z);
    const SoftmaxXent pseudo_xent = softmax_xent(pseudo_tape.logits, batch.pseudo_labels);
    r.terms[1] = pseudo_xent.loss;
    ce += pseudo_xent.loss;
    backward(params, pseudo_tape,
             softmax_xent_backward(pseudo_xent.probs, batch.pseudo_labels, 1.0), {}, r.grads);

    if (!batch.target_x.empty()) {
      const Tape target_tape = forward_encoder(params, batch.target_x);
      const SwdValue v = aligned(target_tape.hidden, batch.pseudo_z, slices,
                                 frozen ? &frozen->first : nullptr, r.pairings.first);
      r.terms[2] = v.value;
      distances += v.value;
      if (lambda > 0.0) {
        Matrix dz_target;
        scale_into(dz_target, v.grad_x, lambda);
        backward(params, target_tape, {}, dz_target, r.grads);
      }
    }
    const SwdValue v = aligned(source_tape.hidden, batch.pseudo_z, slices,
                               frozen ? &frozen->second : nullptr, r.pairings.second);
    r.terms[3] = v.value;
    distances += v.value;
    if (lambda > 0.0) scale_into(dz_source, v.grad_x, lambda);
  } else if (mode == AdaptMode::kAlignmentOnly && !batch.target_x.empty()) {
    const Tape target_tape = forward_encoder(params, batch.target_x);
    const SwdValue v = aligned(source_tape.hidden, target_tape.hidden, slices,
                               frozen ? &frozen->first : nullptr, r.pairings.first);
    r.terms[1] = v.value;
    distances += v.value;
    if (lambda > 0.0) {
      scale_into(dz_source, v.grad_x, lambda);
      Matrix dz_target;
      scale_into(dz_target, v.grad_y, lambda);
      backward(params, target_tape, {}, dz_target, r.grads);
    }
  }

  backward(params, source_tape, dlogits_source, dz_source, r.grads);
  r.total = ce + lambda * distances;
  return r;
}

// ------------------------------------------------------------ BatchStream

BatchStream::BatchStream(std::size_t size, Rng rng) : order_(size), rng_(rng) {
  std::iota(order_.begin(), order_.end(), 0);
  rng_.shuffle(std::span<std::size_t>(order_));
}

std::vector<std::size_t> BatchStream::next(std::size_t count) {
  if (order_.empty()) throw ContractError("BatchStream: empty dataset");
  std::vector<std::size_t> out;
  out.reserve(count);
  while (out.size() < count) {
    if (pos_ == order_.size()) {
      rng_.shuffle(std::span<std::size_t>(order_));
      pos_ = 0;
    }
    out.push_back(order_[pos_++]);
  }
  return out;
}

// -------------------------------------------------------------- Adaptation

namespace {

ModelParams run_adaptation(const ModelParams& init, const LabeledDataset& source,
                           const UnlabeledDataset& target, const PseudoDataset* pseudo,
                           const AdaptConfig& cfg, AdaptMode mode, RunReport* report) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::size_t k = init.classes();
  init.check_shapes();
  source.validate(k);
  if (source.dim != init.input_dim() || target.dim != init.input_dim())
    throw ShapeError("adapt: dataset dim does not match the model");
  const bool use_pseudo = pseudo && pseudo->size() > 0;
  if (use_pseudo && pseudo->z.cols() != init.hidden())
    throw ShapeError("adapt: pseudo samples do not match the embedding width");
  if (cfg.batch > source.size() || cfg.batch > target.size() ||
      (use_pseudo && cfg.batch > pseudo->size()))
    throw ContractError("adapt: batch size exceeds a dataset size");

  Rng root(cfg.seed);
  BatchStream source_stream(source.size(), root.derive("adapt/source"));
  BatchStream target_stream(target.size(), root.derive("adapt/target"));
  std::optional<BatchStream> pseudo_stream;
  if (use_pseudo) pseudo_stream.emplace(pseudo->size(), root.derive("adapt/pseudo"));
  Rng slice_rng = root.derive("adapt/slices");

  const Matrix source_labels = source.one_hot_labels(k);
  Matrix pseudo_labels;
  if (use_pseudo) pseudo_labels = pseudo->one_hot_labels(k);

  ModelParams params = init;
  ModelOptimizer opt(params, AdamConfig{.lr = cfg.lr});
  const std::size_t steps = std::max<std::size_t>(1, source.size() / cfg.batch);
  const std::size_t n_terms = loss_term_names(mode).size();

  if (report) {
    report->mode = mode;
    report->seed = cfg.seed;
    report->config_hash = cfg.hash();
    report->epochs.clear();
  }

  std::vector<SparseVector> xs, xt;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::vector<double> sums(n_terms, 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
      const std::vector<std::size_t> si = source_stream.next(cfg.batch);
      const std::vector<std::size_t> ti = target_stream.next(cfg.batch);
      xs.clear();
      xt.clear();
      for (std::size_t i : si) xs.push_back(source.features[i]);
      for (std::size_t i : ti) xt.push_back(target.features[i]);
      StepBatch batch;
      batch.source_x = xs;
      batch.source_labels = source_labels.gather_rows(si);
      batch.target_x = xt;
      if (use_pseudo) {
        const std::vector<std::size_t> pi = pseudo_stream->next(cfg.batch);
        batch.pseudo_z = pseudo->z.gather_rows(pi);
        batch.pseudo_labels = pseudo_labels.gather_rows(pi);
      }
      const SliceSet slices = SliceSet::sample(cfg.slices, init.hidden(), slice_rng);
      const ObjectiveResult r = evaluate_objective(params, batch, mode, cfg.lambda, slices);
      opt.step(params, r.grads);
      for (std::size_t t = 0; t < n_terms; ++t) sums[t] += r.terms[t];
    }
    if (report) {
      EpochLosses e{epoch, {}};
      for (double v : sums) e.terms.push_back(v / static_cast<double>(steps));
      report->epochs.push_back(std::move(e));
    }
  }
  if (report)
    report->wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return params;
}

}  // namespace

ModelParams adapt_saim2(const ModelParams& init, const LabeledDataset& source,
                        const UnlabeledDataset& target, const PseudoDataset& pseudo,
                        const AdaptConfig& cfg, RunReport* report) {
  if (cfg.mode != AdaptMode::kSaim2) throw ContractError("adapt_saim2: cfg.mode must be saim2");
  return run_adaptation(init, source, target, &pseudo, cfg, AdaptMode::kSaim2, report);
}

ModelParams adapt_alignment_only(const ModelParams& init, const LabeledDataset& source,
                                 const UnlabeledDataset& target, const AdaptConfig& cfg,
                                 RunReport* report) {
  if (cfg.mode != AdaptMode::kAlignmentOnly)
    throw ContractError("adapt_alignment_only: cfg.mode must be ao");
  return run_adaptation(init, source, target, nullptr, cfg, AdaptMode::kAlignmentOnly, report);
}

// ------------------------------------------------------------ Bound terms

BoundReport compute_bound_terms(const ModelParams& params, const LabeledDataset& source,
                                const UnlabeledDataset& target, const PseudoDataset& pseudo,
                                double tau, const AdaptConfig& cfg) {
  if (!(tau >= 0.0 && tau < 1.0)) throw ContractError("bound terms: tau must be in [0, 1)");
  BoundReport b;
  b.n_source = source.size();
  b.n_target = target.size();
  b.n_pseudo = pseudo.size();
  b.one_minus_tau = 1.0 - tau;
  b.source_error = 1.0 - evaluate(params, source).accuracy;

  double pseudo_error = 0.0;
  if (pseudo.size() > 0) {
    const std::vector<int> pred = predict_embedded(params, pseudo.z);
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != pseudo.labels[i];
    pseudo_error = static_cast<double>(wrong) / static_cast<double>(pred.size());
  }
  b.joint_error_proxy = b.source_error + pseudo_error;

  const Matrix zs = encode(params, source.features);
  const Matrix zt = encode(params, target.features);
  Rng root(cfg.seed);
  Rng rng_sp = root.derive("bound/source-pseudo");
  Rng rng_tp = root.derive("bound/target-pseudo");
  b.swd_source_pseudo = swd_between_sets(zs, pseudo.z, cfg.slices, rng_sp, cfg.bound_repeats);
  b.swd_target_pseudo = swd_between_sets(zt, pseudo.z, cfg.slices, rng_tp, cfg.bound_repeats);
  return b;
}

// ------------------------------------------------------------ Experiments

SourceStage prepare_source_stage(const TaskData& task, const TrainConfig& train,
                                 std::uint64_t seed) {
  SourceStage stage;
  TrainConfig t = train;
  t.seed = seed;
  stage.params = train_source(task.source, t, &stage.log);
  const SupportSet supports = build_support_sets(stage.params, task.source);
  stage.gmm = estimate_gmm(stage.params, task.source, supports);
  return stage;
}

ExperimentResult run_mode(const TaskData& task, const SourceStage& stage,
                          const AdaptConfig& cfg, bool with_bounds) {
  cfg.validate();
  ExperimentResult res;
  res.mode = cfg.mode;
  res.seed = cfg.seed;
  RunReport& report = res.report;
  report.mode = cfg.mode;
  report.seed = cfg.seed;
  report.config_hash = cfg.hash();
  report.target_accuracy_before = evaluate(stage.params, task.target_test).accuracy;

  switch (cfg.mode) {
    case AdaptMode::kSourceOnly: {
      res.params = stage.params;
      for (std::size_t e = 0; e < stage.log.epoch_loss.size(); ++e)
        report.epochs.push_back(EpochLosses{e + 1, {stage.log.epoch_loss[e]}});
      break;
    }
    case AdaptMode::kAlignmentOnly:
      res.params = adapt_alignment_only(stage.params, task.source, task.target, cfg, &report);
      break;
    case AdaptMode::kSaim2: {
      const std::size_t n_pseudo = cfg.n_pseudo ? cfg.n_pseudo : task.source.size();
      Rng pseudo_rng = Rng(cfg.seed).derive("pseudo");
      const PseudoDataset pseudo = generate_pseudo_dataset(
          stage.gmm, stage.params, n_pseudo, cfg.tau, pseudo_rng, cfg.max_draw_factor);
      res.pseudo_partial = pseudo.shortfall;
      res.pseudo_size = pseudo.size();
      AdaptConfig run_cfg = cfg;
      if (pseudo.size() > 0 && pseudo.size() < cfg.batch) run_cfg.batch = pseudo.size();
      if (with_bounds && pseudo.size() > 0)
        report.bound_before =
            compute_bound_terms(stage.params, task.source, task.target, pseudo, cfg.tau, cfg);
      res.params = adapt_saim2(stage.params, task.source, task.target, pseudo, run_cfg, &report);
      if (with_bounds && pseudo.size() > 0)
        report.bound_after =
            compute_bound_terms(res.params, task.source, task.target, pseudo, cfg.tau, cfg);
      break;
    }
  }
  res.target_accuracy = evaluate(res.params, task.target_test).accuracy;
  report.target_accuracy_after = res.target_accuracy;
  res.source_test_accuracy = task.source_test.size()
                                 ? evaluate(res.params, task.source_test).accuracy
                                 : std::numeric_limits<double>::quiet_NaN();
  return res;
}

ExperimentResult run_experiment(const TaskData& task, const AdaptConfig& cfg,
                                const TrainConfig& train, bool with_bounds) {
  const SourceStage stage = prepare_source_stage(task, train, cfg.seed);
  return run_mode(task, stage, cfg, with_bounds);
}

// ---------------------------------------------------------------- tau sweep

double mean_of(std::span<const double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::optional<double> sample_std(std::span<const double> v) {
  if (v.size() < 2) return std::nullopt;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::vector<SweepRow> tau_sweep(const TaskData& task, std::span<const double> grid,
                                std::span<const std::uint64_t> seeds, const AdaptConfig& cfg,
                                const TrainConfig& train) {
  for (double t : grid)
    if (!(t >= 0.0 && t < 1.0)) throw ContractError("tau_sweep: grid values must be in [0, 1)");
  std::vector<SweepRow> rows(grid.size());
  for (std::size_t g = 0; g < grid.size(); ++g) rows[g].tau = grid[g];
  for (std::uint64_t seed : seeds) {
    const SourceStage stage = prepare_source_stage(task, train, seed);
    for (std::size_t g = 0; g < grid.size(); ++g) {
      AdaptConfig c = cfg;
      c.mode = AdaptMode::kSaim2;
      c.tau = grid[g];
      c.seed = seed;
      const ExperimentResult r = run_mode(task, stage, c);
      rows[g].accuracies.push_back(r.target_accuracy);
      rows[g].partial_cells += r.pseudo_partial;
    }
  }
  for (SweepRow& row : rows) {
    row.mean = mean_of(row.accuracies);
    row.std = sample_std(row.accuracies);
  }
  return rows;
}

std::string sweep_to_csv(std::span<const SweepRow> rows) {
  std::string out = "tau,mean_accuracy,std,n_seeds,partial_cells,per_seed\n";
  char buf[128];
  for (const SweepRow& r : rows) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,", r.tau, r.mean);
    out += buf;
    if (r.std) {
      std::snprintf(buf, sizeof buf, "%.17g", *r.std);
      out += buf;
    } else {
      out += "n/a";
    }
    out += "," + std::to_string(r.accuracies.size()) + "," + std::to_string(r.partial_cells) + ",";
    for (std::size_t i = 0; i < r.accuracies.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%s%.17g", i ? ";" : "", r.accuracies[i]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace saim
