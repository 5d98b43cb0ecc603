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

#include "saim/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "saim/errors.hpp"
#include "saim/io.hpp"

namespace saim {

using json = nlohmann::json;

// -------------------------------------------------------------- ModelParams

ModelParams ModelParams::zeros(std::size_t input_dim, std::size_t hidden,
                               std::size_t classes) {
  return ModelParams{Matrix(input_dim, hidden), Vector(hidden, 0.0), Matrix(hidden, classes),
                     Vector(classes, 0.0)};
}

ModelParams ModelParams::init(std::size_t input_dim, std::size_t hidden, std::size_t classes,
                              Rng& rng) {
  ModelParams p = zeros(input_dim, hidden, classes);
  glorot_uniform(p.w1, rng);
  glorot_uniform(p.w2, rng);
  return p;
}

std::array<std::span<double>, 4> ModelParams::tensors() {
  return {w1.data(), std::span<double>(b1), w2.data(), std::span<double>(b2)};
}

std::array<std::span<const double>, 4> ModelParams::tensors() const {
  return {w1.data(), std::span<const double>(b1), w2.data(), std::span<const double>(b2)};
}

std::size_t ModelParams::parameter_count() const {
  return w1.size() + b1.size() + w2.size() + b2.size();
}

void ModelParams::add_scaled(const ModelParams& other, double scale) {
  auto dst = tensors();
  auto src = other.tensors();
  for (std::size_t t = 0; t < 4; ++t) {
    if (dst[t].size() != src[t].size()) throw ShapeError("add_scaled: shape mismatch");
    for (std::size_t i = 0; i < dst[t].size(); ++i) dst[t][i] += scale * src[t][i];
  }
}

bool ModelParams::all_finite() const {
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) return false;
  return true;
}

void ModelParams::check_shapes() const {
  if (b1.size() != w1.cols() || w2.rows() != w1.cols() || b2.size() != w2.cols())
    throw ShapeError("model parameters have inconsistent shapes");
}

// ------------------------------------------------------------------ Forward

Matrix encode(const ModelParams& params, std::span<const SparseVector> x) {
  return sigmoid(affine_forward(x, params.w1, params.b1));
}

Matrix classifier_logits(const ModelParams& params, const Matrix& z) {
  if (z.cols() != params.hidden())
    throw ShapeError("classify: embedding width " + std::to_string(z.cols()) +
                     " != hidden size " + std::to_string(params.hidden()));
  return affine_forward(z, params.w2, params.b2);
}

Matrix classify(const ModelParams& params, const Matrix& z) {
  return softmax(classifier_logits(params, z));
}

std::vector<int> predict_embedded(const ModelParams& params, const Matrix& z) {
  Matrix logits = classifier_logits(params, z);
  std::vector<int> out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) out[r] = static_cast<int>(argmax(logits.row(r)));
  return out;
}

std::vector<int> predict(const ModelParams& params, std::span<const SparseVector> x) {
  return predict_embedded(params, encode(params, x));
}

Tape forward_encoder(const ModelParams& params, std::span<const SparseVector> x) {
  Tape tape;
  tape.input = x;
  tape.hidden = encode(params, x);
  tape.encoded = true;
  return tape;
}

Tape forward(const ModelParams& params, std::span<const SparseVector> x) {
  Tape tape = forward_encoder(params, x);
  tape.logits = classifier_logits(params, tape.hidden);
  tape.classified = true;
  return tape;
}

Tape forward_classifier(const ModelParams& params, Matrix z) {
  Tape tape;
  tape.hidden = std::move(z);
  tape.logits = classifier_logits(params, tape.hidden);
  tape.classified = true;
  return tape;
}

// ----------------------------------------------------------------- Backward

void backward(const ModelParams& params, const Tape& tape, const Matrix& dlogits,
              const Matrix& dhidden, Gradients& grads) {
  if (!tape.encoded && !tape.classified) throw StateError("backward called without a forward pass");
  Matrix dz;
  if (!dlogits.empty()) {
    if (!tape.classified) throw StateError("backward: tape has no classifier stage");
    dz = affine_backward(tape.hidden, params.w2, dlogits, grads.w2, grads.b2);
  }
  if (!dhidden.empty()) {
    if (!tape.encoded) throw StateError("backward: embedding gradient needs an encoder stage");
    if (dhidden.rows() != tape.hidden.rows() || dhidden.cols() != tape.hidden.cols())
      throw ShapeError("backward: embedding gradient shape mismatch");
    if (dz.empty()) {
      dz = dhidden;
    } else {
      auto d = dz.data();
      auto e = dhidden.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += e[i];
    }
  }
  if (tape.encoded && !dz.empty()) {
    Matrix da = sigmoid_backward(tape.hidden, dz);
    affine_backward(tape.input, da, grads.w1, grads.b1);
  }
}

double xent_loss_and_grad(const ModelParams& params, std::span<const SparseVector> x,
                          const Matrix& labels, Gradients* grads, double scale) {
  Tape tape = forward(params, x);
  SoftmaxXent sx = softmax_xent(tape.logits, labels);
  if (grads) backward(params, tape, softmax_xent_backward(sx.probs, labels, scale), {}, *grads);
  return sx.loss;
}

// ------------------------------------------------------------------ Training

ModelOptimizer::ModelOptimizer(const ModelParams& like, AdamConfig cfg) : cfg_(cfg) {
  auto t = like.tensors();
  for (std::size_t i = 0; i < 4; ++i) states_[i] = AdamState(t[i].size());
}

void ModelOptimizer::step(ModelParams& params, const Gradients& grads) {
  auto p = params.tensors();
  auto g = grads.tensors();
  for (std::size_t i = 0; i < 4; ++i) adam_step(p[i], g[i], states_[i], cfg_);
}

namespace {

double mean_xent(const ModelParams& params, const LabeledDataset& data) {
  return softmax_xent(classifier_logits(params, encode(params, data.features)),
                      data.one_hot_labels(params.classes()))
      .loss;
}

}  // namespace

ModelParams train_source(const LabeledDataset& data, const TrainConfig& cfg, TrainLog* log) {
  constexpr std::size_t kClasses = 2;
  if (data.size() == 0) throw ContractError("train_source: empty dataset");
  if (cfg.batch == 0 || cfg.hidden == 0) throw ContractError("train_source: batch and hidden must be > 0");
  data.validate(kClasses);

  Rng root(cfg.seed);
  Rng init_rng = root.derive("source/init");
  Rng order_rng = root.derive("source/shuffle");
  ModelParams params = ModelParams::init(data.dim, cfg.hidden, kClasses, init_rng);
  ModelOptimizer opt(params, AdamConfig{.lr = cfg.lr});

  const Matrix labels = data.one_hot_labels(kClasses);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  if (log) {
    log->initial_loss = mean_xent(params, data);
    log->epoch_loss.clear();
    log->stopped_early = false;
  }

  double best = std::numeric_limits<double>::infinity();
  std::size_t stale = 0;
  std::vector<SparseVector> xb;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      xb.clear();
      for (std::size_t i : idx) xb.push_back(data.features[i]);
      Gradients grads = params.zeros_like();
      const double loss = xent_loss_and_grad(params, xb, labels.gather_rows(idx), &grads);
      opt.step(params, grads);
      total += loss * static_cast<double>(idx.size());
    }
    const double epoch_loss = total / static_cast<double>(order.size());
    if (log) log->epoch_loss.push_back(epoch_loss);
    if (epoch_loss < best - cfg.min_delta) {
      best = epoch_loss;
      stale = 0;
    } else if (++stale >= cfg.patience) {
      if (log) log->stopped_early = true;
      break;
    }
  }
  return params;
}

// ---------------------------------------------------------------- Evaluation

EvalMetrics score_predictions(std::span<const int> predicted, std::span<const int> labels,
                              std::span<const double> confidence, std::size_t classes) {
  if (predicted.size() != labels.size() || confidence.size() != labels.size())
    throw ShapeError("score_predictions: length mismatch");
  if (labels.empty()) throw ContractError("evaluate: empty dataset");
  EvalMetrics m;
  m.n = labels.size();
  std::vector<std::size_t> hit(classes, 0), seen(classes, 0);
  double conf = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    if (y >= classes) throw BoundsError("evaluate: label out of range");
    ++seen[y];
    if (predicted[i] == labels[i]) {
      ++m.correct;
      ++hit[y];
    }
    conf += confidence[i];
  }
  m.accuracy = static_cast<double>(m.correct) / static_cast<double>(m.n);
  m.mean_confidence = conf / static_cast<double>(m.n);
  m.per_class_accuracy.resize(classes);
  for (std::size_t c = 0; c < classes; ++c)
    m.per_class_accuracy[c] = seen[c] ? static_cast<double>(hit[c]) / static_cast<double>(seen[c])
                                      : std::numeric_limits<double>::quiet_NaN();
  return m;
}

EvalMetrics evaluate(const ModelParams& params, const LabeledDataset& data) {
  if (data.size() == 0) throw ContractError("evaluate: empty dataset");
  Matrix probs = classify(params, encode(params, data.features));
  std::vector<int> pred(data.size());
  std::vector<double> conf(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    auto row = probs.row(r);
    pred[r] = static_cast<int>(argmax(row));
    conf[r] = row[static_cast<std::size_t>(pred[r])];
  }
  return score_predictions(pred, data.labels, conf, params.classes());
}

Vector boundary_distance(const ModelParams& params, const Matrix& z) {
  if (params.classes() != 2) throw ContractError("boundary_distance: needs two classes");
  if (z.cols() != params.hidden()) throw ShapeError("boundary_distance: width mismatch");
  Vector normal(params.hidden());
  double nn = 0.0;
  for (std::size_t h = 0; h < params.hidden(); ++h) {
    normal[h] = params.w2(h, 1) - params.w2(h, 0);
    nn += normal[h] * normal[h];
  }
  const double offset = params.b2[1] - params.b2[0];
  const double inv = nn > 0.0 ? 1.0 / std::sqrt(nn) : 0.0;
  Vector out(z.rows());
  for (std::size_t r = 0; r < z.rows(); ++r) {
    auto row = z.row(r);
    out[r] = (std::inner_product(row.begin(), row.end(), normal.begin(), 0.0) + offset) * inv;
  }
  return out;
}

// ---------------------------------------------------------------- Checkpoints

namespace {

constexpr const char* kModelFormat = "saim.model";
constexpr int kModelVersion = 1;

json tensor_json(std::span<const double> t) { return json(std::vector<double>(t.begin(), t.end())); }

std::vector<double> tensor_from(const json& j, std::size_t expected, const char* name) {
  auto v = j.at(name).get<std::vector<double>>();
  if (v.size() != expected)
    throw ShapeError(std::string("checkpoint tensor '") + name + "' has wrong length");
  return v;
}

}  // namespace

std::string checkpoint_to_json(const ModelParams& params, const CheckpointMeta& meta) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["input_dim"] = params.input_dim();
  j["hidden"] = params.hidden();
  j["classes"] = params.classes();
  j["seed"] = meta.seed;
  j["config_hash"] = meta.config_hash;
  j["w1"] = tensor_json(params.w1.data());
  j["b1"] = tensor_json(params.b1);
  j["w2"] = tensor_json(params.w2.data());
  j["b2"] = tensor_json(params.b2);
  return j.dump() + "\n";
}

ModelParams checkpoint_from_json(const std::string& text, CheckpointMeta* meta) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint: ") + e.what(), 0);
  }
  if (j.value("format", "") != kModelFormat) throw ParseError("not a model checkpoint", 0);
  if (j.value("version", 0) != kModelVersion)
    throw ParseError("unsupported checkpoint version", 0);
  const auto dim = j.at("input_dim").get<std::size_t>();
  const auto hidden = j.at("hidden").get<std::size_t>();
  const auto classes = j.at("classes").get<std::size_t>();
  ModelParams p;
  p.w1 = Matrix(dim, hidden, tensor_from(j, dim * hidden, "w1"));
  p.b1 = tensor_from(j, hidden, "b1");
  p.w2 = Matrix(hidden, classes, tensor_from(j, hidden * classes, "w2"));
  p.b2 = tensor_from(j, classes, "b2");
  if (meta) {
    meta->seed = j.value("seed", std::uint64_t{0});
    meta->config_hash = j.value("config_hash", std::uint64_t{0});
  }
  return p;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointMeta& meta) {
  write_text_file(path, checkpoint_to_json(params, meta));
}

ModelParams load_checkpoint(const std::filesystem::path& path, std::size_t expected_dim,
                            std::size_t expected_classes, CheckpointMeta* meta) {
  ModelParams p = checkpoint_from_json(read_text_file(path), meta);
  if (expected_dim && p.input_dim() != expected_dim)
    throw ShapeError("checkpoint input dim " + std::to_string(p.input_dim()) +
                     " does not match data dim " + std::to_string(expected_dim));
  if (expected_classes && p.classes() != expected_classes)
    throw ShapeError("checkpoint class count " + std::to_string(p.classes()) +
                     " does not match expected " + std::to_string(expected_classes));
  return p;
}

}  // namespace saim
