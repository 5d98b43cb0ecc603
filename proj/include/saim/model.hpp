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

#ifndef SAIM_MODEL_HPP_
#define SAIM_MODEL_HPP_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "saim/featurize.hpp"
#include "saim/numerics.hpp"

namespace saim {

/// Encoder (sparse input -> sigmoid hidden layer) and softmax classifier.
/// w1 is input_dim x hidden, w2 is hidden x classes.
struct ModelParams {
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;

  std::size_t input_dim() const { return w1.rows(); }
  std::size_t hidden() const { return w1.cols(); }
  std::size_t classes() const { return w2.cols(); }

  /// Glorot-uniform weights, zero biases.
  static ModelParams init(std::size_t input_dim, std::size_t hidden, std::size_t classes,
                          Rng& rng);
  static ModelParams zeros(std::size_t input_dim, std::size_t hidden, std::size_t classes);
  ModelParams zeros_like() const { return zeros(input_dim(), hidden(), classes()); }

  /// Flat views in the order w1, b1, w2, b2.
  std::array<std::span<double>, 4> tensors();
  std::array<std::span<const double>, 4> tensors() const;
  std::size_t parameter_count() const;

  void add_scaled(const ModelParams& other, double scale);
  bool all_finite() const;
  /// Throws ShapeError unless the four tensors agree with each other.
  void check_shapes() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradients share the parameter layout.
using Gradients = ModelParams;

/// Activations recorded by a forward pass, consumed by backward().
struct Tape {
  std::span<const SparseVector> input;  // empty when the pass entered at the embedding
  Matrix hidden;                        // embeddings z
  Matrix logits;
  bool encoded = false;
  bool classified = false;
};

/// sigmoid(x W1 + b1), one row per input.
Matrix encode(const ModelParams& params, std::span<const SparseVector> x);
Matrix classifier_logits(const ModelParams& params, const Matrix& z);
/// softmax(z W2 + b2).
Matrix classify(const ModelParams& params, const Matrix& z);
/// Argmax class per embedding row; ties go to the lower class.
std::vector<int> predict_embedded(const ModelParams& params, const Matrix& z);
std::vector<int> predict(const ModelParams& params, std::span<const SparseVector> x);

/// Runs encoder and classifier on sparse input and records the activations.
Tape forward(const ModelParams& params, std::span<const SparseVector> x);
/// Encoder only; the tape can receive an embedding-space gradient.
Tape forward_encoder(const ModelParams& params, std::span<const SparseVector> x);
/// Classifier only, fed with embeddings that are treated as constants.
Tape forward_classifier(const ModelParams& params, Matrix z);

/// Accumulates parameter gradients into `grads` given the upstream gradients
/// w.r.t. the logits and/or the embeddings. Either upstream may be empty.
/// Throws StateError when the tape lacks the stage an upstream refers to.
void backward(const ModelParams& params, const Tape& tape, const Matrix& dlogits,
              const Matrix& dhidden, Gradients& grads);

/// Mean cross-entropy over a labeled batch and its gradient.
double xent_loss_and_grad(const ModelParams& params, std::span<const SparseVector> x,
                          const Matrix& labels, Gradients* grads, double scale = 1.0);

struct TrainConfig {
  std::size_t hidden = 50;
  std::size_t epochs = 30;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::size_t patience = 5;
  double min_delta = 1e-4;
  std::uint64_t seed = 0;
};

struct TrainLog {
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;
  bool stopped_early = false;
};

/// Source-domain empirical risk minimization with Adam and plateau early stopping.
ModelParams train_source(const LabeledDataset& data, const TrainConfig& cfg,
                         TrainLog* log = nullptr);

/// Adam state for the four tensors of a model.
class ModelOptimizer {
 public:
  ModelOptimizer(const ModelParams& like, AdamConfig cfg);
  void step(ModelParams& params, const Gradients& grads);
  std::uint64_t steps() const { return states_[0].t; }

 private:
  AdamConfig cfg_;
  std::array<AdamState, 4> states_;
};

struct EvalMetrics {
  double accuracy = 0.0;
  double mean_confidence = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the data
  std::size_t n = 0;
  std::size_t correct = 0;
};

EvalMetrics evaluate(const ModelParams& params, const LabeledDataset& data);
/// Metrics of explicit predictions and confidences against labels.
EvalMetrics score_predictions(std::span<const int> predicted, std::span<const int> labels,
                              std::span<const double> confidence, std::size_t classes);

/// Signed distance of each embedding row to the two-class decision boundary
/// (positive on the class-1 side). Requires classes() == 2.
Vector boundary_distance(const ModelParams& params, const Matrix& z);

struct CheckpointMeta {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
};

std::string checkpoint_to_json(const ModelParams& params, const CheckpointMeta& meta);
ModelParams checkpoint_from_json(const std::string& text, CheckpointMeta* meta = nullptr);
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const CheckpointMeta& meta);
/// Rejects a checkpoint whose input_dim/classes differ from the expected
/// values; pass 0 to skip a check.
ModelParams load_checkpoint(const std::filesystem::path& path, std::size_t expected_dim = 0,
                            std::size_t expected_classes = 0,
                            CheckpointMeta* meta = nullptr);

}  // namespace saim

#endif  // SAIM_MODEL_HPP_
