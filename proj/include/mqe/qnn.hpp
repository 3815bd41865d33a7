// Copyright 2026 The MQE Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "mqe/common.hpp"
#include "mqe/qsim.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mqe::qnn {

/// Defaults: 13 qubits, 7 layers, Adam at 0.01, batch 32, 100 epochs, binary
/// cross-entropy.
struct TrainConfig {
  int n_qubits = 13;
  int layers = 7;
  double learning_rate = 0.01;
  int batch_size = 32;
  int epochs = 100;
  std::uint64_t seed = 7;
  /// Share of the training rows held out for the validation curve.
  double validation_fraction = 0.1;
  unsigned workers = 0;
};

struct QnnParams {
  qsim::RotationTensor<double> theta;
  Eigen::VectorXd w;
  double b = 0.0;

  int n_qubits() const { return theta.qubits(); }
  int n_layers() const { return theta.layers(); }

  static QnnParams zeros(int layers, int qubits);
  /// theta ~ U[0, 2pi), readout weights and bias zero.
  static QnnParams initialize(int layers, int qubits, Rng& rng);

  /// [theta..., w..., b]
  Eigen::VectorXd pack() const;
  void unpack(const Eigen::VectorXd& flat);
  Eigen::Index parameter_count() const { return theta.size() + w.size() + 1; }

  bool operator==(const QnnParams& o) const { return theta == o.theta && w == o.w && b == o.b; }
};

struct ForwardResult {
  Eigen::VectorXd z;
  double logit = 0.0;
  double prob = 0.5;
};

double sigmoid(double v);

/// Per-qubit <Z_i> after angle embedding and the SEL ansatz.
Eigen::VectorXd circuit_expectations(const Eigen::Ref<const Eigen::VectorXd>& x,
                                     const qsim::RotationTensor<double>& theta);

/// Trajectory-averaged <Z_i> with gate noise. `stream` selects the RNG stream
/// under noise.seed so batch evaluation is schedule-independent.
Eigen::VectorXd circuit_expectations(const Eigen::Ref<const Eigen::VectorXd>& x,
                                     const qsim::RotationTensor<double>& theta, const qsim::GateNoise& noise,
                                     std::uint64_t stream);

ForwardResult qnn_forward(const Eigen::Ref<const Eigen::VectorXd>& x, const QnnParams& params);
ForwardResult qnn_forward(const Eigen::Ref<const Eigen::VectorXd>& x, const QnnParams& params,
                          const qsim::GateNoise& noise, std::uint64_t stream);

inline constexpr double kProbClip = 1e-12;

/// Mean binary cross-entropy with probabilities clipped to [1e-12, 1 - 1e-12].
double bce_loss(const Eigen::Ref<const Eigen::VectorXd>& probs, const Labels& labels);

/// d(BCE)/d(params) for one sample. Rotation gradients use the two-point
/// shift rule; readout gradients are analytic.
QnnParams parameter_shift_grad(const Eigen::Ref<const Eigen::VectorXd>& x, const QnnParams& params, int label);

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState zeros(Eigen::Index n) { return {Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)}; }
};

/// Bias-corrected Adam update, in place.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  QnnParams params;
  std::vector<EpochRecord> history;
};

TrainResult train_qnn(const Eigen::MatrixXd& features, const Labels& labels, const TrainConfig& config);

struct QnnScores {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

QnnScores predict(const QnnParams& params, const Eigen::MatrixXd& features, unsigned workers = 0);
QnnScores predict(const QnnParams& params, const Eigen::MatrixXd& features, const qsim::GateNoise& noise,
                  unsigned workers = 0);

struct QnnModel {
  TrainConfig config;
  QnnParams params;
};

std::string to_json(const QnnModel& model);
QnnModel qnn_model_from_json(const std::string& text);

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace mqe::qnn
