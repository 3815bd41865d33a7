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

#include "mqe/qnn.hpp"

#include <json.hpp>

#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

namespace mqe::qnn {

using qsim::CircuitRunner;
using qsim::RotationTensor;
using qsim::SelWiring;
using qsim::StateVector;

QnnParams QnnParams::zeros(int layers, int qubits) {
  return {RotationTensor<double>(layers, qubits), Eigen::VectorXd::Zero(qubits), 0.0};
}

QnnParams QnnParams::initialize(int layers, int qubits, Rng& rng) {
  QnnParams p = zeros(layers, qubits);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  for (Eigen::Index k = 0; k < p.theta.size(); ++k) p.theta.flat()(k) = angle(rng);
  return p;
}

Eigen::VectorXd QnnParams::pack() const {
  Eigen::VectorXd flat(parameter_count());
  flat << theta.flat(), w, b;
  return flat;
}

void QnnParams::unpack(const Eigen::VectorXd& flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("flat parameter vector has wrong size");
  theta.flat() = flat.head(theta.size());
  w = flat.segment(theta.size(), w.size());
  b = flat(flat.size() - 1);
}

double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

namespace {

void check_input(const Eigen::Ref<const Eigen::VectorXd>& x, const QnnParams& params) {
  if (x.size() != params.n_qubits()) {
    throw std::invalid_argument("feature length " + std::to_string(x.size()) + " does not match " +
                                std::to_string(params.n_qubits()) + " qubits");
  }
  if (params.w.size() != params.n_qubits()) throw std::invalid_argument("readout weight length mismatch");
}

ForwardResult readout(Eigen::VectorXd z, const QnnParams& params) {
  ForwardResult r;
  r.logit = params.w.dot(z) + params.b;
  r.prob = sigmoid(r.logit);
  r.z = std::move(z);
  return r;
}

}  // namespace

Eigen::VectorXd circuit_expectations(const Eigen::Ref<const Eigen::VectorXd>& x,
                                     const RotationTensor<double>& theta) {
  const SelWiring wiring = SelWiring::ring(theta.qubits(), theta.layers());
  StateVector<double> state(theta.qubits());
  CircuitRunner<double> run(state);
  qsim::embed_angles(run, x);
  qsim::sel_layers(run, theta, wiring);
  return qsim::expectations_z(state);
}

Eigen::VectorXd circuit_expectations(const Eigen::Ref<const Eigen::VectorXd>& x,
                                     const RotationTensor<double>& theta, const qsim::GateNoise& noise,
                                     std::uint64_t stream) {
  if (!noise.active()) return circuit_expectations(x, theta);
  if (noise.trajectories < 1) throw std::invalid_argument("trajectory count must be positive");
  const SelWiring wiring = SelWiring::ring(theta.qubits(), theta.layers());
  const auto kraus = qsim::kraus_operators<double>(noise.channel);
  Rng rng = derive_rng(noise.seed, stream);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(theta.qubits());
  for (int t = 0; t < noise.trajectories; ++t) {
    StateVector<double> state(theta.qubits());
    CircuitRunner<double> run(state, kraus, rng);
    qsim::embed_angles(run, x);
    qsim::sel_layers(run, theta, wiring);
    sum += qsim::expectations_z(state);
  }
  return sum / static_cast<double>(noise.trajectories);
}

ForwardResult qnn_forward(const Eigen::Ref<const Eigen::VectorXd>& x, const QnnParams& params) {
  check_input(x, params);
  return readout(circuit_expectations(x, params.theta), params);
}

ForwardResult qnn_forward(const Eigen::Ref<const Eigen::VectorXd>& x, const QnnParams& params,
                          const qsim::GateNoise& noise, std::uint64_t stream) {
  check_input(x, params);
  return readout(circuit_expectations(x, params.theta, noise, stream), params);
}

double bce_loss(const Eigen::Ref<const Eigen::VectorXd>& probs, const Labels& labels) {
  if (static_cast<std::size_t>(probs.size()) != labels.size()) {
    throw std::invalid_argument("probability and label counts differ");
  }
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probs(static_cast<Eigen::Index>(i)), kProbClip, 1.0 - kProbClip);
    total -= labels[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(labels.size());
}

QnnParams parameter_shift_grad(const Eigen::Ref<const Eigen::VectorXd>& x, const QnnParams& params, int label) {
  check_input(x, params);
  const ForwardResult fwd = qnn_forward(x, params);
  // dL/dlogit for sigmoid + BCE
  const double delta = fwd.prob - static_cast<double>(label);

  QnnParams grad = QnnParams::zeros(params.n_layers(), params.n_qubits());
  grad.w = delta * fwd.z;
  grad.b = delta;

  const double shift = std::numbers::pi / 2;
  RotationTensor<double> shifted = params.theta;
  for (Eigen::Index k = 0; k < shifted.size(); ++k) {
    const double orig = shifted.flat()(k);
    shifted.flat()(k) = orig + shift;
    const Eigen::VectorXd z_plus = circuit_expectations(x, shifted);
    shifted.flat()(k) = orig - shift;
    const Eigen::VectorXd z_minus = circuit_expectations(x, shifted);
    shifted.flat()(k) = orig;
    grad.theta.flat()(k) = delta * params.w.dot(z_plus - z_minus) / 2.0;
  }
  return grad;
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, double lr) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("Adam shapes disagree");
  }
  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

namespace {

struct SubsetScore {
  double loss = 0.0;
  double accuracy = 0.0;
};

SubsetScore score_subset(const QnnParams& params, const Eigen::MatrixXd& features, const Labels& labels,
                         const std::vector<std::size_t>& rows, unsigned workers) {
  if (rows.empty()) return {std::nan(""), std::nan("")};
  Eigen::VectorXd probs(static_cast<Eigen::Index>(rows.size()));
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    probs(static_cast<Eigen::Index>(i)) = qnn_forward(features.row(static_cast<Eigen::Index>(rows[i])).transpose(),
                                                      params)
                                              .prob;
  });
  Labels sub(rows.size());
  std::size_t correct = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    sub[i] = labels[rows[i]];
    if ((probs(static_cast<Eigen::Index>(i)) >= 0.5 ? 1 : 0) == sub[i]) ++correct;
  }
  return {bce_loss(probs, sub), static_cast<double>(correct) / static_cast<double>(rows.size())};
}

}  // namespace

TrainResult train_qnn(const Eigen::MatrixXd& features, const Labels& labels, const TrainConfig& config) {
  const auto m = static_cast<std::size_t>(features.rows());
  if (m == 0) throw std::invalid_argument("empty training set");
  if (labels.size() != m) throw std::invalid_argument("feature and label counts differ");
  if (features.cols() != config.n_qubits) {
    throw std::invalid_argument("training features have " + std::to_string(features.cols()) +
                                " columns but the circuit has " + std::to_string(config.n_qubits) + " qubits");
  }
  const auto positives = std::count(labels.begin(), labels.end(), 1);
  for (int y : labels) {
    if (y != 0 && y != 1) throw std::invalid_argument("labels must be 0 or 1");
  }
  if (positives == 0 || static_cast<std::size_t>(positives) == m) {
    throw std::invalid_argument("training set contains a single class");
  }
  if (config.batch_size < 1 || config.epochs < 0 || config.layers < 0) {
    throw std::invalid_argument("invalid training configuration");
  }

  Rng rng(config.seed);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = 0;
  if (m >= 10 && config.validation_fraction > 0.0) {
    n_val = static_cast<std::size_t>(std::lround(config.validation_fraction * static_cast<double>(m)));
    n_val = std::min(n_val, m - 2);
  }
  std::vector<std::size_t> val_rows(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());

  QnnParams params = QnnParams::initialize(config.layers, config.n_qubits, rng);
  Eigen::VectorXd flat = params.pack();
  AdamState adam = AdamState::zeros(flat.size());

  TrainResult result;
  std::vector<Eigen::VectorXd> sample_grads;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(train_rows.begin(), train_rows.end(), rng);
    for (std::size_t start = 0; start < train_rows.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(train_rows.size(), start + static_cast<std::size_t>(config.batch_size));
      sample_grads.assign(end - start, Eigen::VectorXd());
      parallel_for(end - start, config.workers, [&](std::size_t i) {
        const auto row = static_cast<Eigen::Index>(train_rows[start + i]);
        sample_grads[i] = parameter_shift_grad(features.row(row).transpose(), params, labels[train_rows[start + i]]).pack();
      });
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(flat.size());
      for (const auto& g : sample_grads) grad += g;
      grad /= static_cast<double>(end - start);
      adam_step(flat, grad, adam, config.learning_rate);
      params.unpack(flat);
    }
    const SubsetScore tr = score_subset(params, features, labels, train_rows, config.workers);
    const SubsetScore va = score_subset(params, features, labels, val_rows, config.workers);
    result.history.push_back({epoch, tr.loss, tr.accuracy, va.loss, va.accuracy});
  }
  result.params = std::move(params);
  return result;
}

QnnScores predict(const QnnParams& params, const Eigen::MatrixXd& features, unsigned workers) {
  QnnScores s{Eigen::VectorXd(features.rows()), Eigen::VectorXd(features.rows())};
  parallel_for(static_cast<std::size_t>(features.rows()), workers, [&](std::size_t i) {
    const auto r = qnn_forward(features.row(static_cast<Eigen::Index>(i)).transpose(), params);
    s.logits(static_cast<Eigen::Index>(i)) = r.logit;
    s.probs(static_cast<Eigen::Index>(i)) = r.prob;
  });
  return s;
}

QnnScores predict(const QnnParams& params, const Eigen::MatrixXd& features, const qsim::GateNoise& noise,
                  unsigned workers) {
  QnnScores s{Eigen::VectorXd(features.rows()), Eigen::VectorXd(features.rows())};
  parallel_for(static_cast<std::size_t>(features.rows()), workers, [&](std::size_t i) {
    const auto r = qnn_forward(features.row(static_cast<Eigen::Index>(i)).transpose(), params, noise, i);
    s.logits(static_cast<Eigen::Index>(i)) = r.logit;
    s.probs(static_cast<Eigen::Index>(i)) = r.prob;
  });
  return s;
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string to_json(const QnnModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "mqe.qnn/1";
  j["config"] = {{"n_qubits", model.config.n_qubits},
                 {"layers", model.config.layers},
                 {"learning_rate", model.config.learning_rate},
                 {"batch_size", model.config.batch_size},
                 {"epochs", model.config.epochs},
                 {"seed", model.config.seed},
                 {"validation_fraction", model.config.validation_fraction}};
  j["theta"] = {{"layers", model.params.n_layers()},
                {"qubits", model.params.n_qubits()},
                {"order", "layer,qubit,axis(x,y,z)"},
                {"values", to_vector(model.params.theta.flat())}};
  j["w"] = to_vector(model.params.w);
  j["b"] = model.params.b;
  return j.dump(1) + "\n";
}

QnnModel qnn_model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "mqe.qnn/1") throw std::invalid_argument("not a QNN model document");
    QnnModel m;
    const auto& c = j.at("config");
    m.config.n_qubits = c.at("n_qubits");
    m.config.layers = c.at("layers");
    m.config.learning_rate = c.at("learning_rate");
    m.config.batch_size = c.at("batch_size");
    m.config.epochs = c.at("epochs");
    m.config.seed = c.at("seed");
    m.config.validation_fraction = c.at("validation_fraction");
    const auto& t = j.at("theta");
    m.params.theta = RotationTensor<double>(t.at("layers"), t.at("qubits"),
                                            from_vector(t.at("values").get<std::vector<double>>()));
    m.params.w = from_vector(j.at("w").get<std::vector<double>>());
    m.params.b = j.at("b");
    if (m.params.w.size() != m.params.n_qubits()) throw std::invalid_argument("readout weight length mismatch");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed QNN model document: ") + e.what());
  }
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,train_loss,train_accuracy,val_loss,val_accuracy\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << format_double(r.train_loss) << ',' << format_double(r.train_accuracy) << ','
       << format_double(r.val_loss) << ',' << format_double(r.val_accuracy) << '\n';
  }
  return os.str();
}

}  // namespace mqe::qnn
