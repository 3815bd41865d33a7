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
#include "mqe/qsim/gates.hpp"
#include "mqe/qsim/noise.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace mqe::qsim {

/// Entangler layout of the strongly entangling ansatz: every layer applies
/// CNOT(i, (i+1) mod n) for i = 0..n-1. One-qubit circuits have no entanglers.
struct SelWiring {
  int n_qubits = 0;
  int n_layers = 0;
  std::vector<std::vector<std::pair<int, int>>> cnots;

  static SelWiring ring(int n_qubits, int n_layers) {
    if (n_qubits < 1 || n_layers < 0) throw std::invalid_argument("invalid SEL wiring shape");
    SelWiring w{n_qubits, n_layers, {}};
    w.cnots.resize(static_cast<std::size_t>(n_layers));
    if (n_qubits > 1) {
      for (auto& layer : w.cnots) {
        for (int i = 0; i < n_qubits; ++i) layer.emplace_back(i, (i + 1) % n_qubits);
      }
    }
    return w;
  }
};

/// Rotation angles theta[layer][qubit][axis], axis 0/1/2 = X/Y/Z, stored flat.
template <typename Scalar = double>
class RotationTensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  RotationTensor() = default;
  RotationTensor(int layers, int qubits)
      : layers_(layers), qubits_(qubits), values_(Vector::Zero(Eigen::Index{3} * layers * qubits)) {
    if (layers < 0 || qubits < 1) throw std::invalid_argument("invalid rotation tensor shape");
  }
  RotationTensor(int layers, int qubits, Vector values) : RotationTensor(layers, qubits) {
    if (values.size() != values_.size()) throw std::invalid_argument("rotation tensor size mismatch");
    values_ = std::move(values);
  }

  int layers() const { return layers_; }
  int qubits() const { return qubits_; }
  Eigen::Index size() const { return values_.size(); }

  static Eigen::Index offset(int qubits, int l, int i, int k) { return (Eigen::Index{l} * qubits + i) * 3 + k; }

  Scalar operator()(int l, int i, int k) const { return values_(offset(qubits_, l, i, k)); }
  Scalar& operator()(int l, int i, int k) { return values_(offset(qubits_, l, i, k)); }

  const Vector& flat() const { return values_; }
  Vector& flat() { return values_; }

  bool operator==(const RotationTensor& o) const {
    return layers_ == o.layers_ && qubits_ == o.qubits_ && values_ == o.values_;
  }

 private:
  int layers_ = 0;
  int qubits_ = 0;
  Vector values_;
};

/// Trajectory noise attached to a circuit: after every gate, the channel acts on
/// each qubit the gate touched.
struct GateNoise {
  NoiseChannel channel;
  int trajectories = 256;
  std::uint64_t seed = 0;

  bool active() const { return channel.probability > 0.0; }
};

/// Applies gates to a state, optionally followed by one sampled Kraus branch per
/// touched qubit.
template <typename Scalar>
class CircuitRunner {
 public:
  explicit CircuitRunner(StateVector<Scalar>& state) : state_(state) {}
  CircuitRunner(StateVector<Scalar>& state, const std::vector<Matrix2c<Scalar>>& kraus, Rng& rng)
      : state_(state), kraus_(&kraus), rng_(&rng) {}

  void rotation(int qubit, Axis axis, Scalar angle) {
    apply_rotation(state_, qubit, axis, angle);
    after_gate(qubit);
  }

  void cnot(int control, int target) {
    apply_cnot(state_, control, target);
    after_gate(control);
    after_gate(target);
  }

  StateVector<Scalar>& state() { return state_; }

 private:
  void after_gate(int qubit) {
    if (kraus_ != nullptr) apply_kraus_trajectory(state_, *kraus_, qubit, *rng_);
  }

  StateVector<Scalar>& state_;
  const std::vector<Matrix2c<Scalar>>* kraus_ = nullptr;
  Rng* rng_ = nullptr;
};

template <typename Scalar, typename Derived>
void embed_angles(CircuitRunner<Scalar>& run, const Eigen::MatrixBase<Derived>& x, Scalar sign = Scalar(1)) {
  if (x.size() != run.state().n_qubits()) {
    throw std::invalid_argument("feature length " + std::to_string(x.size()) + " does not match " +
                                std::to_string(run.state().n_qubits()) + " qubits");
  }
  for (int i = 0; i < run.state().n_qubits(); ++i) run.rotation(i, Axis::Y, sign * static_cast<Scalar>(x(i)));
}

template <typename Scalar>
void sel_layers(CircuitRunner<Scalar>& run, const RotationTensor<Scalar>& theta, const SelWiring& wiring) {
  if (theta.layers() != wiring.n_layers || theta.qubits() != wiring.n_qubits ||
      wiring.n_qubits != run.state().n_qubits() || static_cast<int>(wiring.cnots.size()) != wiring.n_layers) {
    throw std::invalid_argument("rotation tensor / wiring / state shape mismatch");
  }
  for (int l = 0; l < wiring.n_layers; ++l) {
    for (int i = 0; i < wiring.n_qubits; ++i) {
      run.rotation(i, Axis::X, theta(l, i, 0));
      run.rotation(i, Axis::Y, theta(l, i, 1));
      run.rotation(i, Axis::Z, theta(l, i, 2));
    }
    for (const auto& [c, t] : wiring.cnots[static_cast<std::size_t>(l)]) run.cnot(c, t);
  }
}

/// (x) R_Y(x_i) |0>, qubit i rotated by x_i.
template <typename Derived>
StateVector<typename Derived::Scalar> angle_embed(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  if (x.size() < 1) throw std::invalid_argument("empty feature vector");
  StateVector<Scalar> state(static_cast<int>(x.size()));
  CircuitRunner<Scalar> run(state);
  embed_angles(run, x);
  return state;
}

template <typename Derived>
StateVector<typename Derived::Scalar> angle_embed(const Eigen::MatrixBase<Derived>& x, int n_qubits) {
  if (x.size() != n_qubits) {
    throw std::invalid_argument("feature length " + std::to_string(x.size()) + " does not match " +
                                std::to_string(n_qubits) + " qubits");
  }
  return angle_embed(x);
}

/// Per layer: R_X, R_Y, R_Z on every qubit, then the layer's CNOT ring.
template <typename Scalar>
void apply_sel_ansatz(StateVector<Scalar>& state, const RotationTensor<Scalar>& theta, const SelWiring& wiring) {
  CircuitRunner<Scalar> run(state);
  sel_layers(run, theta, wiring);
}

namespace detail {

template <typename Derived, typename Other>
void check_pair(const Eigen::MatrixBase<Derived>& a, const Eigen::MatrixBase<Other>& b) {
  if (a.size() != b.size() || a.size() < 1) {
    throw std::invalid_argument("kernel inputs must have equal non-zero length (" + std::to_string(a.size()) +
                                " vs " + std::to_string(b.size()) + ")");
  }
}

}  // namespace detail

/// |<psi(x_j)|psi(x_i)>|^2 read off as the all-zeros probability of
/// U^dagger(x_j) U(x_i) |0>. Exact; no shot sampling.
template <typename Derived, typename Other>
typename Derived::Scalar fidelity_kernel_value(const Eigen::MatrixBase<Derived>& xi,
                                               const Eigen::MatrixBase<Other>& xj) {
  using Scalar = typename Derived::Scalar;
  detail::check_pair(xi, xj);
  StateVector<Scalar> state(static_cast<int>(xi.size()));
  CircuitRunner<Scalar> run(state);
  embed_angles(run, xi);
  embed_angles(run, xj, Scalar(-1));
  return std::norm(state[0]);
}

/// Shot-sampled estimate of the same quantity: Binomial(shots, K) / shots.
template <typename Derived, typename Other>
typename Derived::Scalar fidelity_kernel_value(const Eigen::MatrixBase<Derived>& xi,
                                               const Eigen::MatrixBase<Other>& xj, int shots, Rng& rng) {
  using Scalar = typename Derived::Scalar;
  if (shots < 1) throw std::invalid_argument("shots must be positive");
  const Scalar exact = std::clamp(fidelity_kernel_value(xi, xj), Scalar(0), Scalar(1));
  std::binomial_distribution<int> draw(shots, static_cast<double>(exact));
  return static_cast<Scalar>(draw(rng)) / static_cast<Scalar>(shots);
}

/// Trajectory mean of the all-zeros probability with noise after every gate of
/// the kernel circuit. The circuit has no two-qubit gates, so every trajectory
/// stays a product state and each qubit is unravelled on its own 2-amplitude
/// register; the per-trajectory value is the product of the qubit marginals.
template <typename Derived, typename Other>
typename Derived::Scalar noisy_fidelity_kernel_value(const Eigen::MatrixBase<Derived>& xi,
                                                     const Eigen::MatrixBase<Other>& xj, const GateNoise& noise,
                                                     Rng& rng) {
  using Scalar = typename Derived::Scalar;
  detail::check_pair(xi, xj);
  if (!noise.active()) return fidelity_kernel_value(xi, xj);
  if (noise.trajectories < 1) throw std::invalid_argument("trajectory count must be positive");
  const auto kraus = kraus_operators<Scalar>(noise.channel);
  const auto n = xi.size();
  Scalar sum(0);
  for (int t = 0; t < noise.trajectories; ++t) {
    Scalar p0(1);
    for (Eigen::Index q = 0; q < n; ++q) {
      StateVector<Scalar> qubit(1);
      CircuitRunner<Scalar> run(qubit, kraus, rng);
      run.rotation(0, Axis::Y, static_cast<Scalar>(xi(q)));
      run.rotation(0, Axis::Y, -static_cast<Scalar>(xj(q)));
      p0 *= std::norm(qubit[0]);
    }
    sum += p0;
  }
  return sum / static_cast<Scalar>(noise.trajectories);
}

}  // namespace mqe::qsim
