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
#include "mqe/qsim.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <numbers>

using namespace mqe;
using namespace mqe::qsim;
using std::numbers::pi;

namespace {

oracle::Channel to_oracle(ChannelKind k) { return static_cast<oracle::Channel>(static_cast<int>(k)); }

/// Textbook Kraus sets, typed out independently of the library.
std::vector<Eigen::MatrixXcd> textbook_kraus(ChannelKind kind, double p) {
  using M = Eigen::MatrixXcd;
  const M id = M::Identity(2, 2);
  M k0(2, 2), k1(2, 2);
  switch (kind) {
    case ChannelKind::Depolarizing:
      return {std::sqrt(1 - p) * id, std::sqrt(p / 3) * oracle::pauli_x(), std::sqrt(p / 3) * oracle::pauli_y(),
              std::sqrt(p / 3) * oracle::pauli_z()};
    case ChannelKind::BitFlip: return {std::sqrt(1 - p) * id, std::sqrt(p) * oracle::pauli_x()};
    case ChannelKind::PhaseFlip: return {std::sqrt(1 - p) * id, std::sqrt(p) * oracle::pauli_z()};
    case ChannelKind::AmplitudeDamping:
      k0 << 1, 0, 0, std::sqrt(1 - p);
      k1 << 0, std::sqrt(p), 0, 0;
      return {k0, k1};
    case ChannelKind::PhaseDamping:
      k0 << 1, 0, 0, std::sqrt(1 - p);
      k1 << 0, 0, 0, std::sqrt(p);
      return {k0, k1};
  }
  return {};
}

using Density = Eigen::MatrixXcd;

void channel_on(Density& rho, int n, int q, ChannelKind kind, double p) {
  Density out = Density::Zero(rho.rows(), rho.cols());
  for (const auto& k : textbook_kraus(kind, p)) {
    const Eigen::MatrixXcd full = oracle::embed_single(n, q, k);
    out += full * rho * full.adjoint();
  }
  rho = out;
}

void gate_on(Density& rho, const Eigen::MatrixXcd& u) { rho = u * rho * u.adjoint(); }

/// <Z_i> of the embed + SEL circuit with the channel after every gate on each
/// touched qubit, propagated exactly on the density matrix.
Eigen::VectorXd noisy_z_oracle(const Eigen::VectorXd& x, const Eigen::VectorXd& theta, int layers, ChannelKind kind,
                               double p) {
  const int n = static_cast<int>(x.size());
  const Eigen::Index dim = Eigen::Index{1} << n;
  Density rho = Density::Zero(dim, dim);
  rho(0, 0) = 1;
  for (int i = 0; i < n; ++i) {
    gate_on(rho, oracle::embed_single(n, i, oracle::rotation(oracle::pauli_y(), x(i))));
    channel_on(rho, n, i, kind, p);
  }
  for (int l = 0; l < layers; ++l) {
    for (int i = 0; i < n; ++i) {
      const auto base = (static_cast<Eigen::Index>(l) * n + i) * 3;
      const Eigen::MatrixXcd paulis[] = {oracle::pauli_x(), oracle::pauli_y(), oracle::pauli_z()};
      for (int k = 0; k < 3; ++k) {
        gate_on(rho, oracle::embed_single(n, i, oracle::rotation(paulis[k], theta(base + k))));
        channel_on(rho, n, i, kind, p);
      }
    }
    if (n > 1) {
      for (int i = 0; i < n; ++i) {
        gate_on(rho, oracle::cnot(n, i, (i + 1) % n));
        channel_on(rho, n, i, kind, p);
        channel_on(rho, n, (i + 1) % n, kind, p);
      }
    }
  }
  Eigen::VectorXd z(n);
  for (int i = 0; i < n; ++i) z(i) = (oracle::embed_single(n, i, oracle::pauli_z()) * rho).trace().real();
  return z;
}

struct Moments {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Vector3d se = Eigen::Vector3d::Zero();
};

/// Trajectory estimates of (<X>, <Y>, <Z>) after one channel application.
Moments trajectory_bloch(const Eigen::Vector2cd& psi0, const NoiseChannel& ch, int trajectories, Rng& rng) {
  Eigen::Vector3d sum = Eigen::Vector3d::Zero(), sq = Eigen::Vector3d::Zero();
  for (int t = 0; t < trajectories; ++t) {
    StateVector<double> s(1, psi0);
    apply_channel_trajectory(s, ch, 0, rng);
    const Eigen::Vector3d r = oracle::bloch(oracle::density(s.amplitudes()));
    sum += r;
    sq += r.cwiseAbs2();
  }
  Moments m;
  m.mean = sum / trajectories;
  const Eigen::Vector3d var = (sq / trajectories - m.mean.cwiseAbs2()).cwiseMax(0.0);
  m.se = (var / trajectories).cwiseSqrt();
  return m;
}

}  // namespace

TEST_CASE("channel names round-trip") {
  for (ChannelKind k : kAllChannelKinds) CHECK(parse_channel_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_channel_kind("thermal"), std::invalid_argument);
}

TEST_CASE("Kraus sets are complete and match the textbook operators") {
  for (ChannelKind k : kAllChannelKinds) {
    for (double p : {0.0, 0.1, 0.3, 0.5, 0.9, 1.0}) {
      const auto ops = kraus_operators<double>({k, p});
      Eigen::Matrix2cd sum = Eigen::Matrix2cd::Zero();
      for (const auto& op : ops) sum += op.adjoint() * op;
      CHECK((sum - Eigen::Matrix2cd::Identity()).norm() < 1e-12);
      const auto ref = textbook_kraus(k, p);
      REQUIRE(ops.size() == ref.size());
      for (std::size_t i = 0; i < ops.size(); ++i) CHECK((Eigen::MatrixXcd(ops[i]) - ref[i]).norm() < 1e-15);
    }
  }
}

TEST_CASE("Kraus maps reproduce the Bloch-vector closed forms") {
  Rng rng(3);
  std::normal_distribution<double> g;
  for (ChannelKind k : kAllChannelKinds) {
    for (double p : {0.1, 0.5, 0.9}) {
      Eigen::Vector2cd psi(std::complex<double>(g(rng), g(rng)), std::complex<double>(g(rng), g(rng)));
      psi.normalize();
      Eigen::Matrix2cd rho = Eigen::Matrix2cd::Zero();
      for (const auto& op : kraus_operators<double>({k, p})) rho += op * oracle::density(psi) * op.adjoint();
      const Eigen::Vector3d expect = oracle::channel_bloch(to_oracle(k), p, oracle::bloch(oracle::density(psi)));
      CHECK((oracle::bloch(rho) - expect).norm() < 1e-12);
    }
  }
}

TEST_CASE("Kraus edge cases") {
  SUBCASE("p = 0 leaves only the identity branch") {
    for (ChannelKind k : kAllChannelKinds) {
      const auto ops = kraus_operators<double>({k, 0.0});
      CHECK((ops[0] - Eigen::Matrix2cd::Identity()).norm() == 0.0);
      for (std::size_t i = 1; i < ops.size(); ++i) CHECK(ops[i].norm() == 0.0);
    }
  }
  SUBCASE("bit flip p = 1 is a deterministic X") {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
      StateVector<double> s(1);
      apply_channel_trajectory(s, {ChannelKind::BitFlip, 1.0}, 0, rng);
      CHECK(std::abs(std::abs(s[1]) - 1.0) < 1e-15);
    }
  }
  SUBCASE("probability outside [0, 1] rejected") {
    CHECK_THROWS_AS(kraus_operators<double>({ChannelKind::Depolarizing, -0.1}), std::invalid_argument);
    CHECK_THROWS_AS(kraus_operators<double>({ChannelKind::BitFlip, 1.5}), std::invalid_argument);
    CHECK_THROWS_AS(kraus_operators<double>({ChannelKind::BitFlip, std::nan("")}), std::invalid_argument);
  }
  SUBCASE("p = 0 trajectory leaves the state untouched") {
    Rng rng(2);
    auto s = angle_embed(Eigen::Vector2d(0.4, 1.3));
    const auto before = s.amplitudes();
    for (ChannelKind k : kAllChannelKinds) apply_channel_trajectory(s, {k, 0.0}, 1, rng);
    CHECK(s.amplitudes() == before);
  }
}

TEST_CASE("trajectories converge to the channel") {
  Rng rng(77);
  SUBCASE("depolarizing on |0>: <Z> -> 1 - 4p/3") {
    for (double p : {0.1, 0.5, 0.9}) {
      const Moments m = trajectory_bloch({1, 0}, {ChannelKind::Depolarizing, p}, 4096, rng);
      CHECK(std::abs(m.mean(2) - (1 - 4 * p / 3)) <= 3 * m.se(2) + 1e-12);
    }
  }
  SUBCASE("amplitude damping on |1>: <Z> -> 2g - 1") {
    for (double p : {0.1, 0.5, 0.9}) {
      const Moments m = trajectory_bloch({0, 1}, {ChannelKind::AmplitudeDamping, p}, 4096, rng);
      CHECK(std::abs(m.mean(2) - (2 * p - 1)) <= 3 * m.se(2) + 1e-12);
    }
  }
  SUBCASE("every channel on a generic state, all three Bloch components") {
    Eigen::Vector2cd psi(std::cos(0.6), std::complex<double>(std::sin(0.6) * std::cos(0.9), std::sin(0.6) * std::sin(0.9)));
    const Eigen::Vector3d r0 = oracle::bloch(oracle::density(psi));
    for (ChannelKind k : kAllChannelKinds) {
      for (double p : {0.1, 0.5, 0.9}) {
        const Moments m = trajectory_bloch(psi, {k, p}, 4096, rng);
        const Eigen::Vector3d expect = oracle::channel_bloch(to_oracle(k), p, r0);
        for (int c = 0; c < 3; ++c) CHECK(std::abs(m.mean(c) - expect(c)) <= 3 * m.se(c) + 1e-12);
      }
    }
  }
}

TEST_CASE("per-gate noise in the QNN circuit matches the density-matrix oracle") {
  Rng rng(8);
  const int n = 2, layers = 1;
  Eigen::VectorXd x(n);
  x << 0.7, -0.4;
  qsim::RotationTensor<double> theta(layers, n);
  for (auto& v : theta.flat()) v = uniform01(rng) * 2 * pi;
  for (ChannelKind k : kAllChannelKinds) {
    const double p = 0.2;
    const GateNoise noise{{k, p}, 20000, 99};
    const Eigen::VectorXd z = qnn::circuit_expectations(x, theta, noise, 0);
    const Eigen::VectorXd expect = noisy_z_oracle(x, theta.flat(), layers, k, p);
    for (int i = 0; i < n; ++i) CHECK(std::abs(z(i) - expect(i)) < 4.0 / std::sqrt(20000.0));
  }
}

TEST_CASE("noisy kernel matches the per-qubit density evolution") {
  Eigen::Vector3d x(0.3, -1.2, 2.0), y(0.1, 0.5, 1.4);
  for (ChannelKind k : kAllChannelKinds) {
    const double p = 0.15;
    // Exact value: each qubit is independent; RY(x), channel, RY(-y), channel.
    double expect = 1.0;
    for (int q = 0; q < 3; ++q) {
      Density rho = Density::Zero(2, 2);
      rho(0, 0) = 1;
      gate_on(rho, oracle::rotation(oracle::pauli_y(), x(q)));
      channel_on(rho, 1, 0, k, p);
      gate_on(rho, oracle::rotation(oracle::pauli_y(), -y(q)));
      channel_on(rho, 1, 0, k, p);
      expect *= rho(0, 0).real();
    }
    Rng rng(12);
    const GateNoise noise{{k, p}, 40000, 0};
    const double got = noisy_fidelity_kernel_value(x, y, noise, rng);
    CHECK(std::abs(got - expect) < 4.0 * 0.5 / std::sqrt(40000.0));
  }
  Rng rng(1);
  CHECK(noisy_fidelity_kernel_value(x, y, GateNoise{{ChannelKind::Depolarizing, 0.0}, 8, 0}, rng) ==
        fidelity_kernel_value(x, y));
}
