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
#include "mqe/qsim/state_vector.hpp"

#include <array>
#include <string>
#include <string_view>
#include <vector>

namespace mqe::qsim {

enum class ChannelKind { AmplitudeDamping, BitFlip, PhaseFlip, PhaseDamping, Depolarizing };

inline constexpr std::array<ChannelKind, 5> kAllChannelKinds = {
    ChannelKind::AmplitudeDamping, ChannelKind::BitFlip, ChannelKind::PhaseFlip, ChannelKind::PhaseDamping,
    ChannelKind::Depolarizing};

inline std::string_view to_string(ChannelKind kind) {
  switch (kind) {
    case ChannelKind::AmplitudeDamping: return "amplitude_damping";
    case ChannelKind::BitFlip: return "bit_flip";
    case ChannelKind::PhaseFlip: return "phase_flip";
    case ChannelKind::PhaseDamping: return "phase_damping";
    case ChannelKind::Depolarizing: return "depolarizing";
  }
  return "unknown";
}

inline ChannelKind parse_channel_kind(std::string_view name) {
  for (ChannelKind k : kAllChannelKinds) {
    if (to_string(k) == name) return k;
  }
  throw std::invalid_argument("unknown noise channel '" + std::string(name) + "'");
}

struct NoiseChannel {
  ChannelKind kind = ChannelKind::Depolarizing;
  double probability = 0.0;

  void validate() const {
    if (!(probability >= 0.0 && probability <= 1.0)) {
      throw std::invalid_argument("noise probability must lie in [0, 1], got " + format_double(probability));
    }
  }
};

/// Kraus set of a single-qubit channel. The first operator is always the
/// "no event" branch; for p = 0 it equals I and every other operator is zero.
///
///   depolarizing      sqrt(1-p) I, sqrt(p/3) X, sqrt(p/3) Y, sqrt(p/3) Z
///   bit / phase flip  sqrt(1-p) I, sqrt(p) X (resp. Z)
///   amplitude damping [[1,0],[0,sqrt(1-g)]], [[0,sqrt(g)],[0,0]]
///   phase damping     [[1,0],[0,sqrt(1-g)]], [[0,0],[0,sqrt(g)]]
template <typename Scalar = double>
std::vector<Matrix2c<Scalar>> kraus_operators(const NoiseChannel& channel) {
  channel.validate();
  using C = Complex<Scalar>;
  using M = Matrix2c<Scalar>;
  const Scalar p = static_cast<Scalar>(channel.probability);
  const M id = M::Identity();
  M x, y, z;
  x << C(0), C(1), C(1), C(0);
  y << C(0), C(0, -1), C(0, 1), C(0);
  z << C(1), C(0), C(0), C(-1);

  switch (channel.kind) {
    case ChannelKind::Depolarizing: {
      const Scalar w = std::sqrt(p / 3);
      return {std::sqrt(1 - p) * id, w * x, w * y, w * z};
    }
    case ChannelKind::BitFlip:
      return {std::sqrt(1 - p) * id, std::sqrt(p) * x};
    case ChannelKind::PhaseFlip:
      return {std::sqrt(1 - p) * id, std::sqrt(p) * z};
    case ChannelKind::AmplitudeDamping: {
      M k0, k1;
      k0 << C(1), C(0), C(0), C(std::sqrt(1 - p));
      k1 << C(0), C(std::sqrt(p)), C(0), C(0);
      return {k0, k1};
    }
    case ChannelKind::PhaseDamping: {
      M k0, k1;
      k0 << C(1), C(0), C(0), C(std::sqrt(1 - p));
      k1 << C(0), C(0), C(0), C(std::sqrt(p));
      return {k0, k1};
    }
  }
  throw std::invalid_argument("unknown channel kind");
}

/// One stochastic unraveling step over a precomputed Kraus set: picks K_i with
/// probability ||K_i psi||^2, applies it and renormalizes. Averaging
/// observables over many trajectories reproduces the channel's action on the
/// density matrix.
template <typename Scalar>
void apply_kraus_trajectory(StateVector<Scalar>& state, const std::vector<Matrix2c<Scalar>>& ops, int qubit,
                            Rng& rng) {
  state.check_qubit(qubit);
  std::array<Scalar, 4> weights{};
  if (ops.empty() || ops.size() > weights.size()) throw std::invalid_argument("unsupported Kraus set size");
  Scalar total(0);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    weights[i] = applied_squared_norm(state, qubit, ops[i]);
    total += weights[i];
  }
  const Scalar u = static_cast<Scalar>(uniform01(rng)) * total;
  std::size_t chosen = ops.size();
  Scalar cumulative(0);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    if (weights[i] <= Scalar(0)) continue;
    cumulative += weights[i];
    chosen = i;
    if (u < cumulative) break;
  }
  if (chosen == ops.size()) throw std::logic_error("no Kraus branch has positive weight");

  apply_matrix(state, qubit, ops[chosen]);
  state.amplitudes() /= std::sqrt(weights[chosen]);
}

template <typename Scalar>
void apply_channel_trajectory(StateVector<Scalar>& state, const NoiseChannel& channel, int qubit, Rng& rng) {
  state.check_qubit(qubit);
  if (channel.probability == 0.0) return;
  apply_kraus_trajectory(state, kraus_operators<Scalar>(channel), qubit, rng);
}

}  // namespace mqe::qsim
