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

#include "mqe/qsim/state_vector.hpp"

#include <string>
#include <utility>
#include <vector>

namespace mqe::qsim {

enum class Axis { X, Y, Z };

/// exp(-i * angle * P / 2) for P in {X, Y, Z}.
template <typename Scalar>
Matrix2c<Scalar> rotation_matrix(Axis axis, Scalar angle) {
  using C = Complex<Scalar>;
  const Scalar c = std::cos(angle / 2);
  const Scalar s = std::sin(angle / 2);
  Matrix2c<Scalar> m;
  switch (axis) {
    case Axis::X:
      m << C(c, 0), C(0, -s), C(0, -s), C(c, 0);
      break;
    case Axis::Y:
      m << C(c, 0), C(-s, 0), C(s, 0), C(c, 0);
      break;
    case Axis::Z:
      m << C(c, -s), C(0, 0), C(0, 0), C(c, s);
      break;
  }
  return m;
}

template <typename Scalar>
void apply_rotation(StateVector<Scalar>& state, int qubit, Axis axis, Scalar angle) {
  if (axis == Axis::Y) {
    // Real-valued fast path; used heavily by embeddings and kernels.
    state.check_qubit(qubit);
    auto& a = state.amplitudes();
    const Scalar c = std::cos(angle / 2), s = std::sin(angle / 2);
    const Eigen::Index stride = Eigen::Index{1} << qubit;
    for (Eigen::Index hi = 0; hi < state.dim(); hi += 2 * stride) {
      for (Eigen::Index lo = 0; lo < stride; ++lo) {
        const Eigen::Index i0 = hi + lo, i1 = i0 + stride;
        const Complex<Scalar> a0 = a(i0), a1 = a(i1);
        a(i0) = c * a0 - s * a1;
        a(i1) = s * a0 + c * a1;
      }
    }
    return;
  }
  apply_matrix(state, qubit, rotation_matrix<Scalar>(axis, angle));
}

template <typename Scalar>
void apply_cnot(StateVector<Scalar>& state, int control, int target) {
  state.check_qubit(control);
  state.check_qubit(target);
  if (control == target) throw std::invalid_argument("CNOT control and target must differ");
  auto& a = state.amplitudes();
  const Eigen::Index cmask = Eigen::Index{1} << control;
  const Eigen::Index tmask = Eigen::Index{1} << target;
  for (Eigen::Index k = 0; k < state.dim(); ++k) {
    if ((k & cmask) && !(k & tmask)) std::swap(a(k), a(k | tmask));
  }
}

/// Pauli-Z expectation on one qubit, computed exactly from amplitudes.
template <typename Scalar>
Scalar expectation_z(const StateVector<Scalar>& state, int qubit) {
  state.check_qubit(qubit);
  const auto& a = state.amplitudes();
  const Eigen::Index mask = Eigen::Index{1} << qubit;
  Scalar z(0);
  for (Eigen::Index k = 0; k < state.dim(); ++k) {
    const Scalar p = std::norm(a(k));
    z += (k & mask) ? -p : p;
  }
  return z;
}

/// All per-qubit Z expectations in one pass over the amplitudes.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> expectations_z(const StateVector<Scalar>& state) {
  const int n = state.n_qubits();
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(n);
  const auto& a = state.amplitudes();
  Scalar total(0);
  for (Eigen::Index k = 0; k < state.dim(); ++k) {
    const Scalar p = std::norm(a(k));
    total += p;
    for (int q = 0; q < n; ++q) {
      if (k & (Eigen::Index{1} << q)) z(q) -= p;
    }
  }
  // z_q = P(bit q = 0) - P(bit q = 1) = total - 2 * P(bit q = 1)
  return z * Scalar(2) + Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Constant(n, total);
}

}  // namespace mqe::qsim
