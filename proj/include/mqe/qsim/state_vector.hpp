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

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace mqe::qsim {

inline constexpr int kMaxQubits = 26;

template <typename Scalar>
using Complex = std::complex<Scalar>;

template <typename Scalar>
using Matrix2c = Eigen::Matrix<Complex<Scalar>, 2, 2>;

/// Dense statevector over n qubits. Qubit q is bit q of the basis index
/// (qubit 0 is the least-significant bit).
template <typename Scalar = double>
class StateVector {
 public:
  using RealScalar = Scalar;
  using Amplitudes = Eigen::Matrix<Complex<Scalar>, Eigen::Dynamic, 1>;

  /// |0...0>
  explicit StateVector(int n_qubits) : n_qubits_(checked_qubits(n_qubits)) {
    amps_ = Amplitudes::Zero(Eigen::Index{1} << n_qubits_);
    amps_(0) = Complex<Scalar>(1);
  }

  StateVector(int n_qubits, Amplitudes amps) : n_qubits_(checked_qubits(n_qubits)), amps_(std::move(amps)) {
    if (amps_.size() != (Eigen::Index{1} << n_qubits_)) {
      throw std::invalid_argument("amplitude count " + std::to_string(amps_.size()) +
                                  " does not match 2^" + std::to_string(n_qubits_));
    }
  }

  static StateVector basis(int n_qubits, Eigen::Index index) {
    StateVector s(n_qubits);
    if (index < 0 || index >= s.dim()) throw std::out_of_range("basis index out of range");
    s.amps_(0) = Complex<Scalar>(0);
    s.amps_(index) = Complex<Scalar>(1);
    return s;
  }

  int n_qubits() const { return n_qubits_; }
  Eigen::Index dim() const { return amps_.size(); }

  const Amplitudes& amplitudes() const { return amps_; }
  Amplitudes& amplitudes() { return amps_; }

  Complex<Scalar> operator[](Eigen::Index k) const { return amps_(k); }
  Complex<Scalar>& operator[](Eigen::Index k) { return amps_(k); }

  Scalar squared_norm() const { return amps_.squaredNorm(); }

  void normalize() {
    const Scalar n = std::sqrt(squared_norm());
    if (n == Scalar(0)) throw std::domain_error("cannot normalize the zero vector");
    amps_ /= n;
  }

  void check_qubit(int q) const {
    if (q < 0 || q >= n_qubits_) {
      throw std::out_of_range("qubit " + std::to_string(q) + " out of range for " +
                              std::to_string(n_qubits_) + "-qubit state");
    }
  }

 private:
  static int checked_qubits(int n) {
    if (n < 1 || n > kMaxQubits) {
      throw std::invalid_argument("qubit count must be in [1, " + std::to_string(kMaxQubits) + "], got " +
                                  std::to_string(n));
    }
    return n;
  }

  int n_qubits_;
  Amplitudes amps_;
};

/// Applies a 2x2 operator (not necessarily unitary) to qubit q.
template <typename Scalar>
void apply_matrix(StateVector<Scalar>& state, int q, const Matrix2c<Scalar>& m) {
  state.check_qubit(q);
  auto& a = state.amplitudes();
  const Eigen::Index stride = Eigen::Index{1} << q;
  const Eigen::Index dim = state.dim();
  const Complex<Scalar> m00 = m(0, 0), m01 = m(0, 1), m10 = m(1, 0), m11 = m(1, 1);
  for (Eigen::Index hi = 0; hi < dim; hi += 2 * stride) {
    for (Eigen::Index lo = 0; lo < stride; ++lo) {
      const Eigen::Index i0 = hi + lo;
      const Eigen::Index i1 = i0 + stride;
      const Complex<Scalar> a0 = a(i0), a1 = a(i1);
      a(i0) = m00 * a0 + m01 * a1;
      a(i1) = m10 * a0 + m11 * a1;
    }
  }
}

/// ||M_q |psi>||^2 without modifying the state.
template <typename Scalar>
Scalar applied_squared_norm(const StateVector<Scalar>& state, int q, const Matrix2c<Scalar>& m) {
  state.check_qubit(q);
  const auto& a = state.amplitudes();
  const Eigen::Index stride = Eigen::Index{1} << q;
  const Eigen::Index dim = state.dim();
  Scalar total(0);
  for (Eigen::Index hi = 0; hi < dim; hi += 2 * stride) {
    for (Eigen::Index lo = 0; lo < stride; ++lo) {
      const Eigen::Index i0 = hi + lo;
      const Complex<Scalar> a0 = a(i0), a1 = a(i0 + stride);
      total += std::norm(m(0, 0) * a0 + m(0, 1) * a1) + std::norm(m(1, 0) * a0 + m(1, 1) * a1);
    }
  }
  return total;
}

}  // namespace mqe::qsim
