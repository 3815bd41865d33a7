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

#include <optional>
#include <string>
#include <vector>

namespace mqe::qsvm {

struct KernelOptions {
  unsigned workers = 0;
  /// 0 = exact amplitudes; otherwise each entry is a shot-sampled estimate.
  int shots = 0;
  std::uint64_t shot_seed = 0;
  /// Trajectory noise on every gate of the kernel circuit.
  std::optional<qsim::GateNoise> noise;
};

/// Fidelity-kernel block: entry (i, j) = K(a_i, b_j).
Eigen::MatrixXd compute_kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                      const KernelOptions& options = {});

/// Square Gram matrix; the upper triangle is computed and mirrored.
Eigen::MatrixXd compute_gram_matrix(const Eigen::MatrixXd& x, const KernelOptions& options = {});

struct KernelCheck {
  double max_asymmetry = 0.0;
  double max_diagonal_error = 0.0;
  double min_eigenvalue = 0.0;

  bool symmetric(double tol = 1e-10) const { return max_asymmetry <= tol; }
  bool unit_diagonal(double tol = 1e-10) const { return max_diagonal_error <= tol; }
  bool psd(double floor = -1e-8) const { return min_eigenvalue >= floor; }
};

KernelCheck check_kernel_matrix(const Eigen::MatrixXd& k);

/// Eigenvalues below zero are set to zero and the matrix is rebuilt.
Eigen::MatrixXd clip_to_psd(const Eigen::MatrixXd& k);

/// Dual solution over the training rows. labels are +-1.
struct SvmModel {
  Eigen::VectorXd alphas;
  Eigen::VectorXd labels;
  double b = 0.0;
  double C = 10.0;
  long iterations = 0;

  std::vector<Eigen::Index> support_indices() const;
};

struct SmoOptions {
  /// KKT tolerance used by the audit.
  double tol = 1e-3;
  /// Solver stops once the maximal violating pair gap drops below this.
  double stop_gap = 1e-6;
  /// Iteration cap = max_passes * m.
  long max_passes = 10000;
  double psd_floor = -1e-8;
};

/// Maximizes sum(a) - 1/2 a^T Q a with Q_ij = y_i y_j K_ij, 0 <= a_i <= C,
/// y^T a = 0, by SMO with maximal-violating-pair selection. b is the mean
/// margin residual over unbounded support vectors (midpoint of the feasible
/// interval when there are none).
SvmModel smo_solve(const Eigen::MatrixXd& k, const Eigen::VectorXd& labels_pm, double C,
                   const SmoOptions& options = {});

double dual_objective(const Eigen::VectorXd& alphas, const Eigen::VectorXd& labels_pm, const Eigen::MatrixXd& k);

/// sum_i a_i y_i K(x_i, x) + b for every row of the test-by-train block.
Eigen::VectorXd decision_values(const SvmModel& model, const Eigen::MatrixXd& k_test_train);

enum class AlphaStatus { Zero, Free, Bound };

struct KktRow {
  double alpha = 0.0;
  double label = 0.0;
  double functional_margin = 0.0;
  AlphaStatus status = AlphaStatus::Zero;
  double violation = 0.0;
};

struct KktAudit {
  std::vector<KktRow> rows;
  double tol = 1e-3;
  double max_violation = 0.0;
  double equality_residual = 0.0;
  bool ok() const { return max_violation <= tol && equality_residual <= 1e-8; }
  std::string to_csv() const;
};

KktAudit audit_kkt(const SvmModel& model, const Eigen::MatrixXd& k_train, double tol = 1e-3);

/// p = sigmoid(A f + B).
struct PlattScaling {
  double A = 0.0;
  double B = 0.0;
  double probability(double decision_value) const;
};

/// Regularized maximum-likelihood sigmoid fit (Newton with backtracking,
/// smoothed targets (N+ + 1)/(N+ + 2) and 1/(N- + 2)).
PlattScaling platt_calibrate(const Eigen::VectorXd& decision_values, const Labels& labels);

struct QsvmConfig {
  double C = 10.0;
  SmoOptions smo;
  int platt_folds = 3;
  std::uint64_t seed = 11;
  unsigned workers = 0;
};

/// Trained branch: dual coefficients restricted to support vectors, their
/// features, and the Platt sigmoid.
struct QsvmModel {
  QsvmConfig config;
  SvmModel svm;
  Eigen::MatrixXd support_features;
  PlattScaling platt;
};

struct QsvmFit {
  QsvmModel model;
  KktAudit audit;
  KernelCheck kernel_check;
};

/// labels in {0, 1}; benign (0) maps to -1 and attack (1) to +1.
QsvmFit fit_qsvm(const Eigen::MatrixXd& features, const Labels& labels, const QsvmConfig& config);

struct QsvmScores {
  Eigen::VectorXd margins;
  Eigen::VectorXd probs;
};

QsvmScores predict(const QsvmModel& model, const Eigen::MatrixXd& features, const KernelOptions& options = {});

std::string to_json(const QsvmModel& model);
QsvmModel qsvm_model_from_json(const std::string& text);

}  // namespace mqe::qsvm
