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

#include <string>
#include <string_view>
#include <vector>

namespace mqe::fusion {

enum class Scheme { Hard, Margin, Probability };

std::string_view to_string(Scheme scheme);
Scheme parse_scheme(std::string_view name);

/// Raw per-sample output of one quantum branch.
struct BranchOutput {
  std::vector<long> ids;
  /// QNN: pre-sigmoid logit. QSVM: raw decision value.
  Eigen::VectorXd margins;
  /// Attack probability (sigmoid / Platt).
  Eigen::VectorXd probs;

  Labels hard_labels() const;
};

/// Two meta-features per sample, column 0 = QNN, column 1 = QSVM.
struct MetaFeatureTable {
  Scheme scheme = Scheme::Probability;
  std::vector<long> ids;
  Eigen::MatrixXd values;

  /// Header: sample_id,scheme,feature_qnn,feature_qsvm,label
  std::string to_csv(const Labels& labels) const;
};

/// Hard: (prob >= 0.5) per branch. Margin: (QNN logit, QSVM decision value).
/// Probability: (QNN sigmoid prob, QSVM Platt prob).
MetaFeatureTable extract_meta_features(const BranchOutput& qnn, const BranchOutput& qsvm, Scheme scheme);

struct DisagreementReport {
  long n = 0;
  long errors_qsvm = 0;
  long errors_qnn = 0;
  long errors_both = 0;
  long disagreements = 0;

  double rate() const { return n == 0 ? 0.0 : static_cast<double>(disagreements) / static_cast<double>(n); }
  std::string to_csv() const;
};

DisagreementReport disagreement_report(const Labels& qnn_labels, const Labels& qsvm_labels,
                                       const Labels& true_labels);

}  // namespace mqe::fusion
