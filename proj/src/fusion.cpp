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

#include "mqe/fusion.hpp"

#include <sstream>

namespace mqe::fusion {

std::string_view to_string(Scheme scheme) {
  switch (scheme) {
    case Scheme::Hard: return "hard";
    case Scheme::Margin: return "margin";
    case Scheme::Probability: return "probability";
  }
  return "unknown";
}

Scheme parse_scheme(std::string_view name) {
  if (name == "hard") return Scheme::Hard;
  if (name == "margin") return Scheme::Margin;
  if (name == "probability" || name == "prob") return Scheme::Probability;
  throw std::invalid_argument("unknown fusion scheme '" + std::string(name) + "'");
}

Labels BranchOutput::hard_labels() const {
  Labels out(static_cast<std::size_t>(probs.size()));
  for (Eigen::Index i = 0; i < probs.size(); ++i) out[static_cast<std::size_t>(i)] = probs(i) >= 0.5 ? 1 : 0;
  return out;
}

MetaFeatureTable extract_meta_features(const BranchOutput& qnn, const BranchOutput& qsvm, Scheme scheme) {
  if (qnn.ids != qsvm.ids) throw std::invalid_argument("branch outputs are not aligned on sample ids");
  const auto n = static_cast<Eigen::Index>(qnn.ids.size());
  if (qnn.probs.size() != n || qsvm.probs.size() != n || qnn.margins.size() != n || qsvm.margins.size() != n) {
    throw std::invalid_argument("branch output lengths disagree with their id lists");
  }
  MetaFeatureTable t;
  t.scheme = scheme;
  t.ids = qnn.ids;
  t.values.resize(n, 2);
  switch (scheme) {
    case Scheme::Hard:
      t.values.col(0) = (qnn.probs.array() >= 0.5).cast<double>();
      t.values.col(1) = (qsvm.probs.array() >= 0.5).cast<double>();
      break;
    case Scheme::Margin:
      t.values.col(0) = qnn.margins;
      t.values.col(1) = qsvm.margins;
      break;
    case Scheme::Probability:
      t.values.col(0) = qnn.probs;
      t.values.col(1) = qsvm.probs;
      break;
  }
  if (!t.values.allFinite()) throw std::invalid_argument("non-finite meta-feature");
  return t;
}

std::string MetaFeatureTable::to_csv(const Labels& labels) const {
  if (labels.size() != ids.size()) throw std::invalid_argument("label count does not match meta-feature rows");
  std::ostringstream os;
  os << "sample_id,scheme,feature_qnn,feature_qsvm,label\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    os << ids[i] << ',' << to_string(scheme) << ',' << format_double(values(r, 0)) << ','
       << format_double(values(r, 1)) << ',' << labels[i] << '\n';
  }
  return os.str();
}

DisagreementReport disagreement_report(const Labels& qnn_labels, const Labels& qsvm_labels,
                                       const Labels& true_labels) {
  if (qnn_labels.size() != qsvm_labels.size() || qnn_labels.size() != true_labels.size()) {
    throw std::invalid_argument("prediction and label vectors differ in length");
  }
  DisagreementReport r;
  r.n = static_cast<long>(true_labels.size());
  for (std::size_t i = 0; i < true_labels.size(); ++i) {
    const bool qnn_wrong = qnn_labels[i] != true_labels[i];
    const bool qsvm_wrong = qsvm_labels[i] != true_labels[i];
    r.errors_qnn += qnn_wrong;
    r.errors_qsvm += qsvm_wrong;
    r.errors_both += qnn_wrong && qsvm_wrong;
    r.disagreements += qnn_labels[i] != qsvm_labels[i];
  }
  return r;
}

std::string DisagreementReport::to_csv() const {
  std::ostringstream os;
  os << "n,errors_qsvm,errors_qnn,errors_both,errors_qsvm_only,errors_qnn_only,disagreements,disagreement_rate\n";
  os << n << ',' << errors_qsvm << ',' << errors_qnn << ',' << errors_both << ',' << errors_qsvm - errors_both << ','
     << errors_qnn - errors_both << ',' << disagreements << ',' << format_double(rate()) << '\n';
  return os.str();
}

}  // namespace mqe::fusion
