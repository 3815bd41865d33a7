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
#include <vector>

namespace mqe::metrics {

struct Confusion {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
};

struct PointMetrics {
  Confusion confusion;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when the corresponding denominator was zero (value reported as 0).
  bool precision_undefined = false;
  bool recall_undefined = false;
};

Confusion confusion_matrix(const Labels& labels, const Labels& predictions);
PointMetrics point_metrics(const Confusion& cm);
PointMetrics confusion_and_point_metrics(const Labels& labels, const Labels& predictions);

/// Mann-Whitney rank statistic; tied scores get half credit.
double roc_auc(const Eigen::VectorXd& scores, const Labels& labels);

/// Step-wise area under the precision-recall curve (average precision):
/// sum over distinct thresholds of (R_k - R_{k-1}) * P_k.
double pr_auc(const Eigen::VectorXd& scores, const Labels& labels);

/// Highest TPR over thresholds (unique scores plus +inf) whose FPR <= cap.
/// A sample is flagged positive when score >= threshold.
double tpr_at_fpr(const Eigen::VectorXd& scores, const Labels& labels, double fpr_cap);

struct CurvePoint {
  double threshold = 0.0;
  double x = 0.0;
  double y = 0.0;
};

/// (FPR, TPR) from (0, 0) at +inf through every distinct threshold.
std::vector<CurvePoint> roc_curve(const Eigen::VectorXd& scores, const Labels& labels);
/// (recall, precision) at every distinct threshold.
std::vector<CurvePoint> pr_curve(const Eigen::VectorXd& scores, const Labels& labels);

double brier(const Eigen::VectorXd& probs, const Labels& labels);

struct ReliabilityBin {
  double lower = 0.0;
  double upper = 0.0;
  long count = 0;
  double mean_confidence = 0.0;
  double accuracy = 0.0;
};

struct Calibration {
  double ece = 0.0;
  std::vector<ReliabilityBin> bins;
};

/// Equal-width bins over [0, 1]; bin k holds [k/M, (k+1)/M), the last bin is
/// closed on the right. Confidence is the mean predicted attack probability
/// and accuracy the observed attack frequency in the bin.
Calibration ece(const Eigen::VectorXd& probs, const Labels& labels, int n_bins = 15);

struct EvalReport {
  std::string name;
  PointMetrics point;
  double roc_auc = 0.0;
  double auprc = 0.0;
  double tpr_at_fpr_0_1pct = 0.0;
  double tpr_at_fpr_1pct = 0.0;
  double brier = 0.0;
  double ece = 0.0;
  std::vector<ReliabilityBin> reliability;
  std::vector<CurvePoint> roc;
  std::vector<CurvePoint> pr;
};

/// Threshold-free metrics are computed from `probs`, point metrics from
/// `predictions`.
EvalReport evaluate(std::string name, const Labels& labels, const Labels& predictions, const Eigen::VectorXd& probs,
                    int n_bins = 15);

std::string summary_csv_header();
std::string summary_csv_row(const EvalReport& report);
std::string confusion_csv(const EvalReport& report);
std::string roc_csv(const EvalReport& report);
std::string pr_csv(const EvalReport& report);
std::string reliability_csv(const EvalReport& report);

}  // namespace mqe::metrics
