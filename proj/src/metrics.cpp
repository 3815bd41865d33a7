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

#include "mqe/metrics.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace mqe::metrics {

namespace {

void check_binary(const Labels& labels) {
  for (int l : labels) {
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
  }
}

struct ClassCounts {
  long pos = 0;
  long neg = 0;
};

ClassCounts check_scored(const Eigen::VectorXd& scores, const Labels& labels) {
  if (static_cast<std::size_t>(scores.size()) != labels.size()) {
    throw std::invalid_argument("score and label counts differ");
  }
  check_binary(labels);
  ClassCounts c;
  for (int l : labels) (l == 1 ? c.pos : c.neg) += 1;
  if (c.pos == 0 || c.neg == 0) throw std::invalid_argument("metric needs both classes present");
  if (!scores.allFinite()) throw std::invalid_argument("scores must be finite");
  return c;
}

/// Cumulative (tp, fp) after admitting every sample with score >= each
/// distinct score, highest threshold first.
struct Sweep {
  std::vector<double> thresholds;
  std::vector<long> tp;
  std::vector<long> fp;
};

Sweep sweep(const Eigen::VectorXd& scores, const Labels& labels) {
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
  });
  Sweep s;
  long tp = 0, fp = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (labels[order[k]] == 1 ? tp : fp) += 1;
    const double v = scores(static_cast<Eigen::Index>(order[k]));
    if (k + 1 < order.size() && scores(static_cast<Eigen::Index>(order[k + 1])) == v) continue;
    s.thresholds.push_back(v);
    s.tp.push_back(tp);
    s.fp.push_back(fp);
  }
  return s;
}

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

Confusion confusion_matrix(const Labels& labels, const Labels& predictions) {
  if (labels.size() != predictions.size()) throw std::invalid_argument("label and prediction counts differ");
  check_binary(labels);
  check_binary(predictions);
  Confusion cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) (predictions[i] == 1 ? cm.tp : cm.fn) += 1;
    else (predictions[i] == 1 ? cm.fp : cm.tn) += 1;
  }
  return cm;
}

PointMetrics point_metrics(const Confusion& cm) {
  PointMetrics m;
  m.confusion = cm;
  const auto d = [](long v) { return static_cast<double>(v); };
  m.accuracy = safe_ratio(d(cm.tp + cm.tn), d(cm.total()));
  m.precision_undefined = cm.tp + cm.fp == 0;
  m.recall_undefined = cm.tp + cm.fn == 0;
  m.precision = safe_ratio(d(cm.tp), d(cm.tp + cm.fp));
  m.recall = safe_ratio(d(cm.tp), d(cm.tp + cm.fn));
  m.f1 = safe_ratio(2.0 * d(cm.tp), 2.0 * d(cm.tp) + d(cm.fp) + d(cm.fn));
  return m;
}

PointMetrics confusion_and_point_metrics(const Labels& labels, const Labels& predictions) {
  return point_metrics(confusion_matrix(labels, predictions));
}

double roc_auc(const Eigen::VectorXd& scores, const Labels& labels) {
  const ClassCounts c = check_scored(scores, labels);
  const std::size_t n = labels.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
  });
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores(static_cast<Eigen::Index>(order[j + 1])) == scores(static_cast<Eigen::Index>(order[i]))) ++j;
    // 1-based midrank of the tie group [i, j]
    const double mid = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum += mid;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(c.pos), nn = static_cast<double>(c.neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double pr_auc(const Eigen::VectorXd& scores, const Labels& labels) {
  const ClassCounts c = check_scored(scores, labels);
  const Sweep s = sweep(scores, labels);
  double area = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < s.thresholds.size(); ++k) {
    const double recall = static_cast<double>(s.tp[k]) / static_cast<double>(c.pos);
    const double precision = static_cast<double>(s.tp[k]) / static_cast<double>(s.tp[k] + s.fp[k]);
    area += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return area;
}

double tpr_at_fpr(const Eigen::VectorXd& scores, const Labels& labels, double fpr_cap) {
  if (!(fpr_cap >= 0.0 && fpr_cap <= 1.0)) throw std::invalid_argument("FPR cap must lie in [0, 1]");
  const ClassCounts c = check_scored(scores, labels);
  const Sweep s = sweep(scores, labels);
  double best = 0.0;  // threshold +inf
  for (std::size_t k = 0; k < s.thresholds.size(); ++k) {
    const double fpr = static_cast<double>(s.fp[k]) / static_cast<double>(c.neg);
    if (fpr <= fpr_cap + 1e-12) best = std::max(best, static_cast<double>(s.tp[k]) / static_cast<double>(c.pos));
  }
  return best;
}

std::vector<CurvePoint> roc_curve(const Eigen::VectorXd& scores, const Labels& labels) {
  const ClassCounts c = check_scored(scores, labels);
  const Sweep s = sweep(scores, labels);
  std::vector<CurvePoint> pts{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  for (std::size_t k = 0; k < s.thresholds.size(); ++k) {
    pts.push_back({s.thresholds[k], static_cast<double>(s.fp[k]) / static_cast<double>(c.neg),
                   static_cast<double>(s.tp[k]) / static_cast<double>(c.pos)});
  }
  return pts;
}

std::vector<CurvePoint> pr_curve(const Eigen::VectorXd& scores, const Labels& labels) {
  const ClassCounts c = check_scored(scores, labels);
  const Sweep s = sweep(scores, labels);
  std::vector<CurvePoint> pts;
  for (std::size_t k = 0; k < s.thresholds.size(); ++k) {
    pts.push_back({s.thresholds[k], static_cast<double>(s.tp[k]) / static_cast<double>(c.pos),
                   static_cast<double>(s.tp[k]) / static_cast<double>(s.tp[k] + s.fp[k])});
  }
  return pts;
}

double brier(const Eigen::VectorXd& probs, const Labels& labels) {
  if (static_cast<std::size_t>(probs.size()) != labels.size()) throw std::invalid_argument("length mismatch");
  check_binary(labels);
  if (labels.empty()) throw std::invalid_argument("Brier score of an empty set");
  double total = 0.0;
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs(i);
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
    const double d = p - labels[static_cast<std::size_t>(i)];
    total += d * d;
  }
  return total / static_cast<double>(labels.size());
}

Calibration ece(const Eigen::VectorXd& probs, const Labels& labels, int n_bins) {
  if (n_bins < 1) throw std::invalid_argument("ECE needs at least one bin");
  if (static_cast<std::size_t>(probs.size()) != labels.size()) throw std::invalid_argument("length mismatch");
  check_binary(labels);
  Calibration cal;
  cal.bins.resize(static_cast<std::size_t>(n_bins));
  std::vector<double> conf_sum(cal.bins.size(), 0.0), pos_sum(cal.bins.size(), 0.0);
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    const double p = probs(i);
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("probabilities must lie in [0, 1]");
    const auto b = std::min(static_cast<std::size_t>(p * n_bins), cal.bins.size() - 1);
    cal.bins[b].count += 1;
    conf_sum[b] += p;
    pos_sum[b] += labels[static_cast<std::size_t>(i)];
  }
  const double n = static_cast<double>(labels.size());
  for (std::size_t b = 0; b < cal.bins.size(); ++b) {
    auto& bin = cal.bins[b];
    bin.lower = static_cast<double>(b) / n_bins;
    bin.upper = static_cast<double>(b + 1) / n_bins;
    if (bin.count == 0) continue;
    const double cnt = static_cast<double>(bin.count);
    bin.mean_confidence = conf_sum[b] / cnt;
    bin.accuracy = pos_sum[b] / cnt;
    cal.ece += cnt / n * std::abs(bin.accuracy - bin.mean_confidence);
  }
  return cal;
}

EvalReport evaluate(std::string name, const Labels& labels, const Labels& predictions, const Eigen::VectorXd& probs,
                    int n_bins) {
  EvalReport r;
  r.name = std::move(name);
  r.point = confusion_and_point_metrics(labels, predictions);
  r.roc_auc = roc_auc(probs, labels);
  r.auprc = pr_auc(probs, labels);
  r.tpr_at_fpr_0_1pct = tpr_at_fpr(probs, labels, 0.001);
  r.tpr_at_fpr_1pct = tpr_at_fpr(probs, labels, 0.01);
  r.brier = brier(probs, labels);
  const Calibration cal = ece(probs, labels, n_bins);
  r.ece = cal.ece;
  r.reliability = cal.bins;
  r.roc = roc_curve(probs, labels);
  r.pr = pr_curve(probs, labels);
  return r;
}

std::string summary_csv_header() {
  return "model,n,tp,fp,tn,fn,accuracy,precision,recall,f1,precision_undefined,recall_undefined,roc_auc,auprc,"
         "tpr_at_fpr_0.1pct,tpr_at_fpr_1pct,brier,ece\n";
}

std::string summary_csv_row(const EvalReport& r) {
  const auto& c = r.point.confusion;
  std::ostringstream os;
  os << r.name << ',' << c.total() << ',' << c.tp << ',' << c.fp << ',' << c.tn << ',' << c.fn << ','
     << format_double(r.point.accuracy) << ',' << format_double(r.point.precision) << ','
     << format_double(r.point.recall) << ',' << format_double(r.point.f1) << ',' << r.point.precision_undefined
     << ',' << r.point.recall_undefined << ',' << format_double(r.roc_auc) << ',' << format_double(r.auprc) << ','
     << format_double(r.tpr_at_fpr_0_1pct) << ',' << format_double(r.tpr_at_fpr_1pct) << ','
     << format_double(r.brier) << ',' << format_double(r.ece) << '\n';
  return os.str();
}

std::string confusion_csv(const EvalReport& r) {
  const auto& c = r.point.confusion;
  std::ostringstream os;
  os << "actual,predicted_benign,predicted_attack\n";
  os << "benign," << c.tn << ',' << c.fp << '\n';
  os << "attack," << c.fn << ',' << c.tp << '\n';
  return os.str();
}

namespace {

std::string curve_csv(const std::vector<CurvePoint>& pts, const char* header) {
  std::ostringstream os;
  os << header << '\n';
  for (const auto& p : pts) os << format_double(p.threshold) << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
  return os.str();
}

}  // namespace

std::string roc_csv(const EvalReport& r) { return curve_csv(r.roc, "threshold,fpr,tpr"); }
std::string pr_csv(const EvalReport& r) { return curve_csv(r.pr, "threshold,recall,precision"); }

std::string reliability_csv(const EvalReport& r) {
  std::ostringstream os;
  os << "bin,lower,upper,count,mean_confidence,accuracy\n";
  for (std::size_t b = 0; b < r.reliability.size(); ++b) {
    const auto& bin = r.reliability[b];
    os << b << ',' << format_double(bin.lower) << ',' << format_double(bin.upper) << ',' << bin.count << ','
       << format_double(bin.mean_confidence) << ',' << format_double(bin.accuracy) << '\n';
  }
  return os.str();
}

}  // namespace mqe::metrics
