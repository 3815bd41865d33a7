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

#include "mqe/qsvm.hpp"

#include <json.hpp>

#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

namespace mqe::qsvm {

namespace {

double kernel_entry(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j,
                    std::uint64_t stream, const KernelOptions& options) {
  const Eigen::VectorXd xi = a.row(i).transpose();
  const Eigen::VectorXd xj = b.row(j).transpose();
  if (options.noise && options.noise->active()) {
    Rng rng = derive_rng(options.noise->seed, stream);
    return qsim::noisy_fidelity_kernel_value(xi, xj, *options.noise, rng);
  }
  if (options.shots > 0) {
    Rng rng = derive_rng(options.shot_seed, stream);
    return qsim::fidelity_kernel_value(xi, xj, options.shots, rng);
  }
  return qsim::fidelity_kernel_value(xi, xj);
}

}  // namespace

Eigen::MatrixXd compute_kernel_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                      const KernelOptions& options) {
  if (&a == &b) return compute_gram_matrix(a, options);
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("kernel blocks need equal feature counts (" + std::to_string(a.cols()) + " vs " +
                                std::to_string(b.cols()) + ")");
  }
  Eigen::MatrixXd k(a.rows(), b.rows());
  const auto cols = static_cast<std::size_t>(b.rows());
  parallel_for(static_cast<std::size_t>(a.rows()) * cols, options.workers, [&](std::size_t t) {
    const auto i = static_cast<Eigen::Index>(t / cols);
    const auto j = static_cast<Eigen::Index>(t % cols);
    k(i, j) = kernel_entry(a, i, b, j, t, options);
  });
  return k;
}

Eigen::MatrixXd compute_gram_matrix(const Eigen::MatrixXd& x, const KernelOptions& options) {
  const Eigen::Index m = x.rows();
  std::vector<std::pair<Eigen::Index, Eigen::Index>> upper;
  upper.reserve(static_cast<std::size_t>(m * (m + 1) / 2));
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) upper.emplace_back(i, j);
  }
  Eigen::MatrixXd k(m, m);
  parallel_for(upper.size(), options.workers, [&](std::size_t t) {
    const auto [i, j] = upper[t];
    const double v = kernel_entry(x, i, x, j, static_cast<std::uint64_t>(i * m + j), options);
    k(i, j) = v;
    k(j, i) = v;
  });
  return k;
}

KernelCheck check_kernel_matrix(const Eigen::MatrixXd& k) {
  if (k.rows() != k.cols()) throw std::invalid_argument("kernel matrix is not square");
  KernelCheck c;
  if (k.size() == 0) return c;
  c.max_asymmetry = (k - k.transpose()).cwiseAbs().maxCoeff();
  c.max_diagonal_error = (k.diagonal().array() - 1.0).abs().maxCoeff();
  const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  c.min_eigenvalue = es.eigenvalues().minCoeff();
  return c;
}

Eigen::MatrixXd clip_to_psd(const Eigen::MatrixXd& k) {
  const Eigen::MatrixXd sym = 0.5 * (k + k.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<Eigen::Index> SvmModel::support_indices() const {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < alphas.size(); ++i) {
    if (alphas(i) > 0.0) idx.push_back(i);
  }
  return idx;
}

double dual_objective(const Eigen::VectorXd& alphas, const Eigen::VectorXd& labels_pm, const Eigen::MatrixXd& k) {
  const Eigen::VectorXd ay = alphas.cwiseProduct(labels_pm);
  return alphas.sum() - 0.5 * ay.dot(k * ay);
}

SvmModel smo_solve(const Eigen::MatrixXd& k_in, const Eigen::VectorXd& y, double C, const SmoOptions& options) {
  const Eigen::Index m = k_in.rows();
  if (k_in.cols() != m) throw std::invalid_argument("kernel matrix is not square");
  if (y.size() != m) throw std::invalid_argument("label count does not match kernel size");
  if (!(C > 0.0)) throw std::invalid_argument("C must be positive");
  bool has_pos = false, has_neg = false;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (y(i) == 1.0) has_pos = true;
    else if (y(i) == -1.0) has_neg = true;
    else throw std::invalid_argument("SVM labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw std::invalid_argument("SVM training needs both classes");

  const KernelCheck check = check_kernel_matrix(k_in);
  if (!check.symmetric(1e-10)) throw std::invalid_argument("kernel matrix is not symmetric");
  Eigen::MatrixXd k = k_in;
  if (!check.psd(options.psd_floor)) {
    std::clog << "warning: kernel min eigenvalue " << check.min_eigenvalue << " below " << options.psd_floor
              << "; clipping negative eigenvalues\n";
    k = clip_to_psd(k_in);
  }

  constexpr double kTau = 1e-12;
  SvmModel model;
  model.C = C;
  model.labels = y;
  Eigen::VectorXd& a = model.alphas;
  a = Eigen::VectorXd::Zero(m);
  // gradient of 1/2 a^T Q a - sum(a)
  Eigen::VectorXd grad = Eigen::VectorXd::Constant(m, -1.0);

  auto in_up = [&](Eigen::Index t) { return (y(t) > 0 && a(t) < C) || (y(t) < 0 && a(t) > 0); };
  auto in_low = [&](Eigen::Index t) { return (y(t) < 0 && a(t) < C) || (y(t) > 0 && a(t) > 0); };

  const long max_iter = options.max_passes * std::max<long>(1, m);
  for (model.iterations = 0; model.iterations < max_iter; ++model.iterations) {
    Eigen::Index i = -1, j = -1;
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < m; ++t) {
      const double v = -y(t) * grad(t);
      if (in_up(t) && v > gmax) gmax = v, i = t;
      if (in_low(t) && v < gmin) gmin = v, j = t;
    }
    if (i < 0 || j < 0 || gmax - gmin < options.stop_gap) break;

    const double old_ai = a(i), old_aj = a(j);
    const double qij = y(i) * y(j) * k(i, j);
    if (y(i) != y(j)) {
      double quad = k(i, i) + k(j, j) + 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = a(i) - a(j);
      a(i) += delta;
      a(j) += delta;
      if (diff > 0) {
        if (a(j) < 0) a(j) = 0, a(i) = diff;
      } else {
        if (a(i) < 0) a(i) = 0, a(j) = -diff;
      }
      if (diff > 0) {
        if (a(i) > C) a(i) = C, a(j) = C - diff;
      } else {
        if (a(j) > C) a(j) = C, a(i) = C + diff;
      }
    } else {
      double quad = k(i, i) + k(j, j) - 2.0 * qij;
      if (quad <= 0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = a(i) + a(j);
      a(i) -= delta;
      a(j) += delta;
      if (sum > C) {
        if (a(i) > C) a(i) = C, a(j) = sum - C;
      } else {
        if (a(j) < 0) a(j) = 0, a(i) = sum;
      }
      if (sum > C) {
        if (a(j) > C) a(j) = C, a(i) = sum - C;
      } else {
        if (a(i) < 0) a(i) = 0, a(j) = sum;
      }
    }
    const double dai = a(i) - old_ai, daj = a(j) - old_aj;
    for (Eigen::Index t = 0; t < m; ++t) {
      grad(t) += y(t) * (y(i) * k(t, i) * dai + y(j) * k(t, j) * daj);
    }
  }

  // v_t = -y_t grad_t; b must satisfy y_t (b - v_t) >= 0 for a_t = 0, <= 0 for
  // a_t = C, and = 0 for free a_t.
  double free_sum = 0.0;
  long n_free = 0;
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  for (Eigen::Index t = 0; t < m; ++t) {
    const double v = -y(t) * grad(t);
    if (a(t) > 0 && a(t) < C) {
      free_sum += v;
      ++n_free;
    } else if ((a(t) <= 0) == (y(t) > 0)) {
      lower = std::max(lower, v);
    } else {
      upper = std::min(upper, v);
    }
  }
  if (n_free > 0) {
    model.b = free_sum / static_cast<double>(n_free);
  } else if (std::isfinite(lower) && std::isfinite(upper)) {
    model.b = 0.5 * (lower + upper);
  } else {
    model.b = std::isfinite(lower) ? lower : upper;
  }
  return model;
}

Eigen::VectorXd decision_values(const SvmModel& model, const Eigen::MatrixXd& k_test_train) {
  if (k_test_train.cols() != model.alphas.size()) {
    throw std::invalid_argument("kernel block has " + std::to_string(k_test_train.cols()) +
                                " columns but the model has " + std::to_string(model.alphas.size()) +
                                " training samples");
  }
  const Eigen::VectorXd ay = model.alphas.cwiseProduct(model.labels);
  return (k_test_train * ay).array() + model.b;
}

KktAudit audit_kkt(const SvmModel& model, const Eigen::MatrixXd& k_train, double tol) {
  KktAudit audit;
  audit.tol = tol;
  const Eigen::VectorXd f = decision_values(model, k_train);
  audit.equality_residual = std::abs(model.alphas.dot(model.labels));
  for (Eigen::Index i = 0; i < model.alphas.size(); ++i) {
    KktRow r;
    r.alpha = model.alphas(i);
    r.label = model.labels(i);
    r.functional_margin = r.label * f(i);
    if (r.alpha <= 0.0) {
      r.status = AlphaStatus::Zero;
      r.violation = std::max(0.0, 1.0 - r.functional_margin);
    } else if (r.alpha >= model.C) {
      r.status = AlphaStatus::Bound;
      r.violation = std::max(0.0, r.functional_margin - 1.0);
    } else {
      r.status = AlphaStatus::Free;
      r.violation = std::abs(r.functional_margin - 1.0);
    }
    audit.max_violation = std::max(audit.max_violation, r.violation);
    audit.rows.push_back(r);
  }
  return audit;
}

std::string KktAudit::to_csv() const {
  std::ostringstream os;
  os << "index,alpha,label,functional_margin,status,violation\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    const char* status = r.status == AlphaStatus::Zero ? "zero" : r.status == AlphaStatus::Free ? "free" : "bound";
    os << i << ',' << format_double(r.alpha) << ',' << format_double(r.label) << ','
       << format_double(r.functional_margin) << ',' << status << ',' << format_double(r.violation) << '\n';
  }
  return os.str();
}

double PlattScaling::probability(double f) const {
  const double z = A * f + B;
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

PlattScaling platt_calibrate(const Eigen::VectorXd& f, const Labels& labels) {
  if (static_cast<std::size_t>(f.size()) != labels.size()) throw std::invalid_argument("length mismatch");
  double n_pos = 0, n_neg = 0;
  for (int y : labels) (y == 1 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("Platt calibration needs both classes");

  // Works in the p = 1 / (1 + exp(a f + c)) parameterization; A = -a, B = -c.
  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  const Eigen::Index n = f.size();
  Eigen::VectorXd t(n);
  for (Eigen::Index i = 0; i < n; ++i) t(i) = labels[static_cast<std::size_t>(i)] == 1 ? hi : lo;

  constexpr int kMaxIter = 100;
  constexpr double kMinStep = 1e-10, kSigma = 1e-12, kEps = 1e-5;
  double a = 0.0;
  double c = std::log((n_neg + 1.0) / (n_pos + 1.0));

  auto objective = [&](double aa, double cc) {
    double v = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = f(i) * aa + cc;
      v += z >= 0 ? t(i) * z + std::log1p(std::exp(-z)) : (t(i) - 1.0) * z + std::log1p(std::exp(z));
    }
    return v;
  };

  double fval = objective(a, c);
  for (int iter = 0; iter < kMaxIter; ++iter) {
    double h11 = kSigma, h22 = kSigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double z = f(i) * a + c;
      double p, q;
      if (z >= 0) {
        p = std::exp(-z) / (1.0 + std::exp(-z));
        q = 1.0 / (1.0 + std::exp(-z));
      } else {
        p = 1.0 / (1.0 + std::exp(z));
        q = std::exp(z) / (1.0 + std::exp(z));
      }
      const double d2 = p * q;
      h11 += f(i) * f(i) * d2;
      h22 += d2;
      h21 += f(i) * d2;
      const double d1 = t(i) - p;
      g1 += f(i) * d1;
      g2 += d1;
    }
    if (std::abs(g1) < kEps && std::abs(g2) < kEps) break;

    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double dc = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * dc;
    double step = 1.0;
    while (step >= kMinStep) {
      const double na = a + step * da, nc = c + step * dc;
      const double nf = objective(na, nc);
      if (nf < fval + 1e-4 * step * gd) {
        a = na, c = nc, fval = nf;
        break;
      }
      step /= 2.0;
    }
    if (step < kMinStep) break;
  }
  return {-a, -c};
}

QsvmFit fit_qsvm(const Eigen::MatrixXd& features, const Labels& labels, const QsvmConfig& config) {
  if (features.rows() == 0) throw std::invalid_argument("empty training set");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw std::invalid_argument("feature and label counts differ");
  }
  Eigen::VectorXd y(features.rows());
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const int l = labels[static_cast<std::size_t>(i)];
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
    y(i) = l == 1 ? 1.0 : -1.0;
  }

  KernelOptions kopts;
  kopts.workers = config.workers;
  const Eigen::MatrixXd gram = compute_gram_matrix(features, kopts);

  QsvmFit fit;
  fit.kernel_check = check_kernel_matrix(gram);
  if (!fit.kernel_check.symmetric() || !fit.kernel_check.unit_diagonal()) {
    throw std::logic_error("fidelity Gram matrix failed symmetry/unit-diagonal checks");
  }
  const SvmModel full = smo_solve(gram, y, config.C, config.smo);
  fit.audit = audit_kkt(full, gram, config.smo.tol);

  // Platt targets come from out-of-fold decision values.
  const long n_pos = std::count(labels.begin(), labels.end(), 1);
  const long n_neg = static_cast<long>(labels.size()) - n_pos;
  Eigen::VectorXd calib_f(y.size());
  if (config.platt_folds >= 2 && std::min(n_pos, n_neg) >= config.platt_folds) {
    const auto fold = stratified_folds(labels, config.platt_folds, config.seed);
    for (int f = 0; f < config.platt_folds; ++f) {
      std::vector<std::size_t> in, out;
      for (std::size_t i = 0; i < labels.size(); ++i) (fold[i] == f ? out : in).push_back(i);
      Eigen::MatrixXd k_in(static_cast<Eigen::Index>(in.size()), static_cast<Eigen::Index>(in.size()));
      Eigen::MatrixXd k_out(static_cast<Eigen::Index>(out.size()), static_cast<Eigen::Index>(in.size()));
      Eigen::VectorXd y_in(static_cast<Eigen::Index>(in.size()));
      for (std::size_t r = 0; r < in.size(); ++r) {
        y_in(static_cast<Eigen::Index>(r)) = y(static_cast<Eigen::Index>(in[r]));
        for (std::size_t s = 0; s < in.size(); ++s) {
          k_in(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) =
              gram(static_cast<Eigen::Index>(in[r]), static_cast<Eigen::Index>(in[s]));
        }
      }
      for (std::size_t r = 0; r < out.size(); ++r) {
        for (std::size_t s = 0; s < in.size(); ++s) {
          k_out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) =
              gram(static_cast<Eigen::Index>(out[r]), static_cast<Eigen::Index>(in[s]));
        }
      }
      const SvmModel fold_model = smo_solve(k_in, y_in, config.C, config.smo);
      const Eigen::VectorXd fv = decision_values(fold_model, k_out);
      for (std::size_t r = 0; r < out.size(); ++r) calib_f(static_cast<Eigen::Index>(out[r])) = fv(static_cast<Eigen::Index>(r));
    }
  } else {
    calib_f = decision_values(full, gram);
  }

  QsvmModel& model = fit.model;
  model.config = config;
  model.platt = platt_calibrate(calib_f, labels);
  const auto sv = full.support_indices();
  model.svm.C = full.C;
  model.svm.b = full.b;
  model.svm.iterations = full.iterations;
  model.svm.alphas.resize(static_cast<Eigen::Index>(sv.size()));
  model.svm.labels.resize(static_cast<Eigen::Index>(sv.size()));
  model.support_features.resize(static_cast<Eigen::Index>(sv.size()), features.cols());
  for (std::size_t r = 0; r < sv.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    model.svm.alphas(row) = full.alphas(sv[r]);
    model.svm.labels(row) = full.labels(sv[r]);
    model.support_features.row(row) = features.row(sv[r]);
  }
  return fit;
}

QsvmScores predict(const QsvmModel& model, const Eigen::MatrixXd& features, const KernelOptions& options) {
  if (features.cols() != model.support_features.cols()) {
    throw std::invalid_argument("feature count does not match the trained QSVM");
  }
  KernelOptions opts = options;
  if (opts.workers == 0) opts.workers = model.config.workers;
  const Eigen::MatrixXd block = compute_kernel_matrix(features, model.support_features, opts);
  QsvmScores s;
  s.margins = decision_values(model.svm, block);
  s.probs = s.margins.unaryExpr([&](double f) { return model.platt.probability(f); });
  return s;
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

std::string to_json(const QsvmModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "mqe.qsvm/1";
  j["C"] = model.svm.C;
  j["b"] = model.svm.b;
  j["smo"] = {{"tol", model.config.smo.tol},
              {"stop_gap", model.config.smo.stop_gap},
              {"max_passes", model.config.smo.max_passes},
              {"iterations", model.svm.iterations}};
  j["platt"] = {{"A", model.platt.A}, {"B", model.platt.B}, {"folds", model.config.platt_folds}};
  j["seed"] = model.config.seed;
  j["n_features"] = model.support_features.cols();
  nlohmann::ordered_json svs = nlohmann::ordered_json::array();
  for (Eigen::Index r = 0; r < model.svm.alphas.size(); ++r) {
    svs.push_back({{"alpha", model.svm.alphas(r)},
                   {"label", static_cast<int>(model.svm.labels(r))},
                   {"x", to_vector(model.support_features.row(r).transpose())}});
  }
  j["support_vectors"] = std::move(svs);
  return j.dump(1) + "\n";
}

QsvmModel qsvm_model_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "mqe.qsvm/1") throw std::invalid_argument("not a QSVM model document");
    QsvmModel m;
    m.config.C = j.at("C");
    m.svm.C = m.config.C;
    m.svm.b = j.at("b");
    m.config.smo.tol = j.at("smo").at("tol");
    m.config.smo.stop_gap = j.at("smo").at("stop_gap");
    m.config.smo.max_passes = j.at("smo").at("max_passes");
    m.svm.iterations = j.at("smo").at("iterations");
    m.platt.A = j.at("platt").at("A");
    m.platt.B = j.at("platt").at("B");
    m.config.platt_folds = j.at("platt").at("folds");
    m.config.seed = j.at("seed");
    const Eigen::Index d = j.at("n_features");
    const auto& svs = j.at("support_vectors");
    const auto n = static_cast<Eigen::Index>(svs.size());
    m.svm.alphas.resize(n);
    m.svm.labels.resize(n);
    m.support_features.resize(n, d);
    for (Eigen::Index r = 0; r < n; ++r) {
      const auto& sv = svs.at(static_cast<std::size_t>(r));
      m.svm.alphas(r) = sv.at("alpha");
      m.svm.labels(r) = sv.at("label").get<int>();
      const auto x = sv.at("x").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(x.size()) != d) throw std::invalid_argument("support vector width mismatch");
      for (Eigen::Index c = 0; c < d; ++c) m.support_features(r, c) = x[static_cast<std::size_t>(c)];
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed QSVM model document: ") + e.what());
  }
}

}  // namespace mqe::qsvm
