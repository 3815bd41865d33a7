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

#include "mqe/pipeline.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <json.hpp>
#include <openssl/evp.h>

#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

namespace mqe::pipeline {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& items, const std::function<std::string(const T&)>& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  return join<std::string>(items, [](const std::string& s) { return s; });
}

double to_double(const std::string& key, const std::string& v) {
  const auto d = prep::parse_number(v);
  if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
  Int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
  }
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

struct Key {
  const char* section;
  const char* name;
  Setter set;
  std::function<std::string(const RunConfig&)> get;
};

std::string fmt(double v) { return format_double(v); }
template <typename Int>
std::string fmt_int(Int v) { return std::to_string(v); }

#define MQE_DOUBLE(sec, key, field)                                                                  \
  Key{sec, key, [](RunConfig& c, const std::string& k, const std::string& v) { c.field = to_double(k, v); }, \
      [](const RunConfig& c) { return fmt(c.field); }}
#define MQE_INT(sec, key, field)                                                                     \
  Key{sec, key,                                                                                      \
      [](RunConfig& c, const std::string& k, const std::string& v) {                                 \
        c.field = to_int<std::decay_t<decltype(c.field)>>(k, v);                                     \
      },                                                                                             \
      [](const RunConfig& c) { return fmt_int(c.field); }}
#define MQE_LIST(sec, key, field)                                                                          \
  Key{sec, key, [](RunConfig& c, const std::string&, const std::string& v) { c.field = split_list(v); }, \
      [](const RunConfig& c) { return join(c.field); }}

const std::vector<Key>& keys() {
  static const std::vector<Key> table{
      Key{"data", "path", [](RunConfig& c, const std::string&, const std::string& v) { c.data_path = v; },
          [](const RunConfig& c) { return c.data_path; }},
      Key{"data", "label_column", [](RunConfig& c, const std::string&, const std::string& v) { c.prep.label_column = v; },
          [](const RunConfig& c) { return c.prep.label_column; }},
      Key{"data", "benign_value", [](RunConfig& c, const std::string&, const std::string& v) { c.prep.benign_value = v; },
          [](const RunConfig& c) { return c.prep.benign_value; }},
      MQE_LIST("data", "categorical", prep.categorical),
      MQE_LIST("data", "numeric", prep.numeric),
      MQE_LIST("data", "drop", prep.drop_columns),
      MQE_INT("data", "subsample", prep.subsample),
      MQE_INT("prep", "n_components", prep.n_components),
      MQE_DOUBLE("prep", "train_ratio", prep.train_ratio),
      MQE_INT("prep", "seed", prep.seed),
      MQE_INT("qnn", "n_qubits", qnn.n_qubits),
      MQE_INT("qnn", "layers", qnn.layers),
      MQE_DOUBLE("qnn", "learning_rate", qnn.learning_rate),
      MQE_INT("qnn", "batch_size", qnn.batch_size),
      MQE_INT("qnn", "epochs", qnn.epochs),
      MQE_DOUBLE("qnn", "validation_fraction", qnn.validation_fraction),
      MQE_INT("qnn", "seed", qnn.seed),
      MQE_DOUBLE("qsvm", "C", qsvm.C),
      MQE_DOUBLE("qsvm", "kkt_tol", qsvm.smo.tol),
      MQE_DOUBLE("qsvm", "stop_gap", qsvm.smo.stop_gap),
      MQE_INT("qsvm", "max_passes", qsvm.smo.max_passes),
      MQE_INT("qsvm", "platt_folds", qsvm.platt_folds),
      MQE_INT("qsvm", "seed", qsvm.seed),
      MQE_INT("forest", "n_trees", forest.n_trees),
      MQE_INT("forest", "max_depth", forest.max_depth),
      MQE_INT("forest", "features_per_split", forest.features_per_split),
      MQE_INT("forest", "seed", forest.seed),
      Key{"fusion", "schemes",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.fusion.schemes.clear();
            for (const auto& s : split_list(v)) {
              try {
                c.fusion.schemes.push_back(fusion::parse_scheme(s));
              } catch (const std::invalid_argument& e) {
                throw ConfigError(k + ": " + e.what());
              }
            }
          },
          [](const RunConfig& c) {
            return join<fusion::Scheme>(c.fusion.schemes,
                                        [](const fusion::Scheme& s) { return std::string(fusion::to_string(s)); });
          }},
      MQE_INT("fusion", "folds", fusion.folds),
      MQE_INT("fusion", "seed", fusion.seed),
      Key{"noise", "channels",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.noise.channels.clear();
            for (const auto& s : split_list(v)) {
              try {
                c.noise.channels.push_back(qsim::parse_channel_kind(s));
              } catch (const std::invalid_argument& e) {
                throw ConfigError(k + ": " + e.what());
              }
            }
          },
          [](const RunConfig& c) {
            return join<qsim::ChannelKind>(c.noise.channels,
                                           [](const qsim::ChannelKind& s) { return std::string(qsim::to_string(s)); });
          }},
      Key{"noise", "probabilities",
          [](RunConfig& c, const std::string& k, const std::string& v) {
            c.noise.probabilities.clear();
            for (const auto& s : split_list(v)) c.noise.probabilities.push_back(to_double(k, s));
          },
          [](const RunConfig& c) { return join<double>(c.noise.probabilities, [](const double& p) { return fmt(p); }); }},
      MQE_INT("noise", "trajectories", noise.trajectories),
      MQE_INT("noise", "seed", noise.seed),
      MQE_INT("run", "workers", workers),
      Key{"run", "out", [](RunConfig& c, const std::string&, const std::string& v) { c.out = v; },
          [](const RunConfig& c) { return c.out; }},
  };
  return table;
}

#undef MQE_DOUBLE
#undef MQE_INT
#undef MQE_LIST

std::string read_text(const fs::path& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError(what + " not found at " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

unsigned workers_of(const RunConfig& c) { return c.workers; }

Eigen::VectorXd class_counts(const Labels& y) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(2);
  for (int v : y) c(v) += 1;
  return c;
}

void write_config(const RunConfig& config, const std::string& verb) {
  write_text(Layout{config.out}.reports() / (verb + "_config.ini"), to_ini(config));
}

Split load_split(const RunConfig& config, const std::string& name) {
  const fs::path path = Layout{config.out}.prep() / (name + ".csv");
  if (!fs::exists(path)) throw ArtifactError(name + " split not found at " + path.string() + "; run prep first");
  return read_split(path);
}

qnn::QnnModel load_qnn(const RunConfig& config) {
  const fs::path path = Layout{config.out}.models() / "qnn.json";
  if (!fs::exists(path)) throw ArtifactError("QNN model not found at " + path.string() + "; run train-qnn first");
  try {
    return qnn::qnn_model_from_json(read_text(path, "QNN model"));
  } catch (const std::invalid_argument& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

qsvm::QsvmModel load_qsvm(const RunConfig& config) {
  const fs::path path = Layout{config.out}.models() / "qsvm.json";
  if (!fs::exists(path)) throw ArtifactError("QSVM model not found at " + path.string() + "; run train-qsvm first");
  try {
    return qsvm::qsvm_model_from_json(read_text(path, "QSVM model"));
  } catch (const std::invalid_argument& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

fs::path forest_path(const RunConfig& config, fusion::Scheme s) {
  return Layout{config.out}.models() / ("forest_" + std::string(fusion::to_string(s)) + ".json");
}

forest::Forest load_forest(const RunConfig& config, fusion::Scheme s) {
  const fs::path path = forest_path(config, s);
  if (!fs::exists(path)) throw ArtifactError("forest model not found at " + path.string() + "; run fuse-eval first");
  try {
    return forest::forest_from_json(read_text(path, "forest model"));
  } catch (const std::invalid_argument& e) {
    throw ArtifactError(path.string() + ": " + e.what());
  }
}

void check_width(const Split& s, int n_qubits, const std::string& what) {
  if (s.features.cols() != n_qubits) {
    throw ConfigError(what + " has " + std::to_string(s.features.cols()) + " features but the model uses " +
                      std::to_string(n_qubits) + " qubits");
  }
}

fusion::BranchOutput qnn_output(const qnn::QnnScores& s, const std::vector<long>& ids) {
  return {ids, s.logits, s.probs};
}

fusion::BranchOutput qsvm_output(const qsvm::QsvmScores& s, const std::vector<long>& ids) {
  return {ids, s.margins, s.probs};
}

std::string branch_csv(const fusion::BranchOutput& q, const fusion::BranchOutput& s, const Labels& y) {
  std::ostringstream os;
  os << "sample_id,label,qnn_logit,qnn_prob,qsvm_margin,qsvm_prob\n";
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    os << q.ids[i] << ',' << y[i] << ',' << format_double(q.margins(r)) << ',' << format_double(q.probs(r)) << ','
       << format_double(s.margins(r)) << ',' << format_double(s.probs(r)) << '\n';
  }
  return os.str();
}

void write_report(const Layout& layout, const metrics::EvalReport& r) {
  write_text(layout.reports() / ("eval_" + r.name + ".csv"), metrics::summary_csv_header() + metrics::summary_csv_row(r));
  write_text(layout.reports() / ("confusion_" + r.name + ".csv"), metrics::confusion_csv(r));
  write_text(layout.curves() / ("roc_" + r.name + ".csv"), metrics::roc_csv(r));
  write_text(layout.curves() / ("pr_" + r.name + ".csv"), metrics::pr_csv(r));
  write_text(layout.curves() / ("reliability_" + r.name + ".csv"), metrics::reliability_csv(r));
}

}  // namespace

RunConfig parse_config(std::istream& in, const fs::path& base_dir) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError("key '" + section + "' must live inside a [section]");
    }
    for (const auto& [name, value] : body) {
      const auto& table = keys();
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Key& k) { return section == k.section && name == k.name; });
      if (it == table.end()) throw ConfigError("unknown config key '" + section + "." + name + "'");
      it->set(config, section + "." + name, trim(value.data()));
    }
  }
  if (!config.data_path.empty() && fs::path(config.data_path).is_relative() && !base_dir.empty()) {
    config.data_path = (base_dir / config.data_path).lexically_normal().string();
  }
  return config;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  return parse_config(in, path.parent_path());
}

std::string to_ini(const RunConfig& config) {
  std::ostringstream os;
  std::string section;
  for (const auto& k : keys()) {
    if (std::string(k.section) == "run" && std::string(k.name) == "out") continue;
    if (section != k.section) {
      if (!section.empty()) os << '\n';
      section = k.section;
      os << '[' << section << "]\n";
    }
    os << k.name << " = " << k.get(config) << '\n';
  }
  return os.str();
}

void apply_seed(RunConfig& config, std::uint64_t seed) {
  config.prep.seed = seed;
  config.qnn.seed = seed + 1;
  config.qsvm.seed = seed + 2;
  config.forest.seed = seed + 3;
  config.fusion.seed = seed + 4;
  config.noise.seed = seed + 5;
}

void validate(const RunConfig& c) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(c.prep.n_components >= 1, "prep.n_components must be >= 1");
  require(c.prep.train_ratio > 0.0 && c.prep.train_ratio < 1.0, "prep.train_ratio must lie in (0, 1)");
  require(!c.prep.label_column.empty(), "data.label_column must not be empty");
  require(c.qnn.n_qubits >= 1 && c.qnn.n_qubits <= qsim::kMaxQubits,
          "qnn.n_qubits must lie in [1, " + std::to_string(qsim::kMaxQubits) + "]");
  require(c.qnn.n_qubits == c.prep.n_components,
          "qnn.n_qubits (" + std::to_string(c.qnn.n_qubits) + ") must equal prep.n_components (" +
              std::to_string(c.prep.n_components) + "): one feature per qubit");
  require(c.qnn.layers >= 1, "qnn.layers must be >= 1");
  require(c.qnn.learning_rate > 0.0, "qnn.learning_rate must be > 0");
  require(c.qnn.batch_size >= 1, "qnn.batch_size must be >= 1");
  require(c.qnn.epochs >= 1, "qnn.epochs must be >= 1");
  require(c.qnn.validation_fraction >= 0.0 && c.qnn.validation_fraction < 1.0,
          "qnn.validation_fraction must lie in [0, 1)");
  require(c.qsvm.C > 0.0, "qsvm.C must be > 0");
  require(c.qsvm.smo.tol > 0.0 && c.qsvm.smo.stop_gap > 0.0, "qsvm tolerances must be > 0");
  require(c.qsvm.smo.max_passes >= 1, "qsvm.max_passes must be >= 1");
  require(c.qsvm.platt_folds >= 2, "qsvm.platt_folds must be >= 2");
  require(c.forest.n_trees >= 1, "forest.n_trees must be >= 1");
  require(c.forest.max_depth >= 0, "forest.max_depth must be >= 0 (0 = unrestricted)");
  require(c.forest.features_per_split >= 0, "forest.features_per_split must be >= 0 (0 = auto)");
  require(!c.fusion.schemes.empty(), "fusion.schemes must name at least one scheme");
  for (std::size_t i = 0; i < c.fusion.schemes.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      require(c.fusion.schemes[i] != c.fusion.schemes[j],
              "fusion.schemes lists '" + std::string(fusion::to_string(c.fusion.schemes[i])) + "' twice");
    }
  }
  require(c.fusion.folds >= 2, "fusion.folds must be >= 2");
  require(c.noise.trajectories >= 1, "noise.trajectories must be >= 1");
  for (double p : c.noise.probabilities) require(p >= 0.0 && p <= 1.0, "noise.probabilities must lie in [0, 1]");
  require(!c.out.empty(), "run.out must not be empty");
}

std::string split_csv(const Split& split) {
  std::ostringstream os;
  os << "sample_id,label";
  for (Eigen::Index c = 0; c < split.features.cols(); ++c) os << ",f" << c;
  os << '\n';
  for (std::size_t i = 0; i < split.ids.size(); ++i) {
    os << split.ids[i] << ',' << split.labels[i];
    for (Eigen::Index c = 0; c < split.features.cols(); ++c) {
      os << ',' << format_double(split.features(static_cast<Eigen::Index>(i), c));
    }
    os << '\n';
  }
  return os.str();
}

Split read_split(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ArtifactError("split not found at " + path.string());
  const prep::Table t = prep::parse_csv(in);
  if (t.columns.size() < 3 || t.columns[0].name != "sample_id" || t.columns[1].name != "label") {
    throw DataError(path.string() + ": expected header sample_id,label,f0,...");
  }
  Split s;
  const auto n = static_cast<Eigen::Index>(t.row_count());
  const auto d = static_cast<Eigen::Index>(t.columns.size() - 2);
  s.features.resize(n, d);
  for (std::size_t r = 0; r < t.row_count(); ++r) {
    const auto id = prep::parse_number(t.cells[r][0]);
    const auto label = prep::parse_number(t.cells[r][1]);
    if (!id || !label || (*label != 0.0 && *label != 1.0)) {
      throw DataError(path.string() + ": bad id or label on data row " + std::to_string(r));
    }
    s.ids.push_back(static_cast<long>(*id));
    s.labels.push_back(static_cast<int>(*label));
    for (Eigen::Index c = 0; c < d; ++c) {
      const auto v = prep::parse_number(t.cells[r][static_cast<std::size_t>(c) + 2]);
      if (!v) throw DataError(path.string() + ": non-numeric feature on data row " + std::to_string(r));
      s.features(static_cast<Eigen::Index>(r), c) = *v;
    }
  }
  return s;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xf];
  }
  return out;
}

prep::PrepStats cmd_prep(const RunConfig& config) {
  validate(config);
  if (config.data_path.empty()) throw ConfigError("data.path is not set");
  const std::string bytes = read_text(config.data_path, "input dataset");
  std::istringstream in(bytes);
  const prep::Table table = prep::parse_csv(in, {config.prep.categorical, config.prep.numeric, ','});
  std::clog << "prep: " << table.row_count() << " rows x " << table.columns.size() << " columns\n";

  const prep::PreparedData data = prep::prepare(table, config.prep);
  const bool leak_free = prep::audit_leak_free(data, table, config.prep);
  if (!leak_free) throw std::logic_error("prep state differs from a refit on the training rows");

  const Layout layout{config.out};
  write_text(layout.prep() / "train.csv", split_csv({data.train_ids, data.train, data.y_train}));
  write_text(layout.prep() / "test.csv", split_csv({data.test_ids, data.test, data.y_test}));
  write_text(layout.prep() / "preprocessor.json", prep::to_json(data.state));

  const Eigen::VectorXd tr = class_counts(data.y_train), te = class_counts(data.y_test);
  nlohmann::ordered_json m;
  m["format"] = "mqe.manifest/1";
  m["input_file"] = fs::path(config.data_path).filename().string();
  m["input_sha256"] = sha256_hex(bytes);
  m["input_bytes"] = bytes.size();
  m["config_sha256"] = sha256_hex(to_ini(config));
  m["seed"] = config.prep.seed;
  m["label_column"] = config.prep.label_column;
  m["rows_in"] = data.stats.rows_in;
  m["rows_dropped_missing"] = data.stats.rows_dropped_missing;
  m["rows_used"] = data.stats.rows_used;
  m["train_rows"] = data.stats.train_rows;
  m["test_rows"] = data.stats.test_rows;
  m["train_class_counts"] = {static_cast<long>(tr(0)), static_cast<long>(tr(1))};
  m["test_class_counts"] = {static_cast<long>(te(0)), static_cast<long>(te(1))};
  m["n_components"] = config.prep.n_components;
  m["explained_variance"] = std::vector<double>(data.state.pca.explained_variance.data(),
                                                data.state.pca.explained_variance.data() +
                                                    data.state.pca.explained_variance.size());
  m["leak_free"] = leak_free;
  write_text(layout.prep() / "manifest.json", m.dump(1) + "\n");
  write_config(config, "prep");
  std::clog << "prep: " << data.stats.train_rows << " train / " << data.stats.test_rows << " test rows, "
            << data.stats.rows_dropped_missing << " dropped\n";
  return data.stats;
}

qnn::TrainResult cmd_train_qnn(const RunConfig& config) {
  validate(config);
  const Split train = load_split(config, "train");
  check_width(train, config.qnn.n_qubits, "train split");
  qnn::TrainConfig tc = config.qnn;
  tc.workers = workers_of(config);
  qnn::TrainResult result = qnn::train_qnn(train.features, train.labels, tc);
  const Layout layout{config.out};
  tc.workers = 0;
  write_text(layout.models() / "qnn.json", qnn::to_json({tc, result.params}));
  write_text(layout.reports() / "qnn_history.csv", qnn::history_csv(result.history));
  write_config(config, "train_qnn");
  const auto& last = result.history.back();
  std::clog << "train-qnn: " << result.history.size() << " epochs, final train loss " << last.train_loss << '\n';
  return result;
}

qsvm::QsvmFit cmd_train_qsvm(const RunConfig& config) {
  validate(config);
  const Split train = load_split(config, "train");
  qsvm::QsvmConfig qc = config.qsvm;
  qc.workers = workers_of(config);
  qsvm::QsvmFit fit = qsvm::fit_qsvm(train.features, train.labels, qc);
  fit.model.config.workers = 0;
  const Layout layout{config.out};
  write_text(layout.models() / "qsvm.json", qsvm::to_json(fit.model));
  write_text(layout.reports() / "qsvm_kkt_audit.csv", fit.audit.to_csv());
  std::ostringstream os;
  os << "max_asymmetry,max_diagonal_error,min_eigenvalue,kkt_max_violation,kkt_equality_residual,kkt_ok,"
        "support_vectors,iterations\n"
     << format_double(fit.kernel_check.max_asymmetry) << ',' << format_double(fit.kernel_check.max_diagonal_error)
     << ',' << format_double(fit.kernel_check.min_eigenvalue) << ',' << format_double(fit.audit.max_violation) << ','
     << format_double(fit.audit.equality_residual) << ',' << (fit.audit.ok() ? 1 : 0) << ','
     << fit.model.svm.alphas.size() << ',' << fit.model.svm.iterations << '\n';
  write_text(layout.reports() / "qsvm_summary.csv", os.str());
  write_config(config, "train_qsvm");
  if (!fit.audit.ok()) {
    std::clog << "warning: KKT audit max violation " << fit.audit.max_violation << " exceeds " << fit.audit.tol << '\n';
  }
  std::clog << "train-qsvm: " << fit.model.svm.alphas.size() << " support vectors, " << fit.model.svm.iterations
            << " SMO iterations\n";
  return fit;
}

FuseEvalResult cmd_fuse_eval(const RunConfig& config) {
  validate(config);
  const Split train = load_split(config, "train");
  const Split test = load_split(config, "test");
  const qnn::QnnModel qm = load_qnn(config);
  const qsvm::QsvmModel sm = load_qsvm(config);
  check_width(test, qm.params.n_qubits(), "test split");
  check_width(train, qm.params.n_qubits(), "train split");
  const unsigned workers = workers_of(config);

  const fusion::BranchOutput qnn_test = qnn_output(qnn::predict(qm.params, test.features, workers), test.ids);
  qsvm::KernelOptions kopt;
  kopt.workers = workers;
  const fusion::BranchOutput qsvm_test = qsvm_output(qsvm::predict(sm, test.features, kopt), test.ids);

  // Out-of-fold branch outputs on the training split.
  const auto m = static_cast<Eigen::Index>(train.labels.size());
  fusion::BranchOutput qnn_oof{train.ids, Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m)};
  fusion::BranchOutput qsvm_oof = qnn_oof;
  const std::vector<int> fold = stratified_folds(train.labels, config.fusion.folds, config.fusion.seed);
  for (int f = 0; f < config.fusion.folds; ++f) {
    std::vector<std::size_t> fit_rows, held;
    for (std::size_t i = 0; i < fold.size(); ++i) (fold[i] == f ? held : fit_rows).push_back(i);
    if (held.empty()) continue;
    const Eigen::MatrixXd xf = select_rows(train.features, fit_rows);
    const Labels yf = select(train.labels, fit_rows);
    const Eigen::MatrixXd xh = select_rows(train.features, held);

    qnn::TrainConfig tc = qm.config;
    tc.workers = workers;
    const qnn::QnnScores qs = qnn::predict(qnn::train_qnn(xf, yf, tc).params, xh, workers);
    qsvm::QsvmConfig sc = sm.config;
    sc.workers = workers;
    const qsvm::QsvmScores ss = qsvm::predict(qsvm::fit_qsvm(xf, yf, sc).model, xh, kopt);
    for (std::size_t i = 0; i < held.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(held[i]);
      const auto k = static_cast<Eigen::Index>(i);
      qnn_oof.margins(r) = qs.logits(k);
      qnn_oof.probs(r) = qs.probs(k);
      qsvm_oof.margins(r) = ss.margins(k);
      qsvm_oof.probs(r) = ss.probs(k);
    }
    std::clog << "fuse-eval: fold " << f + 1 << '/' << config.fusion.folds << " done\n";
  }

  const Layout layout{config.out};
  write_text(layout.reports() / "branch_outputs_oof.csv", branch_csv(qnn_oof, qsvm_oof, train.labels));
  write_text(layout.reports() / "branch_outputs_test.csv", branch_csv(qnn_test, qsvm_test, test.labels));

  FuseEvalResult result;
  result.qnn = metrics::evaluate("qnn", test.labels, qnn_test.hard_labels(), qnn_test.probs);
  result.qsvm = metrics::evaluate("qsvm", test.labels, qsvm_test.hard_labels(), qsvm_test.probs);
  result.disagreement = fusion::disagreement_report(qnn_test.hard_labels(), qsvm_test.hard_labels(), test.labels);

  forest::ForestConfig fc = config.forest;
  fc.workers = workers;
  for (fusion::Scheme s : config.fusion.schemes) {
    const std::string name(fusion::to_string(s));
    const fusion::MetaFeatureTable meta_train = fusion::extract_meta_features(qnn_oof, qsvm_oof, s);
    const fusion::MetaFeatureTable meta_test = fusion::extract_meta_features(qnn_test, qsvm_test, s);
    forest::Forest fr = forest::fit_forest(meta_train.values, train.labels, fc);
    const forest::ForestPrediction pred = forest::forest_predict(fr, meta_test.values);
    result.fused.push_back(metrics::evaluate("fused_" + name, test.labels, pred.labels, pred.probs));
    fr.config.workers = 0;
    write_text(forest_path(config, s), forest::to_json(fr));
    write_text(layout.reports() / ("meta_features_" + name + "_train.csv"), meta_train.to_csv(train.labels));
    write_text(layout.reports() / ("meta_features_" + name + "_test.csv"), meta_test.to_csv(test.labels));
  }

  std::string summary = metrics::summary_csv_header();
  for (const auto* r : {&result.qnn, &result.qsvm}) {
    write_report(layout, *r);
    summary += metrics::summary_csv_row(*r);
  }
  for (const auto& r : result.fused) {
    write_report(layout, r);
    summary += metrics::summary_csv_row(r);
  }
  write_text(layout.reports() / "eval_summary.csv", summary);
  write_text(layout.reports() / "disagreement.csv", result.disagreement.to_csv());
  write_config(config, "fuse_eval");
  for (const auto& r : result.fused) std::clog << "fuse-eval: " << r.name << " F1 " << r.point.f1 << '\n';
  return result;
}

std::vector<NoisePoint> cmd_noise_sweep(const RunConfig& config) {
  validate(config);
  if (config.noise.channels.empty() || config.noise.probabilities.empty()) {
    throw ConfigError("noise sweep grid is empty: set noise.channels and noise.probabilities");
  }
  const Split test = load_split(config, "test");
  const qnn::QnnModel qm = load_qnn(config);
  const qsvm::QsvmModel sm = load_qsvm(config);
  check_width(test, qm.params.n_qubits(), "test split");
  std::vector<forest::Forest> forests;
  for (fusion::Scheme s : config.fusion.schemes) forests.push_back(load_forest(config, s));
  const unsigned workers = workers_of(config);

  std::vector<NoisePoint> points;
  const std::size_t np = config.noise.probabilities.size();
  for (std::size_t ci = 0; ci < config.noise.channels.size(); ++ci) {
    for (std::size_t pi = 0; pi < np; ++pi) {
      const std::uint64_t g = ci * np + pi;
      NoisePoint pt;
      pt.channel = config.noise.channels[ci];
      pt.probability = config.noise.probabilities[pi];
      const qsim::NoiseChannel channel{pt.channel, pt.probability};
      Rng seeds = derive_rng(config.noise.seed, g);
      const qsim::GateNoise qnn_noise{channel, config.noise.trajectories, seeds()};
      const qsim::GateNoise qsvm_noise{channel, config.noise.trajectories, seeds()};

      const fusion::BranchOutput qo =
          qnn_output(qnn::predict(qm.params, test.features, qnn_noise, workers), test.ids);
      qsvm::KernelOptions kopt;
      kopt.workers = workers;
      kopt.noise = qsvm_noise;
      const fusion::BranchOutput so = qsvm_output(qsvm::predict(sm, test.features, kopt), test.ids);
      pt.qnn_f1 = metrics::confusion_and_point_metrics(test.labels, qo.hard_labels()).f1;
      pt.qsvm_f1 = metrics::confusion_and_point_metrics(test.labels, so.hard_labels()).f1;
      for (std::size_t s = 0; s < forests.size(); ++s) {
        const auto meta = fusion::extract_meta_features(qo, so, config.fusion.schemes[s]);
        const auto pred = forest::forest_predict(forests[s], meta.values);
        const auto pm = metrics::confusion_and_point_metrics(test.labels, pred.labels);
        pt.fused_f1.push_back(pm.f1);
        pt.fused_accuracy.push_back(pm.accuracy);
      }
      std::clog << "noise-sweep: " << qsim::to_string(pt.channel) << " p=" << pt.probability << " done\n";
      points.push_back(std::move(pt));
    }
  }

  std::ostringstream os;
  os << "channel,probability,trajectories,qnn_f1,qsvm_f1";
  for (fusion::Scheme s : config.fusion.schemes) os << ",fused_" << fusion::to_string(s) << "_f1";
  for (fusion::Scheme s : config.fusion.schemes) os << ",fused_" << fusion::to_string(s) << "_accuracy";
  os << '\n';
  for (const auto& pt : points) {
    os << qsim::to_string(pt.channel) << ',' << format_double(pt.probability) << ',' << config.noise.trajectories
       << ',' << format_double(pt.qnn_f1) << ',' << format_double(pt.qsvm_f1);
    for (double v : pt.fused_f1) os << ',' << format_double(v);
    for (double v : pt.fused_accuracy) os << ',' << format_double(v);
    os << '\n';
  }
  write_text(Layout{config.out}.curves() / "noise_sweep.csv", os.str());
  write_config(config, "noise_sweep");
  return points;
}

int exit_code(const std::exception& error) {
  if (dynamic_cast<const ConfigError*>(&error)) return 2;
  if (dynamic_cast<const ArtifactError*>(&error)) return 3;
  if (dynamic_cast<const DataError*>(&error)) return 4;
  return 1;
}

}  // namespace mqe::pipeline
