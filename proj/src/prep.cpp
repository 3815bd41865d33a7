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

#include "mqe/prep.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>

namespace mqe::prep {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// One logical record; quoted fields may contain delimiters, doubled quotes and
// newlines.
bool read_record(std::istream& in, char delim, std::vector<std::string>& fields, long& line_no) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (quoted) {
        if (!std::getline(in, line)) throw DataError("unterminated quoted field at line " + std::to_string(line_no));
        ++line_no;
        field += '\n';
        i = static_cast<std::size_t>(-1);
        continue;
      }
      break;
    }
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == delim) {
      fields.push_back(trim(field));
      field.clear();
    } else {
      field += ch;
    }
  }
  fields.push_back(trim(field));
  return true;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

bool is_missing_token(const std::string& cell) {
  static const std::set<std::string> tokens{"", "NA", "N/A", "na", "n/a", "NaN", "nan", "NAN", "null", "NULL", "?", "-"};
  return tokens.count(cell) > 0;
}

std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  double v = 0.0;
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::size_t Table::column_index(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c].name == name) return c;
  }
  throw DataError("no column named '" + name + "'");
}

bool Table::has_column(const std::string& name) const {
  return std::any_of(columns.begin(), columns.end(), [&](const ColumnInfo& c) { return c.name == name; });
}

bool Table::is_missing(std::size_t row, std::size_t col) const {
  const std::string& cell = cells[row][col];
  if (is_missing_token(cell)) return true;
  return columns[col].kind == ColumnKind::Numeric && !parse_number(cell);
}

double Table::numeric(std::size_t row, std::size_t col) const {
  if (is_missing(row, col)) return std::nan("");
  return *parse_number(cells[row][col]);
}

Table parse_csv(std::istream& in, const CsvSchema& schema) {
  Table t;
  std::vector<std::string> fields;
  long line_no = 0;
  if (!read_record(in, schema.delimiter, fields, line_no) || (fields.size() == 1 && fields[0].empty())) {
    throw DataError("empty file: no header row");
  }
  std::set<std::string> seen;
  for (const auto& name : fields) {
    if (name.empty()) throw DataError("header contains an empty column name");
    if (!seen.insert(name).second) throw DataError("duplicate column name '" + name + "' in header");
    t.columns.push_back({name, ColumnKind::Numeric, 0});
  }
  for (const auto& name : schema.categorical) {
    if (!seen.count(name)) throw ConfigError("categorical column '" + name + "' not found in header");
  }
  for (const auto& name : schema.numeric) {
    if (!seen.count(name)) throw ConfigError("numeric column '" + name + "' not found in header");
  }

  while (read_record(in, schema.delimiter, fields, line_no)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != t.columns.size()) {
      throw DataError("ragged row at line " + std::to_string(line_no) + ": expected " +
                      std::to_string(t.columns.size()) + " fields, found " + std::to_string(fields.size()));
    }
    t.cells.push_back(fields);
  }

  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    auto& col = t.columns[c];
    if (contains(schema.categorical, col.name)) {
      col.kind = ColumnKind::Categorical;
    } else if (contains(schema.numeric, col.name)) {
      col.kind = ColumnKind::Numeric;
    } else {
      std::size_t present = 0, numeric = 0;
      for (const auto& row : t.cells) {
        if (is_missing_token(row[c])) continue;
        ++present;
        if (parse_number(row[c])) ++numeric;
      }
      col.kind = (present == 0 || 2 * numeric > present) ? ColumnKind::Numeric : ColumnKind::Categorical;
    }
    for (std::size_t r = 0; r < t.cells.size(); ++r) col.missing += t.is_missing(r, c);
  }
  return t;
}

Table load_csv(const std::string& path, const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  Table t = parse_csv(in, schema);
  std::clog << "loaded " << t.row_count() << " rows x " << t.columns.size() << " columns from " << path << '\n';
  return t;
}

LabelEncoder LabelEncoder::fit(const std::vector<std::string>& values) {
  const std::set<std::string> unique(values.begin(), values.end());
  std::map<std::string, int> mapping;
  int code = 0;
  for (const auto& v : unique) mapping.emplace(v, code++);
  return LabelEncoder(std::move(mapping));
}

int LabelEncoder::encode(const std::string& value) const {
  const auto it = mapping_.find(value);
  if (it == mapping_.end()) throw DataError("unseen category '" + value + "'");
  return it->second;
}

std::vector<int> LabelEncoder::transform(const std::vector<std::string>& values) const {
  std::vector<int> out;
  out.reserve(values.size());
  for (const auto& v : values) out.push_back(encode(v));
  return out;
}

EncodedColumn label_encode(const std::vector<std::string>& column) {
  EncodedColumn e{{}, LabelEncoder::fit(column)};
  e.codes = e.encoder.transform(column);
  return e;
}

Standardizer::Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev)
    : mean_(std::move(mean)), stddev_(std::move(stddev)), fitted_(true) {
  if (mean_.size() != stddev_.size()) throw std::invalid_argument("mean/stddev length mismatch");
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& train) {
  if (train.rows() == 0) throw std::invalid_argument("cannot fit a standardizer on zero rows");
  const Eigen::VectorXd mean = train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.rowwise() - mean.transpose();
  const Eigen::VectorXd var = centered.colwise().squaredNorm().transpose() / static_cast<double>(train.rows());
  Standardizer s(mean, var.cwiseSqrt());
  for (Eigen::Index c : s.constant_columns()) std::clog << "warning: column " << c << " is constant; mapped to 0\n";
  return s;
}

std::vector<Eigen::Index> Standardizer::constant_columns() const {
  std::vector<Eigen::Index> out;
  for (Eigen::Index c = 0; c < stddev_.size(); ++c) {
    if (stddev_(c) == 0.0) out.push_back(c);
  }
  return out;
}

Eigen::MatrixXd Standardizer::apply(const Eigen::MatrixXd& x) const {
  if (!fitted_) throw std::logic_error("standardizer applied before fit");
  if (x.cols() != mean_.size()) throw std::invalid_argument("column count does not match fitted standardizer");
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    if (stddev_(c) == 0.0) out.col(c).setZero();
    else out.col(c) = (x.col(c).array() - mean_(c)) / stddev_(c);
  }
  return out;
}

PcaModel pca_fit(const Eigen::MatrixXd& train, int k) {
  const Eigen::Index m = train.rows(), d = train.cols();
  if (k < 1 || k > std::min(m, d)) {
    throw std::invalid_argument("PCA needs 1 <= k <= min(rows, cols); got k=" + std::to_string(k) + " for " +
                                std::to_string(m) + "x" + std::to_string(d));
  }
  PcaModel model;
  model.mean = train.colwise().mean().transpose();
  const Eigen::MatrixXd centered = train.rowwise() - model.mean.transpose();
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  model.components = svd.matrixV().leftCols(k);
  model.explained_variance = svd.singularValues().head(k).cwiseAbs2() / static_cast<double>(m);
  for (Eigen::Index c = 0; c < k; ++c) {
    Eigen::Index arg = 0;
    model.components.col(c).cwiseAbs().maxCoeff(&arg);
    if (model.components(arg, c) < 0) model.components.col(c) *= -1.0;
  }
  model.rank_deficient = model.explained_variance(k - 1) < 1e-12;
  if (model.rank_deficient) {
    std::clog << "warning: PCA retained components with explained variance < 1e-12 (rank-deficient input)\n";
  }
  return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.mean.size()) throw std::invalid_argument("column count does not match fitted PCA");
  return (x.rowwise() - model.mean.transpose()) * model.components;
}

SplitIndices split(const Labels& labels, double train_ratio, std::uint64_t seed) {
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) throw std::invalid_argument("train ratio must lie in (0, 1)");
  Rng rng(seed);
  SplitIndices s;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) rows.push_back(i);
    }
    if (rows.size() < 2) {
      throw DataError("class " + std::to_string(cls) + " has " + std::to_string(rows.size()) +
                      " samples; stratified split needs at least 2");
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    auto n_test = static_cast<std::size_t>(std::lround((1.0 - train_ratio) * static_cast<double>(rows.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, rows.size() - 1);
    s.test.insert(s.test.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_test));
    s.train.insert(s.train.end(), rows.begin() + static_cast<std::ptrdiff_t>(n_test), rows.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::vector<std::size_t> stratified_subsample(const Labels& labels, std::size_t count, std::uint64_t seed) {
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), 0);
  if (count == 0 || count >= labels.size()) return all;
  Rng rng(seed);
  std::vector<std::size_t> out;
  const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const auto want_pos = static_cast<std::size_t>(
      std::lround(static_cast<double>(count) * static_cast<double>(n_pos) / static_cast<double>(labels.size())));
  for (int cls : {0, 1}) {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == cls) rows.push_back(i);
    }
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t take = std::min(rows.size(), cls == 1 ? want_pos : count - want_pos);
    out.insert(out.end(), rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(take));
  }
  std::sort(out.begin(), out.end());
  return out;
}

Labels binary_labels(const Table& table, const PrepOptions& options) {
  const std::size_t col = table.column_index(options.label_column);
  const auto benign_num = parse_number(options.benign_value);
  Labels y(table.row_count());
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    const std::string& cell = table.cells[r][col];
    bool benign = cell == options.benign_value;
    if (!benign && benign_num) {
      const auto v = parse_number(cell);
      benign = v && *v == *benign_num;
    }
    y[r] = benign ? 0 : 1;
  }
  return y;
}

Eigen::MatrixXd Preprocessor::encode(const Table& table, const std::vector<std::size_t>& rows) const {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(feature_columns.size()));
  for (std::size_t f = 0; f < feature_columns.size(); ++f) {
    const std::size_t col = table.column_index(feature_columns[f]);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = static_cast<Eigen::Index>(i);
      if (feature_kinds[f] == ColumnKind::Categorical) {
        try {
          x(r, static_cast<Eigen::Index>(f)) = encoders.at(feature_columns[f]).encode(table.cells[rows[i]][col]);
        } catch (const DataError& e) {
          throw DataError("column '" + feature_columns[f] + "': " + e.what());
        }
      } else {
        const double v = table.numeric(rows[i], col);
        if (std::isnan(v)) throw DataError("missing value in column '" + feature_columns[f] + "'");
        x(r, static_cast<Eigen::Index>(f)) = v;
      }
    }
  }
  return x;
}

Eigen::MatrixXd Preprocessor::transform(const Table& table, const std::vector<std::size_t>& rows) const {
  return pca_transform(pca, standardizer.apply(encode(table, rows)));
}

namespace {

Preprocessor fit_state(const Table& table, const std::vector<std::string>& features,
                       const std::vector<std::size_t>& train_rows, int k) {
  Preprocessor st;
  st.feature_columns = features;
  for (const auto& name : features) {
    const std::size_t col = table.column_index(name);
    st.feature_kinds.push_back(table.columns[col].kind);
    if (table.columns[col].kind == ColumnKind::Categorical) {
      std::vector<std::string> values;
      for (std::size_t r : train_rows) values.push_back(table.cells[r][col]);
      st.encoders.emplace(name, LabelEncoder::fit(values));
    }
  }
  st.standardizer = Standardizer::fit(st.encode(table, train_rows));
  st.pca = pca_fit(st.standardizer.apply(st.encode(table, train_rows)), k);
  return st;
}

std::vector<std::string> feature_columns_of(const Table& table, const PrepOptions& options) {
  std::vector<std::string> features;
  for (const auto& c : table.columns) {
    if (c.name != options.label_column && !contains(options.drop_columns, c.name)) features.push_back(c.name);
  }
  return features;
}

}  // namespace

PreparedData prepare(const Table& table, const PrepOptions& options) {
  if (!table.has_column(options.label_column)) {
    throw ConfigError("label column '" + options.label_column + "' not found in input header");
  }
  for (const auto& name : options.drop_columns) {
    if (!table.has_column(name)) throw ConfigError("drop column '" + name + "' not found in input header");
  }
  for (const auto& name : options.categorical) {
    if (!table.has_column(name)) throw ConfigError("categorical column '" + name + "' not found in input header");
  }
  const auto features = feature_columns_of(table, options);
  if (features.empty()) throw ConfigError("no feature columns remain after removing label/drop columns");

  PreparedData out;
  out.stats.rows_in = table.row_count();
  std::vector<std::size_t> complete;
  std::vector<std::size_t> check_cols{table.column_index(options.label_column)};
  for (const auto& f : features) check_cols.push_back(table.column_index(f));
  for (std::size_t r = 0; r < table.row_count(); ++r) {
    const bool any_missing =
        std::any_of(check_cols.begin(), check_cols.end(), [&](std::size_t c) { return table.is_missing(r, c); });
    if (!any_missing) complete.push_back(r);
  }
  out.stats.rows_dropped_missing = table.row_count() - complete.size();
  if (out.stats.rows_dropped_missing > 0) {
    std::clog << "dropped " << out.stats.rows_dropped_missing << " rows with missing values\n";
  }

  const Labels all_labels = binary_labels(table, options);
  const Labels complete_labels = select(all_labels, complete);
  const auto picked = stratified_subsample(complete_labels, options.subsample, options.seed ^ 0x5u);
  std::vector<std::size_t> rows;
  for (std::size_t p : picked) rows.push_back(complete[p]);
  out.stats.rows_used = rows.size();

  const Labels used_labels = select(all_labels, rows);
  const SplitIndices sp = split(used_labels, options.train_ratio, options.seed);
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i : sp.train) train_rows.push_back(rows[i]);
  for (std::size_t i : sp.test) test_rows.push_back(rows[i]);

  const auto k = options.n_components;
  if (k > static_cast<int>(features.size())) {
    throw ConfigError("requested " + std::to_string(k) + " PCA components but only " +
                      std::to_string(features.size()) + " feature columns exist");
  }
  out.state = fit_state(table, features, train_rows, k);
  out.train = out.state.transform(table, train_rows);
  out.test = out.state.transform(table, test_rows);
  out.y_train = select(all_labels, train_rows);
  out.y_test = select(all_labels, test_rows);
  out.train_ids.assign(train_rows.begin(), train_rows.end());
  out.test_ids.assign(test_rows.begin(), test_rows.end());
  out.stats.train_rows = train_rows.size();
  out.stats.test_rows = test_rows.size();
  return out;
}

bool audit_leak_free(const PreparedData& data, const Table& table, const PrepOptions& options) {
  std::vector<std::size_t> train_rows(data.train_ids.begin(), data.train_ids.end());
  const Preprocessor refit = fit_state(table, data.state.feature_columns, train_rows, options.n_components);
  if (refit.encoders != data.state.encoders) return false;
  if (refit.standardizer.mean() != data.state.standardizer.mean()) return false;
  if (refit.standardizer.stddev() != data.state.standardizer.stddev()) return false;
  if (refit.pca.mean != data.state.pca.mean || refit.pca.components != data.state.pca.components) return false;
  return refit.pca.explained_variance == data.state.pca.explained_variance;
}

namespace {

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string to_json(const Preprocessor& st) {
  nlohmann::ordered_json j;
  j["format"] = "mqe.prep/1";
  nlohmann::ordered_json cols = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < st.feature_columns.size(); ++f) {
    nlohmann::ordered_json c;
    c["name"] = st.feature_columns[f];
    c["kind"] = st.feature_kinds[f] == ColumnKind::Categorical ? "categorical" : "numeric";
    if (st.feature_kinds[f] == ColumnKind::Categorical) {
      nlohmann::ordered_json enc = nlohmann::ordered_json::object();
      for (const auto& [k, v] : st.encoders.at(st.feature_columns[f]).mapping()) enc[k] = v;
      c["encoder"] = std::move(enc);
    }
    cols.push_back(std::move(c));
  }
  j["features"] = std::move(cols);
  j["standardizer"] = {{"mean", to_vector(st.standardizer.mean())}, {"stddev", to_vector(st.standardizer.stddev())}};
  nlohmann::ordered_json comps = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < st.pca.components.cols(); ++c) comps.push_back(to_vector(st.pca.components.col(c)));
  j["pca"] = {{"mean", to_vector(st.pca.mean)},
              {"components", std::move(comps)},
              {"explained_variance", to_vector(st.pca.explained_variance)}};
  return j.dump(1) + "\n";
}

Preprocessor preprocessor_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "mqe.prep/1") throw std::invalid_argument("not a preprocessor document");
    Preprocessor st;
    for (const auto& c : j.at("features")) {
      const std::string name = c.at("name");
      st.feature_columns.push_back(name);
      const bool cat = c.at("kind") == "categorical";
      st.feature_kinds.push_back(cat ? ColumnKind::Categorical : ColumnKind::Numeric);
      if (cat) st.encoders.emplace(name, LabelEncoder(c.at("encoder").get<std::map<std::string, int>>()));
    }
    st.standardizer = Standardizer(from_vector(j.at("standardizer").at("mean")),
                                   from_vector(j.at("standardizer").at("stddev")));
    const auto& p = j.at("pca");
    st.pca.mean = from_vector(p.at("mean"));
    st.pca.explained_variance = from_vector(p.at("explained_variance"));
    const auto comps = p.at("components").get<std::vector<std::vector<double>>>();
    st.pca.components.resize(st.pca.mean.size(), static_cast<Eigen::Index>(comps.size()));
    for (std::size_t c = 0; c < comps.size(); ++c) st.pca.components.col(static_cast<Eigen::Index>(c)) = from_vector(comps[c]);
    st.pca.rank_deficient = st.pca.explained_variance.size() > 0 &&
                            st.pca.explained_variance(st.pca.explained_variance.size() - 1) < 1e-12;
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed preprocessor document: ") + e.what());
  }
}

}  // namespace mqe::prep
