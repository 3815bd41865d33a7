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

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mqe::prep {

enum class ColumnKind { Numeric, Categorical };

struct ColumnInfo {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  /// Cells flagged missing: empty/NA tokens, or unparseable numeric cells.
  long missing = 0;
};

/// Forces column kinds; unlisted columns are numeric when most of their
/// non-missing cells parse as finite numbers.
struct CsvSchema {
  std::vector<std::string> categorical;
  std::vector<std::string> numeric;
  char delimiter = ',';
};

class Table {
 public:
  std::vector<ColumnInfo> columns;
  std::vector<std::vector<std::string>> cells;

  std::size_t row_count() const { return cells.size(); }
  std::size_t column_index(const std::string& name) const;
  bool has_column(const std::string& name) const;
  bool is_missing(std::size_t row, std::size_t col) const;
  /// NaN when missing.
  double numeric(std::size_t row, std::size_t col) const;
};

Table parse_csv(std::istream& in, const CsvSchema& schema = {});
Table load_csv(const std::string& path, const CsvSchema& schema = {});

bool is_missing_token(const std::string& cell);
/// Finite number or nullopt.
std::optional<double> parse_number(const std::string& cell);

/// Categories sorted lexicographically and mapped to 0..k-1.
class LabelEncoder {
 public:
  static LabelEncoder fit(const std::vector<std::string>& values);
  explicit LabelEncoder(std::map<std::string, int> mapping = {}) : mapping_(std::move(mapping)) {}

  int encode(const std::string& value) const;
  std::vector<int> transform(const std::vector<std::string>& values) const;
  const std::map<std::string, int>& mapping() const { return mapping_; }

  bool operator==(const LabelEncoder& o) const { return mapping_ == o.mapping_; }

 private:
  std::map<std::string, int> mapping_;
};

struct EncodedColumn {
  std::vector<int> codes;
  LabelEncoder encoder;
};

EncodedColumn label_encode(const std::vector<std::string>& column);

/// Per-column z-scoring with population statistics. Constant columns map to 0.
class Standardizer {
 public:
  static Standardizer fit(const Eigen::MatrixXd& train);
  Standardizer() = default;
  Standardizer(Eigen::VectorXd mean, Eigen::VectorXd stddev);

  Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
  bool fitted() const { return fitted_; }
  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::VectorXd& stddev() const { return stddev_; }
  std::vector<Eigen::Index> constant_columns() const;

 private:
  Eigen::VectorXd mean_;
  Eigen::VectorXd stddev_;
  bool fitted_ = false;
};

struct PcaModel {
  Eigen::VectorXd mean;
  /// d x k, orthonormal columns.
  Eigen::MatrixXd components;
  /// Population variance along each component, non-increasing.
  Eigen::VectorXd explained_variance;
  bool rank_deficient = false;
};

/// Top-k right singular vectors of the centered matrix; each component is
/// signed so its largest-magnitude loading is positive.
PcaModel pca_fit(const Eigen::MatrixXd& train, int k);
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified, seeded split; each class contributes round((1 - ratio) * n_c)
/// rows to the test side.
SplitIndices split(const Labels& labels, double train_ratio, std::uint64_t seed);

/// Stratified seeded subsample of `count` rows (all rows when count is 0 or
/// not smaller than the input).
std::vector<std::size_t> stratified_subsample(const Labels& labels, std::size_t count, std::uint64_t seed);

struct PrepOptions {
  std::string label_column = "label";
  /// Label cells equal to this value (numerically when both parse) are benign.
  std::string benign_value = "0";
  std::vector<std::string> categorical;
  std::vector<std::string> numeric;
  std::vector<std::string> drop_columns;
  int n_components = 13;
  double train_ratio = 0.8;
  std::size_t subsample = 0;
  std::uint64_t seed = 3;
};

/// Fitted state, all derived from the training split.
struct Preprocessor {
  std::vector<std::string> feature_columns;
  std::vector<ColumnKind> feature_kinds;
  /// Keyed by feature column name.
  std::map<std::string, LabelEncoder> encoders;
  Standardizer standardizer;
  PcaModel pca;

  /// Encodes the feature columns of the given rows (no standardization).
  Eigen::MatrixXd encode(const Table& table, const std::vector<std::size_t>& rows) const;
  Eigen::MatrixXd transform(const Table& table, const std::vector<std::size_t>& rows) const;
};

struct PrepStats {
  std::size_t rows_in = 0;
  std::size_t rows_dropped_missing = 0;
  std::size_t rows_used = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
};

struct PreparedData {
  Eigen::MatrixXd train;
  Eigen::MatrixXd test;
  Labels y_train;
  Labels y_test;
  /// Zero-based data-row index in the source file.
  std::vector<long> train_ids;
  std::vector<long> test_ids;
  Preprocessor state;
  PrepStats stats;
};

Labels binary_labels(const Table& table, const PrepOptions& options);

PreparedData prepare(const Table& table, const PrepOptions& options);

/// Refits every statistic from the training rows alone and checks it equals
/// the stored state.
bool audit_leak_free(const PreparedData& data, const Table& table, const PrepOptions& options);

std::string to_json(const Preprocessor& state);
Preprocessor preprocessor_from_json(const std::string& text);

}  // namespace mqe::prep
