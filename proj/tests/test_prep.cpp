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

#include <doctest.h>

#include <set>
#include <sstream>

using namespace mqe;
using namespace mqe::prep;

namespace {

Table parse(const std::string& text, const CsvSchema& schema = {}) {
  std::istringstream in(text);
  return parse_csv(in, schema);
}

/// Numeric features with a categorical protocol column and a label.
std::string synthetic_csv(int rows, std::uint64_t seed) {
  Rng rng(seed);
  std::ostringstream os;
  os << "duration,bytes,proto,rate,label\n";
  const char* protos[] = {"tcp", "udp", "icmp"};
  for (int i = 0; i < rows; ++i) {
    const int label = i % 3 == 0 ? 1 : 0;
    os << uniform01(rng) * 10 + label * 3 << ',' << uniform01(rng) * 1000 << ',' << protos[i % 3] << ','
       << uniform01(rng) - label << ',' << (label ? "attack" : "normal") << '\n';
  }
  return os.str();
}

PrepOptions synthetic_options() {
  PrepOptions o;
  o.label_column = "label";
  o.benign_value = "normal";
  o.n_components = 3;
  o.seed = 5;
  return o;
}

}  // namespace

TEST_CASE("CSV column kinds") {
  const Table t = parse("port,proto\n80,tcp\n53,udp\n443,tcp\n");
  REQUIRE(t.columns.size() == 2);
  CHECK(t.row_count() == 3);
  CHECK(t.columns[0].kind == ColumnKind::Numeric);
  CHECK(t.columns[1].kind == ColumnKind::Categorical);
  CHECK(t.numeric(1, 0) == 53.0);

  const Table forced = parse("port,proto\n80,tcp\n53,udp\n", CsvSchema{{"port"}, {}, ','});
  CHECK(forced.columns[0].kind == ColumnKind::Categorical);
}

TEST_CASE("unparseable numeric cells are missing") {
  const Table t = parse("a,b\n1,x\n2,y\nbad,z\n4,NA\n");
  CHECK(t.columns[0].kind == ColumnKind::Numeric);
  CHECK(t.is_missing(2, 0));
  CHECK(std::isnan(t.numeric(2, 0)));
  CHECK(t.columns[0].missing == 1);
  CHECK(t.is_missing(3, 1));
  CHECK(t.columns[1].missing == 1);
}

TEST_CASE("quoted fields and delimiters") {
  const Table t = parse("name,val\n\"a,b\",1\n\"say \"\"hi\"\"\",2\n\"two\nlines\",3\n");
  REQUIRE(t.row_count() == 3);
  CHECK(t.cells[0][0] == "a,b");
  CHECK(t.cells[1][0] == "say \"hi\"");
  CHECK(t.cells[2][0] == "two\nlines");
  const Table semi = parse("a;b\n1;2\n", CsvSchema{{}, {}, ';'});
  CHECK(semi.numeric(0, 1) == 2.0);
}

TEST_CASE("malformed CSV input") {
  CHECK_THROWS_AS(parse(""), DataError);
  CHECK_THROWS_AS(parse("a,b\n1,2,3\n"), DataError);
  CHECK_THROWS_AS(parse("a,b\n\"open,2\n"), DataError);
  try {
    parse("a,b,a\n1,2,3\n");
    FAIL("duplicate header accepted");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("'a'") != std::string::npos);
  }
  CHECK_THROWS_AS(parse("a,b\n1,2\n", CsvSchema{{"c"}, {}, ','}), ConfigError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("number parsing") {
  CHECK(parse_number("1.5") == 1.5);
  CHECK(parse_number("+2") == 2.0);
  CHECK(parse_number("-3e2") == -300.0);
  CHECK_FALSE(parse_number("1.5x"));
  CHECK_FALSE(parse_number("inf"));
  CHECK_FALSE(parse_number(""));
  for (const char* tok : {"", "NA", "nan", "?", "null", "-"}) CHECK(is_missing_token(tok));
  CHECK_FALSE(is_missing_token("0"));
}

TEST_CASE("label encoding") {
  const EncodedColumn e = label_encode({"tcp", "udp", "tcp"});
  CHECK(e.codes == std::vector<int>{0, 1, 0});
  CHECK(e.encoder.mapping() == std::map<std::string, int>{{"tcp", 0}, {"udp", 1}});
  CHECK(label_encode({"x", "x", "x"}).codes == std::vector<int>{0, 0, 0});
  CHECK(label_encode({"c", "a", "b"}).codes == std::vector<int>{2, 0, 1});
  CHECK_THROWS_AS(e.encoder.encode("icmp"), DataError);
}

TEST_CASE("standardization") {
  const Eigen::MatrixXd x = (Eigen::MatrixXd(2, 2) << 1, 5, 3, 5).finished();
  const Standardizer s = Standardizer::fit(x);
  CHECK(s.mean()(0) == 2.0);
  CHECK(s.stddev()(0) == 1.0);
  const Eigen::MatrixXd z = s.apply(x);
  CHECK(z(0, 0) == -1.0);
  CHECK(z(1, 0) == 1.0);
  CHECK(z.col(1).isZero());
  CHECK(s.constant_columns() == std::vector<Eigen::Index>{1});

  Rng rng(3);
  Eigen::MatrixXd r(50, 4);
  for (Eigen::Index i = 0; i < r.size(); ++i) r(i) = uniform01(rng) * 7 - 2;
  const Eigen::MatrixXd rz = Standardizer::fit(r).apply(r);
  CHECK(rz.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);

  CHECK_THROWS_AS(Standardizer().apply(x), std::logic_error);
  CHECK_THROWS_AS(s.apply(Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
}

TEST_CASE("PCA on axis-aligned data") {
  // Factorial design: centered columns are exactly orthogonal.
  Eigen::MatrixXd x(8, 2);
  for (Eigen::Index i = 0; i < 8; ++i) {
    x(i, 0) = 3.0 + ((i & 1) ? 5.0 : -5.0) * (i < 4 ? 1.0 : 2.0);
    x(i, 1) = -1.0 + ((i & 2) ? 0.5 : -0.5);
  }
  const PcaModel m = pca_fit(x, 2);
  CHECK(std::abs(std::abs(m.components(0, 0)) - 1.0) < 1e-12);
  CHECK(std::abs(std::abs(m.components(1, 1)) - 1.0) < 1e-12);
  CHECK(m.components(0, 0) > 0);
  const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
  const Eigen::MatrixXd proj = pca_transform(m, x);
  CHECK((proj.cwiseAbs() - centered.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("PCA on a line") {
  Eigen::MatrixXd x(5, 2);
  for (int i = 0; i < 5; ++i) x(i, 0) = x(i, 1) = i - 1.5;
  const PcaModel m = pca_fit(x, 2);
  CHECK(std::abs(m.components(0, 0) - std::sqrt(0.5)) < 1e-10);
  CHECK(std::abs(m.components(1, 0) - std::sqrt(0.5)) < 1e-10);
  CHECK(m.explained_variance(0) == doctest::Approx(4.0));
  CHECK(std::abs(m.explained_variance(1)) < 1e-12);
  CHECK(m.rank_deficient);
  CHECK_FALSE(pca_fit(x, 1).rank_deficient);
}

TEST_CASE("PCA invariants") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index m = 10 + static_cast<Eigen::Index>(uniform01(rng) * 30);
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(uniform01(rng) * 6);
    Eigen::MatrixXd x(m, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = uniform01(rng) * 4 - 2;
    const PcaModel full = pca_fit(x, static_cast<int>(d));
    const Eigen::MatrixXd gram = full.components.transpose() * full.components;
    CHECK((gram - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-8);
    for (Eigen::Index c = 1; c < d; ++c) CHECK(full.explained_variance(c) <= full.explained_variance(c - 1));
    for (Eigen::Index c = 0; c < d; ++c) {
      Eigen::Index arg;
      full.components.col(c).cwiseAbs().maxCoeff(&arg);
      CHECK(full.components(arg, c) > 0);
    }
    const Eigen::MatrixXd centered = x.rowwise() - x.colwise().mean();
    const Eigen::MatrixXd back = pca_transform(full, x) * full.components.transpose();
    CHECK((back - centered).cwiseAbs().maxCoeff() < 1e-8);
    // Variance along each component equals the reported explained variance.
    const Eigen::MatrixXd proj = pca_transform(full, x);
    for (Eigen::Index c = 0; c < d; ++c) {
      CHECK(proj.col(c).squaredNorm() / static_cast<double>(m) == doctest::Approx(full.explained_variance(c)));
    }
  }
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Random(5, 3), 4), std::invalid_argument);
  CHECK_THROWS_AS(pca_fit(Eigen::MatrixXd::Random(5, 3), 0), std::invalid_argument);
}

TEST_CASE("stratified split") {
  Labels y(100, 0);
  for (int i = 0; i < 30; ++i) y[static_cast<std::size_t>(i * 3)] = 1;
  const SplitIndices s = split(y, 0.8, 42);
  CHECK(s.test.size() == 20);
  CHECK(s.train.size() == 80);
  long pos = 0;
  for (auto i : s.test) pos += y[i];
  CHECK(pos == 6);

  const SplitIndices again = split(y, 0.8, 42);
  CHECK(again.train == s.train);
  CHECK(again.test == s.test);
  CHECK(split(y, 0.8, 43).test != s.test);

  std::set<std::size_t> all(s.train.begin(), s.train.end());
  for (auto i : s.test) CHECK(all.insert(i).second);
  CHECK(all.size() == 100);

  CHECK_THROWS_AS(split(Labels{0, 0, 0, 1}, 0.8, 1), DataError);
  CHECK_THROWS_AS(split(y, 1.0, 1), std::invalid_argument);
}

TEST_CASE("stratified subsample") {
  Labels y(1000, 0);
  for (int i = 0; i < 200; ++i) y[static_cast<std::size_t>(i)] = 1;
  const auto picked = stratified_subsample(y, 100, 9);
  CHECK(picked.size() == 100);
  long pos = 0;
  for (auto i : picked) pos += y[i];
  CHECK(pos == 20);
  CHECK(std::set<std::size_t>(picked.begin(), picked.end()).size() == 100);
  CHECK(stratified_subsample(y, 0, 9).size() == 1000);
  CHECK(stratified_subsample(y, 5000, 9).size() == 1000);
}

TEST_CASE("prepare end to end") {
  const Table t = parse(synthetic_csv(120, 1));
  const PrepOptions o = synthetic_options();
  const PreparedData d = prepare(t, o);
  CHECK(d.stats.rows_in == 120);
  CHECK(d.stats.train_rows + d.stats.test_rows == 120);
  CHECK(d.train.cols() == 3);
  CHECK(d.test.rows() == static_cast<Eigen::Index>(d.y_test.size()));
  CHECK(d.train.colwise().mean().cwiseAbs().maxCoeff() < 1e-10);
  CHECK(d.state.encoders.count("proto") == 1);
  CHECK(std::count(d.y_train.begin(), d.y_train.end(), 1) == 32);
  CHECK(audit_leak_free(d, t, o));

  // A tampered statistic fails the audit.
  PreparedData bad = d;
  Eigen::VectorXd mu = bad.state.standardizer.mean();
  mu(0) += 1e-9;
  bad.state.standardizer = Standardizer(mu, bad.state.standardizer.stddev());
  CHECK_FALSE(audit_leak_free(bad, t, o));

  const PreparedData again = prepare(t, o);
  CHECK(again.train == d.train);
  CHECK(again.train_ids == d.train_ids);
}

TEST_CASE("rows with missing values are dropped") {
  std::string csv = synthetic_csv(60, 2);
  csv += "NA,1,tcp,0.5,normal\n3,2,udp,0.1,\n";
  const PreparedData d = prepare(parse(csv), synthetic_options());
  CHECK(d.stats.rows_in == 62);
  CHECK(d.stats.rows_dropped_missing == 2);
  CHECK(d.stats.rows_used == 60);
}

TEST_CASE("subsampling before the split") {
  PrepOptions o = synthetic_options();
  o.subsample = 60;
  const PreparedData d = prepare(parse(synthetic_csv(150, 3)), o);
  CHECK(d.stats.rows_used == 60);
  CHECK(d.stats.train_rows + d.stats.test_rows == 60);
}

TEST_CASE("configuration errors") {
  const Table t = parse(synthetic_csv(30, 4));
  PrepOptions o = synthetic_options();
  o.label_column = "class";
  CHECK_THROWS_AS(prepare(t, o), ConfigError);
  o = synthetic_options();
  o.drop_columns = {"nope"};
  CHECK_THROWS_AS(prepare(t, o), ConfigError);
  o = synthetic_options();
  o.n_components = 5;
  CHECK_THROWS_AS(prepare(t, o), ConfigError);
  o = synthetic_options();
  o.drop_columns = {"duration", "bytes", "proto", "rate"};
  CHECK_THROWS_AS(prepare(t, o), ConfigError);
}

TEST_CASE("label mapping") {
  const Table t = parse("x,y\n1,0\n2,1\n3,0.0\n4,2\n");
  PrepOptions o;
  o.label_column = "y";
  o.benign_value = "0";
  CHECK(binary_labels(t, o) == Labels{0, 1, 0, 1});
}

TEST_CASE("preprocessor document round trip") {
  const Table t = parse(synthetic_csv(90, 6));
  const PreparedData d = prepare(t, synthetic_options());
  const std::string text = to_json(d.state);
  const Preprocessor back = preprocessor_from_json(text);
  CHECK(to_json(back) == text);
  CHECK(back.encoders == d.state.encoders);
  std::vector<std::size_t> rows(d.test_ids.begin(), d.test_ids.end());
  CHECK(back.transform(t, rows) == d.test);
  CHECK_THROWS_AS(preprocessor_from_json("{"), std::invalid_argument);
}
