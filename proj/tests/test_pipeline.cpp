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

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

using namespace mqe;
using namespace mqe::pipeline;
namespace fs = std::filesystem;

namespace {

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("mqe_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

/// Two shifted Gaussian blobs over four numeric features plus a categorical one.
std::string blob_csv(int rows, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  std::ostringstream os;
  os << "f0,f1,f2,f3,proto,label\n";
  const char* protos[] = {"tcp", "udp"};
  for (int i = 0; i < rows; ++i) {
    const int label = i % 4 == 0 ? 1 : 0;
    const double shift = label ? 2.5 : 0.0;
    os << g(rng) + shift << ',' << g(rng) - shift << ',' << g(rng) << ',' << 0.5 * g(rng) + shift << ','
       << protos[i % 2] << ',' << label << '\n';
  }
  return os.str();
}

std::string small_config(const std::string& data, const std::string& extra = "") {
  return "[data]\npath = " + data +
         "\ncategorical = proto\n"
         "[prep]\nn_components = 2\n"
         "[qnn]\nn_qubits = 2\nlayers = 1\nepochs = 4\nbatch_size = 16\nlearning_rate = 0.1\n"
         "[forest]\nn_trees = 15\n"
         "[noise]\nchannels = depolarizing\nprobabilities = 0,0.3\ntrajectories = 8\n"
         "[run]\nworkers = 1\n" +
         extra;
}

RunConfig config_in(const TempDir& dir, const std::string& out, const std::string& extra = "") {
  write_file(dir.path / "data.csv", blob_csv(120, 1));
  write_file(dir.path / "run.ini", small_config("data.csv", extra));
  RunConfig c = load_config(dir.path / "run.ini");
  c.out = (dir.path / out).string();
  return c;
}

void run_all(const RunConfig& c) {
  cmd_prep(c);
  cmd_train_qnn(c);
  cmd_train_qsvm(c);
  cmd_fuse_eval(c);
  cmd_noise_sweep(c);
}

std::map<std::string, std::string> snapshot(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_file(e.path());
  }
  return files;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(MQE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing and rendering") {
  std::istringstream in(
      "# comment\n[data]\npath = x.csv\nlabel_column = class\nbenign_value = normal\ncategorical = a, b\n"
      "[prep]\nn_components = 4\n[qnn]\nn_qubits = 4\nlayers = 2\n[qsvm]\nC = 2.5\n"
      "[fusion]\nschemes = hard,probability\n[noise]\nchannels = bit_flip\nprobabilities = 0.1\n"
      "[run]\nworkers = 2\nout = somewhere\n");
  const RunConfig c = parse_config(in, "/base");
  CHECK(c.data_path == "/base/x.csv");
  CHECK(c.prep.label_column == "class");
  CHECK(c.prep.benign_value == "normal");
  CHECK(c.prep.categorical == std::vector<std::string>{"a", "b"});
  CHECK(c.prep.n_components == 4);
  CHECK(c.qnn.layers == 2);
  CHECK(c.qsvm.C == 2.5);
  CHECK(c.fusion.schemes.size() == 2);
  CHECK(c.noise.channels == std::vector<qsim::ChannelKind>{qsim::ChannelKind::BitFlip});
  CHECK(c.workers == 2);
  CHECK(c.out == "somewhere");
  CHECK(c.forest.n_trees == 100);

  std::istringstream back(to_ini(c));
  const RunConfig again = parse_config(back);
  CHECK(to_ini(again) == to_ini(c));
  CHECK(to_ini(c).find("somewhere") == std::string::npos);
}

TEST_CASE("config errors") {
  auto parse = [](const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
  };
  CHECK_THROWS_AS(parse("[qnn]\nlayerz = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse("[bogus]\nx = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse("[qnn]\nlayers = three\n"), ConfigError);
  CHECK_THROWS_AS(parse("[fusion]\nschemes = soft\n"), ConfigError);
  CHECK_THROWS_AS(parse("[noise]\nchannels = thermal\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.ini"), ConfigError);

  RunConfig c;
  c.prep.n_components = 4;
  c.qnn.n_qubits = 4;
  CHECK_NOTHROW(validate(c));
  c.qnn.n_qubits = 5;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.qnn.n_qubits = 4;
  c.prep.train_ratio = 1.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c.prep.train_ratio = 0.8;
  c.qsvm.C = -1;
  CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("one seed reseeds every stage") {
  RunConfig c;
  apply_seed(c, 100);
  CHECK(c.prep.seed == 100);
  CHECK(c.qnn.seed == 101);
  CHECK(c.qsvm.seed == 102);
  CHECK(c.forest.seed == 103);
  CHECK(c.fusion.seed == 104);
  CHECK(c.noise.seed == 105);
}

TEST_CASE("split files round trip") {
  TempDir dir("split");
  Split s{{3, 8}, (Eigen::MatrixXd(2, 2) << 0.1, -2, 1e-9, 3.25).finished(), {1, 0}};
  write_file(dir.path / "s.csv", split_csv(s));
  const Split back = read_split(dir.path / "s.csv");
  CHECK(back.ids == s.ids);
  CHECK(back.labels == s.labels);
  CHECK(back.features == s.features);
  write_file(dir.path / "bad.csv", "sample_id,label,f0\n1,1,abc\n");
  CHECK_THROWS_AS(read_split(dir.path / "bad.csv"), DataError);
  CHECK_THROWS_AS(read_split(dir.path / "missing.csv"), ArtifactError);
}

TEST_CASE("sha256 digest") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("full run writes every artifact and is reproducible") {
  TempDir dir("full");
  const RunConfig a = config_in(dir, "a");
  const prep::PrepStats ps = cmd_prep(a);
  CHECK(ps.train_rows + ps.test_rows == 120);
  const qnn::TrainResult tr = cmd_train_qnn(a);
  CHECK(tr.history.size() == 4);
  const qsvm::QsvmFit sf = cmd_train_qsvm(a);
  CHECK(sf.audit.ok());
  const FuseEvalResult fe = cmd_fuse_eval(a);
  CHECK(fe.fused.size() == 3);
  CHECK(fe.qnn.point.confusion.total() == static_cast<long>(ps.test_rows));
  const auto sweep = cmd_noise_sweep(a);
  REQUIRE(sweep.size() == 2);

  const Layout l{a.out};
  for (const char* f : {"train.csv", "test.csv", "preprocessor.json", "manifest.json"}) CHECK(fs::exists(l.prep() / f));
  for (const char* f : {"qnn.json", "qsvm.json", "forest_hard.json", "forest_margin.json", "forest_probability.json"}) {
    CHECK(fs::exists(l.models() / f));
  }
  for (const char* f : {"eval_summary.csv", "disagreement.csv", "qnn_history.csv", "qsvm_kkt_audit.csv",
                        "branch_outputs_oof.csv", "branch_outputs_test.csv", "meta_features_hard_train.csv",
                        "confusion_fused_margin.csv", "prep_config.ini", "noise_sweep_config.ini"}) {
    CHECK_MESSAGE(fs::exists(l.reports() / f), f);
  }
  for (const char* f : {"roc_qnn.csv", "pr_qsvm.csv", "reliability_fused_probability.csv", "noise_sweep.csv"}) {
    CHECK_MESSAGE(fs::exists(l.curves() / f), f);
  }
  const std::string manifest = read_file(l.prep() / "manifest.json");
  CHECK(manifest.find(sha256_hex(read_file(dir.path / "data.csv"))) != std::string::npos);
  CHECK(manifest.find("\"leak_free\": true") != std::string::npos);

  const std::string summary = read_file(l.reports() / "eval_summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 6);

  // Zero noise reproduces the noiseless evaluation.
  CHECK(sweep[0].probability == 0.0);
  CHECK(sweep[0].qnn_f1 == fe.qnn.point.f1);
  CHECK(sweep[0].qsvm_f1 == fe.qsvm.point.f1);
  for (std::size_t s = 0; s < 3; ++s) {
    CHECK(sweep[0].fused_f1[s] == fe.fused[s].point.f1);
    CHECK(sweep[0].fused_accuracy[s] == fe.fused[s].point.accuracy);
  }
  const std::string noise = read_file(l.curves() / "noise_sweep.csv");
  CHECK(noise.rfind("channel,probability,trajectories,qnn_f1,qsvm_f1,fused_hard_f1,fused_margin_f1,"
                    "fused_probability_f1,fused_hard_accuracy,fused_margin_accuracy,fused_probability_accuracy\n",
                    0) == 0);
  CHECK(std::count(noise.begin(), noise.end(), '\n') == 3);

  RunConfig b = a;
  b.out = (dir.path / "b").string();
  run_all(b);
  CHECK(snapshot(a.out) == snapshot(b.out));

  RunConfig c = a;
  c.out = (dir.path / "c").string();
  apply_seed(c, 99);
  cmd_prep(c);
  CHECK(read_file(fs::path(c.out) / "prep" / "train.csv") != read_file(l.prep() / "train.csv"));
}

TEST_CASE("worker count does not change artifacts") {
  TempDir dir("workers");
  RunConfig a = config_in(dir, "a");
  RunConfig b = a;
  b.out = (dir.path / "b").string();
  b.workers = 3;
  a.noise.probabilities = b.noise.probabilities = {0.3};
  run_all(a);
  run_all(b);
  auto sa = snapshot(a.out), sb = snapshot(b.out);
  // The recorded config differs only in the worker count.
  for (auto* m : {&sa, &sb}) {
    for (auto it = m->begin(); it != m->end();) it = it->first.find("_config.ini") != std::string::npos ? m->erase(it) : ++it;
    m->erase("prep/manifest.json");
  }
  CHECK(sa == sb);
}

TEST_CASE("a single fusion scheme yields one fused report") {
  TempDir dir("single");
  RunConfig c = config_in(dir, "o", "[fusion]\nschemes = margin\n");
  c.noise.probabilities = {0.2};
  run_all(c);
  const Layout l{c.out};
  CHECK(fs::exists(l.models() / "forest_margin.json"));
  CHECK_FALSE(fs::exists(l.models() / "forest_hard.json"));
  CHECK(fs::exists(l.reports() / "eval_fused_margin.csv"));
  CHECK_FALSE(fs::exists(l.reports() / "eval_fused_probability.csv"));
  const std::string header = read_file(l.curves() / "noise_sweep.csv");
  CHECK(header.rfind("channel,probability,trajectories,qnn_f1,qsvm_f1,fused_margin_f1,fused_margin_accuracy\n", 0) ==
        0);
}

TEST_CASE("missing artifacts") {
  TempDir dir("missing");
  const RunConfig c = config_in(dir, "o");
  CHECK_THROWS_AS(cmd_train_qnn(c), ArtifactError);
  CHECK_THROWS_AS(cmd_fuse_eval(c), ArtifactError);
  cmd_prep(c);
  CHECK_THROWS_AS(cmd_fuse_eval(c), ArtifactError);
  CHECK_THROWS_AS(cmd_noise_sweep(c), ArtifactError);
  RunConfig gone = c;
  gone.data_path = (dir.path / "nope.csv").string();
  CHECK_THROWS_AS(cmd_prep(gone), ArtifactError);
  RunConfig empty = c;
  empty.noise.probabilities.clear();
  CHECK_THROWS_AS(cmd_noise_sweep(empty), ConfigError);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ConfigError("x")) == 2);
  CHECK(exit_code(ArtifactError("x")) == 3);
  CHECK(exit_code(DataError("x")) == 4);
  CHECK(exit_code(std::runtime_error("x")) == 1);
}

TEST_CASE("command-line exit codes") {
  TempDir dir("cli");
  write_file(dir.path / "data.csv", blob_csv(120, 2));
  write_file(dir.path / "run.ini", small_config("data.csv"));
  const std::string cfg = "--config " + (dir.path / "run.ini").string();
  const std::string out = " --out " + (dir.path / "o").string();

  CHECK(run_cli("print-config") == 0);
  CHECK(run_cli("print-config " + cfg) == 0);
  CHECK(run_cli("train-qnn") == 2);
  CHECK(run_cli("frobnicate") == 2);

  write_file(dir.path / "bad.ini", "[qnn]\nlayerz = 1\n");
  CHECK(run_cli("prep --config " + (dir.path / "bad.ini").string() + out) == 2);
  write_file(dir.path / "nolabel.ini",
             "[data]\npath = data.csv\nlabel_column = verdict\n[prep]\nn_components = 2\n[qnn]\nn_qubits = 2\n");
  CHECK(run_cli("prep --config " + (dir.path / "nolabel.ini").string() + out) == 2);

  CHECK(run_cli("train-qnn " + cfg + out) == 3);
  write_file(dir.path / "nodata.ini", small_config("absent.csv"));
  CHECK(run_cli("prep --config " + (dir.path / "nodata.ini").string() + out) == 3);

  write_file(dir.path / "ragged.csv", "f0,f1,label\n1,2,0\n3,1\n");
  write_file(dir.path / "ragged.ini", "[data]\npath = ragged.csv\n[prep]\nn_components = 1\n[qnn]\nn_qubits = 1\n");
  CHECK(run_cli("prep --config " + (dir.path / "ragged.ini").string() + out) == 4);

  CHECK(run_cli("prep " + cfg + out + " --seed 5") == 0);
  CHECK(fs::exists(dir.path / "o" / "prep" / "train.csv"));
  CHECK(read_file(dir.path / "o" / "reports" / "prep_config.ini").find("seed = 5") != std::string::npos);
}
