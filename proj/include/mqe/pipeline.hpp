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

#include "mqe/forest.hpp"
#include "mqe/fusion.hpp"
#include "mqe/metrics.hpp"
#include "mqe/prep.hpp"
#include "mqe/qnn.hpp"
#include "mqe/qsvm.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mqe::pipeline {

struct FusionConfig {
  std::vector<fusion::Scheme> schemes{fusion::Scheme::Hard, fusion::Scheme::Margin, fusion::Scheme::Probability};
  /// Folds used to build out-of-fold meta-features on the training split.
  int folds = 3;
  std::uint64_t seed = 17;
};

struct NoiseSweepConfig {
  std::vector<qsim::ChannelKind> channels{qsim::kAllChannelKinds.begin(), qsim::kAllChannelKinds.end()};
  std::vector<double> probabilities{0.05, 0.1, 0.2, 0.4, 0.6, 0.8};
  int trajectories = 256;
  std::uint64_t seed = 19;
};

/// Everything a run needs. `data_path` is resolved against the directory of the
/// config file it was read from.
struct RunConfig {
  std::string data_path;
  prep::PrepOptions prep;
  qnn::TrainConfig qnn;
  qsvm::QsvmConfig qsvm;
  forest::ForestConfig forest;
  FusionConfig fusion;
  NoiseSweepConfig noise;
  unsigned workers = 0;
  std::string out = "mqe_out";
};

/// Parses sectioned key = value text. Unknown sections or keys are errors;
/// omitted keys keep their defaults.
RunConfig parse_config(std::istream& in, const std::filesystem::path& base_dir = {});
RunConfig load_config(const std::filesystem::path& path);

/// Every key with its resolved value, in a fixed order. `out` is omitted so the
/// text is independent of where a run writes.
std::string to_ini(const RunConfig& config);

/// Reseeds every stochastic stage from one value: prep s, qnn s+1, qsvm s+2,
/// forest s+3, fusion folds s+4, noise s+5.
void apply_seed(RunConfig& config, std::uint64_t seed);

void validate(const RunConfig& config);

/// Fixed output layout under the run directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path prep() const { return root / "prep"; }
  std::filesystem::path models() const { return root / "models"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path curves() const { return root / "curves"; }
};

struct Split {
  std::vector<long> ids;
  Eigen::MatrixXd features;
  Labels labels;
};

/// Header: sample_id,label,f0,f1,...
std::string split_csv(const Split& split);
Split read_split(const std::filesystem::path& path);

std::string sha256_hex(const std::string& bytes);

prep::PrepStats cmd_prep(const RunConfig& config);
qnn::TrainResult cmd_train_qnn(const RunConfig& config);
qsvm::QsvmFit cmd_train_qsvm(const RunConfig& config);

struct FuseEvalResult {
  metrics::EvalReport qnn;
  metrics::EvalReport qsvm;
  std::vector<metrics::EvalReport> fused;
  fusion::DisagreementReport disagreement;
};

FuseEvalResult cmd_fuse_eval(const RunConfig& config);

struct NoisePoint {
  qsim::ChannelKind channel = qsim::ChannelKind::Depolarizing;
  double probability = 0.0;
  double qnn_f1 = 0.0;
  double qsvm_f1 = 0.0;
  /// One entry per configured scheme, in config order.
  std::vector<double> fused_f1;
  std::vector<double> fused_accuracy;
};

std::vector<NoisePoint> cmd_noise_sweep(const RunConfig& config);

/// 2 config, 3 missing artifact, 4 data, 1 anything else.
int exit_code(const std::exception& error);

}  // namespace mqe::pipeline
