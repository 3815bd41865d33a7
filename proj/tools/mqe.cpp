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

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config, "Run configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed, "Reseed every stage from this value");
  cmd->add_option("--out", args.out, "Output directory (overrides run.out)");
}

mqe::pipeline::RunConfig resolve(const CommonArgs& args) {
  mqe::pipeline::RunConfig config;
  if (!args.config.empty()) config = mqe::pipeline::load_config(args.config);
  if (args.seed) mqe::pipeline::apply_seed(config, *args.seed);
  if (!args.out.empty()) config.out = args.out;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Meta-quantum ensemble intrusion detection pipeline"};
  app.require_subcommand(1);

  CommonArgs args;
  struct Verb {
    const char* name;
    const char* help;
    std::function<void(const mqe::pipeline::RunConfig&)> run;
  };
  const std::vector<Verb> verbs{
      {"prep", "Preprocess the dataset into train/test splits",
       [](const auto& c) { mqe::pipeline::cmd_prep(c); }},
      {"train-qnn", "Train the variational QNN branch", [](const auto& c) { mqe::pipeline::cmd_train_qnn(c); }},
      {"train-qsvm", "Train the fidelity-kernel QSVM branch",
       [](const auto& c) { mqe::pipeline::cmd_train_qsvm(c); }},
      {"fuse-eval", "Fit the forest meta-learner per scheme and evaluate",
       [](const auto& c) { mqe::pipeline::cmd_fuse_eval(c); }},
      {"noise-sweep", "Re-evaluate the fused pipeline under gate noise",
       [](const auto& c) { mqe::pipeline::cmd_noise_sweep(c); }},
      {"print-config", "Print the resolved configuration",
       [](const auto& c) {
         mqe::pipeline::validate(c);
         std::cout << mqe::pipeline::to_ini(c);
       }},
  };
  std::vector<std::pair<CLI::App*, const Verb*>> commands;
  for (const auto& v : verbs) {
    CLI::App* cmd = app.add_subcommand(v.name, v.help);
    add_common(cmd, args, std::string(v.name) != "print-config");
    commands.emplace_back(cmd, &v);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    for (const auto& [cmd, verb] : commands) {
      if (cmd->parsed()) verb->run(resolve(args));
    }
  } catch (const std::exception& e) {
    const int code = mqe::pipeline::exit_code(e);
    std::cerr << "error: " << e.what() << '\n';
    return code;
  }
  return 0;
}
