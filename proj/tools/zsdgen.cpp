// Copyright 2026 The zsdgen Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// zsdgen: command-line front end of the experiment runner.
//
// Exit codes: 0 success, 2 configuration error, 1 runtime failure.
#include "zsd/experiment.hpp"
#include "zsd/report.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

namespace {

namespace fs = std::filesystem;
using zsd::exp::ExperimentConfig;

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct Common {
  std::string config_file;
  std::vector<std::string> overrides;
  std::string out;
  bool dry_run = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_file, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.overrides, "Override a config value, e.g. --set train.n_critic=3")
      ->take_all();
  cmd->add_option("--out", c.out, "Run directory");
  cmd->add_flag("--dry-run", c.dry_run, "Validate the config, print it and exit");
  cmd->add_flag("-q,--quiet", c.quiet, "No progress lines on stderr");
}

std::optional<fs::path> file_or_none(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

zsd::exp::RunOptions options_for(const Common& c, const ExperimentConfig& config, const char* command) {
  zsd::exp::RunOptions o;
  o.out = !c.out.empty() ? fs::path(c.out) : fs::path(config.output);
  if (o.out.empty()) throw zsd::ConfigError("no run directory: pass --out or set output");
  o.log = c.quiet ? nullptr : &std::cerr;
  o.command = command;
  return o;
}

// Subcommands that run the pipeline fix the mode; a config file that asks
// for another mode is a mistake worth stopping on.
ExperimentConfig config_for(const Common& c, zsd::exp::Mode mode) {
  auto overrides = c.overrides;
  const auto file = file_or_none(c.config_file);
  ExperimentConfig probe = zsd::exp::load_config(file, overrides);
  if (probe.mode != mode && probe.mode != zsd::exp::Mode::kFull) {
    throw zsd::ConfigError("config mode '" + std::string(zsd::exp::to_string(probe.mode)) +
                           "' does not match this subcommand ('" +
                           std::string(zsd::exp::to_string(mode)) + "')");
  }
  overrides.push_back("mode=" + std::string(zsd::exp::to_string(mode)));
  return zsd::exp::load_config(file, overrides);
}

ExperimentConfig checkpoint_config(const Common& c, const std::string& model) {
  if (!c.config_file.empty()) return zsd::exp::load_config(fs::path(c.config_file), c.overrides);
  return zsd::exp::config_from_checkpoint(model, c.overrides);
}

bool dry_run(const Common& c, const ExperimentConfig& config) {
  if (!c.dry_run) return false;
  auto j = zsd::exp::to_json(config);
  if (!c.out.empty()) j["output"] = c.out;
  std::cout << j.dump(2) << "\n";
  std::cerr << "config ok (dry run, nothing executed)\n";
  return true;
}

void summarize(const zsd::exp::RunResult& r) {
  for (const auto& row : r.rows()) {
    if (row.metric != "recall@100" && row.metric != "accuracy") continue;
    std::cout << row.table << "\t" << row.variant << "\t" << row.metric;
    if (row.metric == "recall@100") std::cout << "@" << row.threshold;
    std::cout << "\t" << row.value << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zsdgen: IoU-aware feature generation for zero-shot detection on a synthetic domain"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "zsdgen 1.0.0");

  Common common;
  std::string model;
  std::string data;
  std::string embeddings;
  std::vector<int> classes;
  std::vector<std::string> manifests;
  std::string report_out;

  auto* gen = app.add_subcommand("gen-domain", "Generate the synthetic world and training features");
  add_common(gen, common);
  auto* train = app.add_subcommand("train", "Pretrain the seen head and train IoUGAN");
  add_common(train, common);
  train->add_option("--data", data, "Training features as JSONL instead of the generated domain")
      ->check(CLI::ExistingFile);
  train->add_option("--embeddings", embeddings, "Class embeddings JSONL (with --data)")
      ->check(CLI::ExistingFile);
  auto* synth = app.add_subcommand("synthesize", "Sample features from a trained model");
  add_common(synth, common);
  synth->add_option("--model", model, "model.bin")->required()->check(CLI::ExistingFile);
  synth->add_option("--class", classes, "Class ids (default: every unseen class)");
  auto* xfer = app.add_subcommand("transfer", "Train the unseen head from synthesized features");
  add_common(xfer, common);
  xfer->add_option("--model", model, "model.bin")->required()->check(CLI::ExistingFile);
  auto* ev = app.add_subcommand("eval", "Zero-shot evaluation of a model's unseen head");
  add_common(ev, common);
  ev->add_option("--model", model, "model.bin")->required()->check(CLI::ExistingFile);
  auto* full = app.add_subcommand("run-full", "Whole pipeline per seed");
  add_common(full, common);
  auto* ablate = app.add_subcommand("ablate", "Component and loss ablations");
  add_common(ablate, common);
  auto* gzsd = app.add_subcommand("gzsd", "Zero-shot and generalized zero-shot evaluation");
  add_common(gzsd, common);
  auto* report = app.add_subcommand("report", "Merge finished runs into tables");
  report->add_option("manifests", manifests, "manifest.json files or run directories")->required();
  report->add_option("--out", report_out, "Report directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*report) {
      const auto r = zsd::report::build_report({manifests.begin(), manifests.end()});
      zsd::report::write_report(r, report_out);
      std::cout << zsd::report::markdown_tables(r);
      return 0;
    }
    ExperimentConfig config;
    zsd::exp::RunResult result;
    if (*gen || *train) {
      config = zsd::exp::load_config(file_or_none(common.config_file), common.overrides);
      if (dry_run(common, config)) return 0;
      if (*gen) {
        result = zsd::exp::gen_domain(config, options_for(common, config, "gen-domain"));
      } else {
        if (data.empty() != embeddings.empty()) {
          throw zsd::ConfigError("--data and --embeddings go together");
        }
        std::optional<zsd::exp::TrainInputs> inputs;
        if (!data.empty()) inputs = zsd::exp::TrainInputs{data, embeddings};
        result = zsd::exp::train_stage(config, options_for(common, config, "train"), inputs);
      }
    } else if (*synth || *xfer || *ev) {
      config = checkpoint_config(common, model);
      if (dry_run(common, config)) return 0;
      if (*synth) {
        result = zsd::exp::synthesize_stage(model, config, options_for(common, config, "synthesize"), classes);
      } else if (*xfer) {
        result = zsd::exp::transfer_stage(model, config, options_for(common, config, "transfer"));
      } else {
        result = zsd::exp::eval_stage(model, config, options_for(common, config, "eval"));
      }
    } else {
      const auto mode = *full ? zsd::exp::Mode::kFull : *ablate ? zsd::exp::Mode::kAblation : zsd::exp::Mode::kGzsd;
      config = config_for(common, mode);
      if (dry_run(common, config)) return 0;
      const char* command = *full ? "run-full" : *ablate ? "ablate" : "gzsd";
      result = zsd::exp::run(config, options_for(common, config, command));
    }
    summarize(result);
    return 0;
  } catch (const zsd::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
