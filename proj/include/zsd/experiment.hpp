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
// Experiment runner: one JSON config, seeded runs, manifests and metrics.
//
// A run directory holds config.json, manifest.json, metrics.json and
// losses.csv; each seed's trained pipeline goes to seed-<s>/model.bin.
// manifest.json is rewritten after every stage so a crash leaves the last
// completed stage and the error behind.
#ifndef ZSD_EXPERIMENT_HPP
#define ZSD_EXPERIMENT_HPP

#include "zsd/domain.hpp"
#include "zsd/eval.hpp"
#include "zsd/head.hpp"
#include "zsd/iougan.hpp"
#include "zsd/transfer.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace zsd::exp {

inline constexpr int kSchemaVersion = 1;

enum class Mode { kFull, kAblation, kGzsd };
enum class Variant { kBaseline, kCfu, kCfuFfu, kCfuFfuBfu };
enum class LossVariant { kWganOnly, kCls, kEmb, kClsEmb };
enum class Sweep { kComponents, kLosses, kBoth };

inline constexpr std::array<Variant, 4> kAllVariants{Variant::kBaseline, Variant::kCfu,
                                                     Variant::kCfuFfu, Variant::kCfuFfuBfu};
inline constexpr std::array<LossVariant, 4> kAllLossVariants{
    LossVariant::kWganOnly, LossVariant::kCls, LossVariant::kEmb, LossVariant::kClsEmb};

std::string_view to_string(Mode m);
std::string_view to_string(Variant v);
std::string_view to_string(LossVariant v);
std::string_view to_string(Sweep s);

// Per-run seeds live in `seeds`; the seed fields of the nested configs are
// overwritten for each run. The enabled units, the fg source and the
// background source of the unseen head follow from `variant`.
struct ExperimentConfig {
  Mode mode = Mode::kFull;
  std::vector<std::uint64_t> seeds{1};
  domain::DomainConfig domain;
  gan::TrainConfig train;
  transfer::TransferConfig transfer;
  HeadTrainConfig baseline;
  Variant variant = Variant::kCfuFfuBfu;
  LossVariant loss = LossVariant::kClsEmb;
  Sweep sweep = Sweep::kBoth;
  int held_out_gt = 500;  // per-class-cycled GT boxes in the labelled unseen check set
  std::string output;     // run directory; the CLI's --out wins

  ExperimentConfig();
  // Throws ConfigError naming the offending key.
  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);

// Strict: unknown keys and type mismatches raise ConfigError with the
// dotted path. Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& doc);

// "a.b.c=value" applied to a config document. The path must already exist
// in the default config and the value must keep its JSON type (an integer
// may stand in for a float). Values that are not JSON are taken as strings.
void apply_override(nlohmann::json& doc, std::string_view assignment);

// Defaults, then the file (if any), then the overrides, in order.
ExperimentConfig load_config(const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides);

// SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
std::string git_blob_sha1(std::string_view content);

// The config with `output` removed, dumped canonically.
std::string canonical_config(const ExperimentConfig& config);

// ---- per-seed pipeline pieces -------------------------------------------------

struct Stage0 {
  ExperimentConfig config;  // with this seed written into the nested configs
  domain::World world;
  domain::Dataset train;
};

// Copy of `config` seeded for one run.
ExperimentConfig seeded(const ExperimentConfig& config, std::uint64_t seed);

// World and training set for one seed.
Stage0 build_domain(const ExperimentConfig& config, std::uint64_t seed);

gan::TrainConfig train_config_for(const ExperimentConfig& config, Variant variant, LossVariant loss);
transfer::TransferConfig transfer_config_for(const ExperimentConfig& config, Variant variant);

// Model with only the units a variant uses marked trained; FFU/BFU weights
// of a detached run are independent of CFU-only training.
gan::IoUGANModel restrict_to(const gan::IoUGANModel& model, Variant variant);

// Labelled unseen features (GT, FG, BG per box) drawn like the training set
// but from the unseen classes, with output-index targets (U = background).
struct HeldOutSet {
  Matrix features;
  std::vector<int> targets;
};
HeldOutSet held_out_unseen(const Stage0& stage);

// ---- runs ---------------------------------------------------------------------

// One row of the long-format results table.
struct MetricRow {
  std::string table;    // zsd | components | losses | gzsd | transfer | training
  std::string variant;  // e.g. cfu_ffu_bfu, +cls, Seen
  std::string metric;   // recall@100 | map | accuracy | min_penalty ...
  double threshold = 0.0;
  double value = 0.0;
};

nlohmann::json to_json(const MetricRow& row);
MetricRow metric_row_from_json(const nlohmann::json& j);

struct RunResult {
  nlohmann::json manifest;
  nlohmann::json metrics;
  [[nodiscard]] std::vector<MetricRow> rows() const;
};

struct RunOptions {
  std::filesystem::path out;
  std::ostream* log = nullptr;
  bool save_models = true;
  std::string command;  // recorded in the manifest; defaults to the mode
};

// pretrain seen head -> train IoUGAN -> synthesize + train unseen head ->
// evaluate, per seed. Throws after recording the failed stage.
RunResult run_full(const ExperimentConfig& config, const RunOptions& options);

// Component variants (baseline, cfu, cfu_ffu, cfu_ffu_bfu) and/or the loss
// sweep, all on the same world and evaluation images per seed.
RunResult run_ablation(const ExperimentConfig& config, const RunOptions& options);

// ZSD on unseen images and GZSD (fused head) on unseen + seen images from
// the same trained pipeline.
RunResult run_gzsd(const ExperimentConfig& config, const RunOptions& options);

// Dispatch on config.mode.
RunResult run(const ExperimentConfig& config, const RunOptions& options);

// ---- single stages --------------------------------------------------------------

// World and training set per seed: seed-<s>/embeddings.jsonl and
// seed-<s>/train.jsonl, with counts and the semantic-visual rank
// correlation in metrics.json.
RunResult gen_domain(const ExperimentConfig& config, const RunOptions& options);

// Externally produced features instead of the generated domain; the world
// read from `embeddings` has no prototypes.
struct TrainInputs {
  std::filesystem::path data;
  std::filesystem::path embeddings;
};

// Seen head + IoUGAN per seed, seed-<s>/model.bin without an unseen head.
RunResult train_stage(const ExperimentConfig& config, const RunOptions& options,
                      const std::optional<TrainInputs>& inputs = std::nullopt);

// The config a checkpoint was trained with, for its own seed, with
// `overrides` applied on top.
ExperimentConfig config_from_checkpoint(const std::filesystem::path& model,
                                        const std::vector<std::string>& overrides);

// synthesized.jsonl: {"class_id", "kind", "feature"} per row, counts from
// config.transfer.counts. Empty `class_ids` means every unseen class.
RunResult synthesize_stage(const std::filesystem::path& model, const ExperimentConfig& config,
                           const RunOptions& options, std::vector<int> class_ids = {});

// Trains the unseen head of `model` and writes it back as <out>/model.bin.
RunResult transfer_stage(const std::filesystem::path& model, const ExperimentConfig& config,
                         const RunOptions& options);

// Zero-shot evaluation of the model's unseen head on the test-unseen
// images; also metrics.csv and per_class.csv.
RunResult eval_stage(const std::filesystem::path& model, const ExperimentConfig& config,
                     const RunOptions& options);

void write_losses_csv(std::ostream& os, std::uint64_t seed, std::string_view training,
                      const std::vector<gan::LossRecord>& history, bool header);

}  // namespace zsd::exp

#endif  // ZSD_EXPERIMENT_HPP
