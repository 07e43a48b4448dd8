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
#include "zsd/experiment.hpp"

#include "zsd/checkpoint.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>

namespace zsd::exp {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

template <typename E, std::size_t N>
E parse_enum(const json& j, const std::string& path, const std::array<E, N>& values) {
  const auto s = j.get<std::string>();
  std::string expected;
  for (E v : values) {
    if (to_string(v) == s) return v;
    expected += (expected.empty() ? "" : "|") + std::string(to_string(v));
  }
  throw ConfigError(path + ": unknown value '" + s + "' (expected " + expected + ")");
}

constexpr std::array<Mode, 3> kModes{Mode::kFull, Mode::kAblation, Mode::kGzsd};
constexpr std::array<Sweep, 3> kSweeps{Sweep::kComponents, Sweep::kLosses, Sweep::kBoth};

json per_unit(const std::array<double, 3>& v) {
  return {{"cfu", v[0]}, {"ffu", v[1]}, {"bfu", v[2]}};
}

std::array<double, 3> per_unit(const json& j) {
  return {j.at("cfu").get<double>(), j.at("ffu").get<double>(), j.at("bfu").get<double>()};
}

json head_json(const HeadTrainConfig& h) {
  return {{"epochs", h.epochs}, {"batch_size", h.batch_size}, {"learning_rate", h.learning_rate}};
}

HeadTrainConfig head_from(const json& j) {
  HeadTrainConfig h;
  h.epochs = j.at("epochs").get<int>();
  h.batch_size = j.at("batch_size").get<int>();
  h.learning_rate = j.at("learning_rate").get<double>();
  return h;
}

std::string type_name(const json& j) {
  if (j.is_number_unsigned()) return "non-negative integer";
  if (j.is_number_integer()) return "integer";
  return j.type_name();
}

// `value` must be shaped like `reference`: same keys (a subset), same types.
void check_shape(const json& value, const json& reference, const std::string& path) {
  const std::string where = path.empty() ? "config" : path;
  if (reference.is_object()) {
    if (!value.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [key, v] : value.items()) {
      const std::string sub = path.empty() ? key : path + "." + key;
      if (!reference.contains(key)) throw ConfigError("unknown config key '" + sub + "'");
      check_shape(v, reference.at(key), sub);
    }
    return;
  }
  bool ok = false;
  if (reference.is_array()) {
    ok = value.is_array();
    if (ok && !reference.empty()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        check_shape(value[i], reference[0], where + "[" + std::to_string(i) + "]");
      }
    }
  } else if (reference.is_number_float()) {
    ok = value.is_number();
  } else if (reference.is_number_unsigned()) {
    ok = value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
  } else if (reference.is_number_integer()) {
    ok = value.is_number_integer();
  } else {
    ok = value.type() == reference.type();
  }
  if (!ok) {
    throw ConfigError(where + ": expected " + type_name(reference) + ", got " + type_name(value) +
                      " (" + value.dump() + ")");
  }
}

void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + tmp.string());
    os << text;
    if (!os) throw DataError("failed writing " + tmp.string());
  }
  fs::rename(tmp, path);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void add_report_rows(std::vector<MetricRow>& rows, const std::string& table,
                     const std::string& variant, const eval::MetricsReport& r) {
  for (std::size_t i = 0; i < r.thresholds.size(); ++i) {
    rows.push_back({table, variant, "recall@100", r.thresholds[i], r.recall_at_100[i]});
  }
  rows.push_back({table, variant, "map", 0.5, r.map_50});
}

json rows_json(const std::vector<MetricRow>& rows) {
  json out = json::array();
  for (const auto& r : rows) out.push_back(to_json(r));
  return out;
}

std::string training_label(Variant v, LossVariant l) {
  return std::string(to_string(v)) + "/" + std::string(to_string(l));
}

// Bookkeeping shared by every run: manifest rewrites, stage timing and
// failure capture, the loss log and the per-seed metrics.
class Recorder {
 public:
  Recorder(const ExperimentConfig& config, const RunOptions& options)
      : options_(options), t0_(std::chrono::steady_clock::now()) {
    fs::create_directories(options.out);
    const std::string canonical = canonical_config(config);
    json cfg = to_json(config);
    cfg["output"] = options.out.string();
    write_file(options.out / "config.json", cfg.dump(2) + "\n");
    manifest_ = {{"schema_version", kSchemaVersion},
                 {"run_id", run_id(options.out)},
                 {"mode", to_string(config.mode)},
                 {"command", options.command.empty() ? std::string(to_string(config.mode)) : options.command},
                 {"status", "running"},
                 {"config", cfg},
                 {"input_hash", git_blob_sha1(canonical)},
                 {"build", build_info()},
                 {"stages", json::array()},
                 {"results", json::array()},
                 {"artifacts",
                  {{"config", "config.json"},
                   {"metrics", "metrics.json"},
                   {"losses", "losses.csv"},
                   {"models", json::array()},
                   {"files", json::array()}}},
                 {"wall_seconds", 0.0}};
    losses_.open(options.out / "losses.csv", std::ios::trunc);
    if (!losses_) throw DataError("cannot write " + (options.out / "losses.csv").string());
    write_losses_csv(losses_, 0, "", {}, true);
    flush_manifest();
  }

  template <typename F>
  auto stage(std::uint64_t seed, const std::string& name, F&& fn) {
    log("seed " + std::to_string(seed) + ": " + name);
    const auto t = std::chrono::steady_clock::now();
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        finish_stage(seed, name, t);
      } else {
        auto out = fn();
        finish_stage(seed, name, t);
        return out;
      }
    } catch (const std::exception& e) {
      manifest_["status"] = "failed";
      manifest_["failure"] = {{"seed", seed}, {"stage", name}, {"error", e.what()}};
      manifest_["wall_seconds"] = seconds_since(t0_);
      flush_manifest();
      throw;
    }
  }

  void losses(std::uint64_t seed, const std::string& training,
              const std::vector<gan::LossRecord>& history) {
    write_losses_csv(losses_, seed, training, history, false);
    losses_.flush();
  }

  void model(std::uint64_t seed, const Checkpoint& ck) {
    if (!options_.save_models) return;
    const fs::path rel = fs::path("seed-" + std::to_string(seed)) / "model.bin";
    fs::create_directories(options_.out / rel.parent_path());
    save_checkpoint(ck, options_.out / rel);
    manifest_["artifacts"]["models"].push_back(rel.generic_string());
  }

  // Path of a per-seed artifact, registered in the manifest.
  fs::path artifact(std::uint64_t seed, const std::string& name) {
    const fs::path rel = fs::path("seed-" + std::to_string(seed)) / name;
    fs::create_directories(options_.out / rel.parent_path());
    manifest_["artifacts"]["files"].push_back(rel.generic_string());
    return options_.out / rel;
  }

  void seed_done(std::uint64_t seed, json detail, const std::vector<MetricRow>& rows) {
    detail["seed"] = seed;
    detail["rows"] = rows_json(rows);
    seeds_.push_back(std::move(detail));
    manifest_["results"].push_back({{"seed", seed}, {"rows", rows_json(rows)}});
    flush_manifest();
  }

  RunResult finish(const ExperimentConfig& config) {
    json metrics = {{"schema_version", kSchemaVersion},
                    {"mode", to_string(config.mode)},
                    {"ap_interpolation", "all-point"},
                    {"seeds", seeds_}};
    write_file(options_.out / "metrics.json", metrics.dump(2) + "\n");
    manifest_["status"] = "completed";
    manifest_["wall_seconds"] = seconds_since(t0_);
    flush_manifest();
    log("done in " + std::to_string(seconds_since(t0_)) + " s -> " + options_.out.string());
    return {manifest_, metrics};
  }

  void log(const std::string& line) const {
    if (options_.log != nullptr) *options_.log << "[zsdgen] " << line << std::endl;
  }

 private:
  static std::string run_id(const fs::path& out) {
    const fs::path p = out.has_filename() ? out : out.parent_path();
    return p.filename().string();
  }

  static json build_info() {
#ifdef ZSD_NATIVE_BUILD
    const bool native = true;
#else
    const bool native = false;
#endif
    return {{"compiler", __VERSION__}, {"march_native", native}, {"checkpoint_version", kCheckpointVersion}};
  }

  void finish_stage(std::uint64_t seed, const std::string& name,
                    std::chrono::steady_clock::time_point t) {
    manifest_["stages"].push_back({{"seed", seed}, {"stage", name}, {"seconds", seconds_since(t)}});
    manifest_["wall_seconds"] = seconds_since(t0_);
    flush_manifest();
  }

  void flush_manifest() const {
    write_file(options_.out / "manifest.json", manifest_.dump(2) + "\n");
  }

  const RunOptions& options_;
  std::chrono::steady_clock::time_point t0_;
  json manifest_;
  json seeds_ = json::array();
  std::ofstream losses_;
};

struct Trained {
  gan::TrainResult gan;
  ClassifierHead seen_head;
};

Trained train_pipeline(Recorder& rec, const Stage0& s0, std::uint64_t seed, Variant variant,
                       LossVariant loss, const std::optional<ClassifierHead>& seen_head = {}) {
  const gan::TrainConfig tc = train_config_for(s0.config, variant, loss);
  ClassifierHead seen = seen_head ? *seen_head : rec.stage(seed, "seen_head", [&] {
    return gan::pretrain_seen_head(s0.train, s0.world, tc.seen_head, seed);
  });
  const std::string label = training_label(variant, loss);
  auto result = rec.stage(seed, "iougan " + label,
                          [&] { return gan::train_iougan(s0.train, s0.world, tc, seen); });
  rec.losses(seed, label, result.history);
  return {std::move(result), std::move(seen)};
}

struct Transferred {
  ClassifierHead head;
  double held_out_accuracy = 0.0;
  std::vector<std::string> warnings;
};

Transferred transfer_and_check(Recorder& rec, const Stage0& s0, std::uint64_t seed,
                               const gan::IoUGANModel& model, Variant variant,
                               const HeldOutSet& held_out, const std::string& label) {
  return rec.stage(seed, "transfer " + label, [&] {
    const Matrix real_bg = s0.train.features(domain::SampleKind::kBg);
    auto tr = transfer::train_unseen_head(restrict_to(model, variant),
                                          transfer::unseen_classes(s0.world),
                                          transfer_config_for(s0.config, variant), &real_bg);
    for (const auto& w : tr.warnings) rec.log("warning: " + w);
    const double acc = accuracy(tr.head, held_out.features, held_out.targets);
    return Transferred{std::move(tr.head), acc, std::move(tr.warnings)};
  });
}

eval::Scorer baseline_scorer(const Stage0& s0, std::uint64_t seed) {
  auto head = std::make_shared<transfer::SemanticHead>(
      transfer::train_semantic_baseline(s0.train, s0.world, s0.config.baseline, seed));
  head->set_classes(transfer::unseen_classes(s0.world));
  return [head](const RowVector& f) { return head->predict(f); };
}

domain::EvalSet eval_set(const Stage0& s0, domain::Split split) {
  return domain::build_eval_set(s0.world, s0.config.domain, split);
}

double chance(const Stage0& s0) { return 1.0 / static_cast<double>(s0.world.unseen.size() + 1); }

Checkpoint checkpoint_of(const Stage0& s0, const Trained& t, const ClassifierHead& unseen) {
  Checkpoint ck;
  ck.model = t.gan.model;
  ck.seen_head = t.seen_head;
  ck.unseen_head = unseen;
  ck.world = s0.world;
  ck.config = to_json(s0.config);
  ck.config["seeds"] = {s0.config.domain.seed};
  return ck;
}

void check_mode(const ExperimentConfig& config, Mode expected) {
  if (config.mode != expected) {
    throw ConfigError("mode is '" + std::string(to_string(config.mode)) + "', this run needs '" +
                      std::string(to_string(expected)) + "'");
  }
}

}  // namespace

std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::kFull: return "full";
    case Mode::kAblation: return "ablation";
    case Mode::kGzsd: return "gzsd";
  }
  return "full";
}

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::kBaseline: return "baseline";
    case Variant::kCfu: return "cfu";
    case Variant::kCfuFfu: return "cfu_ffu";
    case Variant::kCfuFfuBfu: return "cfu_ffu_bfu";
  }
  return "cfu_ffu_bfu";
}

std::string_view to_string(LossVariant v) {
  switch (v) {
    case LossVariant::kWganOnly: return "wgan_only";
    case LossVariant::kCls: return "+cls";
    case LossVariant::kEmb: return "+emb";
    case LossVariant::kClsEmb: return "+cls+emb";
  }
  return "+cls+emb";
}

std::string_view to_string(Sweep s) {
  switch (s) {
    case Sweep::kComponents: return "components";
    case Sweep::kLosses: return "losses";
    case Sweep::kBoth: return "both";
  }
  return "both";
}

ExperimentConfig::ExperimentConfig() {
  // 1e-4 leaves the generators visibly short of the real feature statistics
  // after a desk-sized budget of generator steps; 5e-4 reaches them.
  train.learning_rate = 5e-4;
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seeds: need at least one seed");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds: duplicate seed");
  }
  auto prefixed = [](const char* section, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      throw ConfigError(std::string(section) + ": " + e.what());
    }
  };
  prefixed("domain", [&] { domain.validate(); });
  prefixed("train", [&] {
    if (variant != Variant::kBaseline) {
      train_config_for(*this, variant, loss).validate();
    } else {
      train_config_for(*this, Variant::kCfuFfuBfu, loss).validate();
    }
  });
  prefixed("transfer", [&] { transfer.validate(); });
  if (baseline.epochs < 1 || baseline.batch_size < 1 || !(baseline.learning_rate > 0.0)) {
    throw ConfigError("baseline: epochs, batch_size >= 1 and learning_rate > 0");
  }
  if (held_out_gt < 1) throw ConfigError("eval.held_out_gt must be >= 1");
  if (mode == Mode::kGzsd && variant == Variant::kBaseline) {
    throw ConfigError("ablation.variant: gzsd needs a generator variant, not baseline");
  }
}

json to_json(const ExperimentConfig& c) {
  const auto& d = c.domain;
  const auto& t = c.train;
  return {
      {"schema_version", kSchemaVersion},
      {"mode", to_string(c.mode)},
      {"seeds", c.seeds},
      {"output", c.output},
      {"domain",
       {{"feature_dim", d.feature_dim},
        {"embedding_dim", d.embedding_dim},
        {"attribute_dim", d.attribute_dim},
        {"num_seen", d.num_seen},
        {"num_unseen", d.num_unseen},
        {"samples_per_gt", d.samples_per_gt},
        {"num_gt", d.num_gt},
        {"fg_threshold", d.fg_threshold},
        {"bg_threshold", d.bg_threshold},
        {"intra_class_sigma", d.intra_class_sigma},
        {"clutter_sigma", d.clutter_sigma},
        {"prototype_norm", d.prototype_norm},
        {"prototype_residual", d.prototype_residual},
        {"embedding_noise", d.embedding_noise},
        {"eval_images", d.eval_images},
        {"max_gt_per_image", d.max_gt_per_image},
        {"fg_proposals_per_gt", d.fg_proposals_per_gt},
        {"fg_proposal_min_iou", d.fg_proposal_min_iou},
        {"bg_proposals_per_gt", d.bg_proposals_per_gt},
        {"bg_proposal_max_iou", d.bg_proposal_max_iou},
        {"clutter_proposals", d.clutter_proposals},
        {"eval_clutter_all_classes", d.eval_clutter_all_classes}}},
      {"train",
       {{"alpha", per_unit(t.alpha)},
        {"beta", per_unit(t.beta)},
        {"gamma", per_unit(t.gamma)},
        {"learning_rate", t.learning_rate},
        {"adam_beta1", t.adam_beta1},
        {"adam_beta2", t.adam_beta2},
        {"n_critic", t.n_critic},
        {"batch_size", t.batch_size},
        {"epochs", t.epochs},
        {"noise_dim", t.noise_dim},
        {"hidden_dim", t.hidden_dim},
        {"end_to_end", t.end_to_end},
        {"bfu_cls_target", t.bfu_cls_target == gan::BfuClsTarget::kBackground ? "background" : "class"},
        {"seen_head", head_json(t.seen_head)}}},
      {"transfer",
       {{"counts",
         {{"gt_like", c.transfer.counts.gt_like},
          {"fg", c.transfer.counts.fg},
          {"bg", c.transfer.counts.bg}}},
        {"head", head_json(c.transfer.head)}}},
      {"baseline", head_json(c.baseline)},
      {"ablation",
       {{"variant", to_string(c.variant)}, {"loss", to_string(c.loss)}, {"sweep", to_string(c.sweep)}}},
      {"eval", {{"held_out_gt", c.held_out_gt}}},
  };
}

ExperimentConfig config_from_json(const json& doc) {
  const ExperimentConfig defaults;
  json merged = to_json(defaults);
  check_shape(doc, merged, "");
  if (doc.contains("schema_version") && doc["schema_version"].get<int>() != kSchemaVersion) {
    throw ConfigError("schema_version " + doc["schema_version"].dump() + " is not supported (this build reads " +
                      std::to_string(kSchemaVersion) + ")");
  }
  merged.merge_patch(doc);

  ExperimentConfig c;
  c.mode = parse_enum(merged.at("mode"), "mode", kModes);
  c.seeds = merged.at("seeds").get<std::vector<std::uint64_t>>();
  c.output = merged.at("output").get<std::string>();

  const auto& d = merged.at("domain");
  auto& dc = c.domain;
  dc.feature_dim = d.at("feature_dim").get<int>();
  dc.embedding_dim = d.at("embedding_dim").get<int>();
  dc.attribute_dim = d.at("attribute_dim").get<int>();
  dc.num_seen = d.at("num_seen").get<int>();
  dc.num_unseen = d.at("num_unseen").get<int>();
  dc.samples_per_gt = d.at("samples_per_gt").get<int>();
  dc.num_gt = d.at("num_gt").get<int>();
  dc.fg_threshold = d.at("fg_threshold").get<double>();
  dc.bg_threshold = d.at("bg_threshold").get<double>();
  dc.intra_class_sigma = d.at("intra_class_sigma").get<double>();
  dc.clutter_sigma = d.at("clutter_sigma").get<double>();
  dc.prototype_norm = d.at("prototype_norm").get<double>();
  dc.prototype_residual = d.at("prototype_residual").get<double>();
  dc.embedding_noise = d.at("embedding_noise").get<double>();
  dc.eval_images = d.at("eval_images").get<int>();
  dc.max_gt_per_image = d.at("max_gt_per_image").get<int>();
  dc.fg_proposals_per_gt = d.at("fg_proposals_per_gt").get<int>();
  dc.fg_proposal_min_iou = d.at("fg_proposal_min_iou").get<double>();
  dc.bg_proposals_per_gt = d.at("bg_proposals_per_gt").get<int>();
  dc.bg_proposal_max_iou = d.at("bg_proposal_max_iou").get<double>();
  dc.clutter_proposals = d.at("clutter_proposals").get<int>();
  dc.eval_clutter_all_classes = d.at("eval_clutter_all_classes").get<bool>();

  const auto& t = merged.at("train");
  auto& tc = c.train;
  tc.alpha = per_unit(t.at("alpha"));
  tc.beta = per_unit(t.at("beta"));
  tc.gamma = per_unit(t.at("gamma"));
  tc.learning_rate = t.at("learning_rate").get<double>();
  tc.adam_beta1 = t.at("adam_beta1").get<double>();
  tc.adam_beta2 = t.at("adam_beta2").get<double>();
  tc.n_critic = t.at("n_critic").get<int>();
  tc.batch_size = t.at("batch_size").get<int>();
  tc.epochs = t.at("epochs").get<int>();
  tc.noise_dim = t.at("noise_dim").get<int>();
  tc.hidden_dim = t.at("hidden_dim").get<int>();
  tc.end_to_end = t.at("end_to_end").get<bool>();
  const auto target = t.at("bfu_cls_target").get<std::string>();
  if (target == "background") {
    tc.bfu_cls_target = gan::BfuClsTarget::kBackground;
  } else if (target == "class") {
    tc.bfu_cls_target = gan::BfuClsTarget::kClass;
  } else {
    throw ConfigError("train.bfu_cls_target: unknown value '" + target + "' (expected background|class)");
  }
  tc.seen_head = head_from(t.at("seen_head"));

  const auto& x = merged.at("transfer");
  c.transfer.counts.gt_like = x.at("counts").at("gt_like").get<int>();
  c.transfer.counts.fg = x.at("counts").at("fg").get<int>();
  c.transfer.counts.bg = x.at("counts").at("bg").get<int>();
  c.transfer.head = head_from(x.at("head"));
  c.baseline = head_from(merged.at("baseline"));

  const auto& a = merged.at("ablation");
  c.variant = parse_enum(a.at("variant"), "ablation.variant", kAllVariants);
  c.loss = parse_enum(a.at("loss"), "ablation.loss", kAllLossVariants);
  c.sweep = parse_enum(a.at("sweep"), "ablation.sweep", kSweeps);
  c.held_out_gt = merged.at("eval").at("held_out_gt").get<int>();
  c.validate();
  return c;
}

void apply_override(json& doc, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("--set expects key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  const json reference = to_json(ExperimentConfig{});
  const json* ref = &reference;
  json* target = &doc;
  std::stringstream parts(key);
  std::string part;
  std::string path;
  while (std::getline(parts, part, '.')) {
    path += (path.empty() ? "" : ".") + part;
    if (!ref->is_object() || !ref->contains(part)) throw ConfigError("unknown config key '" + path + "'");
    ref = &ref->at(part);
    if (!target->is_object()) *target = json::object();
    target = &(*target)[part];
  }
  if (ref->is_object()) throw ConfigError("'" + key + "' is a section; set one of its fields");
  json value;
  if (ref->is_string()) {
    value = raw;
  } else {
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
  }
  if (ref->is_number_float() && value.is_number_integer()) value = value.get<double>();
  check_shape(value, *ref, key);
  *target = std::move(value);
}

ExperimentConfig load_config(const std::optional<fs::path>& file, const std::vector<std::string>& overrides) {
  json doc = to_json(ExperimentConfig{});
  if (file) {
    std::ifstream is(*file);
    if (!is) throw ConfigError("cannot read config file " + file->string());
    json from_file;
    try {
      from_file = json::parse(is);
    } catch (const json::exception& e) {
      throw ConfigError("config file " + file->string() + " is not valid JSON: " + e.what());
    }
    check_shape(from_file, doc, "");
    doc.merge_patch(from_file);
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

std::string git_blob_sha1(std::string_view content) {
  const std::string data = "blob " + std::to_string(content.size()) + '\0' + std::string(content);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha1(), nullptr) != 1) {
    throw std::runtime_error("SHA-1 digest failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

std::string canonical_config(const ExperimentConfig& config) {
  json j = to_json(config);
  j.erase("output");
  return j.dump();
}

ExperimentConfig seeded(const ExperimentConfig& config, std::uint64_t seed) {
  ExperimentConfig c = config;
  c.domain.seed = seed;
  c.train.seed = seed;
  c.transfer.seed = seed;
  return c;
}

Stage0 build_domain(const ExperimentConfig& config, std::uint64_t seed) {
  Stage0 s;
  s.config = seeded(config, seed);
  s.world = domain::make_world(s.config.domain);
  s.train = domain::build_training_set(s.world, s.config.domain);
  domain::check_zero_shot(s.train, s.world);
  return s;
}

gan::TrainConfig train_config_for(const ExperimentConfig& config, Variant variant, LossVariant loss) {
  gan::TrainConfig tc = config.train;
  switch (variant) {
    case Variant::kBaseline:
      throw ConfigError("the baseline variant trains no generator");
    case Variant::kCfu: tc.units = {true, false, false}; break;
    case Variant::kCfuFfu: tc.units = {true, true, false}; break;
    case Variant::kCfuFfuBfu: tc.units = {true, true, true}; break;
  }
  if (loss == LossVariant::kWganOnly || loss == LossVariant::kEmb) tc.beta = {0.0, 0.0, 0.0};
  if (loss == LossVariant::kWganOnly || loss == LossVariant::kCls) tc.gamma = {0.0, 0.0, 0.0};
  return tc;
}

transfer::TransferConfig transfer_config_for(const ExperimentConfig& config, Variant variant) {
  transfer::TransferConfig xc = config.transfer;
  switch (variant) {
    case Variant::kBaseline:
      throw ConfigError("the baseline variant has no synthesized transfer");
    case Variant::kCfu:
      xc.fg_from_ffu = false;
      xc.background = transfer::Background::kReal;
      break;
    case Variant::kCfuFfu:
      xc.fg_from_ffu = true;
      xc.background = transfer::Background::kReal;
      break;
    case Variant::kCfuFfuBfu:
      xc.fg_from_ffu = true;
      xc.background = transfer::Background::kSynthesized;
      break;
  }
  return xc;
}

gan::IoUGANModel restrict_to(const gan::IoUGANModel& model, Variant variant) {
  gan::IoUGANModel out = model;
  const int keep = variant == Variant::kCfu ? 1 : variant == Variant::kCfuFfu ? 2 : 3;
  for (int u = keep; u < 3; ++u) out.trained[static_cast<std::size_t>(u)] = false;
  return out;
}

HeldOutSet held_out_unseen(const Stage0& s) {
  Rng rng = make_rng(s.config.domain.seed, Stream::kHeldOut);
  const auto ds = domain::build_labeled_set(s.world, s.config.domain, domain::Split::kTestUnseen,
                                            s.config.held_out_gt, rng);
  HeldOutSet out;
  out.features.resize(static_cast<Eigen::Index>(ds.records.size()), s.config.domain.feature_dim);
  const int u = static_cast<int>(s.world.unseen.size());
  for (std::size_t i = 0; i < ds.records.size(); ++i) {
    const auto& r = ds.records[i];
    out.features.row(static_cast<Eigen::Index>(i)) = r.feature;
    out.targets.push_back(r.kind == domain::SampleKind::kBg ? u : s.world.unseen_index(r.class_id));
  }
  return out;
}

json to_json(const MetricRow& r) {
  return {{"table", r.table}, {"variant", r.variant}, {"metric", r.metric},
          {"threshold", r.threshold}, {"value", r.value}};
}

MetricRow metric_row_from_json(const json& j) {
  return {j.at("table").get<std::string>(), j.at("variant").get<std::string>(),
          j.at("metric").get<std::string>(), j.at("threshold").get<double>(),
          j.at("value").get<double>()};
}

std::vector<MetricRow> RunResult::rows() const {
  std::vector<MetricRow> out;
  for (const auto& s : metrics.at("seeds")) {
    for (const auto& r : s.at("rows")) out.push_back(metric_row_from_json(r));
  }
  return out;
}

void write_losses_csv(std::ostream& os, std::uint64_t seed, std::string_view training,
                      const std::vector<gan::LossRecord>& history, bool header) {
  if (header) {
    os << "seed,training,step,epoch,unit,critic_loss,gen_loss,cls_loss,emb_loss,wasserstein,penalty\n";
  }
  for (const auto& r : history) {
    os << seed << ',' << training << ',' << r.step << ',' << r.epoch << ',' << gan::unit_name(r.unit) << ','
       << format_double(r.critic_loss) << ',' << format_double(r.generator_loss) << ','
       << format_double(r.cls_loss) << ',' << format_double(r.emb_loss) << ','
       << format_double(r.wasserstein) << ',' << format_double(r.penalty) << '\n';
  }
}

RunResult run_full(const ExperimentConfig& config, const RunOptions& options) {
  check_mode(config, Mode::kFull);
  config.validate();
  Recorder rec(config, options);
  for (std::uint64_t seed : config.seeds) {
    const Stage0 s0 = rec.stage(seed, "domain", [&] { return build_domain(config, seed); });
    const auto ev = rec.stage(seed, "eval_set", [&] { return eval_set(s0, domain::Split::kTestUnseen); });
    const std::string variant(to_string(config.variant));
    std::vector<MetricRow> rows;
    json detail;
    if (config.variant == Variant::kBaseline) {
      const auto scorer = rec.stage(seed, "baseline", [&] { return baseline_scorer(s0, seed); });
      const auto report = rec.stage(seed, "evaluate", [&] { return eval::evaluate_pipeline(scorer, ev); });
      add_report_rows(rows, "zsd", variant, report);
      detail["zsd"] = report.to_json();
    } else {
      const auto held_out = held_out_unseen(s0);
      const Trained t = train_pipeline(rec, s0, seed, config.variant, config.loss);
      const auto tr = transfer_and_check(rec, s0, seed, t.gan.model, config.variant, held_out, variant);
      const auto report = rec.stage(seed, "evaluate", [&] { return eval::evaluate_pipeline(tr.head, ev); });
      add_report_rows(rows, "zsd", variant, report);
      rows.push_back({"transfer", variant, "accuracy", 0.0, tr.held_out_accuracy});
      rows.push_back({"training", training_label(config.variant, config.loss), "min_penalty", 0.0,
                      t.gan.min_penalty});
      detail["zsd"] = report.to_json();
      detail["transfer"] = {{"held_out_accuracy", tr.held_out_accuracy},
                            {"chance", chance(s0)},
                            {"held_out_rows", held_out.features.rows()},
                            {"warnings", tr.warnings}};
      detail["training"] = {{"min_penalty", t.gan.min_penalty}, {"records", t.gan.history.size()}};
      rec.model(seed, checkpoint_of(s0, t, tr.head));
    }
    rec.seed_done(seed, std::move(detail), rows);
  }
  return rec.finish(config);
}

RunResult run_ablation(const ExperimentConfig& config, const RunOptions& options) {
  check_mode(config, Mode::kAblation);
  config.validate();
  Recorder rec(config, options);
  const bool components = config.sweep != Sweep::kLosses;
  const bool losses = config.sweep != Sweep::kComponents;
  for (std::uint64_t seed : config.seeds) {
    const Stage0 s0 = rec.stage(seed, "domain", [&] { return build_domain(config, seed); });
    const auto ev = rec.stage(seed, "eval_set", [&] { return eval_set(s0, domain::Split::kTestUnseen); });
    const auto held_out = held_out_unseen(s0);
    std::vector<MetricRow> rows;
    json detail = {{"chance", chance(s0)}};
    std::optional<ClassifierHead> seen;
    // Full models by loss variant, kept so the two sweeps share trainings.
    std::map<LossVariant, Trained> full;
    auto record = [&](const std::string& table, const std::string& name, const Transferred& tr,
                      const Trained& t) {
      const auto report = rec.stage(seed, "evaluate " + table + "/" + name,
                                    [&] { return eval::evaluate_pipeline(tr.head, ev); });
      add_report_rows(rows, table, name, report);
      rows.push_back({"transfer", table + "/" + name, "accuracy", 0.0, tr.held_out_accuracy});
      detail[table][name] = report.to_json();
      detail[table][name]["held_out_accuracy"] = tr.held_out_accuracy;
      detail[table][name]["min_penalty"] = t.gan.min_penalty;
    };
    auto train = [&](Variant v, LossVariant l) {
      Trained t = train_pipeline(rec, s0, seed, v, l, seen);
      seen = t.seen_head;
      rows.push_back({"training", training_label(v, l), "min_penalty", 0.0, t.gan.min_penalty});
      return t;
    };

    if (components) {
      const auto scorer = rec.stage(seed, "baseline", [&] { return baseline_scorer(s0, seed); });
      const auto report = rec.stage(seed, "evaluate components/baseline",
                                    [&] { return eval::evaluate_pipeline(scorer, ev); });
      add_report_rows(rows, "components", "baseline", report);
      detail["components"]["baseline"] = report.to_json();

      if (!config.train.end_to_end) {
        // Detached units train independently, so the CFU and CFU+FFU
        // variants are sub-models of one full training.
        full.emplace(config.loss, train(Variant::kCfuFfuBfu, config.loss));
      }
      for (Variant v : {Variant::kCfu, Variant::kCfuFfu, Variant::kCfuFfuBfu}) {
        const std::string name(to_string(v));
        if (config.train.end_to_end) {
          const Trained t = train(v, config.loss);
          record("components", name, transfer_and_check(rec, s0, seed, t.gan.model, v, held_out, name), t);
          if (v == Variant::kCfuFfuBfu) full.emplace(config.loss, t);
        } else {
          const Trained& t = full.at(config.loss);
          record("components", name, transfer_and_check(rec, s0, seed, t.gan.model, v, held_out, name), t);
        }
      }
    }
    if (losses) {
      for (LossVariant l : kAllLossVariants) {
        if (!full.contains(l)) full.emplace(l, train(Variant::kCfuFfuBfu, l));
        const std::string name(to_string(l));
        const Trained& t = full.at(l);
        record("losses", name,
               transfer_and_check(rec, s0, seed, t.gan.model, Variant::kCfuFfuBfu, held_out, name), t);
      }
    }
    if (full.contains(config.loss)) {
      const Trained& t = full.at(config.loss);
      const Matrix real_bg = s0.train.features(domain::SampleKind::kBg);
      const auto tr = transfer::train_unseen_head(t.gan.model, transfer::unseen_classes(s0.world),
                                                  transfer_config_for(s0.config, Variant::kCfuFfuBfu),
                                                  &real_bg);
      rec.model(seed, checkpoint_of(s0, t, tr.head));
    }
    rec.seed_done(seed, std::move(detail), rows);
  }
  return rec.finish(config);
}

RunResult run_gzsd(const ExperimentConfig& config, const RunOptions& options) {
  check_mode(config, Mode::kGzsd);
  config.validate();
  Recorder rec(config, options);
  for (std::uint64_t seed : config.seeds) {
    const Stage0 s0 = rec.stage(seed, "domain", [&] { return build_domain(config, seed); });
    const auto unseen_set =
        rec.stage(seed, "eval_set unseen", [&] { return eval_set(s0, domain::Split::kTestUnseen); });
    const auto seen_set =
        rec.stage(seed, "eval_set seen", [&] { return eval_set(s0, domain::Split::kTestSeen); });
    const auto held_out = held_out_unseen(s0);
    const std::string variant(to_string(config.variant));
    const Trained t = train_pipeline(rec, s0, seed, config.variant, config.loss);
    const auto tr = transfer_and_check(rec, s0, seed, t.gan.model, config.variant, held_out, variant);

    std::vector<MetricRow> rows;
    json detail;
    const auto zsd = rec.stage(seed, "evaluate zsd", [&] { return eval::evaluate_pipeline(tr.head, unseen_set); });
    add_report_rows(rows, "zsd", variant, zsd);
    detail["zsd"] = zsd.to_json();

    rec.stage(seed, "evaluate gzsd", [&] {
      const ClassifierHead fused = transfer::assemble_gzsd_head(t.seen_head, tr.head);
      // Both image sets side by side; seen and unseen classes compete for
      // every proposal and for the per-image top-100.
      domain::EvalSet mixed = unseen_set;
      const int offset = static_cast<int>(unseen_set.images.size());
      for (auto image : seen_set.images) {
        image.image_id += offset;
        mixed.images.push_back(std::move(image));
      }
      const auto dets = eval::detect(mixed, [&](const RowVector& f) { return predict_foreground(fused, f); });
      const auto gts = eval::ground_truths(mixed);
      for (const char* column : {"Seen", "Unseen"}) {
        const bool want_seen = std::string(column) == "Seen";
        std::vector<eval::GroundTruth> subset;
        std::copy_if(gts.begin(), gts.end(), std::back_inserter(subset),
                     [&](const eval::GroundTruth& g) { return s0.world.is_seen(g.class_id) == want_seen; });
        const auto report = eval::evaluate_detections(dets, subset);
        add_report_rows(rows, "gzsd", column, report);
        detail["gzsd"][column] = report.to_json();
      }
    });
    rows.push_back({"transfer", variant, "accuracy", 0.0, tr.held_out_accuracy});
    rows.push_back({"training", training_label(config.variant, config.loss), "min_penalty", 0.0,
                    t.gan.min_penalty});
    detail["transfer"] = {{"held_out_accuracy", tr.held_out_accuracy}, {"chance", chance(s0)}};
    rec.model(seed, checkpoint_of(s0, t, tr.head));
    rec.seed_done(seed, std::move(detail), rows);
  }
  return rec.finish(config);
}

RunResult run(const ExperimentConfig& config, const RunOptions& options) {
  switch (config.mode) {
    case Mode::kFull: return run_full(config, options);
    case Mode::kAblation: return run_ablation(config, options);
    case Mode::kGzsd: return run_gzsd(config, options);
  }
  throw ConfigError("unknown mode");
}

RunResult gen_domain(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  Recorder rec(config, options);
  for (std::uint64_t seed : config.seeds) {
    const Stage0 s0 = rec.stage(seed, "domain", [&] { return build_domain(config, seed); });
    const auto unseen = eval_set(s0, domain::Split::kTestUnseen);
    const auto seen = eval_set(s0, domain::Split::kTestSeen);
    rec.stage(seed, "write", [&] {
      domain::write_jsonl(s0.train, rec.artifact(seed, "train.jsonl"));
      domain::write_embeddings(s0.world, rec.artifact(seed, "embeddings.jsonl"));
    });
    const double rho = domain::semantic_visual_correlation(s0.world);
    auto counts = [](const domain::EvalSet& s) {
      return json{{"images", s.images.size()}, {"gts", s.num_gts()}, {"proposals", s.num_proposals()}};
    };
    json detail = {{"records",
                    {{"gt", s0.train.count(domain::SampleKind::kGt)},
                     {"fg", s0.train.count(domain::SampleKind::kFg)},
                     {"bg", s0.train.count(domain::SampleKind::kBg)}}},
                   {"seen_classes", s0.world.seen},
                   {"unseen_classes", s0.world.unseen},
                   {"semantic_visual_correlation", rho},
                   {"eval_unseen", counts(unseen)},
                   {"eval_seen", counts(seen)}};
    rec.seed_done(seed, std::move(detail), {{"domain", "world", "semantic_visual_correlation", 0.0, rho}});
  }
  return rec.finish(config);
}

RunResult train_stage(const ExperimentConfig& config, const RunOptions& options,
                      const std::optional<TrainInputs>& inputs) {
  config.validate();
  if (config.variant == Variant::kBaseline) {
    throw ConfigError("ablation.variant: train needs a generator variant, not baseline");
  }
  if (inputs && config.seeds.size() != 1) {
    throw ConfigError("seeds: training on external data takes exactly one seed");
  }
  Recorder rec(config, options);
  for (std::uint64_t seed : config.seeds) {
    const Stage0 s0 = rec.stage(seed, "domain", [&] {
      if (!inputs) return build_domain(config, seed);
      Stage0 s;
      s.config = seeded(config, seed);
      s.world = domain::read_embeddings(inputs->embeddings);
      s.train = domain::ingest_jsonl(inputs->data, s.config.domain);
      domain::check_zero_shot(s.train, s.world);
      return s;
    });
    const Trained t = train_pipeline(rec, s0, seed, config.variant, config.loss);
    json last = json::object();
    for (const auto& r : t.gan.history) {
      last[std::string(gan::unit_name(r.unit))] = {{"step", r.step},
                                                   {"critic_loss", r.critic_loss},
                                                   {"gen_loss", r.generator_loss},
                                                   {"wasserstein", r.wasserstein},
                                                   {"penalty", r.penalty}};
    }
    Checkpoint ck = checkpoint_of(s0, t, t.seen_head);
    ck.unseen_head.reset();
    rec.model(seed, ck);
    rec.seed_done(seed,
                  {{"training", {{"min_penalty", t.gan.min_penalty}, {"records", t.gan.history.size()}, {"last", last}}}},
                  {{"training", training_label(config.variant, config.loss), "min_penalty", 0.0, t.gan.min_penalty}});
  }
  return rec.finish(config);
}

ExperimentConfig config_from_checkpoint(const fs::path& model, const std::vector<std::string>& overrides) {
  json doc = load_checkpoint(model).config;
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

namespace {

std::uint64_t single_seed(const ExperimentConfig& config) {
  if (config.seeds.size() != 1) throw ConfigError("seeds: a checkpoint stage takes exactly one seed");
  return config.seeds.front();
}

Stage0 stage_from_checkpoint(const Checkpoint& ck, const ExperimentConfig& config, std::uint64_t seed,
                             bool need_training_set) {
  Stage0 s;
  s.config = seeded(config, seed);
  s.world = ck.world;
  if (need_training_set) {
    if (s.world.prototypes.size() == 0) {
      throw DataError("this step regenerates the training set, but the checkpoint's world came from "
                      "external embeddings and has no prototypes");
    }
    s.train = domain::build_training_set(s.world, s.config.domain);
  }
  return s;
}

}  // namespace

RunResult synthesize_stage(const fs::path& model, const ExperimentConfig& config, const RunOptions& options,
                           std::vector<int> class_ids) {
  config.validate();
  const std::uint64_t seed = single_seed(config);
  const Checkpoint ck = load_checkpoint(model);
  if (class_ids.empty()) class_ids = ck.world.unseen;
  for (int c : class_ids) {
    if (c < 0 || c >= ck.world.num_classes()) {
      throw ConfigError("class id " + std::to_string(c) + " is outside [0, " +
                        std::to_string(ck.world.num_classes()) + ")");
    }
  }
  Recorder rec(config, options);
  gan::SynthesisCounts counts = config.transfer.counts;
  json detail = {{"model", model.string()}, {"classes", class_ids}};
  if (!ck.model.trained[gan::index(gan::Unit::kCfu)]) throw DataError("checkpoint has no trained CFU");
  if (!ck.model.trained[gan::index(gan::Unit::kFfu)] && counts.fg > 0) {
    detail["skipped"].push_back("fg: FFU not trained");
    counts.fg = 0;
  }
  if (!ck.model.trained[gan::index(gan::Unit::kBfu)] && counts.bg > 0) {
    detail["skipped"].push_back("bg: BFU not trained");
    counts.bg = 0;
  }
  std::size_t rows = 0;
  rec.stage(seed, "synthesize", [&] {
    Rng rng = make_rng(seed, Stream::kSynthesis);
    std::ofstream os(options.out / "synthesized.jsonl", std::ios::trunc);
    if (!os) throw DataError("cannot write " + (options.out / "synthesized.jsonl").string());
    for (int c : class_ids) {
      for (const auto& b : gan::synthesize(ck.model, ck.world.embedding(c), c, counts, rng)) {
        for (Eigen::Index i = 0; i < b.features.rows(); ++i) {
          const RowVector row = b.features.row(i);
          const json line = {{"class_id", c},
                             {"kind", domain::to_string(b.kind)},
                             {"feature", std::vector<double>(row.data(), row.data() + row.size())}};
          os << line.dump() << '\n';
          ++rows;
        }
      }
    }
  });
  detail["rows"] = rows;
  rec.seed_done(seed, std::move(detail), {{"synthesis", "rows", "count", 0.0, static_cast<double>(rows)}});
  return rec.finish(config);
}

RunResult transfer_stage(const fs::path& model, const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  if (config.variant == Variant::kBaseline) {
    throw ConfigError("ablation.variant: transfer needs a generator variant, not baseline");
  }
  const std::uint64_t seed = single_seed(config);
  Checkpoint ck = load_checkpoint(model);
  const bool real_bg = transfer_config_for(config, config.variant).background == transfer::Background::kReal;
  const bool have_world = ck.world.prototypes.size() > 0;
  Recorder rec(config, options);
  const Stage0 s0 = stage_from_checkpoint(ck, config, seed, real_bg);
  const auto tr = rec.stage(seed, "transfer", [&] {
    const Matrix bg = real_bg ? s0.train.features(domain::SampleKind::kBg) : Matrix();
    return transfer::train_unseen_head(restrict_to(ck.model, config.variant), transfer::unseen_classes(s0.world),
                                       transfer_config_for(s0.config, config.variant), &bg);
  });
  std::vector<MetricRow> rows;
  const std::string variant(to_string(config.variant));
  json detail = {{"model", model.string()},
                 {"synthesized_accuracy", accuracy(tr.head, tr.features, tr.targets)},
                 {"warnings", tr.warnings},
                 {"chance", chance(s0)}};
  if (have_world) {
    const auto held_out = held_out_unseen(s0);
    const double acc = accuracy(tr.head, held_out.features, held_out.targets);
    detail["held_out_accuracy"] = acc;
    rows.push_back({"transfer", variant, "accuracy", 0.0, acc});
  }
  ck.unseen_head = tr.head;
  ck.config = to_json(s0.config);
  ck.config["seeds"] = {seed};
  rec.model(seed, ck);
  rec.seed_done(seed, std::move(detail), rows);
  return rec.finish(config);
}

RunResult eval_stage(const fs::path& model, const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const std::uint64_t seed = single_seed(config);
  const Checkpoint ck = load_checkpoint(model);
  if (!ck.unseen_head) throw DataError("checkpoint " + model.string() + " has no unseen head; run transfer first");
  if (ck.world.prototypes.size() == 0) {
    throw DataError("checkpoint " + model.string() + " has no prototypes to draw evaluation images from");
  }
  Recorder rec(config, options);
  const Stage0 s0 = stage_from_checkpoint(ck, config, seed, false);
  const auto ev = rec.stage(seed, "eval_set", [&] { return eval_set(s0, domain::Split::kTestUnseen); });
  const auto report = rec.stage(seed, "evaluate", [&] { return eval::evaluate_pipeline(*ck.unseen_head, ev); });
  write_file(options.out / "metrics.csv", report.to_csv());
  write_file(options.out / "per_class.csv", report.per_class_csv());
  std::vector<MetricRow> rows;
  add_report_rows(rows, "zsd", std::string(to_string(config.variant)), report);
  rec.seed_done(seed, {{"model", model.string()}, {"zsd", report.to_json()}}, rows);
  return rec.finish(config);
}

}  // namespace zsd::exp
