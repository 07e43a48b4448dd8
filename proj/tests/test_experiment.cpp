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
#include "doctest.h"
#include "support.hpp"
#include "zsd/checkpoint.hpp"
#include "zsd/experiment.hpp"
#include "zsd/report.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace zsd;
using namespace zsd::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("zsd_test_experiment_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

exp::ExperimentConfig tiny_experiment() {
  exp::ExperimentConfig c;
  c.domain = tiny_domain();
  c.train = tiny_train();
  c.transfer.counts = {30, 30, 30};
  c.transfer.head.epochs = 3;
  c.baseline.epochs = 2;
  c.held_out_gt = 20;
  return c;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("config json round trip and strict parsing") {
  auto c = tiny_experiment();
  c.seeds = {3, 9};
  c.variant = exp::Variant::kCfuFfu;
  c.train.beta = {0.5, 0.25, 0.125};
  const auto back = exp::config_from_json(exp::to_json(c));
  CHECK(exp::to_json(back) == exp::to_json(c));

  json doc = exp::to_json(c);
  doc["domain"]["nmu_seen"] = 3;
  CHECK(error_of([&] { exp::config_from_json(doc); }).find("domain.nmu_seen") != std::string::npos);
  doc = exp::to_json(c);
  doc["train"]["epochs"] = "many";
  CHECK_THROWS_AS(exp::config_from_json(doc), ConfigError);
  doc = exp::to_json(c);
  doc["ablation"]["variant"] = "cfu_bfu";
  CHECK_THROWS_AS(exp::config_from_json(doc), ConfigError);

  // Missing keys keep defaults.
  const auto partial = exp::config_from_json(json{{"seeds", {4}}});
  CHECK(partial.seeds == std::vector<std::uint64_t>{4});
  CHECK(partial.train.learning_rate == exp::ExperimentConfig{}.train.learning_rate);
}

TEST_CASE("overrides keep the reference type") {
  json doc = exp::to_json(exp::ExperimentConfig{});
  exp::apply_override(doc, "train.learning_rate=1");
  CHECK(doc["train"]["learning_rate"].is_number_float());
  exp::apply_override(doc, "train.beta.ffu=0.5");
  CHECK(doc["train"]["beta"]["ffu"] == 0.5);
  exp::apply_override(doc, "seeds=[1,2,3]");
  CHECK(doc["seeds"].size() == 3);
  exp::apply_override(doc, "ablation.sweep=losses");
  CHECK(exp::config_from_json(doc).sweep == exp::Sweep::kLosses);
  CHECK_THROWS_AS(exp::apply_override(doc, "train.epochs=1.5"), ConfigError);
  CHECK_THROWS_AS(exp::apply_override(doc, "train.epoch=3"), ConfigError);
  CHECK_THROWS_AS(exp::apply_override(doc, "train=3"), ConfigError);
  CHECK_THROWS_AS(exp::apply_override(doc, "no_equals"), ConfigError);
  CHECK_THROWS_AS(exp::load_config(std::nullopt, {"domain.bg_threshold=0.7"}), ConfigError);
}

TEST_CASE("config hashing") {
  CHECK(exp::git_blob_sha1("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");
  CHECK(exp::git_blob_sha1("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  auto a = tiny_experiment();
  auto b = a;
  b.output = "/somewhere/else";
  CHECK(exp::canonical_config(a) == exp::canonical_config(b));
  b.train.epochs += 1;
  CHECK(exp::canonical_config(a) != exp::canonical_config(b));
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto dcfg = tiny_domain();
  const auto world = domain::make_world(dcfg);
  const auto data = domain::build_training_set(world, dcfg);
  auto r = gan::train_iougan(data, world, tiny_train());

  Checkpoint ck;
  ck.model = r.model;
  ck.seen_head = r.seen_head;
  ck.world = world;
  ck.config = {{"note", "test"}};
  const fs::path dir = scratch("ckpt");
  const fs::path path = dir / "model.bin";
  save_checkpoint(ck, path);

  const auto back = load_checkpoint(path);
  CHECK(back.config == ck.config);
  CHECK(back.model.trained == ck.model.trained);
  CHECK(!back.unseen_head.has_value());
  REQUIRE(back.seen_head.has_value());
  CHECK(back.seen_head->blocks()[0].weight == r.seen_head.blocks()[0].weight);
  CHECK(back.world.embeddings == world.embeddings);
  for (std::size_t u = 0; u < 3; ++u) {
    const auto& g0 = ck.model.units[u].generator.layers();
    const auto& g1 = back.model.units[u].generator.layers();
    REQUIRE(g0.size() == g1.size());
    for (std::size_t l = 0; l < g0.size(); ++l) {
      CHECK(g0[l].weight == g1[l].weight);
      CHECK(g0[l].bias == g1[l].bias);
    }
  }
  // Same model, same synthesis.
  Rng r0(5), r1(5);
  const domain::SemanticEmbedding e{world.embeddings.row(world.unseen[0])};
  CHECK(gan::synthesize(ck.model, e, world.unseen[0], {3, 3, 3}, r0)[2].features ==
        gan::synthesize(back.model, e, world.unseen[0], {3, 3, 3}, r1)[2].features);

  const std::string bytes = slurp(path);
  auto corrupt = [&](std::string b, const std::string& expect) {
    const fs::path p = dir / "bad.bin";
    std::ofstream(p, std::ios::binary | std::ios::trunc) << b;
    const auto msg = error_of([&] { load_checkpoint(p); });
    CHECK(msg.find(p.string()) != std::string::npos);
    CHECK(msg.find(expect) != std::string::npos);
  };
  {
    auto b = bytes;
    b[0] = 'X';
    corrupt(b, "magic");
  }
  {
    auto b = bytes;
    b[8] = 7;
    corrupt(b, "version");
  }
  corrupt(bytes.substr(0, bytes.size() - 9), "trunc");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing.bin"), DataError);
  fs::remove_all(dir);
}

TEST_CASE("median") {
  CHECK(report::median({3.0}) == 3.0);
  CHECK(report::median({5.0, 1.0, 3.0}) == 3.0);
  CHECK(report::median({4.0, 1.0, 3.0, 2.0}) == 2.5);
  CHECK_THROWS_AS(report::median({}), DataError);
  Gen g(71);
  for (int k = 0; k < 200; ++k) {
    std::vector<double> v;
    const auto n = g.integer(1, 12);
    for (int i = 0; i < n; ++i) v.push_back(g.real(-1, 1));
    const double m = report::median(v);
    const auto below = std::count_if(v.begin(), v.end(), [&](double x) { return x < m; });
    const auto above = std::count_if(v.begin(), v.end(), [&](double x) { return x > m; });
    CHECK(below <= n / 2);
    CHECK(above <= n / 2);
  }
}

TEST_CASE("manifest loading errors") {
  const fs::path dir = scratch("manifest");
  auto msg = error_of([&] { report::load_run(dir); });
  CHECK(msg.find((dir / "manifest.json").string()) != std::string::npos);

  std::ofstream(dir / "manifest.json") << R"({"schema_version": 99, "results": []})";
  msg = error_of([&] { report::load_run(dir); });
  CHECK(msg.find("99") != std::string::npos);
  CHECK(msg.find(std::to_string(exp::kSchemaVersion)) != std::string::npos);

  std::ofstream(dir / "manifest.json", std::ios::trunc) << "{not json";
  CHECK_THROWS_AS(report::load_run(dir), DataError);
  fs::remove_all(dir);
}

TEST_CASE("tiny full run") {
  auto cfg = tiny_experiment();
  cfg.seeds = {1, 2};
  const fs::path a = scratch("run_a");
  const fs::path b = scratch("run_b");
  const auto ra = exp::run_full(cfg, {a, nullptr, true, "run-full"});
  const auto rb = exp::run_full(cfg, {b, nullptr, false, "run-full"});

  for (const char* f : {"config.json", "manifest.json", "metrics.json", "losses.csv"}) CHECK(fs::exists(a / f));
  CHECK(fs::exists(a / "seed-1" / "model.bin"));
  CHECK(!fs::exists(b / "seed-1" / "model.bin"));
  CHECK(ra.manifest["status"] == "completed");
  CHECK(ra.metrics == rb.metrics);
  CHECK(slurp(a / "metrics.json") == slurp(b / "metrics.json"));

  int recall_rows = 0;
  for (const auto& row : ra.rows()) {
    CHECK(row.value >= 0.0);
    if (row.table == "zsd" && row.metric == "recall@100") {
      CHECK(row.value <= 1.0);
      ++recall_rows;
    }
  }
  CHECK(recall_rows == 2 * 3);

  SUBCASE("checkpoint of a run carries both heads") {
    const auto ck = load_checkpoint(a / "seed-1" / "model.bin");
    REQUIRE(ck.unseen_head.has_value());
    CHECK(ck.unseen_head->class_map().size() == ck.world.unseen.size() + 1);
  }
  SUBCASE("report medians over the two seeds") {
    const auto rep = report::build_report({a});
    CHECK(rep.rows.size() == ra.rows().size());
    for (const auto& m : rep.medians) {
      std::vector<double> vals;
      for (const auto& r : rep.rows) {
        if (r.row.table == m.table && r.row.variant == m.variant && r.row.metric == m.metric &&
            r.row.threshold == m.threshold) {
          vals.push_back(r.row.value);
        }
      }
      REQUIRE(vals.size() == static_cast<std::size_t>(m.n));
      CHECK(m.median == doctest::Approx(0.5 * (vals[0] + vals[vals.size() - 1])).epsilon(1e-12));
    }
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("held-out unseen targets") {
  auto cfg = tiny_experiment();
  const auto s = exp::build_domain(cfg, 1);
  const auto h = exp::held_out_unseen(s);
  const int u = static_cast<int>(s.world.unseen.size());
  CHECK(h.features.rows() == static_cast<Eigen::Index>(h.targets.size()));
  for (int t : h.targets) {
    CHECK(t >= 0);
    CHECK(t <= u);
  }
  CHECK(std::count(h.targets.begin(), h.targets.end(), u) > 0);
  CHECK(std::count(h.targets.begin(), h.targets.end(), 0) > 0);
}
