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
#include "zsd/report.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

namespace zsd::report {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

std::string num(double v) { return format_double(v); }

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << text;
}

using Key = std::tuple<std::string, std::string, std::string, double>;

const MedianRow* find(const Report& r, const std::string& table, const std::string& variant,
                      const std::string& metric, double threshold) {
  for (const auto& m : r.medians) {
    if (m.table == table && m.variant == variant && m.metric == metric && m.threshold == threshold) {
      return &m;
    }
  }
  return nullptr;
}

std::vector<std::string> variants_of(const Report& r, const std::string& table,
                                     const std::vector<std::string>& preferred) {
  std::vector<std::string> out;
  for (const auto& p : preferred) {
    if (std::any_of(r.medians.begin(), r.medians.end(),
                    [&](const MedianRow& m) { return m.table == table && m.variant == p; })) {
      out.push_back(p);
    }
  }
  for (const auto& m : r.medians) {
    if (m.table == table && std::find(out.begin(), out.end(), m.variant) == out.end()) {
      out.push_back(m.variant);
    }
  }
  return out;
}

std::string cell(const MedianRow* m) { return m == nullptr ? "-" : fixed(100.0 * m->median, 1); }

void recall_table(std::ostringstream& md, const Report& r, const std::string& table,
                  const std::string& title, const std::vector<std::string>& order) {
  const auto variants = variants_of(r, table, order);
  if (variants.empty()) return;
  md << "## " << title << "\n\n";
  md << "| variant | seeds | R@100 IoU 0.4 | R@100 IoU 0.5 | R@100 IoU 0.6 | mAP@0.5 |\n";
  md << "|---|---|---|---|---|---|\n";
  for (const auto& v : variants) {
    const auto* r50 = find(r, table, v, "recall@100", 0.5);
    md << "| " << v << " | " << (r50 ? std::to_string(r50->n) : "-") << " | "
       << cell(find(r, table, v, "recall@100", 0.4)) << " | " << cell(r50) << " | "
       << cell(find(r, table, v, "recall@100", 0.6)) << " | " << cell(find(r, table, v, "map", 0.5))
       << " |\n";
  }
  md << "\n";
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw DataError("median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

LoadedRun load_run(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  if (!fs::exists(file)) throw DataError("manifest not found: " + file.string());
  LoadedRun run;
  run.manifest_path = file;
  try {
    run.manifest = json::parse(read_file(file));
  } catch (const json::exception& e) {
    throw DataError("manifest " + file.string() + " is not valid JSON: " + e.what());
  }
  if (!run.manifest.is_object() || !run.manifest.contains("schema_version")) {
    throw DataError("manifest " + file.string() + " has no schema_version");
  }
  const auto version = run.manifest["schema_version"];
  if (!version.is_number_integer() || version.get<int>() != exp::kSchemaVersion) {
    throw DataError("manifest " + file.string() + " has schema_version " + version.dump() +
                    ", this build reads schema_version " + std::to_string(exp::kSchemaVersion));
  }
  return run;
}

Report build_report(const std::vector<fs::path>& inputs) {
  if (inputs.empty()) throw DataError("report: no manifests given");
  Report report;
  std::map<Key, std::vector<double>> groups;
  for (const auto& in : inputs) {
    LoadedRun run = load_run(in);
    const std::string run_id = run.manifest.value("run_id", run.manifest_path.parent_path().filename().string());
    try {
      for (const auto& s : run.manifest.at("results")) {
        const auto seed = s.at("seed").get<std::uint64_t>();
        for (const auto& rj : s.at("rows")) {
          MergedRow m{run_id, seed, exp::metric_row_from_json(rj)};
          groups[{m.row.table, m.row.variant, m.row.metric, m.row.threshold}].push_back(m.row.value);
          report.rows.push_back(std::move(m));
        }
      }
    } catch (const json::exception& e) {
      throw DataError("manifest " + run.manifest_path.string() + ": malformed results (" + e.what() + ")");
    }
    report.runs.push_back(std::move(run));
  }
  for (const auto& [key, values] : groups) {
    const auto& [table, variant, metric, threshold] = key;
    report.medians.push_back(
        {table, variant, metric, threshold, static_cast<int>(values.size()), median(values)});
  }
  return report;
}

std::string markdown_tables(const Report& r) {
  std::ostringstream md;
  md << "# Results\n\nMedians over " << r.runs.size() << " run(s); recall and mAP in percent.\n\n";
  recall_table(md, r, "zsd", "Zero-shot detection", {});
  recall_table(md, r, "components", "Components", {"baseline", "cfu", "cfu_ffu", "cfu_ffu_bfu"});
  recall_table(md, r, "losses", "Loss terms", {"wgan_only", "+cls", "+emb", "+cls+emb"});
  if (std::any_of(r.medians.begin(), r.medians.end(), [](const MedianRow& m) { return m.table == "gzsd"; })) {
    md << "## Generalized zero-shot detection\n\n| metric | Seen | Unseen |\n|---|---|---|\n";
    for (double t : eval::kRecallThresholds) {
      md << "| R@100 IoU " << fixed(t, 1) << " | " << cell(find(r, "gzsd", "Seen", "recall@100", t))
         << " | " << cell(find(r, "gzsd", "Unseen", "recall@100", t)) << " |\n";
    }
    md << "| mAP@0.5 | " << cell(find(r, "gzsd", "Seen", "map", 0.5)) << " | "
       << cell(find(r, "gzsd", "Unseen", "map", 0.5)) << " |\n\n";
  }
  const auto acc = variants_of(r, "transfer", {});
  if (!acc.empty()) {
    md << "## Unseen head accuracy on held-out real features\n\n| head | seeds | accuracy |\n|---|---|---|\n";
    for (const auto& v : acc) {
      const auto* m = find(r, "transfer", v, "accuracy", 0.0);
      md << "| " << v << " | " << m->n << " | " << fixed(100.0 * m->median, 1) << " |\n";
    }
    md << "\n";
  }
  return md.str();
}

void write_report(const Report& r, const fs::path& out) {
  fs::create_directories(out);
  std::ostringstream merged;
  merged << "run_id,seed,table,variant,metric,threshold,value\n";
  for (const auto& m : r.rows) {
    merged << m.run_id << ',' << m.seed << ',' << m.row.table << ',' << m.row.variant << ','
           << m.row.metric << ',' << num(m.row.threshold) << ',' << num(m.row.value) << '\n';
  }
  write_file(out / "merged.csv", merged.str());

  std::ostringstream med;
  med << "table,variant,metric,threshold,n,median\n";
  for (const auto& m : r.medians) {
    med << m.table << ',' << m.variant << ',' << m.metric << ',' << num(m.threshold) << ',' << m.n
        << ',' << num(m.median) << '\n';
  }
  write_file(out / "medians.csv", med.str());
  write_file(out / "tables.md", markdown_tables(r));

  std::ostringstream curve;
  curve << "run_id,seed,table,variant,threshold,recall\n";
  for (const auto& m : r.rows) {
    if (m.row.metric != "recall@100") continue;
    curve << m.run_id << ',' << m.seed << ',' << m.row.table << ',' << m.row.variant << ','
          << num(m.row.threshold) << ',' << num(m.row.value) << '\n';
  }
  write_file(out / "recall_vs_threshold.csv", curve.str());

  std::ostringstream losses;
  losses << "run_id,seed,training,step,epoch,unit,critic_loss,gen_loss,cls_loss,emb_loss,wasserstein,penalty\n";
  json inputs = json::array();
  for (const auto& run : r.runs) {
    const std::string run_id = run.manifest.value("run_id", std::string());
    const std::string manifest_text = read_file(run.manifest_path);
    inputs.push_back({{"path", run.manifest_path.string()},
                      {"run_id", run_id},
                      {"status", run.manifest.value("status", std::string())},
                      {"manifest_hash", exp::git_blob_sha1(manifest_text)},
                      {"input_hash", run.manifest.value("input_hash", std::string())}});
    if (!run.manifest.contains("artifacts") || !run.manifest["artifacts"].contains("losses")) continue;
    const fs::path csv = run.manifest_path.parent_path() / run.manifest["artifacts"]["losses"].get<std::string>();
    if (!fs::exists(csv)) throw DataError("loss log not found: " + csv.string());
    std::istringstream lines(read_file(csv));
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) {
      if (!line.empty()) losses << run_id << ',' << line << '\n';
    }
  }
  write_file(out / "loss_curves.csv", losses.str());

  const json manifest = {{"schema_version", exp::kSchemaVersion},
                         {"run_id", out.filename().string()},
                         {"mode", "report"},
                         {"status", "completed"},
                         {"inputs", inputs},
                         {"artifacts",
                          {{"merged", "merged.csv"},
                           {"medians", "medians.csv"},
                           {"tables", "tables.md"},
                           {"recall_vs_threshold", "recall_vs_threshold.csv"},
                           {"loss_curves", "loss_curves.csv"}}}};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace zsd::report
