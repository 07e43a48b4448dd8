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
// Read-only consolidation of finished runs: merged long-format rows,
// per-(table, variant, metric, threshold) medians over every seed of every
// run, Markdown tables and plot-ready series.
#ifndef ZSD_REPORT_HPP
#define ZSD_REPORT_HPP

#include "zsd/experiment.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace zsd::report {

struct MergedRow {
  std::string run_id;
  std::uint64_t seed = 0;
  exp::MetricRow row;
};

struct MedianRow {
  std::string table;
  std::string variant;
  std::string metric;
  double threshold = 0.0;
  int n = 0;
  double median = 0.0;
};

struct LoadedRun {
  std::filesystem::path manifest_path;
  nlohmann::json manifest;
};

struct Report {
  std::vector<LoadedRun> runs;
  std::vector<MergedRow> rows;
  std::vector<MedianRow> medians;  // sorted by table, variant, metric, threshold
};

// Accepts manifest.json files or run directories. Throws DataError naming
// the path of a missing or unreadable manifest and naming both versions on
// a schema mismatch.
LoadedRun load_run(const std::filesystem::path& path);

Report build_report(const std::vector<std::filesystem::path>& inputs);

double median(std::vector<double> values);

// merged.csv, medians.csv, tables.md, recall_vs_threshold.csv,
// loss_curves.csv and manifest.json under `out`.
void write_report(const Report& report, const std::filesystem::path& out);

std::string markdown_tables(const Report& report);

}  // namespace zsd::report

#endif  // ZSD_REPORT_HPP
