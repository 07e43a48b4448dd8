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
#include "zsd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace zsd {

double iou(const BoxRect& a, const BoxRect& b) {
  const double w = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double h = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = w * h;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace eval {

namespace {

// Indices of `dets` sorted by descending score, ties by position.
std::vector<std::size_t> by_score(const std::vector<DetectionInstance>& dets,
                                  std::vector<std::size_t> idx) {
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return idx;
}

// Greedy match of one detection against the GTs of its image. Returns the
// matched GT position or -1.
long match(const DetectionInstance& det, const std::vector<GroundTruth>& gts,
           const std::vector<std::size_t>& image_gts, std::vector<char>& taken, double threshold) {
  long best = -1;
  double best_iou = -1.0;
  for (std::size_t g : image_gts) {
    if (taken[g] || gts[g].class_id != det.class_id) continue;
    const double o = iou(det.box, gts[g].box);
    if (o >= threshold && o > best_iou) {
      best_iou = o;
      best = static_cast<long>(g);
    }
  }
  if (best >= 0) taken[static_cast<std::size_t>(best)] = 1;
  return best;
}

std::map<int, std::vector<std::size_t>> gts_by_image(const std::vector<GroundTruth>& gts) {
  std::map<int, std::vector<std::size_t>> out;
  for (std::size_t g = 0; g < gts.size(); ++g) out[gts[g].image_id].push_back(g);
  return out;
}

}  // namespace

double recall_at_k(const std::vector<DetectionInstance>& dets, const std::vector<GroundTruth>& gts,
                   int k, double threshold) {
  if (k < 1) throw std::invalid_argument("recall_at_k: k must be >= 1");
  if (gts.empty()) throw DataError("recall_at_k: no ground truth, recall is undefined");
  std::map<int, std::vector<std::size_t>> per_image;
  for (std::size_t i = 0; i < dets.size(); ++i) per_image[dets[i].image_id].push_back(i);
  const auto image_gts = gts_by_image(gts);
  std::vector<char> taken(gts.size(), 0);
  std::size_t matched = 0;
  static const std::vector<std::size_t> kNone;
  for (auto& [image, idx] : per_image) {
    auto order = by_score(dets, idx);
    if (order.size() > static_cast<std::size_t>(k)) order.resize(static_cast<std::size_t>(k));
    const auto it = image_gts.find(image);
    const auto& candidates = it == image_gts.end() ? kNone : it->second;
    for (std::size_t d : order) {
      if (match(dets[d], gts, candidates, taken, threshold) >= 0) ++matched;
    }
  }
  return static_cast<double>(matched) / static_cast<double>(gts.size());
}

ApResult mean_average_precision(const std::vector<DetectionInstance>& dets,
                                const std::vector<GroundTruth>& gts, double threshold) {
  std::map<int, int> gt_count;
  for (const auto& g : gts) ++gt_count[g.class_id];
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < dets.size(); ++i) by_class[dets[i].class_id].push_back(i);

  ApResult result;
  for (const auto& [cls, _] : by_class) {
    if (!gt_count.count(cls)) result.excluded.push_back(cls);
  }
  const auto image_gts = gts_by_image(gts);
  static const std::vector<std::size_t> kNone;
  for (const auto& [cls, npos] : gt_count) {
    std::vector<char> taken(gts.size(), 0);
    std::vector<double> precision, recall;
    const auto it = by_class.find(cls);
    if (it != by_class.end()) {
      std::size_t tp = 0;
      std::size_t seen = 0;
      for (std::size_t d : by_score(dets, it->second)) {
        const auto g = image_gts.find(dets[d].image_id);
        if (match(dets[d], gts, g == image_gts.end() ? kNone : g->second, taken, threshold) >= 0) ++tp;
        ++seen;
        precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
        recall.push_back(static_cast<double>(tp) / npos);
      }
    }
    // Precision envelope, then area under the step curve.
    for (std::size_t i = precision.size(); i-- > 1;) {
      precision[i - 1] = std::max(precision[i - 1], precision[i]);
    }
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < precision.size(); ++i) {
      ap += (recall[i] - prev_recall) * precision[i];
      prev_recall = recall[i];
    }
    result.per_class.push_back({cls, ap, npos});
  }
  if (!result.per_class.empty()) {
    double sum = 0.0;
    for (const auto& c : result.per_class) sum += c.ap;
    result.map = sum / static_cast<double>(result.per_class.size());
  }
  return result;
}

double MetricsReport::recall_at(double threshold) const {
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (std::abs(thresholds[i] - threshold) < 1e-12) return recall_at_100[i];
  }
  throw std::out_of_range("MetricsReport: no recall at threshold " + std::to_string(threshold));
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json j;
  nlohmann::json recall = nlohmann::json::object();
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    std::ostringstream key;
    key << thresholds[i];
    recall[key.str()] = recall_at_100[i];
  }
  j["recall_at_100"] = recall;
  j["map_50"] = map_50;
  j["ap_interpolation"] = "all-point";
  nlohmann::json pc = nlohmann::json::array();
  for (const auto& c : per_class) pc.push_back({{"class_id", c.class_id}, {"ap", c.ap}, {"num_gts", c.num_gts}});
  j["per_class_ap"] = pc;
  j["excluded_classes"] = excluded_classes;
  j["counts"] = {{"images", num_images}, {"gts", num_gts}, {"detections", num_detections}};
  return j;
}

std::string MetricsReport::to_csv() const {
  std::ostringstream out;
  out << "metric,threshold,value\n";
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    out << "recall_at_100," << format_double(thresholds[i]) << ',' << format_double(recall_at_100[i])
        << '\n';
  }
  out << "map,0.5," << format_double(map_50) << '\n';
  return out.str();
}

std::string MetricsReport::per_class_csv() const {
  std::ostringstream out;
  out << "class_id,ap,num_gts\n";
  for (const auto& c : per_class) out << c.class_id << ',' << format_double(c.ap) << ',' << c.num_gts << '\n';
  return out.str();
}

std::vector<DetectionInstance> detect(const domain::EvalSet& set, const Scorer& scorer) {
  std::vector<DetectionInstance> dets;
  dets.reserve(set.num_proposals());
  for (const auto& image : set.images) {
    for (const auto& p : image.proposals) {
      const Prediction pred = scorer(p.feature);
      if (!std::isfinite(pred.score)) {
        throw NumericalError("detect: non-finite score in image " + std::to_string(image.image_id));
      }
      dets.push_back({image.image_id, p.box, pred.class_id, pred.score});
    }
  }
  return dets;
}

std::vector<GroundTruth> ground_truths(const domain::EvalSet& set) {
  std::vector<GroundTruth> gts;
  for (const auto& image : set.images) {
    for (const auto& g : image.gts) gts.push_back({image.image_id, g.box, g.class_id});
  }
  return gts;
}

MetricsReport evaluate_detections(const std::vector<DetectionInstance>& dets,
                                  const std::vector<GroundTruth>& gts,
                                  const std::vector<double>& thresholds) {
  MetricsReport r;
  r.thresholds = thresholds;
  for (double t : thresholds) r.recall_at_100.push_back(recall_at_k(dets, gts, kRecallK, t));
  auto ap = mean_average_precision(dets, gts, 0.5);
  r.map_50 = ap.map;
  r.per_class = std::move(ap.per_class);
  r.excluded_classes = std::move(ap.excluded);
  std::set<int> images;
  for (const auto& g : gts) images.insert(g.image_id);
  for (const auto& d : dets) images.insert(d.image_id);
  r.num_images = static_cast<int>(images.size());
  r.num_gts = static_cast<int>(gts.size());
  r.num_detections = static_cast<int>(dets.size());
  return r;
}

MetricsReport evaluate_pipeline(const ClassifierHead& head, const domain::EvalSet& set,
                                const std::vector<double>& thresholds) {
  return evaluate_pipeline([&](const RowVector& f) { return predict_foreground(head, f); }, set,
                           thresholds);
}

MetricsReport evaluate_pipeline(const Scorer& scorer, const domain::EvalSet& set,
                                const std::vector<double>& thresholds) {
  return evaluate_detections(detect(set, scorer), ground_truths(set), thresholds);
}

}  // namespace eval
}  // namespace zsd
