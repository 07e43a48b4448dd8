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
// Detection-style evaluation: greedy IoU matching, Recall@k and all-point
// interpolated average precision.
#ifndef ZSD_EVAL_HPP
#define ZSD_EVAL_HPP

#include "zsd/box.hpp"
#include "zsd/domain.hpp"
#include "zsd/head.hpp"
#include "zsd/types.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

namespace zsd::eval {

struct DetectionInstance {
  int image_id = 0;
  BoxRect box;
  int class_id = 0;
  double score = 0.0;
};

struct GroundTruth {
  int image_id = 0;
  BoxRect box;
  int class_id = 0;
};

inline const std::vector<double> kRecallThresholds{0.4, 0.5, 0.6};
inline constexpr int kRecallK = 100;

// Per image: the top-k detections by score (ties keep insertion order) are
// visited in that order; each takes the unmatched same-class GT of highest
// IoU >= threshold. Returns matched GTs / all GTs. Throws DataError on an
// empty GT set.
double recall_at_k(const std::vector<DetectionInstance>& dets, const std::vector<GroundTruth>& gts,
                   int k, double threshold);

struct ClassAp {
  int class_id = 0;
  double ap = 0.0;
  int num_gts = 0;
};

struct ApResult {
  double map = 0.0;
  std::vector<ClassAp> per_class;  // ascending class id, classes with >= 1 GT
  std::vector<int> excluded;       // detected classes without any GT
};

// All-point interpolated AP per class with the same greedy matching (no
// top-k cut), mAP the mean over classes that have ground truth.
ApResult mean_average_precision(const std::vector<DetectionInstance>& dets,
                                const std::vector<GroundTruth>& gts, double threshold = 0.5);

struct MetricsReport {
  std::vector<double> thresholds;
  std::vector<double> recall_at_100;  // one per threshold
  double map_50 = 0.0;
  std::vector<ClassAp> per_class;
  std::vector<int> excluded_classes;
  int num_images = 0;
  int num_gts = 0;
  int num_detections = 0;

  [[nodiscard]] double recall_at(double threshold) const;
  [[nodiscard]] nlohmann::json to_json() const;
  // threshold,recall_at_100 rows followed by map_50.
  [[nodiscard]] std::string to_csv() const;
  // class_id,ap,num_gts
  [[nodiscard]] std::string per_class_csv() const;
};

using Scorer = std::function<Prediction(const RowVector&)>;

// One detection per proposal: the scorer's class and score.
std::vector<DetectionInstance> detect(const domain::EvalSet& set, const Scorer& scorer);
std::vector<GroundTruth> ground_truths(const domain::EvalSet& set);

MetricsReport evaluate_detections(const std::vector<DetectionInstance>& dets,
                                  const std::vector<GroundTruth>& gts,
                                  const std::vector<double>& thresholds = kRecallThresholds);

// Scores every proposal with predict_foreground(head, .) and evaluates.
MetricsReport evaluate_pipeline(const ClassifierHead& head, const domain::EvalSet& set,
                                const std::vector<double>& thresholds = kRecallThresholds);
MetricsReport evaluate_pipeline(const Scorer& scorer, const domain::EvalSet& set,
                                const std::vector<double>& thresholds = kRecallThresholds);

}  // namespace zsd::eval

#endif  // ZSD_EVAL_HPP
