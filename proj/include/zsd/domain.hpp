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
// Synthetic stand-in for a detector's RoI feature extractor.
//
// Each class owns a non-negative visual prototype built from a handful of
// latent attributes. Its semantic embedding is a fixed random isometry of
// those attributes plus a little noise, so semantic similarity tracks visual
// similarity. Ground-truth features are noisy prototypes; a proposal with
// overlap t keeps a fraction t of its ground-truth feature and fills the rest
// with clutter (noise mixed with some other seen class).
#ifndef ZSD_DOMAIN_HPP
#define ZSD_DOMAIN_HPP

#include "zsd/box.hpp"
#include "zsd/rng.hpp"
#include "zsd/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace zsd::domain {

struct DomainConfig {
  int feature_dim = 64;
  int embedding_dim = 16;
  int attribute_dim = 8;
  int num_seen = 12;
  int num_unseen = 4;
  int samples_per_gt = 8;  // FG and BG samples per ground-truth box
  int num_gt = 2000;
  double fg_threshold = 0.5;
  double bg_threshold = 0.2;
  double intra_class_sigma = 0.15;
  double clutter_sigma = 0.5;
  double prototype_norm = 4.0;
  double prototype_residual = 0.1;
  double embedding_noise = 0.05;

  // Evaluation images.
  int eval_images = 100;
  int max_gt_per_image = 3;
  int fg_proposals_per_gt = 5;
  double fg_proposal_min_iou = 0.3;
  int bg_proposals_per_gt = 150;
  double bg_proposal_max_iou = 0.3;
  int clutter_proposals = 300;
  // Evaluation clutter may borrow any other class's prototype, unseen ones
  // included; training clutter only ever uses seen classes.
  bool eval_clutter_all_classes = true;

  std::uint64_t seed = 7;

  // Throws ConfigError naming the first violated constraint.
  void validate() const;
};

struct SemanticEmbedding {
  RowVector values;  // unit L2 norm
};

struct World {
  Matrix prototypes;  // classes x feature_dim; empty for worlds read from files
  Matrix embeddings;  // classes x embedding_dim, unit rows
  std::vector<int> seen;
  std::vector<int> unseen;

  [[nodiscard]] int num_classes() const { return static_cast<int>(embeddings.rows()); }
  [[nodiscard]] bool is_seen(int class_id) const;
  [[nodiscard]] bool is_unseen(int class_id) const;
  [[nodiscard]] SemanticEmbedding embedding(int class_id) const;
  // Position of class_id inside `seen` (or `unseen`); -1 when absent.
  [[nodiscard]] int seen_index(int class_id) const;
  [[nodiscard]] int unseen_index(int class_id) const;
};

enum class SampleKind { kGt, kFg, kBg };
enum class Split { kTrainSeen, kTestUnseen, kTestSeen };

std::string_view to_string(SampleKind kind);
std::string_view to_string(Split split);

struct SampleRecord {
  int class_id = 0;
  SampleKind kind = SampleKind::kGt;
  double iou = 1.0;
  RowVector feature;
};

struct Dataset {
  Split split = Split::kTrainSeen;
  std::vector<SampleRecord> records;

  [[nodiscard]] std::size_t count(SampleKind kind) const;
  // Row-stacked features and labels of one kind, in record order.
  [[nodiscard]] Matrix features(SampleKind kind) const;
  [[nodiscard]] std::vector<int> labels(SampleKind kind) const;
};

// A scored region of an evaluation image. `gt_index` is the ground truth the
// proposal was cut from (-1 for free clutter); `target_iou` the overlap used
// to corrupt its feature.
struct Proposal {
  BoxRect box;
  RowVector feature;
  int gt_index = -1;
  double target_iou = 0.0;
};

struct GroundTruthBox {
  BoxRect box;
  int class_id = 0;
  RowVector feature;
};

struct EvalImage {
  int image_id = 0;
  std::vector<GroundTruthBox> gts;
  std::vector<Proposal> proposals;
};

struct EvalSet {
  Split split = Split::kTestUnseen;
  std::vector<EvalImage> images;

  [[nodiscard]] std::size_t num_gts() const;
  [[nodiscard]] std::size_t num_proposals() const;
};

// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

// Rank correlation between pairwise cosine similarities of embeddings and of
// prototypes, over all unordered class pairs.
double semantic_visual_correlation(const World& world);

World make_world(const DomainConfig& config);

SampleRecord sample_gt_feature(const World& world, const DomainConfig& config, int class_id,
                               Rng& rng);

// Which classes may lend their prototype to clutter. Training data only ever
// uses seen classes.
enum class ClutterPool { kSeen, kAllClasses };

// Features of a proposal overlapping `gt` with the given IoU. Identity at 1.
RowVector corrupt_to_iou(const World& world, const DomainConfig& config, const SampleRecord& gt,
                         double target_iou, Rng& rng, ClutterPool from = ClutterPool::kSeen);

// relu(0.5 * prototype(other) + 0.5 * noise), other drawn from the pool
// except `exclude_class`.
RowVector clutter(const World& world, const DomainConfig& config, int exclude_class, Rng& rng,
                  ClutterPool from = ClutterPool::kSeen);

Dataset build_training_set(const World& world, const DomainConfig& config);

EvalSet build_eval_set(const World& world, const DomainConfig& config, Split which);

// Held-out labeled features of the requested split drawn the same way as
// the training set (GT, FG and BG per box); used for classification accuracy.
Dataset build_labeled_set(const World& world, const DomainConfig& config, Split which, int num_gt,
                          Rng& rng);

// Throws DataError when a train-seen dataset carries an unseen class.
void check_zero_shot(const Dataset& dataset, const World& world);

// One JSON object per line:
//   {"class_id": int, "kind": "gt"|"fg"|"bg", "iou": float, "feature": [float,...]}
void write_jsonl(const Dataset& dataset, const std::filesystem::path& path);
Dataset ingest_jsonl(const std::filesystem::path& path, const DomainConfig& config,
                     Split split = Split::kTrainSeen);

// {"class_id": int, "embedding": [float,...], "seen": bool} per line. The
// world read back carries no prototypes.
void write_embeddings(const World& world, const std::filesystem::path& path);
World read_embeddings(const std::filesystem::path& path);

}  // namespace zsd::domain

#endif  // ZSD_DOMAIN_HPP
