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
// Knowledge transfer: a classifier head for the unseen classes trained only
// on synthesized features, the fused seen + unseen head, and the
// visual-to-semantic nearest-embedding baseline.
#ifndef ZSD_TRANSFER_HPP
#define ZSD_TRANSFER_HPP

#include "zsd/domain.hpp"
#include "zsd/head.hpp"
#include "zsd/iougan.hpp"
#include "zsd/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace zsd::transfer {

// Ids and embeddings of the classes to transfer to. No features: the head
// can only ever see what the generators produce.
struct UnseenClasses {
  std::vector<int> class_ids;
  Matrix embeddings;  // one row per class id
};

UnseenClasses unseen_classes(const domain::World& world);

enum class Background { kSynthesized, kReal };

struct TransferConfig {
  gan::SynthesisCounts counts{500, 500, 500};
  bool fg_from_ffu = true;  // false: the fg share is drawn from the CFU too
  Background background = Background::kSynthesized;
  HeadTrainConfig head{};
  std::uint64_t seed = 7;

  void validate() const;
};

struct TransferResult {
  ClassifierHead head;
  Matrix features;           // the synthesized training set
  std::vector<int> targets;  // output indices, U = background
  std::vector<std::string> warnings;
};

// Positives per class: gt_like rows of G^c and fg rows of G^f (or G^c),
// labelled with the class; bg rows of G^b labelled background, or, with
// Background::kReal, counts.bg rows per class drawn from `real_background`.
TransferResult train_unseen_head(const gan::IoUGANModel& model, const UnseenClasses& classes,
                                 const TransferConfig& config,
                                 const Matrix* real_background = nullptr);

// Seen block followed by the unseen block, one shared background logit.
ClassifierHead assemble_gzsd_head(const ClassifierHead& seen_head, const ClassifierHead& unseen_head);

// Affine map from visual features into the embedding space; classification
// by cosine nearest class embedding, score (1 + cos) / 2.
class SemanticHead {
 public:
  SemanticHead() = default;
  SemanticHead(Matrix weight, RowVector bias);

  [[nodiscard]] RowVector project(const RowVector& feature) const;
  // Restricts predictions to the given classes.
  void set_classes(const UnseenClasses& classes);
  [[nodiscard]] Prediction predict(const RowVector& feature) const;

  [[nodiscard]] const Matrix& weight() const { return weight_; }
  [[nodiscard]] const RowVector& bias() const { return bias_; }

 private:
  Matrix weight_;  // feature_dim x embedding_dim
  RowVector bias_;
  std::vector<int> class_ids_;
  Matrix unit_embeddings_;
};

// Trains the map with the cosine embedding loss on seen GT and FG features.
SemanticHead train_semantic_baseline(const domain::Dataset& dataset, const domain::World& world,
                                     const HeadTrainConfig& config, std::uint64_t seed);

}  // namespace zsd::transfer

#endif  // ZSD_TRANSFER_HPP
