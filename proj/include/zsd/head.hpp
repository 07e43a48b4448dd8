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
#ifndef ZSD_HEAD_HPP
#define ZSD_HEAD_HPP

#include "zsd/rng.hpp"
#include "zsd/types.hpp"

#include <vector>

namespace zsd {

// One affine softmax block: feature_dim -> (classes + 1), background last.
struct HeadBlock {
  Matrix weight;  // feature_dim x outputs
  RowVector bias;
  std::vector<int> class_ids;  // foreground ids, in output order
};

struct Prediction {
  int class_id = kBackground;
  double score = 0.0;
};

// A linear softmax classifier over RoI features. A plain head has one block.
// A fused head (seen + unseen) concatenates the foreground logits of its
// blocks and keeps a single background logit, the maximum of the blocks'.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  explicit ClassifierHead(HeadBlock block);
  explicit ClassifierHead(std::vector<HeadBlock> blocks);

  [[nodiscard]] Eigen::Index feature_dim() const;
  // Foreground classes plus one background output.
  [[nodiscard]] Eigen::Index num_outputs() const;
  // Output index -> class id; the last entry is kBackground.
  [[nodiscard]] std::vector<int> class_map() const;
  [[nodiscard]] const std::vector<HeadBlock>& blocks() const { return blocks_; }

  [[nodiscard]] Matrix logits(const Matrix& features) const;
  [[nodiscard]] Matrix probabilities(const Matrix& features) const;

 private:
  std::vector<HeadBlock> blocks_;
};

// Argmax over all outputs (background included); ties go to the lowest index.
Prediction predict(const ClassifierHead& head, const RowVector& feature);

// Best foreground class and its probability under the full softmax.
Prediction predict_foreground(const ClassifierHead& head, const RowVector& feature);

// Lowest-index argmax of a row.
Eigen::Index argmax(const RowVector& row);

struct HeadTrainConfig {
  int epochs = 10;
  int batch_size = 128;
  double learning_rate = 1e-3;
};

// Softmax regression with Adam. `targets` are output indices in
// [0, class_ids.size()], the last one meaning background.
HeadBlock train_softmax_block(const Matrix& features, const std::vector<int>& targets,
                              std::vector<int> class_ids, const HeadTrainConfig& config, Rng& rng);

// Fraction of rows whose argmax output equals the target index.
double accuracy(const ClassifierHead& head, const Matrix& features,
                const std::vector<int>& targets);

}  // namespace zsd

#endif  // ZSD_HEAD_HPP
