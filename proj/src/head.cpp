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
#include "zsd/head.hpp"

#include "zsd/adam.hpp"
#include "zsd/autodiff.hpp"

#include <algorithm>
#include <numeric>

namespace zsd {

ClassifierHead::ClassifierHead(HeadBlock block) : ClassifierHead(std::vector<HeadBlock>{std::move(block)}) {}

ClassifierHead::ClassifierHead(std::vector<HeadBlock> blocks) : blocks_(std::move(blocks)) {
  if (blocks_.empty()) throw ShapeError("ClassifierHead: no blocks");
  for (const auto& b : blocks_) {
    const auto outputs = static_cast<Eigen::Index>(b.class_ids.size()) + 1;
    if (b.weight.cols() != outputs || b.bias.size() != outputs) {
      throw ShapeError("ClassifierHead: block weight " + shape_string(b.weight) + " for " +
                       std::to_string(b.class_ids.size()) + " classes + background");
    }
    if (b.weight.rows() != blocks_.front().weight.rows()) {
      throw ShapeError("ClassifierHead: feature dimension mismatch between blocks (" +
                       std::to_string(b.weight.rows()) + " vs " +
                       std::to_string(blocks_.front().weight.rows()) + ")");
    }
  }
}

Eigen::Index ClassifierHead::feature_dim() const { return blocks_.front().weight.rows(); }

Eigen::Index ClassifierHead::num_outputs() const {
  Eigen::Index n = 1;
  for (const auto& b : blocks_) n += static_cast<Eigen::Index>(b.class_ids.size());
  return n;
}

std::vector<int> ClassifierHead::class_map() const {
  std::vector<int> out;
  for (const auto& b : blocks_) out.insert(out.end(), b.class_ids.begin(), b.class_ids.end());
  out.push_back(kBackground);
  return out;
}

Matrix ClassifierHead::logits(const Matrix& features) const {
  if (features.cols() != feature_dim()) {
    throw ShapeError("ClassifierHead: feature width " + std::to_string(features.cols()) +
                     " vs head input " + std::to_string(feature_dim()));
  }
  Matrix out(features.rows(), num_outputs());
  Eigen::Index col = 0;
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const auto& b = blocks_[i];
    Matrix z = features * b.weight;
    z.rowwise() += b.bias;
    const auto fg = static_cast<Eigen::Index>(b.class_ids.size());
    out.middleCols(col, fg) = z.leftCols(fg);
    col += fg;
    if (i == 0) {
      out.rightCols(1) = z.rightCols(1);
    } else {
      out.rightCols(1) = out.rightCols(1).cwiseMax(z.rightCols(1));
    }
  }
  return out;
}

Matrix ClassifierHead::probabilities(const Matrix& features) const {
  return ad::Tape<double>::softmax(logits(features));
}

Eigen::Index argmax(const RowVector& row) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i) {
    if (row(i) > row(best)) best = i;
  }
  return best;
}

Prediction predict(const ClassifierHead& head, const RowVector& feature) {
  const RowVector p = head.probabilities(feature);
  const Eigen::Index k = argmax(p);
  return {head.class_map()[static_cast<std::size_t>(k)], p(k)};
}

Prediction predict_foreground(const ClassifierHead& head, const RowVector& feature) {
  const RowVector p = head.probabilities(feature);
  const RowVector fg = p.head(p.size() - 1);
  const Eigen::Index k = argmax(fg);
  return {head.class_map()[static_cast<std::size_t>(k)], p(k)};
}

HeadBlock train_softmax_block(const Matrix& features, const std::vector<int>& targets,
                              std::vector<int> class_ids, const HeadTrainConfig& config, Rng& rng) {
  const auto n = features.rows();
  if (n == 0 || static_cast<Eigen::Index>(targets.size()) != n) {
    throw ShapeError("train_softmax_block: " + std::to_string(targets.size()) + " targets for " +
                     shape_string(features));
  }
  const auto outputs = static_cast<Eigen::Index>(class_ids.size()) + 1;
  for (int t : targets) {
    if (t < 0 || t >= outputs) throw ShapeError("train_softmax_block: target out of range");
  }
  HeadBlock block;
  block.weight = Matrix::Zero(features.cols(), outputs);
  block.bias = RowVector::Zero(outputs);
  block.class_ids = std::move(class_ids);
  Matrix bias = block.bias;

  ad::AdamState<double> state;
  ad::AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = std::min<Eigen::Index>(config.batch_size, n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      Matrix x(len, features.cols());
      std::vector<Eigen::Index> y(static_cast<std::size_t>(len));
      for (Eigen::Index i = 0; i < len; ++i) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
        x.row(i) = features.row(src);
        y[static_cast<std::size_t>(i)] = targets[static_cast<std::size_t>(src)];
      }
      ad::Tape<double> tape;
      const auto w = tape.parameter(block.weight);
      const auto b = tape.parameter(bias);
      const auto logits = tape.add_row(tape.matmul(tape.constant(std::move(x)), w), b);
      const auto nll =
          tape.scale(tape.mean(tape.pick_cols(tape.log_softmax_rows(logits), std::move(y))), -1.0);
      tape.backward(nll);
      std::vector<Matrix*> params{&block.weight, &bias};
      std::vector<Matrix> grads{tape.adjoint(w), tape.adjoint(b)};
      ad::adam_step<double>(params, grads, state, adam, "classifier head cross-entropy");
    }
  }
  block.bias = bias;
  return block;
}

double accuracy(const ClassifierHead& head, const Matrix& features,
                const std::vector<int>& targets) {
  if (features.rows() == 0) return 0.0;
  const Matrix p = head.probabilities(features);
  Eigen::Index hits = 0;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    if (argmax(p.row(i)) == targets[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(p.rows());
}

}  // namespace zsd
