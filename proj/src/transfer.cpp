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
#include "zsd/transfer.hpp"

#include "zsd/adam.hpp"
#include "zsd/rng.hpp"

#include <algorithm>
#include <numeric>

namespace zsd::transfer {

namespace {

bool all_zero(const Matrix& m) { return m.rows() > 0 && (m.array() == 0.0).all(); }

}  // namespace

UnseenClasses unseen_classes(const domain::World& world) {
  UnseenClasses out;
  out.class_ids = world.unseen;
  out.embeddings.resize(static_cast<Eigen::Index>(world.unseen.size()), world.embeddings.cols());
  for (std::size_t i = 0; i < world.unseen.size(); ++i) {
    out.embeddings.row(static_cast<Eigen::Index>(i)) = world.embeddings.row(world.unseen[i]);
  }
  return out;
}

void TransferConfig::validate() const {
  if (counts.gt_like < 0 || counts.fg < 0 || counts.bg < 0) {
    throw ConfigError("transfer config: counts must be >= 0");
  }
  if (counts.gt_like + counts.fg < 1) {
    throw ConfigError("transfer config: need at least one positive sample (gt_like or fg) per class");
  }
  if (head.epochs < 1 || head.batch_size < 1 || !(head.learning_rate > 0.0)) {
    throw ConfigError("transfer config: head epochs, batch_size >= 1 and learning_rate > 0");
  }
}

TransferResult train_unseen_head(const gan::IoUGANModel& model, const UnseenClasses& classes,
                                 const TransferConfig& config, const Matrix* real_background) {
  config.validate();
  const auto u = static_cast<int>(classes.class_ids.size());
  if (u < 1) throw DataError("train_unseen_head: no unseen classes");
  if (classes.embeddings.rows() != u) {
    throw ShapeError("train_unseen_head: " + std::to_string(u) + " class ids for " +
                     shape_string(classes.embeddings) + " embeddings");
  }
  const bool real_bg = config.background == Background::kReal;
  if (real_bg && config.counts.bg > 0 && (real_background == nullptr || real_background->rows() == 0)) {
    throw DataError("train_unseen_head: real background requested but none supplied");
  }
  if (real_bg && config.counts.bg > 0 && real_background->cols() != model.feature_dim) {
    throw ShapeError("train_unseen_head: real background width " +
                     std::to_string(real_background->cols()) + " vs " +
                     std::to_string(model.feature_dim));
  }

  auto require_unit = [&](gan::Unit unit, const char* use) {
    if (!model.trained[gan::index(unit)]) {
      throw DataError("train_unseen_head: " + std::string(use) + " needs a trained " +
                      std::string(gan::unit_name(unit)));
    }
  };
  require_unit(gan::Unit::kCfu, "synthesis");
  if (config.fg_from_ffu && config.counts.fg > 0) require_unit(gan::Unit::kFfu, "fg synthesis");
  if (!real_bg && config.counts.bg > 0) require_unit(gan::Unit::kBfu, "bg synthesis");

  Rng rng = make_rng(config.seed, Stream::kSynthesis);
  const auto per_class = config.counts.gt_like + config.counts.fg + config.counts.bg;
  TransferResult result;
  result.features.resize(static_cast<Eigen::Index>(u) * per_class, model.feature_dim);
  result.targets.reserve(static_cast<std::size_t>(u * per_class));
  Eigen::Index row = 0;
  auto append = [&](const Matrix& m, int target) {
    result.features.middleRows(row, m.rows()) = m;
    row += m.rows();
    result.targets.insert(result.targets.end(), static_cast<std::size_t>(m.rows()), target);
  };

  for (int c = 0; c < u; ++c) {
    const int class_id = classes.class_ids[static_cast<std::size_t>(c)];
    const domain::SemanticEmbedding e{classes.embeddings.row(c)};
    gan::SynthesisCounts counts = config.counts;
    if (!config.fg_from_ffu) {
      counts.gt_like += counts.fg;
      counts.fg = 0;
    }
    if (real_bg) counts.bg = 0;
    const auto batches = gan::synthesize(model, e, class_id, counts, rng);
    for (const auto& b : batches) {
      if (all_zero(b.features)) {
        result.warnings.push_back("class " + std::to_string(class_id) + ": all " +
                                  std::to_string(b.features.rows()) + " synthesized " +
                                  std::string(domain::to_string(b.kind)) + " rows are zero");
      }
    }
    append(batches[0].features, c);
    append(batches[1].features, c);
    if (real_bg) {
      if (config.counts.bg > 0) {
        std::uniform_int_distribution<Eigen::Index> pick(0, real_background->rows() - 1);
        Matrix bg(config.counts.bg, model.feature_dim);
        for (Eigen::Index i = 0; i < bg.rows(); ++i) bg.row(i) = real_background->row(pick(rng));
        append(bg, u);
      }
    } else {
      append(batches[2].features, u);
    }
  }
  result.features.conservativeResize(row, Eigen::NoChange);

  Rng head_rng = make_rng(config.seed, Stream::kUnseenHead);
  result.head = ClassifierHead(
      train_softmax_block(result.features, result.targets, classes.class_ids, config.head, head_rng));
  return result;
}

ClassifierHead assemble_gzsd_head(const ClassifierHead& seen_head, const ClassifierHead& unseen_head) {
  if (seen_head.feature_dim() != unseen_head.feature_dim()) {
    throw ShapeError("assemble_gzsd_head: seen head takes " + std::to_string(seen_head.feature_dim()) +
                     " features, unseen head " + std::to_string(unseen_head.feature_dim()));
  }
  std::vector<HeadBlock> blocks = seen_head.blocks();
  blocks.insert(blocks.end(), unseen_head.blocks().begin(), unseen_head.blocks().end());
  return ClassifierHead(std::move(blocks));
}

SemanticHead::SemanticHead(Matrix weight, RowVector bias)
    : weight_(std::move(weight)), bias_(std::move(bias)) {
  if (bias_.size() != weight_.cols()) throw ShapeError("SemanticHead: bias width");
}

RowVector SemanticHead::project(const RowVector& feature) const {
  if (feature.size() != weight_.rows()) {
    throw ShapeError("SemanticHead: feature width " + std::to_string(feature.size()) + " vs " +
                     std::to_string(weight_.rows()));
  }
  return feature * weight_ + bias_;
}

void SemanticHead::set_classes(const UnseenClasses& classes) {
  if (classes.embeddings.cols() != weight_.cols()) throw ShapeError("SemanticHead: embedding width");
  class_ids_ = classes.class_ids;
  unit_embeddings_ = classes.embeddings.rowwise().normalized();
}

Prediction SemanticHead::predict(const RowVector& feature) const {
  if (class_ids_.empty()) throw DataError("SemanticHead: no classes set");
  const RowVector p = project(feature);
  const double n = p.norm();
  if (n == 0.0) return {class_ids_.front(), 0.5};
  const RowVector cos = (unit_embeddings_ * p.transpose()).transpose() / n;
  const Eigen::Index k = argmax(cos);
  return {class_ids_[static_cast<std::size_t>(k)], std::clamp((1.0 + cos(k)) / 2.0, 0.0, 1.0)};
}

SemanticHead train_semantic_baseline(const domain::Dataset& dataset, const domain::World& world,
                                     const HeadTrainConfig& config, std::uint64_t seed) {
  domain::check_zero_shot(dataset, world);
  std::vector<const domain::SampleRecord*> rows;
  for (const auto& r : dataset.records) {
    if (r.kind != domain::SampleKind::kBg) rows.push_back(&r);
  }
  if (rows.empty()) throw DataError("train_semantic_baseline: no GT/FG records");
  const auto dv = rows.front()->feature.size();
  const auto de = world.embeddings.cols();
  Rng rng = make_rng(seed, Stream::kBaseline);
  Matrix weight = gaussian(dv, de, 1.0 / std::sqrt(static_cast<double>(dv)), rng);
  Matrix bias = Matrix::Zero(1, de);
  ad::AdamState<double> state;
  const ad::AdamConfig adam{config.learning_rate, 0.9, 0.999, 1e-8};

  const auto n = static_cast<Eigen::Index>(rows.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = std::min<Eigen::Index>(config.batch_size, n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Eigen::Index start = 0; start < n; start += batch) {
      const Eigen::Index len = std::min(batch, n - start);
      Matrix x(len, dv);
      Matrix e(len, de);
      std::vector<int> labels(static_cast<std::size_t>(len));
      for (Eigen::Index i = 0; i < len; ++i) {
        const auto* r = rows[static_cast<std::size_t>(order[static_cast<std::size_t>(start + i)])];
        x.row(i) = r->feature;
        e.row(i) = world.embeddings.row(r->class_id);
        labels[static_cast<std::size_t>(i)] = r->class_id;
      }
      ad::Tape<double> tape;
      const auto w = tape.parameter(weight);
      const auto b = tape.parameter(bias);
      const auto proj = tape.add_row(tape.matmul(tape.constant(std::move(x)), w), b);
      const auto pairs = gan::embedding_pairs(tape.value(proj), e, labels, random_derangement(len, rng));
      if (pairs.matched.empty() && pairs.unmatched.empty()) continue;
      const auto loss = gan::embedding_loss(tape, proj, tape.constant(std::move(e)), pairs);
      tape.backward(loss);
      std::vector<Matrix*> params{&weight, &bias};
      std::vector<Matrix> grads{tape.adjoint(w), tape.adjoint(b)};
      ad::adam_step<double>(params, grads, state, adam, "semantic baseline embedding loss");
    }
  }
  return SemanticHead(std::move(weight), RowVector(bias.row(0)));
}

}  // namespace zsd::transfer
