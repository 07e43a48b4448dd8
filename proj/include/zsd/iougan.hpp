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
// IoU-aware conditional WGAN-GP feature synthesizer.
//
// Three units share one structure, a generator and a critic:
//   CFU  G: (z, e(y))  -> v~c   critic on (v, e(y)), real v = ground-truth feature
//   FFU  G: (z, v~c)   -> v~f   critic on (v, e(y)), real v = foreground feature
//   BFU  G: (z, v~c)   -> v~b   critic on (v, e(y)), real v = background feature
// Each generator minimises  -E[D(fake)] + beta * L_cls + gamma * L_emb and each
// critic minimises  E[D(fake)] - E[D(real)] + alpha * E[(|grad D(mix)| - 1)^2].
#ifndef ZSD_IOUGAN_HPP
#define ZSD_IOUGAN_HPP

#include "zsd/adam.hpp"
#include "zsd/autodiff.hpp"
#include "zsd/domain.hpp"
#include "zsd/head.hpp"
#include "zsd/mlp.hpp"
#include "zsd/rng.hpp"
#include "zsd/types.hpp"

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace zsd::gan {

using Net = ad::Mlp<double>;
using Tape = ad::Tape<double>;
using ad::NodeId;

enum class Unit { kCfu = 0, kFfu = 1, kBfu = 2 };
inline constexpr std::array<Unit, 3> kAllUnits{Unit::kCfu, Unit::kFfu, Unit::kBfu};
std::string_view unit_name(Unit unit);
inline std::size_t index(Unit unit) { return static_cast<std::size_t>(unit); }

struct UnitParams {
  Net generator;      // 3 affine layers, leaky-relu hidden, relu output
  Net discriminator;  // 2 affine layers, leaky-relu hidden, linear output
  ad::AdamState<double> generator_state;
  ad::AdamState<double> discriminator_state;
};

struct IoUGANModel {
  int feature_dim = 0;
  int embedding_dim = 0;
  int noise_dim = 0;
  int hidden_dim = 0;
  std::array<UnitParams, 3> units;
  std::array<bool, 3> trained{};

  UnitParams& unit(Unit u) { return units[index(u)]; }
  [[nodiscard]] const UnitParams& unit(Unit u) const { return units[index(u)]; }
};

enum class BfuClsTarget { kBackground, kClass };

struct TrainConfig {
  std::array<double, 3> alpha{10.0, 10.0, 10.0};
  std::array<double, 3> beta{0.01, 0.01, 0.01};
  std::array<double, 3> gamma{0.1, 0.1, 0.1};
  double learning_rate = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.9;
  int n_critic = 5;
  int batch_size = 64;
  int epochs = 40;
  int noise_dim = 0;  // 0: same as the embedding dimension
  int hidden_dim = 256;
  std::uint64_t seed = 7;
  bool end_to_end = false;
  BfuClsTarget bfu_cls_target = BfuClsTarget::kBackground;
  std::array<bool, 3> units{true, true, true};
  HeadTrainConfig seen_head{};

  void validate() const;
};

struct LossRecord {
  int epoch = 0;
  long step = 0;
  Unit unit = Unit::kCfu;
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double cls_loss = 0.0;
  double emb_loss = 0.0;
  double wasserstein = 0.0;  // E[D(real)] - E[D(fake)] of the last critic step
  double penalty = 0.0;      // alpha-weighted gradient penalty of the last critic step
};

IoUGANModel init_model(int feature_dim, int embedding_dim, const TrainConfig& config);

// ---- loss building blocks ---------------------------------------------------

struct WganTerms {
  NodeId critic_loss;
  NodeId generator_loss;
  NodeId wasserstein;
  NodeId penalty;
};

// alpha * mean((|d D(x, cond) / dx| - 1)^2) with x = `interpolated`.
NodeId gradient_penalty(Tape& tape, const Net& critic, const Net::Bound& bound,
                        NodeId interpolated, NodeId cond, double alpha);

// `eta` is one mixing weight per row: x = eta * real + (1 - eta) * fake.
WganTerms wgan_terms(Tape& tape, const Net& critic, const Net::Bound& bound, NodeId real,
                     NodeId fake, NodeId cond, const Matrix& eta, double alpha);

struct WganLossValue {
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  double wasserstein = 0.0;
  double penalty = 0.0;
};

WganLossValue wgan_loss(const Net& critic, const Matrix& real, const Matrix& fake,
                        const Matrix& cond, double alpha, Rng& rng);

// -mean log softmax(theta(fake))[target] with theta held constant.
NodeId classification_loss(Tape& tape, const HeadBlock& theta, NodeId fake,
                           std::vector<Eigen::Index> targets);
double classification_loss(const ClassifierHead& theta, const Matrix& fake, int target_index);

struct EmbeddingPairs {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> matched;    // (real row, fake row)
  std::vector<std::pair<Eigen::Index, Eigen::Index>> unmatched;  // (real row, fake row)
  int skipped = 0;  // pairs dropped for a zero-norm member
};

// Matched: (i, i). Unmatched: (i, derangement[i]) when the labels differ.
EmbeddingPairs embedding_pairs(const Matrix& real, const Matrix& fake,
                               const std::vector<int>& labels,
                               const std::vector<Eigen::Index>& derangement);

// mean over matched of (1 - cos) + mean over unmatched of max(0, cos).
// Throws DataError when every pair was skipped.
NodeId embedding_loss(Tape& tape, NodeId real, NodeId fake, const EmbeddingPairs& pairs);
double embedding_loss(const Matrix& real, const Matrix& fake, const EmbeddingPairs& pairs);
double embedding_loss(const Matrix& real, const Matrix& fake, const std::vector<int>& labels,
                      Rng& rng);

struct GeneratorTerms {
  NodeId total;        // adversarial + beta * cls + gamma * emb
  NodeId adversarial;  // -mean D(fake, cond)
  NodeId cls;
  NodeId emb;          // valid when has_emb
  bool has_emb = false;
};

// One unit's generator objective. The critic enters as constants; `fake`
// carries the generator parameters. An empty pair set drops the embedding
// term (it is undefined there) instead of failing the step.
GeneratorTerms generator_objective(Tape& tape, const Net& critic, NodeId fake, NodeId cond,
                                   const Matrix& real, const HeadBlock& theta,
                                   std::vector<Eigen::Index> cls_targets, const EmbeddingPairs& pairs,
                                   double beta, double gamma);

// ---- training -----------------------------------------------------------------

// Softmax head over the seen classes plus background, trained on real
// GT/FG (labelled with their class) and BG (labelled background) features.
ClassifierHead pretrain_seen_head(const domain::Dataset& dataset, const domain::World& world,
                                  const HeadTrainConfig& config, std::uint64_t seed);

class IoUGANTrainer {
 public:
  IoUGANTrainer(const domain::Dataset& dataset, const domain::World& world, TrainConfig config,
                ClassifierHead seen_head);

  WganLossValue critic_step(Unit unit);
  LossRecord generator_step(Unit unit);
  // n_critic critic steps followed by one generator step, per enabled unit.
  void iteration();
  // config.epochs passes, each of ceil(#GT / batch) iterations.
  void run();

  [[nodiscard]] const IoUGANModel& model() const { return model_; }
  IoUGANModel& model() { return model_; }
  [[nodiscard]] const ClassifierHead& seen_head() const { return seen_head_; }
  [[nodiscard]] const std::vector<LossRecord>& history() const { return history_; }
  [[nodiscard]] double min_penalty() const { return min_penalty_; }
  [[nodiscard]] int iterations_per_epoch() const;

 private:
  struct Pool {
    Matrix features;
    std::vector<int> labels;
  };

  const Pool& pool(Unit unit) const;
  Matrix conditioning(const std::vector<int>& labels) const;
  Matrix generate(Unit unit, const Matrix& cond, Rng& rng) const;
  std::vector<Eigen::Index> sample(const Pool& p, Rng& rng) const;
  std::vector<Eigen::Index> cls_targets(Unit unit, const std::vector<int>& labels) const;

  const domain::World& world_;
  TrainConfig config_;
  ClassifierHead seen_head_;
  IoUGANModel model_;
  std::array<Pool, 3> pools_;
  std::array<Rng, 3> rngs_;
  std::array<WganLossValue, 3> last_critic_{};
  std::vector<LossRecord> history_;
  double min_penalty_ = 0.0;
  bool any_penalty_ = false;
  int epoch_ = 0;
  long step_ = 0;
};

struct TrainResult {
  IoUGANModel model;
  ClassifierHead seen_head;
  std::vector<LossRecord> history;
  double min_penalty = 0.0;
};

TrainResult train_iougan(const domain::Dataset& dataset, const domain::World& world,
                         const TrainConfig& config);

// Same, reusing an already trained seen head.
TrainResult train_iougan(const domain::Dataset& dataset, const domain::World& world,
                         const TrainConfig& config, const ClassifierHead& seen_head);

// ---- synthesis ----------------------------------------------------------------

struct SynthesisCounts {
  int gt_like = 0;
  int fg = 0;
  int bg = 0;
};

struct SynthesizedBatch {
  domain::SampleKind kind = domain::SampleKind::kGt;
  int class_id = 0;
  Matrix features;  // elementwise >= 0
};

// v~c = G^c(z, e); v~f = G^f(z', v~c); v~b = G^b(z'', v~c), fresh noise per row.
std::array<SynthesizedBatch, 3> synthesize(const IoUGANModel& model,
                                           const domain::SemanticEmbedding& embedding,
                                           int class_id, const SynthesisCounts& counts, Rng& rng);

}  // namespace zsd::gan

#endif  // ZSD_IOUGAN_HPP
