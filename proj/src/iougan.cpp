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
#include "zsd/iougan.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace zsd::gan {

namespace {

constexpr double kZeroNorm = 1e-12;

Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

Matrix gather(const Matrix& m, const std::vector<Eigen::Index>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

ad::AdamConfig adam_config(const TrainConfig& c) {
  return {c.learning_rate, c.adam_beta1, c.adam_beta2, 1e-8};
}

void adam_update(Net& net, const Tape& tape, const Net::Bound& bound, ad::AdamState<double>& state,
                 const ad::AdamConfig& adam, const std::string& label) {
  auto params = net.parameters();
  auto grads = Net::gradients(tape, bound);
  ad::adam_step<double>(params, grads, state, adam, label);
}

}  // namespace

std::string_view unit_name(Unit unit) {
  switch (unit) {
    case Unit::kCfu: return "cfu";
    case Unit::kFfu: return "ffu";
    case Unit::kBfu: return "bfu";
  }
  return "?";
}

void TrainConfig::validate() const {
  for (std::size_t i = 0; i < 3; ++i) {
    if (alpha[i] < 0.0 || beta[i] < 0.0 || gamma[i] < 0.0) {
      throw ConfigError("train config: loss weights must be >= 0");
    }
  }
  if (n_critic < 1) throw ConfigError("train config: n_critic must be >= 1");
  if (batch_size < 1 || epochs < 0 || noise_dim < 0 || hidden_dim < 1) {
    throw ConfigError("train config: batch_size, hidden_dim >= 1 and epochs, noise_dim >= 0");
  }
  if (!(learning_rate > 0.0)) throw ConfigError("train config: learning_rate must be positive");
  if (units[index(Unit::kFfu)] || units[index(Unit::kBfu)]) {
    if (!units[index(Unit::kCfu)]) throw ConfigError("train config: FFU/BFU require CFU");
  }
}

IoUGANModel init_model(int feature_dim, int embedding_dim, const TrainConfig& config) {
  config.validate();
  IoUGANModel model;
  model.feature_dim = feature_dim;
  model.embedding_dim = embedding_dim;
  model.noise_dim = config.noise_dim > 0 ? config.noise_dim : embedding_dim;
  model.hidden_dim = config.hidden_dim;
  Rng rng = make_rng(config.seed, Stream::kGanInit);
  const Eigen::Index dv = feature_dim;
  const Eigen::Index de = embedding_dim;
  const Eigen::Index dz = model.noise_dim;
  const Eigen::Index h = config.hidden_dim;
  for (Unit u : kAllUnits) {
    const Eigen::Index cond = (u == Unit::kCfu) ? de : dv;
    auto& p = model.unit(u);
    p.generator = Net({dz + cond, h, h, dv}, ad::Activation::kLeakyRelu, ad::Activation::kRelu, rng);
    p.discriminator = Net({dv + de, h, 1}, ad::Activation::kLeakyRelu, ad::Activation::kIdentity, rng);
  }
  return model;
}

NodeId gradient_penalty(Tape& tape, const Net& critic, const Net::Bound& bound,
                        NodeId interpolated, NodeId cond, double alpha) {
  const NodeId out = critic.forward(tape, bound, tape.concat_cols(interpolated, cond));
  const NodeId grad = tape.input_gradient(out, interpolated);
  const NodeId norm = tape.l2_norm_rows(grad, 0.0);
  const NodeId deviation = tape.sub(norm, tape.constant(1.0, tape.value(norm).rows(), 1));
  return tape.scale(tape.mean(tape.square(deviation)), alpha);
}

WganTerms wgan_terms(Tape& tape, const Net& critic, const Net::Bound& bound, NodeId real,
                     NodeId fake, NodeId cond, const Matrix& eta, double alpha) {
  const Matrix& r = tape.value(real);
  const Matrix& f = tape.value(fake);
  if (r.rows() != f.rows() || r.rows() != tape.value(cond).rows() || eta.rows() != r.rows()) {
    throw ShapeError("wgan_terms: real " + shape_string(r) + ", fake " + shape_string(f) +
                     ", cond " + shape_string(tape.value(cond)) + ", eta " + shape_string(eta));
  }
  Matrix mix = r.array().colwise() * eta.col(0).array() +
               f.array().colwise() * (1.0 - eta.col(0).array());
  const NodeId mixed = tape.constant(std::move(mix));

  const NodeId d_real = critic.forward(tape, bound, tape.concat_cols(real, cond));
  const NodeId d_fake = critic.forward(tape, bound, tape.concat_cols(fake, cond));
  const NodeId mean_real = tape.mean(d_real);
  const NodeId mean_fake = tape.mean(d_fake);
  WganTerms t;
  t.penalty = gradient_penalty(tape, critic, bound, mixed, cond, alpha);
  t.wasserstein = tape.sub(mean_real, mean_fake);
  t.critic_loss = tape.add(tape.sub(mean_fake, mean_real), t.penalty);
  t.generator_loss = tape.scale(mean_fake, -1.0);
  return t;
}

WganLossValue wgan_loss(const Net& critic, const Matrix& real, const Matrix& fake,
                        const Matrix& cond, double alpha, Rng& rng) {
  Tape tape;
  const auto bound = critic.bind(tape, false);
  const Matrix eta = uniform(real.rows(), 1, 0.0, 1.0, rng);
  const auto t = wgan_terms(tape, critic, bound, tape.constant(real), tape.constant(fake),
                            tape.constant(cond), eta, alpha);
  return {tape.scalar(t.critic_loss), tape.scalar(t.generator_loss), tape.scalar(t.wasserstein),
          tape.scalar(t.penalty)};
}

NodeId classification_loss(Tape& tape, const HeadBlock& theta, NodeId fake,
                           std::vector<Eigen::Index> targets) {
  const NodeId w = tape.constant(theta.weight);
  const NodeId b = tape.constant(Matrix(theta.bias));
  const NodeId logits = tape.add_row(tape.matmul(fake, w), b);
  const NodeId picked = tape.pick_cols(tape.log_softmax_rows(logits), std::move(targets));
  return tape.scale(tape.mean(picked), -1.0);
}

double classification_loss(const ClassifierHead& theta, const Matrix& fake, int target_index) {
  if (theta.blocks().size() != 1) throw ShapeError("classification_loss: expects a single-block head");
  if (target_index < 0 || target_index >= theta.num_outputs()) {
    throw ShapeError("classification_loss: target " + std::to_string(target_index) +
                     " outside [0, " + std::to_string(theta.num_outputs() - 1) + "]");
  }
  Tape tape;
  std::vector<Eigen::Index> targets(static_cast<std::size_t>(fake.rows()), target_index);
  return tape.scalar(classification_loss(tape, theta.blocks().front(), tape.constant(fake),
                                         std::move(targets)));
}

EmbeddingPairs embedding_pairs(const Matrix& real, const Matrix& fake,
                               const std::vector<int>& labels,
                               const std::vector<Eigen::Index>& derangement) {
  const auto n = real.rows();
  if (fake.rows() != n || static_cast<Eigen::Index>(labels.size()) != n ||
      static_cast<Eigen::Index>(derangement.size()) != n) {
    throw ShapeError("embedding_pairs: batch sizes differ (real " + shape_string(real) + ", fake " +
                     shape_string(fake) + ", " + std::to_string(labels.size()) + " labels)");
  }
  EmbeddingPairs pairs;
  std::vector<char> real_ok(static_cast<std::size_t>(n)), fake_ok(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    real_ok[static_cast<std::size_t>(i)] = real.row(i).norm() > kZeroNorm;
    fake_ok[static_cast<std::size_t>(i)] = fake.row(i).norm() > kZeroNorm;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto si = static_cast<std::size_t>(i);
    if (real_ok[si] && fake_ok[si]) {
      pairs.matched.emplace_back(i, i);
    } else {
      ++pairs.skipped;
    }
    const Eigen::Index j = derangement[si];
    if (labels[si] == labels[static_cast<std::size_t>(j)]) continue;
    if (real_ok[si] && fake_ok[static_cast<std::size_t>(j)]) {
      pairs.unmatched.emplace_back(i, j);
    } else {
      ++pairs.skipped;
    }
  }
  return pairs;
}

NodeId embedding_loss(Tape& tape, NodeId real, NodeId fake, const EmbeddingPairs& pairs) {
  if (pairs.matched.empty() && pairs.unmatched.empty()) {
    throw DataError("embedding_loss: all " + std::to_string(pairs.skipped) +
                    " pairs skipped for zero-norm features");
  }
  auto unit_rows = [&](NodeId x) { return tape.mul_col(x, tape.reciprocal(tape.l2_norm_rows(x))); };
  const NodeId rn = unit_rows(real);
  const NodeId fn = unit_rows(fake);
  auto cosines = [&](const std::vector<std::pair<Eigen::Index, Eigen::Index>>& p) {
    std::vector<Eigen::Index> ri, fi;
    for (auto [a, b] : p) {
      ri.push_back(a);
      fi.push_back(b);
    }
    return tape.row_sum(tape.mul(tape.gather_rows(rn, std::move(ri)), tape.gather_rows(fn, std::move(fi))));
  };
  NodeId total{};
  bool have = false;
  if (!pairs.matched.empty()) {
    const NodeId cos = cosines(pairs.matched);
    total = tape.sub(tape.constant(1.0), tape.mean(cos));
    have = true;
  }
  if (!pairs.unmatched.empty()) {
    const NodeId term = tape.mean(tape.relu(cosines(pairs.unmatched)));
    total = have ? tape.add(total, term) : term;
  }
  return total;
}

double embedding_loss(const Matrix& real, const Matrix& fake, const EmbeddingPairs& pairs) {
  Tape tape;
  return tape.scalar(embedding_loss(tape, tape.constant(real), tape.constant(fake), pairs));
}

double embedding_loss(const Matrix& real, const Matrix& fake, const std::vector<int>& labels,
                      Rng& rng) {
  const auto perm = random_derangement(real.rows(), rng);
  return embedding_loss(real, fake, embedding_pairs(real, fake, labels, perm));
}

GeneratorTerms generator_objective(Tape& tape, const Net& critic, NodeId fake, NodeId cond,
                                   const Matrix& real, const HeadBlock& theta,
                                   std::vector<Eigen::Index> cls_targets, const EmbeddingPairs& pairs,
                                   double beta, double gamma) {
  const auto critic_bound = critic.bind(tape, false);
  const NodeId d_fake = critic.forward(tape, critic_bound, tape.concat_cols(fake, cond));
  GeneratorTerms t;
  t.adversarial = tape.scale(tape.mean(d_fake), -1.0);
  t.total = t.adversarial;
  t.cls = classification_loss(tape, theta, fake, std::move(cls_targets));
  if (beta > 0.0) t.total = tape.add(t.total, tape.scale(t.cls, beta));
  t.has_emb = !pairs.matched.empty() || !pairs.unmatched.empty();
  if (t.has_emb) {
    t.emb = embedding_loss(tape, tape.constant(real), fake, pairs);
    if (gamma > 0.0) t.total = tape.add(t.total, tape.scale(t.emb, gamma));
  }
  return t;
}

ClassifierHead pretrain_seen_head(const domain::Dataset& dataset, const domain::World& world,
                                  const HeadTrainConfig& config, std::uint64_t seed) {
  domain::check_zero_shot(dataset, world);
  if (dataset.records.empty()) throw DataError("pretrain_seen_head: empty dataset");
  const auto background = static_cast<int>(world.seen.size());
  Matrix x(static_cast<Eigen::Index>(dataset.records.size()), dataset.records.front().feature.size());
  std::vector<int> targets;
  targets.reserve(dataset.records.size());
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    const auto& r = dataset.records[i];
    x.row(static_cast<Eigen::Index>(i)) = r.feature;
    targets.push_back(r.kind == domain::SampleKind::kBg ? background : world.seen_index(r.class_id));
  }
  Rng rng = make_rng(seed, Stream::kSeenHead);
  return ClassifierHead(train_softmax_block(x, targets, world.seen, config, rng));
}

IoUGANTrainer::IoUGANTrainer(const domain::Dataset& dataset, const domain::World& world,
                             TrainConfig config, ClassifierHead seen_head)
    : world_(world), config_(std::move(config)), seen_head_(std::move(seen_head)) {
  config_.validate();
  domain::check_zero_shot(dataset, world);
  if (seen_head_.blocks().size() != 1 ||
      seen_head_.num_outputs() != static_cast<Eigen::Index>(world.seen.size()) + 1) {
    throw ShapeError("IoUGANTrainer: seen head must have one output per seen class plus background");
  }
  const std::array<domain::SampleKind, 3> kinds{domain::SampleKind::kGt, domain::SampleKind::kFg,
                                                domain::SampleKind::kBg};
  for (Unit u : kAllUnits) {
    auto& p = pools_[index(u)];
    p.features = dataset.features(kinds[index(u)]);
    p.labels = dataset.labels(kinds[index(u)]);
    if (config_.units[index(u)] && p.labels.empty()) {
      throw DataError("IoUGANTrainer: no " + std::string(domain::to_string(kinds[index(u)])) +
                      " records to train " + std::string(unit_name(u)));
    }
  }
  const auto dv = static_cast<int>(pools_[0].features.cols());
  if (seen_head_.feature_dim() != dv) throw ShapeError("IoUGANTrainer: seen head feature width");
  model_ = init_model(dv, static_cast<int>(world.embeddings.cols()), config_);
  rngs_ = {make_rng(config_.seed, Stream::kGanCfu), make_rng(config_.seed, Stream::kGanFfu),
           make_rng(config_.seed, Stream::kGanBfu)};
}

int IoUGANTrainer::iterations_per_epoch() const {
  const auto n = static_cast<int>(pools_[0].labels.size());
  return std::max(1, (n + config_.batch_size - 1) / config_.batch_size);
}

const IoUGANTrainer::Pool& IoUGANTrainer::pool(Unit unit) const { return pools_[index(unit)]; }

Matrix IoUGANTrainer::conditioning(const std::vector<int>& labels) const {
  Matrix cond(static_cast<Eigen::Index>(labels.size()), world_.embeddings.cols());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    cond.row(static_cast<Eigen::Index>(i)) = world_.embeddings.row(labels[i]);
  }
  return cond;
}

std::vector<Eigen::Index> IoUGANTrainer::sample(const Pool& p, Rng& rng) const {
  const auto size = static_cast<Eigen::Index>(p.labels.size());
  const auto n = std::min<Eigen::Index>(config_.batch_size, size);
  std::uniform_int_distribution<Eigen::Index> pick(0, size - 1);
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  for (auto& i : idx) i = pick(rng);
  return idx;
}

Matrix IoUGANTrainer::generate(Unit unit, const Matrix& cond, Rng& rng) const {
  const auto n = cond.rows();
  const auto& cfu = model_.unit(Unit::kCfu).generator;
  if (unit == Unit::kCfu) {
    Matrix z = gaussian(n, model_.noise_dim, 1.0, rng);
    return cfu.apply(hcat(z, cond));
  }
  Matrix zc = gaussian(n, model_.noise_dim, 1.0, rng);
  Matrix vc = cfu.apply(hcat(zc, cond));
  Matrix z = gaussian(n, model_.noise_dim, 1.0, rng);
  return model_.unit(unit).generator.apply(hcat(z, vc));
}

std::vector<Eigen::Index> IoUGANTrainer::cls_targets(Unit unit, const std::vector<int>& labels) const {
  std::vector<Eigen::Index> out;
  out.reserve(labels.size());
  const auto background = static_cast<Eigen::Index>(world_.seen.size());
  for (int y : labels) {
    if (unit == Unit::kBfu && config_.bfu_cls_target == BfuClsTarget::kBackground) {
      out.push_back(background);
    } else {
      out.push_back(world_.seen_index(y));
    }
  }
  return out;
}

WganLossValue IoUGANTrainer::critic_step(Unit unit) {
  Rng& rng = rngs_[index(unit)];
  const Pool& p = pool(unit);
  const auto idx = sample(p, rng);
  std::vector<int> labels;
  for (auto i : idx) labels.push_back(p.labels[static_cast<std::size_t>(i)]);
  const Matrix real = gather(p.features, idx);
  const Matrix cond = conditioning(labels);
  Matrix fake = generate(unit, cond, rng);
  const Matrix eta = uniform(real.rows(), 1, 0.0, 1.0, rng);

  auto& up = model_.unit(unit);
  Tape tape;
  const auto bound = up.discriminator.bind(tape, true);
  const auto t = wgan_terms(tape, up.discriminator, bound, tape.constant(real),
                            tape.constant(std::move(fake)), tape.constant(cond), eta,
                            config_.alpha[index(unit)]);
  WganLossValue v{tape.scalar(t.critic_loss), tape.scalar(t.generator_loss),
                  tape.scalar(t.wasserstein), tape.scalar(t.penalty)};
  if (!std::isfinite(v.critic_loss)) {
    throw NumericalError(std::string(unit_name(unit)) + " critic loss diverged at step " +
                         std::to_string(step_));
  }
  if (v.penalty < 0.0) {
    throw NumericalError(std::string(unit_name(unit)) + " gradient penalty negative at step " +
                         std::to_string(step_));
  }
  min_penalty_ = any_penalty_ ? std::min(min_penalty_, v.penalty) : v.penalty;
  any_penalty_ = true;
  tape.backward(t.critic_loss);
  adam_update(up.discriminator, tape, bound, up.discriminator_state, adam_config(config_),
              std::string(unit_name(unit)) + " critic objective");
  last_critic_[index(unit)] = v;
  return v;
}

LossRecord IoUGANTrainer::generator_step(Unit unit) {
  Rng& rng = rngs_[index(unit)];
  const Pool& p = pool(unit);
  const auto idx = sample(p, rng);
  std::vector<int> labels;
  for (auto i : idx) labels.push_back(p.labels[static_cast<std::size_t>(i)]);
  const Matrix real = gather(p.features, idx);
  const Matrix cond = conditioning(labels);
  const auto n = real.rows();
  const bool joint = config_.end_to_end && unit != Unit::kCfu;

  auto& up = model_.unit(unit);
  auto& cfu = model_.unit(Unit::kCfu);
  Tape tape;
  const auto gen_bound = up.generator.bind(tape, true);
  const NodeId cond_node = tape.constant(cond);
  Net::Bound cfu_bound;
  NodeId input;
  if (unit == Unit::kCfu) {
    input = tape.concat_cols(tape.constant(gaussian(n, model_.noise_dim, 1.0, rng)), cond_node);
  } else {
    Matrix zc = gaussian(n, model_.noise_dim, 1.0, rng);
    NodeId vc;
    if (joint) {
      cfu_bound = cfu.generator.bind(tape, true);
      vc = cfu.generator.forward(tape, cfu_bound, tape.concat_cols(tape.constant(std::move(zc)), cond_node));
    } else {
      vc = tape.constant(cfu.generator.apply(hcat(zc, cond)));
    }
    input = tape.concat_cols(tape.constant(gaussian(n, model_.noise_dim, 1.0, rng)), vc);
  }
  const NodeId fake = up.generator.forward(tape, gen_bound, input);
  const auto pairs = embedding_pairs(real, tape.value(fake), labels, random_derangement(n, rng));
  const auto terms = generator_objective(tape, up.discriminator, fake, cond_node, real,
                                         seen_head_.blocks().front(), cls_targets(unit, labels),
                                         pairs, config_.beta[index(unit)], config_.gamma[index(unit)]);
  const NodeId total = terms.total;

  LossRecord rec;
  rec.emb_loss = terms.has_emb ? tape.scalar(terms.emb) : std::nan("");
  if (!std::isfinite(tape.scalar(total))) {
    throw NumericalError(std::string(unit_name(unit)) + " generator objective diverged at step " +
                         std::to_string(step_));
  }
  tape.backward(total);
  const auto adam = adam_config(config_);
  adam_update(up.generator, tape, gen_bound, up.generator_state, adam,
              std::string(unit_name(unit)) + " generator objective");
  if (joint) {
    adam_update(cfu.generator, tape, cfu_bound, cfu.generator_state, adam,
                std::string(unit_name(unit)) + " generator objective (through cfu)");
  }

  rec.epoch = epoch_;
  rec.step = step_;
  rec.unit = unit;
  rec.generator_loss = tape.scalar(terms.adversarial);
  rec.cls_loss = tape.scalar(terms.cls);
  const auto& critic = last_critic_[index(unit)];
  rec.critic_loss = critic.critic_loss;
  rec.wasserstein = critic.wasserstein;
  rec.penalty = critic.penalty;
  return rec;
}

void IoUGANTrainer::iteration() {
  for (Unit u : kAllUnits) {
    if (!config_.units[index(u)]) continue;
    for (int c = 0; c < config_.n_critic; ++c) critic_step(u);
    history_.push_back(generator_step(u));
  }
  ++step_;
}

void IoUGANTrainer::run() {
  const int per_epoch = iterations_per_epoch();
  for (int e = 0; e < config_.epochs; ++e) {
    epoch_ = e;
    for (int i = 0; i < per_epoch; ++i) iteration();
  }
  for (Unit u : kAllUnits) model_.trained[index(u)] = config_.units[index(u)];
}

TrainResult train_iougan(const domain::Dataset& dataset, const domain::World& world,
                         const TrainConfig& config, const ClassifierHead& seen_head) {
  IoUGANTrainer trainer(dataset, world, config, seen_head);
  trainer.run();
  return {trainer.model(), trainer.seen_head(), trainer.history(), trainer.min_penalty()};
}

TrainResult train_iougan(const domain::Dataset& dataset, const domain::World& world,
                         const TrainConfig& config) {
  config.validate();
  auto head = pretrain_seen_head(dataset, world, config.seen_head, config.seed);
  return train_iougan(dataset, world, config, head);
}

std::array<SynthesizedBatch, 3> synthesize(const IoUGANModel& model,
                                           const domain::SemanticEmbedding& embedding,
                                           int class_id, const SynthesisCounts& counts, Rng& rng) {
  if (counts.gt_like < 0 || counts.fg < 0 || counts.bg < 0) {
    throw std::invalid_argument("synthesize: counts must be >= 0");
  }
  if (embedding.values.size() != model.embedding_dim) {
    throw ShapeError("synthesize: embedding width " + std::to_string(embedding.values.size()) +
                     " vs model " + std::to_string(model.embedding_dim));
  }
  auto class_features = [&](int n) {
    Matrix cond = embedding.values.replicate(n, 1);
    Matrix z = gaussian(n, model.noise_dim, 1.0, rng);
    return model.unit(Unit::kCfu).generator.apply(hcat(z, cond));
  };
  auto refined = [&](Unit u, int n) {
    if (n == 0) return Matrix(0, model.feature_dim);
    Matrix vc = class_features(n);
    Matrix z = gaussian(n, model.noise_dim, 1.0, rng);
    return model.unit(u).generator.apply(hcat(z, vc));
  };
  std::array<SynthesizedBatch, 3> out;
  out[0] = {domain::SampleKind::kGt, class_id,
            counts.gt_like == 0 ? Matrix(0, model.feature_dim) : class_features(counts.gt_like)};
  out[1] = {domain::SampleKind::kFg, class_id, refined(Unit::kFfu, counts.fg)};
  out[2] = {domain::SampleKind::kBg, class_id, refined(Unit::kBfu, counts.bg)};
  return out;
}

}  // namespace zsd::gan
