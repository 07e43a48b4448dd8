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
#include "doctest.h"
#include "support.hpp"
#include "zsd/iougan.hpp"

#include <cmath>
#include <set>

using namespace zsd;
using namespace zsd::testing;
using gan::Unit;

namespace {

bool same_net(const gan::Net& a, const gan::Net& b) {
  if (a.layers().size() != b.layers().size()) return false;
  for (std::size_t i = 0; i < a.layers().size(); ++i) {
    if (a.layers()[i].weight != b.layers()[i].weight || a.layers()[i].bias != b.layers()[i].bias) return false;
  }
  return true;
}

// Linear critic on [v, e] whose feature block has norm c.
gan::Net linear_critic(Gen& g, Eigen::Index dv, Eigen::Index de, double c) {
  Matrix w(dv + de, 1);
  Matrix f = g.matrix(dv, 1);
  w.topRows(dv) = f * (c / f.norm());
  w.bottomRows(de) = g.matrix(de, 1);
  return gan::Net({{w, g.matrix(1, 1)}}, ad::Activation::kIdentity, ad::Activation::kIdentity);
}

HeadBlock zero_head(Eigen::Index dv, int classes) {
  HeadBlock b;
  b.weight = Matrix::Zero(dv, classes + 1);
  b.bias = RowVector::Zero(classes + 1);
  for (int k = 0; k < classes; ++k) b.class_ids.push_back(k);
  return b;
}

struct Fixture {
  domain::DomainConfig dcfg = tiny_domain();
  domain::World world = domain::make_world(dcfg);
  domain::Dataset data = domain::build_training_set(world, dcfg);
  gan::TrainConfig tcfg = tiny_train();
  ClassifierHead head = gan::pretrain_seen_head(data, world, tcfg.seen_head, tcfg.seed);
};

}  // namespace

TEST_CASE("gradient penalty of a linear critic is alpha (c - 1)^2") {
  Gen g(21);
  for (int k = 0; k < 100; ++k) {
    const auto n = g.integer(1, 10), dv = g.integer(1, 8), de = g.integer(1, 4);
    const double c = g.real(0.0, 3.0);
    const double alpha = g.real(0.1, 20.0);
    const gan::Net critic = linear_critic(g, dv, de, c);
    Tape t;
    const auto pen = gan::gradient_penalty(t, critic, critic.bind(t, false), t.constant(g.matrix(n, dv)),
                                           t.constant(g.matrix(n, de)), alpha);
    CHECK(std::abs(t.scalar(pen) - alpha * (c - 1) * (c - 1)) <= 1e-9);
  }
}

TEST_CASE("critic loss on identical real and fake batches") {
  Gen g(22);
  const Matrix real = g.positive(5, 2);
  const Matrix cond = g.matrix(5, 3);
  Rng rng(1);
  SUBCASE("unit-norm feature weights give zero") {
    const gan::Net critic({{(Matrix(5, 1) << 0.6, 0.8, 0.3, -0.2, 0.1).finished(), Matrix::Zero(1, 1)}},
                          ad::Activation::kIdentity, ad::Activation::kIdentity);
    CHECK(std::abs(gan::wgan_loss(critic, real, real, cond, 10.0, rng).critic_loss) <= 1e-12);
  }
  SUBCASE("norm two with alpha 10 gives 10") {
    const gan::Net critic({{(Matrix(5, 1) << 1.2, 1.6, 0.3, -0.2, 0.1).finished(), Matrix::Zero(1, 1)}},
                          ad::Activation::kIdentity, ad::Activation::kIdentity);
    CHECK(gan::wgan_loss(critic, real, real, cond, 10.0, rng).critic_loss == doctest::Approx(10.0).epsilon(1e-12));
  }
}

TEST_CASE("penalty of a random MLP critic is never negative") {
  Gen g(23);
  const gan::Net critic({7 + 3, 16, 1}, ad::Activation::kLeakyRelu, ad::Activation::kIdentity, g.rng());
  for (int k = 0; k < 100; ++k) {
    const auto n = g.integer(1, 16);
    const auto v = gan::wgan_loss(critic, g.positive(n, 7, 0.0, 2.0), g.positive(n, 7, 0.0, 2.0),
                                  g.matrix(n, 3), 10.0, g.rng());
    CHECK(v.penalty >= 0.0);
    CHECK(v.critic_loss == doctest::Approx(-v.wasserstein + v.penalty).epsilon(1e-12));
  }
}

TEST_CASE("classification loss") {
  Gen g(24);
  SUBCASE("uniform logits give ln(S + 1)") {
    for (int s : {1, 4, 12, 30}) {
      const ClassifierHead head(zero_head(6, s));
      CHECK(std::abs(gan::classification_loss(head, g.positive(7, 6), g.integer(0, s)) - std::log(s + 1.0)) <= 1e-9);
    }
    CHECK(gan::classification_loss(ClassifierHead(zero_head(6, 12)), g.positive(3, 6), 0) ==
          doctest::Approx(2.5649493574615367).epsilon(1e-12));
  }
  SUBCASE("confident target gives a vanishing loss") {
    HeadBlock b = zero_head(4, 3);
    b.bias(2) = 60.0;
    CHECK(gan::classification_loss(ClassifierHead(b), g.positive(5, 4), 2) <= 1e-20);
  }
  SUBCASE("matches an independent log-sum-exp on a 3-class head") {
    for (int k = 0; k < 20; ++k) {
      HeadBlock b;
      b.weight = g.matrix(5, 3, -2, 2);
      b.bias = g.matrix(1, 3).row(0);
      b.class_ids = {0, 1};
      const Matrix x = g.matrix(4, 5, -2, 2);
      const int target = g.integer(0, 2);
      double expect = 0.0;
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double z[3], mx = -1e300;
        for (int j = 0; j < 3; ++j) {
          z[j] = b.bias(j);
          for (int d = 0; d < 5; ++d) z[j] += x(i, d) * b.weight(d, j);
          mx = std::max(mx, z[j]);
        }
        const double lse = mx + std::log(std::exp(z[0] - mx) + std::exp(z[1] - mx) + std::exp(z[2] - mx));
        expect += (lse - z[target]) / static_cast<double>(x.rows());
      }
      CHECK(std::abs(gan::classification_loss(ClassifierHead(b), x, target) - expect) <= 1e-9);
    }
  }
}

TEST_CASE("embedding loss corner cases") {
  const Matrix a = (Matrix(2, 3) << 1, 2, 0, 0, 0, 4).finished();
  gan::EmbeddingPairs matched;
  matched.matched = {{0, 0}};
  CHECK(std::abs(gan::embedding_loss(a, a, matched)) <= 1e-9);

  const Matrix b = (Matrix(2, 3) << 0, 0, 5, 1, 0, 0).finished();
  CHECK(std::abs(gan::embedding_loss(a, b, matched) - 1.0) <= 1e-9);

  gan::EmbeddingPairs unmatched;
  unmatched.unmatched = {{0, 0}};
  CHECK(std::abs(gan::embedding_loss(a, b, unmatched)) <= 1e-9);
  const Matrix opposite = -a;
  CHECK(std::abs(gan::embedding_loss(a, opposite, unmatched)) <= 1e-9);

  gan::EmbeddingPairs none;
  CHECK_THROWS_AS(gan::embedding_loss(a, a, none), DataError);
}

TEST_CASE("embedding pairs") {
  Gen g(25);
  for (int k = 0; k < 50; ++k) {
    const auto n = g.integer(2, 12);
    Matrix real = g.positive(n, 4), fake = g.positive(n, 4);
    if (g.coin()) fake.row(g.integer(0, n - 1)).setZero();
    std::vector<int> labels;
    for (Eigen::Index i = 0; i < n; ++i) labels.push_back(g.integer(0, 2));
    const auto perm = random_derangement(n, g.rng());
    const auto p = gan::embedding_pairs(real, fake, labels, perm);
    for (auto [r, f] : p.matched) CHECK(r == f);
    for (auto [r, f] : p.unmatched) {
      CHECK(labels[static_cast<std::size_t>(r)] != labels[static_cast<std::size_t>(f)]);
      CHECK(perm[static_cast<std::size_t>(r)] == f);
    }
    for (auto [r, f] : p.matched) CHECK(fake.row(f).norm() > 0.0);
    for (auto [r, f] : p.unmatched) CHECK(fake.row(f).norm() > 0.0);
  }
}

TEST_CASE("unit shapes") {
  gan::TrainConfig cfg;
  cfg.hidden_dim = 32;
  const auto model = gan::init_model(64, 16, cfg);
  CHECK(model.noise_dim == 16);
  for (Unit u : gan::kAllUnits) {
    const auto& p = model.unit(u);
    const Eigen::Index cond = u == Unit::kCfu ? 16 : 64;
    CHECK(p.generator.input_width() == model.noise_dim + cond);
    CHECK(p.generator.output_width() == 64);
    CHECK(p.generator.layers().size() == 3);
    CHECK(p.generator.output_activation() == ad::Activation::kRelu);
    CHECK(p.discriminator.input_width() == 64 + 16);
    CHECK(p.discriminator.output_width() == 1);
    CHECK(p.discriminator.layers().size() == 2);
  }
  cfg.units = {false, true, false};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("training on a ten-record dataset") {
  auto dcfg = tiny_domain();
  dcfg.num_gt = 2;
  const auto world = domain::make_world(dcfg);
  const auto data = domain::build_training_set(world, dcfg);
  REQUIRE(data.records.size() == 10);
  const auto r = gan::train_iougan(data, world, tiny_train());
  std::set<Unit> units;
  for (const auto& rec : r.history) units.insert(rec.unit);
  CHECK(units.size() == 3);
  CHECK(r.min_penalty >= 0.0);
}

TEST_CASE("trainer properties") {
  Fixture f;

  SUBCASE("seen head stays frozen") {
    gan::IoUGANTrainer tr(f.data, f.world, f.tcfg, f.head);
    tr.run();
    const auto& after = tr.seen_head().blocks().front();
    CHECK(after.weight == f.head.blocks().front().weight);
    CHECK(after.bias == f.head.blocks().front().bias);
  }

  SUBCASE("each step touches only its own unit") {
    gan::IoUGANTrainer tr(f.data, f.world, f.tcfg, f.head);
    for (Unit u : gan::kAllUnits) {
      const auto before = tr.model();
      tr.critic_step(u);
      for (Unit v : gan::kAllUnits) {
        CHECK(same_net(before.unit(v).generator, tr.model().unit(v).generator));
        CHECK(same_net(before.unit(v).discriminator, tr.model().unit(v).discriminator) == (u != v));
      }
      const auto mid = tr.model();
      tr.generator_step(u);
      for (Unit v : gan::kAllUnits) {
        CHECK(same_net(mid.unit(v).discriminator, tr.model().unit(v).discriminator));
        CHECK(same_net(mid.unit(v).generator, tr.model().unit(v).generator) == (u != v));
      }
    }
  }

  SUBCASE("end-to-end FFU step also moves the CFU generator") {
    auto cfg = f.tcfg;
    cfg.end_to_end = true;
    gan::IoUGANTrainer tr(f.data, f.world, cfg, f.head);
    const auto before = tr.model();
    tr.generator_step(Unit::kFfu);
    CHECK_FALSE(same_net(before.unit(Unit::kCfu).generator, tr.model().unit(Unit::kCfu).generator));
    CHECK(same_net(before.unit(Unit::kBfu).generator, tr.model().unit(Unit::kBfu).generator));
  }

  SUBCASE("CFU-only training equals the CFU of a detached full run") {
    auto only = f.tcfg;
    only.units = {true, false, false};
    const auto a = gan::train_iougan(f.data, f.world, only, f.head);
    const auto b = gan::train_iougan(f.data, f.world, f.tcfg, f.head);
    CHECK(same_net(a.model.unit(Unit::kCfu).generator, b.model.unit(Unit::kCfu).generator));
    CHECK(same_net(a.model.unit(Unit::kCfu).discriminator, b.model.unit(Unit::kCfu).discriminator));
    CHECK(a.model.trained == std::array<bool, 3>{true, false, false});
    CHECK(b.model.trained == std::array<bool, 3>{true, true, true});
  }

  SUBCASE("bitwise reproducible") {
    const auto a = gan::train_iougan(f.data, f.world, f.tcfg);
    const auto b = gan::train_iougan(f.data, f.world, f.tcfg);
    for (Unit u : gan::kAllUnits) {
      CHECK(same_net(a.model.unit(u).generator, b.model.unit(u).generator));
      CHECK(same_net(a.model.unit(u).discriminator, b.model.unit(u).discriminator));
    }
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
      CHECK(a.history[i].critic_loss == b.history[i].critic_loss);
      CHECK(a.history[i].generator_loss == b.history[i].generator_loss);
    }
  }

  SUBCASE("pure WGAN-GP still trains") {
    auto cfg = f.tcfg;
    cfg.beta = {0.0, 0.0, 0.0};
    cfg.gamma = {0.0, 0.0, 0.0};
    const auto r = gan::train_iougan(f.data, f.world, cfg, f.head);
    CHECK(r.min_penalty >= 0.0);
    CHECK(r.history.size() == static_cast<std::size_t>(3 * gan::IoUGANTrainer(f.data, f.world, cfg, f.head).iterations_per_epoch()));
  }

  SUBCASE("a dataset with an unseen class is refused") {
    auto data = f.data;
    data.records.front().class_id = f.world.unseen.front();
    CHECK_THROWS_AS(gan::IoUGANTrainer(data, f.world, f.tcfg, f.head), DataError);
  }
}

TEST_CASE("synthesize") {
  Fixture f;
  const auto model = gan::train_iougan(f.data, f.world, f.tcfg, f.head).model;
  Rng rng(3);
  const int u = f.world.unseen.front();
  const auto batches = gan::synthesize(model, f.world.embedding(u), u, {100, 100, 100}, rng);
  for (const auto& b : batches) {
    CHECK(b.features.rows() == 100);
    CHECK(b.features.cols() == f.dcfg.feature_dim);
    CHECK((b.features.array() >= 0.0).all());
    CHECK(b.class_id == u);
  }
  const auto empty = gan::synthesize(model, f.world.embedding(u), u, {0, 0, 0}, rng);
  for (const auto& b : empty) CHECK(b.features.rows() == 0);
}
