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
// Catalogue of gradient-check cases: every tape primitive, the symbolic
// input gradient and the assembled unit objectives. Each case draws a fresh
// random instance from a generator.
#ifndef ZSD_TESTS_GRAD_CASES_HPP
#define ZSD_TESTS_GRAD_CASES_HPP

#include "support.hpp"
#include "zsd/iougan.hpp"

#include <string>
#include <utility>

namespace zsd::testing {

struct GradInstance {
  GraphFn graph;
  std::vector<Matrix> params;
};

struct GradCase {
  std::string name;
  std::function<GradInstance(Gen&)> make;
};

// Scalar root that weights every output entry differently.
inline NodeId weighted_sum(Tape& t, NodeId out, const Matrix& weights) {
  return t.sum(t.mul(out, t.constant(weights)));
}

// Where a unary primitive's operand is drawn from.
enum class Domain { kAny, kAwayFromZero, kPositive };

template <typename Op>
GradCase unary_case(std::string name, Op op, Domain domain) {
  return {std::move(name), [op, domain](Gen& g) {
            const auto r = g.integer(1, 8), c = g.integer(1, 8);
            Matrix x = domain == Domain::kAny            ? g.matrix(r, c, -1.5, 1.5)
                       : domain == Domain::kAwayFromZero ? g.away_from_zero(r, c)
                                                         : g.positive(r, c);
            GradInstance inst;
            inst.params = {x};
            Tape probe;
            const auto shape = probe.value(op(probe, probe.constant(x)));
            const Matrix w = g.matrix(shape.rows(), shape.cols());
            inst.graph = [op, w](Tape& t, const std::vector<NodeId>& p) {
              return weighted_sum(t, op(t, p[0]), w);
            };
            return inst;
          }};
}

inline gan::Net net_shell(const std::vector<Matrix>& params, ad::Activation hidden, ad::Activation out) {
  std::vector<ad::Dense<double>> layers;
  for (std::size_t i = 0; i + 1 < params.size(); i += 2) layers.push_back({params[i], params[i + 1]});
  return gan::Net(std::move(layers), hidden, out);
}

inline gan::Net::Bound bound_of(const std::vector<NodeId>& p, std::size_t first, std::size_t layers) {
  gan::Net::Bound b;
  for (std::size_t l = 0; l < layers; ++l) {
    b.weights.push_back(p[first + 2 * l]);
    b.biases.push_back(p[first + 2 * l + 1]);
  }
  return b;
}

inline std::vector<Matrix> random_layers(Gen& g, const std::vector<Eigen::Index>& widths) {
  std::vector<Matrix> out;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    out.push_back(g.matrix(widths[i], widths[i + 1], -0.9, 0.9));
    out.push_back(g.matrix(1, widths[i + 1], -0.3, 0.3));
  }
  return out;
}

inline HeadBlock random_theta(Gen& g, Eigen::Index dv, int classes) {
  HeadBlock b;
  b.weight = g.matrix(dv, classes + 1);
  b.bias = g.matrix(1, classes + 1, -0.2, 0.2).row(0);
  for (int k = 0; k < classes; ++k) b.class_ids.push_back(k);
  return b;
}

inline std::vector<GradCase> primitive_cases() {
  std::vector<GradCase> cases;
  auto binary = [](std::string name, auto op) {
    return GradCase{std::move(name), [op](Gen& g) {
                      const auto r = g.integer(1, 8), c = g.integer(1, 8);
                      GradInstance inst;
                      inst.params = {g.matrix(r, c), g.matrix(r, c)};
                      const Matrix w = g.matrix(r, c);
                      inst.graph = [op, w](Tape& t, const std::vector<NodeId>& p) {
                        return weighted_sum(t, op(t, p[0], p[1]), w);
                      };
                      return inst;
                    }};
  };
  cases.push_back(binary("add", [](Tape& t, NodeId a, NodeId b) { return t.add(a, b); }));
  cases.push_back(binary("sub", [](Tape& t, NodeId a, NodeId b) { return t.sub(a, b); }));
  cases.push_back(binary("mul", [](Tape& t, NodeId a, NodeId b) { return t.mul(a, b); }));
  cases.push_back({"scale", [](Gen& g) {
                     const double s = g.real(-3.0, 3.0);
                     return unary_case("", [s](Tape& t, NodeId a) { return t.scale(a, s); }, Domain::kAny).make(g);
                   }});
  cases.push_back({"add_row", [](Gen& g) {
                     const auto r = g.integer(1, 8), c = g.integer(1, 8);
                     const Matrix w = g.matrix(r, c);
                     return GradInstance{[w](Tape& t, const std::vector<NodeId>& p) {
                                           return weighted_sum(t, t.add_row(p[0], p[1]), w);
                                         },
                                         {g.matrix(r, c), g.matrix(1, c)}};
                   }});
  cases.push_back({"mul_col", [](Gen& g) {
                     const auto r = g.integer(1, 8), c = g.integer(1, 8);
                     const Matrix w = g.matrix(r, c);
                     return GradInstance{[w](Tape& t, const std::vector<NodeId>& p) {
                                           return weighted_sum(t, t.mul_col(p[0], p[1]), w);
                                         },
                                         {g.matrix(r, c), g.matrix(r, 1)}};
                   }});
  cases.push_back({"matmul", [](Gen& g) {
                     const auto r = g.integer(1, 8), k = g.integer(1, 8), c = g.integer(1, 8);
                     const Matrix w = g.matrix(r, c);
                     return GradInstance{[w](Tape& t, const std::vector<NodeId>& p) {
                                           return weighted_sum(t, t.matmul(p[0], p[1]), w);
                                         },
                                         {g.matrix(r, k), g.matrix(k, c)}};
                   }});
  cases.push_back(unary_case("transpose", [](Tape& t, NodeId a) { return t.transpose(a); }, Domain::kAny));
  cases.push_back({"concat_cols", [](Gen& g) {
                     const auto r = g.integer(1, 8), c1 = g.integer(1, 5), c2 = g.integer(1, 5);
                     const Matrix w = g.matrix(r, c1 + c2);
                     return GradInstance{[w](Tape& t, const std::vector<NodeId>& p) {
                                           return weighted_sum(t, t.concat_cols(p[0], p[1]), w);
                                         },
                                         {g.matrix(r, c1), g.matrix(r, c2)}};
                   }});
  cases.push_back({"slice_cols", [](Gen& g) {
                     const auto r = g.integer(1, 8), c = g.integer(1, 8);
                     const auto off = g.integer(0, c - 1);
                     const auto width = g.integer(1, c - off);
                     const Matrix w = g.matrix(r, width);
                     return GradInstance{[w, off, width](Tape& t, const std::vector<NodeId>& p) {
                                           return weighted_sum(t, t.slice_cols(p[0], off, width), w);
                                         },
                                         {g.matrix(r, c)}};
                   }});
  cases.push_back({"gather_rows", [](Gen& g) {
                     const auto r = g.integer(1, 8);
                     std::vector<Eigen::Index> rows(static_cast<std::size_t>(g.integer(1, 10)));
                     for (auto& i : rows) i = g.integer(0, r - 1);
                     const auto c = g.integer(1, 8);
                     const Matrix w = g.matrix(static_cast<Eigen::Index>(rows.size()), c);
                     return GradInstance{[w, rows](Tape& t, const std::vector<NodeId>& p) {
                                           return weighted_sum(t, t.gather_rows(p[0], rows), w);
                                         },
                                         {g.matrix(r, c)}};
                   }});
  cases.push_back(unary_case("relu", [](Tape& t, NodeId a) { return t.relu(a); }, Domain::kAwayFromZero));
  cases.push_back(unary_case("leaky_relu", [](Tape& t, NodeId a) { return t.leaky_relu(a); }, Domain::kAwayFromZero));
  cases.push_back(unary_case("tanh", [](Tape& t, NodeId a) { return t.tanh(a); }, Domain::kAny));
  cases.push_back(unary_case("square", [](Tape& t, NodeId a) { return t.square(a); }, Domain::kAny));
  cases.push_back(unary_case("sqrt", [](Tape& t, NodeId a) { return t.sqrt(a); }, Domain::kPositive));
  cases.push_back(unary_case("log", [](Tape& t, NodeId a) { return t.log(a); }, Domain::kPositive));
  cases.push_back(unary_case("reciprocal", [](Tape& t, NodeId a) { return t.reciprocal(a); }, Domain::kPositive));
  cases.push_back(unary_case("mean_rows", [](Tape& t, NodeId a) { return t.mean_rows(a); }, Domain::kAny));
  cases.push_back(unary_case("mean", [](Tape& t, NodeId a) { return t.mean(a); }, Domain::kAny));
  cases.push_back(unary_case("sum", [](Tape& t, NodeId a) { return t.sum(a); }, Domain::kAny));
  cases.push_back(unary_case("row_sum", [](Tape& t, NodeId a) { return t.row_sum(a); }, Domain::kAny));
  cases.push_back(unary_case("softmax_rows", [](Tape& t, NodeId a) { return t.softmax_rows(a); }, Domain::kAny));
  cases.push_back(unary_case("log_softmax_rows", [](Tape& t, NodeId a) { return t.log_softmax_rows(a); }, Domain::kAny));
  cases.push_back({"pick_cols", [](Gen& g) {
                     const auto r = g.integer(1, 8), c = g.integer(1, 8);
                     std::vector<Eigen::Index> cols(static_cast<std::size_t>(r));
                     for (auto& i : cols) i = g.integer(0, c - 1);
                     const Matrix w = g.matrix(r, 1);
                     return GradInstance{[w, cols](Tape& t, const std::vector<NodeId>& p) {
                                           return weighted_sum(t, t.pick_cols(p[0], cols), w);
                                         },
                                         {g.matrix(r, c)}};
                   }});
  cases.push_back(unary_case("l2_norm_rows", [](Tape& t, NodeId a) { return t.l2_norm_rows(a); }, Domain::kAwayFromZero));
  return cases;
}

// Symbolic input gradient of a small critic, differentiated once more with
// respect to both the critic weights and the input.
inline GradCase input_gradient_case(ad::Activation hidden) {
  return {hidden == ad::Activation::kTanh ? "input_gradient/tanh" : "input_gradient/leaky_relu",
          [hidden](Gen& g) {
            const auto n = g.integer(1, 6), d = g.integer(1, 6), h = g.integer(1, 6);
            GradInstance inst;
            inst.params = random_layers(g, {d, h, 1});
            inst.params.push_back(g.matrix(n, d, -1.5, 1.5));
            const Matrix w = g.matrix(n, d);
            const gan::Net shell = net_shell({inst.params.begin(), inst.params.begin() + 4}, hidden,
                                             ad::Activation::kIdentity);
            inst.graph = [shell, w](Tape& t, const std::vector<NodeId>& p) {
              const auto bound = bound_of(p, 0, 2);
              const NodeId out = shell.forward(t, bound, p[4]);
              return weighted_sum(t, t.input_gradient(out, p[4]), w);
            };
            return inst;
          }};
}

// Critic objective: E[D(fake)] - E[D(real)] + alpha * penalty, in the
// critic's parameters.
inline GradCase critic_objective_case() {
  return {"critic_objective", [](Gen& g) {
            const auto n = g.integer(2, 6), dv = g.integer(2, 6), de = g.integer(1, 4), h = g.integer(2, 6);
            GradInstance inst;
            inst.params = random_layers(g, {dv + de, h, 1});
            const Matrix real = g.positive(n, dv, 0.0, 1.5);
            const Matrix fake = g.positive(n, dv, 0.0, 1.5);
            const Matrix cond = g.matrix(n, de);
            const Matrix eta = g.positive(n, 1, 0.0, 1.0);
            const double alpha = g.coin() ? 10.0 : g.real(0.5, 5.0);
            const gan::Net shell = net_shell(inst.params, ad::Activation::kLeakyRelu, ad::Activation::kIdentity);
            inst.graph = [=](Tape& t, const std::vector<NodeId>& p) {
              const auto terms = gan::wgan_terms(t, shell, bound_of(p, 0, 2), t.constant(real),
                                                 t.constant(fake), t.constant(cond), eta, alpha);
              return terms.critic_loss;
            };
            return inst;
          }};
}

// Generator objective -D + beta * cls + gamma * emb in the generator's
// parameters. With `joint`, an FFU-style generator is fed by a CFU whose
// parameters are differentiated as well.
inline GradCase generator_objective_case(bool joint) {
  return {joint ? "generator_objective/joint" : "generator_objective/cfu", [joint](Gen& g) {
            const auto n = g.integer(2, 6), dv = g.integer(2, 6), de = g.integer(1, 4), h = g.integer(2, 5);
            const auto dz = g.integer(1, 3);
            const int classes = g.integer(1, 3);
            GradInstance inst;
            inst.params = random_layers(g, {dz + de, h, h, dv});
            if (joint) {
              auto second = random_layers(g, {dz + dv, h, h, dv});
              inst.params.insert(inst.params.end(), second.begin(), second.end());
            }
            // Shift output biases up so most relu outputs are active.
            inst.params[5].array() += 0.4;
            if (joint) inst.params[11].array() += 0.4;
            const Matrix z1 = g.matrix(n, dz, -1.5, 1.5);
            const Matrix z2 = g.matrix(n, dz, -1.5, 1.5);
            const Matrix cond = g.matrix(n, de);
            const Matrix real = g.positive(n, dv, 0.1, 1.5);
            std::vector<int> labels;
            std::vector<Eigen::Index> targets;
            for (Eigen::Index i = 0; i < n; ++i) {
              labels.push_back(g.integer(0, classes - 1));
              targets.push_back(g.integer(0, classes));
            }
            const auto critic_params = random_layers(g, {dv + de, h, 1});
            const gan::Net critic = net_shell(critic_params, ad::Activation::kLeakyRelu, ad::Activation::kIdentity);
            const HeadBlock theta = random_theta(g, dv, classes);
            const auto derangement = random_derangement(n, g.rng());
            const double beta = g.coin() ? 0.01 : 1.0;
            const double gamma = g.coin() ? 0.1 : 1.0;
            const gan::Net cfu = net_shell({inst.params.begin(), inst.params.begin() + 6},
                                           ad::Activation::kLeakyRelu, ad::Activation::kRelu);
            gan::Net ffu;
            if (joint) {
              ffu = net_shell({inst.params.begin() + 6, inst.params.end()}, ad::Activation::kLeakyRelu,
                              ad::Activation::kRelu);
            }
            // Pairs are fixed from the unperturbed output, as in training.
            Matrix fake0 = cfu.apply(hcat(z1, cond));
            if (joint) fake0 = ffu.apply(hcat(z2, fake0));
            const auto pairs = gan::embedding_pairs(real, fake0, labels, derangement);
            inst.graph = [=](Tape& t, const std::vector<NodeId>& p) {
              const NodeId c = t.constant(cond);
              NodeId fake = cfu.forward(t, bound_of(p, 0, 3), t.concat_cols(t.constant(z1), c));
              if (joint) fake = ffu.forward(t, bound_of(p, 6, 3), t.concat_cols(t.constant(z2), fake));
              return gan::generator_objective(t, critic, fake, c, real, theta, targets, pairs, beta, gamma)
                  .total;
            };
            return inst;
          }};
}

inline std::vector<GradCase> loss_cases() {
  return {input_gradient_case(ad::Activation::kTanh), input_gradient_case(ad::Activation::kLeakyRelu),
          critic_objective_case(), generator_objective_case(false), generator_objective_case(true)};
}

}  // namespace zsd::testing

#endif  // ZSD_TESTS_GRAD_CASES_HPP
