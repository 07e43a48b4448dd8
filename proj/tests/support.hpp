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
// Shared test helpers: a central-difference gradient checker, small random
// generators and brute-force metric oracles. Nothing here calls into the
// library's metric code.
#ifndef ZSD_TESTS_SUPPORT_HPP
#define ZSD_TESTS_SUPPORT_HPP

#include "zsd/autodiff.hpp"
#include "zsd/domain.hpp"
#include "zsd/eval.hpp"
#include "zsd/iougan.hpp"
#include "zsd/rng.hpp"
#include "zsd/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace zsd::testing {

using ad::NodeId;
using Tape = ad::Tape<double>;

// Relative error with a magnitude floor: near-zero gradients are compared
// absolutely against the floor instead of amplifying rounding noise.
inline constexpr double kGradFloor = 1e-3;
inline constexpr double kFdStep = 1e-5;

inline double rel_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), kGradFloor});
}

// Builds the graph on a fresh tape from parameter nodes and returns the
// scalar root.
using GraphFn = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

struct GradReport {
  double max_rel = 0.0;
  double max_abs_grad = 0.0;
  int entries = 0;
};

inline double evaluate(const GraphFn& f, const std::vector<Matrix>& params) {
  Tape tape;
  std::vector<NodeId> nodes;
  for (const auto& p : params) nodes.push_back(tape.parameter(p));
  return tape.scalar(f(tape, nodes));
}

// Backward adjoints vs central differences over every parameter entry.
inline GradReport check_gradients(const GraphFn& f, std::vector<Matrix> params,
                                  double step = kFdStep) {
  Tape tape;
  std::vector<NodeId> nodes;
  for (const auto& p : params) nodes.push_back(tape.parameter(p));
  const NodeId root = f(tape, nodes);
  tape.backward(root);
  std::vector<Matrix> analytic;
  for (NodeId n : nodes) analytic.push_back(tape.adjoint(n));

  GradReport r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k].size(); ++i) {
      const double saved = params[k].data()[i];
      params[k].data()[i] = saved + step;
      const double up = evaluate(f, params);
      params[k].data()[i] = saved - step;
      const double down = evaluate(f, params);
      params[k].data()[i] = saved;
      const double fd = (up - down) / (2.0 * step);
      const double a = analytic[k].data()[i];
      r.max_rel = std::max(r.max_rel, rel_error(a, fd));
      r.max_abs_grad = std::max(r.max_abs_grad, std::abs(a));
      ++r.entries;
    }
  }
  return r;
}

inline Matrix hcat(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// ---- generators ------------------------------------------------------------------

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  Rng& rng() { return rng_; }

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool coin() { return integer(0, 1) == 1; }

  Matrix matrix(Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
    return uniform(r, c, lo, hi, rng_);
  }
  // Entries with |x| in [lo, hi] and random sign, clear of kinks at 0.
  Matrix away_from_zero(Eigen::Index r, Eigen::Index c, double lo = 0.05, double hi = 1.5) {
    Matrix m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (coin() ? 1.0 : -1.0) * real(lo, hi);
    return m;
  }
  Matrix positive(Eigen::Index r, Eigen::Index c, double lo = 0.3, double hi = 2.0) {
    return matrix(r, c, lo, hi);
  }

 private:
  Rng rng_;
};

// ---- small pipelines ----------------------------------------------------------------

// A world small enough for unit tests to train in well under a second.
inline domain::DomainConfig tiny_domain() {
  domain::DomainConfig c;
  c.feature_dim = 16;
  c.embedding_dim = 8;
  c.attribute_dim = 4;
  c.num_seen = 4;
  c.num_unseen = 2;
  c.num_gt = 60;
  c.samples_per_gt = 2;
  c.eval_images = 8;
  c.fg_proposals_per_gt = 2;
  c.bg_proposals_per_gt = 6;
  c.clutter_proposals = 10;
  return c;
}

inline gan::TrainConfig tiny_train() {
  gan::TrainConfig c;
  c.hidden_dim = 12;
  c.batch_size = 16;
  c.epochs = 1;
  c.n_critic = 2;
  c.learning_rate = 1e-3;
  c.seen_head.epochs = 3;
  return c;
}

// ---- metric oracles ----------------------------------------------------------------

// Boxes on an integer grid keep every area an exact small integer.
inline double oracle_iou(const BoxRect& a, const BoxRect& b) {
  const double ix = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
  const double iy = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / ((a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter);
}

// Positions of `dets` in descending score order, earlier position first on
// equal scores, by repeated selection.
inline std::vector<std::size_t> selection_order(const std::vector<eval::DetectionInstance>& dets,
                                                const std::vector<std::size_t>& subset) {
  std::vector<std::size_t> left = subset, out;
  while (!left.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < left.size(); ++i) {
      const auto& a = dets[left[i]];
      const auto& b = dets[left[best]];
      if (a.score > b.score || (a.score == b.score && left[i] < left[best])) best = i;
    }
    out.push_back(left[best]);
    left.erase(left.begin() + static_cast<long>(best));
  }
  return out;
}

// Whether detection d claims a GT, claiming the best-overlapping free GT of
// its class in its image (lowest index on equal overlap).
inline bool oracle_claim(const eval::DetectionInstance& d, const std::vector<eval::GroundTruth>& gts,
                         std::vector<bool>& used, double threshold) {
  int pick = -1;
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (used[g] || gts[g].image_id != d.image_id || gts[g].class_id != d.class_id) continue;
    const double o = oracle_iou(d.box, gts[g].box);
    if (o < threshold) continue;
    if (pick < 0 || o > oracle_iou(d.box, gts[static_cast<std::size_t>(pick)].box)) {
      pick = static_cast<int>(g);
    }
  }
  if (pick < 0) return false;
  used[static_cast<std::size_t>(pick)] = true;
  return true;
}

inline double oracle_recall(const std::vector<eval::DetectionInstance>& dets,
                            const std::vector<eval::GroundTruth>& gts, int k, double threshold) {
  std::vector<int> images;
  for (const auto& d : dets) {
    if (std::find(images.begin(), images.end(), d.image_id) == images.end()) images.push_back(d.image_id);
  }
  std::vector<bool> used(gts.size(), false);
  int hits = 0;
  for (int image : images) {
    std::vector<std::size_t> mine;
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (dets[i].image_id == image) mine.push_back(i);
    }
    auto order = selection_order(dets, mine);
    for (std::size_t r = 0; r < order.size() && static_cast<int>(r) < k; ++r) {
      if (oracle_claim(dets[order[r]], gts, used, threshold)) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(gts.size());
}

// Area under the enveloped precision-recall curve from the raw ranked list:
// every true positive adds 1/npos of recall at the best precision reached
// at that rank or later.
inline double oracle_ap(const std::vector<eval::DetectionInstance>& dets,
                        const std::vector<eval::GroundTruth>& gts, int class_id, double threshold) {
  int npos = 0;
  for (const auto& g : gts) npos += g.class_id == class_id ? 1 : 0;
  if (npos == 0) return 0.0;
  std::vector<std::size_t> mine;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (dets[i].class_id == class_id) mine.push_back(i);
  }
  const auto order = selection_order(dets, mine);
  std::vector<bool> used(gts.size(), false), tp;
  for (std::size_t i : order) tp.push_back(oracle_claim(dets[i], gts, used, threshold));
  std::vector<double> precision;
  int hits = 0;
  for (std::size_t r = 0; r < tp.size(); ++r) {
    hits += tp[r] ? 1 : 0;
    precision.push_back(static_cast<double>(hits) / static_cast<double>(r + 1));
  }
  double ap = 0.0;
  for (std::size_t r = 0; r < tp.size(); ++r) {
    if (!tp[r]) continue;
    double best = 0.0;
    for (std::size_t s = r; s < tp.size(); ++s) best = std::max(best, precision[s]);
    ap += best / npos;
  }
  return ap;
}

inline double oracle_map(const std::vector<eval::DetectionInstance>& dets,
                         const std::vector<eval::GroundTruth>& gts, double threshold) {
  std::vector<int> classes;
  for (const auto& g : gts) {
    if (std::find(classes.begin(), classes.end(), g.class_id) == classes.end()) classes.push_back(g.class_id);
  }
  if (classes.empty()) return 0.0;
  double sum = 0.0;
  for (int c : classes) sum += oracle_ap(dets, gts, c, threshold);
  return sum / static_cast<double>(classes.size());
}

struct DetectionInstanceSet {
  std::vector<eval::DetectionInstance> dets;
  std::vector<eval::GroundTruth> gts;
};

inline BoxRect grid_box(Gen& g, int extent = 10) {
  const int x1 = g.integer(0, extent - 1);
  const int y1 = g.integer(0, extent - 1);
  return {static_cast<double>(x1), static_cast<double>(y1), static_cast<double>(g.integer(x1 + 1, extent)),
          static_cast<double>(g.integer(y1 + 1, extent))};
}

// At most `max_boxes` GT plus detection boxes over a few images and classes.
// Detections are often jittered copies of GTs; scores come from a coarse set
// so ties occur.
inline DetectionInstanceSet random_instance(Gen& g, int max_boxes = 20) {
  DetectionInstanceSet s;
  const int images = g.integer(1, 3);
  const int classes = g.integer(1, 3);
  const int num_gt = g.integer(1, std::max(1, max_boxes / 2));
  const int num_det = g.integer(0, max_boxes - num_gt);
  for (int i = 0; i < num_gt; ++i) {
    s.gts.push_back({g.integer(0, images - 1), grid_box(g), g.integer(0, classes - 1)});
  }
  for (int i = 0; i < num_det; ++i) {
    eval::DetectionInstance d;
    if (g.integer(0, 2) > 0) {
      const auto& src = s.gts[static_cast<std::size_t>(g.integer(0, num_gt - 1))];
      d.image_id = src.image_id;
      d.class_id = g.integer(0, 3) == 0 ? g.integer(0, classes - 1) : src.class_id;
      d.box = src.box;
      const double dx = g.integer(-1, 1);
      const double dy = g.integer(-1, 1);
      d.box.x1 += dx;
      d.box.x2 += dx + g.integer(0, 1);
      d.box.y1 += dy;
      d.box.y2 += dy;
    } else {
      d.image_id = g.integer(0, images - 1);
      d.class_id = g.integer(0, classes - 1);
      d.box = grid_box(g);
    }
    d.score = 0.1 * g.integer(0, 8);
    s.dets.push_back(d);
  }
  return s;
}

}  // namespace zsd::testing

#endif  // ZSD_TESTS_SUPPORT_HPP
