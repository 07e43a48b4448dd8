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
#include "zsd/domain.hpp"

#include <json.hpp>

#include <Eigen/QR>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace zsd::domain {

namespace {

constexpr int kMaxWorldAttempts = 10;
constexpr double kMinCorrelation = 0.8;
constexpr double kCanvas = 100.0;
constexpr int kGridCells = 3;

RowVector relu(const RowVector& v) { return v.cwiseMax(0.0); }

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("domain config: " + what);
}

double cosine(const RowVector& a, const RowVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return a.dot(b) / (na * nb);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

World try_make_world(const DomainConfig& c, Rng& rng) {
  const int classes = c.num_seen + c.num_unseen;
  const Eigen::Index dv = c.feature_dim;
  const Eigen::Index r = c.attribute_dim;

  // Attribute basis: column j lives on its own disjoint block of feature
  // coordinates, so the columns are orthonormal and non-negative.
  std::vector<Eigen::Index> coords(static_cast<std::size_t>(dv));
  std::iota(coords.begin(), coords.end(), Eigen::Index{0});
  std::shuffle(coords.begin(), coords.end(), rng);
  Matrix basis = Matrix::Zero(dv, r);
  std::uniform_real_distribution<double> weight(0.5, 1.5);
  for (Eigen::Index i = 0; i < dv; ++i) {
    basis(coords[static_cast<std::size_t>(i)], i % r) = weight(rng);
  }
  for (Eigen::Index j = 0; j < r; ++j) basis.col(j).normalize();

  Matrix attributes = Matrix::Zero(classes, r);
  std::bernoulli_distribution present(0.5);
  std::uniform_real_distribution<double> strength(0.2, 1.0);
  std::uniform_int_distribution<Eigen::Index> any(0, r - 1);
  for (int k = 0; k < classes; ++k) {
    for (Eigen::Index j = 0; j < r; ++j) {
      if (present(rng)) attributes(k, j) = strength(rng);
    }
    if (attributes.row(k).isZero()) attributes(k, any(rng)) = strength(rng);
    attributes.row(k) *= c.prototype_norm / attributes.row(k).norm();
  }

  World world;
  Matrix residual = gaussian(classes, dv, c.prototype_residual, rng).cwiseAbs();
  world.prototypes = attributes * basis.transpose() + residual;

  // Random isometry from attribute space into the embedding space.
  Matrix g = gaussian(c.embedding_dim, r, 1.0, rng);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix rotation = Matrix(qr.householderQ()).leftCols(r);
  Matrix projection = rotation * basis.transpose();  // d_e x d_v
  world.embeddings = world.prototypes * projection.transpose() +
                     gaussian(classes, c.embedding_dim, c.embedding_noise, rng);
  for (int k = 0; k < classes; ++k) world.embeddings.row(k).normalize();

  for (int k = 0; k < c.num_seen; ++k) world.seen.push_back(k);
  for (int k = c.num_seen; k < classes; ++k) world.unseen.push_back(k);
  return world;
}

int draw_other(const World& world, int exclude, ClutterPool from, Rng& rng) {
  std::vector<int> pool;
  for (int k : world.seen) {
    if (k != exclude) pool.push_back(k);
  }
  if (from == ClutterPool::kAllClasses) {
    for (int k : world.unseen) {
      if (k != exclude) pool.push_back(k);
    }
  }
  if (pool.empty()) return world.seen.front();
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

// Box overlapping `gt` with exactly the requested IoU, obtained by sliding
// along one axis by d = extent * (1 - t) / (1 + t).
BoxRect shifted_box(const BoxRect& gt, double target_iou, Rng& rng) {
  std::uniform_int_distribution<int> direction(0, 3);
  const int dir = direction(rng);
  BoxRect b = gt;
  const double extent = (dir < 2) ? gt.width() : gt.height();
  const double d = extent * (1.0 - target_iou) / (1.0 + target_iou);
  switch (dir) {
    case 0: b.x1 += d; b.x2 += d; break;
    case 1: b.x1 -= d; b.x2 -= d; break;
    case 2: b.y1 += d; b.y2 += d; break;
    default: b.y1 -= d; b.y2 -= d; break;
  }
  return b;
}

SampleKind parse_kind(const std::string& s, std::size_t line) {
  if (s == "gt") return SampleKind::kGt;
  if (s == "fg") return SampleKind::kFg;
  if (s == "bg") return SampleKind::kBg;
  throw DataError("line " + std::to_string(line) + ": unknown kind '" + s + "'");
}

}  // namespace

void DomainConfig::validate() const {
  require(feature_dim > 0 && embedding_dim > 0 && attribute_dim > 0, "dimensions must be positive");
  require(embedding_dim <= feature_dim, "embedding_dim must not exceed feature_dim");
  require(attribute_dim <= embedding_dim, "attribute_dim must not exceed embedding_dim");
  require(num_seen > 1 && num_unseen > 0, "need at least two seen and one unseen class");
  require(samples_per_gt > 0 && num_gt > 0, "sample counts must be positive");
  require(0.0 <= bg_threshold && bg_threshold < fg_threshold && fg_threshold <= 1.0,
          "thresholds must satisfy 0 <= t_b < t_f <= 1");
  require(intra_class_sigma >= 0.0 && clutter_sigma >= 0.0 &&
              prototype_residual >= 0.0 && embedding_noise >= 0.0,
          "noise levels must be non-negative");
  require(prototype_norm > 0.0, "prototype_norm must be positive");
  require(eval_images > 0 && max_gt_per_image > 0 && max_gt_per_image <= kGridCells * kGridCells,
          "eval_images > 0 and 1 <= max_gt_per_image <= 9");
  require(fg_proposals_per_gt >= 0 && bg_proposals_per_gt >= 0 && clutter_proposals >= 0,
          "proposal counts must be non-negative");
  require(0.0 <= fg_proposal_min_iou && fg_proposal_min_iou <= 1.0, "fg_proposal_min_iou in [0,1]");
  require(0.0 <= bg_proposal_max_iou && bg_proposal_max_iou <= 1.0, "bg_proposal_max_iou in [0,1]");
}

bool World::is_seen(int class_id) const {
  return std::find(seen.begin(), seen.end(), class_id) != seen.end();
}

bool World::is_unseen(int class_id) const {
  return std::find(unseen.begin(), unseen.end(), class_id) != unseen.end();
}

SemanticEmbedding World::embedding(int class_id) const {
  if (class_id < 0 || class_id >= num_classes()) {
    throw std::out_of_range("unknown class id " + std::to_string(class_id));
  }
  return SemanticEmbedding{embeddings.row(class_id)};
}

int World::seen_index(int class_id) const {
  auto it = std::find(seen.begin(), seen.end(), class_id);
  return it == seen.end() ? -1 : static_cast<int>(it - seen.begin());
}

int World::unseen_index(int class_id) const {
  auto it = std::find(unseen.begin(), unseen.end(), class_id);
  return it == unseen.end() ? -1 : static_cast<int>(it - unseen.begin());
}

std::string_view to_string(SampleKind kind) {
  switch (kind) {
    case SampleKind::kGt: return "gt";
    case SampleKind::kFg: return "fg";
    case SampleKind::kBg: return "bg";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrainSeen: return "train-seen";
    case Split::kTestUnseen: return "test-unseen";
    case Split::kTestSeen: return "test-seen";
  }
  return "?";
}

std::size_t Dataset::count(SampleKind kind) const {
  return static_cast<std::size_t>(std::count_if(
      records.begin(), records.end(), [&](const SampleRecord& r) { return r.kind == kind; }));
}

Matrix Dataset::features(SampleKind kind) const {
  const std::size_t n = count(kind);
  if (n == 0) return Matrix();
  Matrix out(static_cast<Eigen::Index>(n), records.front().feature.size());
  Eigen::Index row = 0;
  for (const auto& r : records) {
    if (r.kind == kind) out.row(row++) = r.feature;
  }
  return out;
}

std::vector<int> Dataset::labels(SampleKind kind) const {
  std::vector<int> out;
  for (const auto& r : records) {
    if (r.kind == kind) out.push_back(r.class_id);
  }
  return out;
}

std::size_t EvalSet::num_gts() const {
  std::size_t n = 0;
  for (const auto& im : images) n += im.gts.size();
  return n;
}

std::size_t EvalSet::num_proposals() const {
  std::size_t n = 0;
  for (const auto& im : images) n += im.proposals.size();
  return n;
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("spearman: need two equally sized samples of size >= 2");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

double semantic_visual_correlation(const World& world) {
  std::vector<double> semantic, visual;
  for (int i = 0; i < world.num_classes(); ++i) {
    for (int j = i + 1; j < world.num_classes(); ++j) {
      semantic.push_back(cosine(world.embeddings.row(i), world.embeddings.row(j)));
      visual.push_back(cosine(world.prototypes.row(i), world.prototypes.row(j)));
    }
  }
  return spearman(semantic, visual);
}

World make_world(const DomainConfig& config) {
  config.validate();
  const std::uint64_t base = derive_seed(config.seed, static_cast<std::uint64_t>(Stream::kDomain));
  double last = 0.0;
  for (int attempt = 0; attempt < kMaxWorldAttempts; ++attempt) {
    Rng rng(derive_seed(base, static_cast<std::uint64_t>(attempt)));
    World world = try_make_world(config, rng);
    last = semantic_visual_correlation(world);
    if (last >= kMinCorrelation) return world;
  }
  throw DataError("make_world: semantic/visual rank correlation stayed below " +
                  std::to_string(kMinCorrelation) + " after " + std::to_string(kMaxWorldAttempts) +
                  " attempts (last " + std::to_string(last) + ")");
}

SampleRecord sample_gt_feature(const World& world, const DomainConfig& config, int class_id,
                               Rng& rng) {
  if (class_id < 0 || class_id >= world.prototypes.rows()) {
    throw std::out_of_range("sample_gt_feature: unknown class id " + std::to_string(class_id));
  }
  SampleRecord rec;
  rec.class_id = class_id;
  rec.kind = SampleKind::kGt;
  rec.iou = 1.0;
  rec.feature = relu(RowVector(world.prototypes.row(class_id) +
                               gaussian(1, config.feature_dim, config.intra_class_sigma, rng)));
  return rec;
}

RowVector clutter(const World& world, const DomainConfig& config, int exclude_class, Rng& rng,
                  ClutterPool from) {
  const int other = draw_other(world, exclude_class, from, rng);
  RowVector noise = gaussian(1, config.feature_dim, config.clutter_sigma, rng);
  return relu(RowVector(0.5 * world.prototypes.row(other) + 0.5 * noise));
}

RowVector corrupt_to_iou(const World& world, const DomainConfig& config, const SampleRecord& gt,
                         double target_iou, Rng& rng, ClutterPool from) {
  if (!(target_iou >= 0.0 && target_iou <= 1.0)) {
    throw std::invalid_argument("corrupt_to_iou: target IoU must lie in [0,1]");
  }
  if (target_iou == 1.0) return gt.feature;
  const int other = draw_other(world, gt.class_id, from, rng);
  RowVector noise = gaussian(1, config.feature_dim, config.clutter_sigma, rng);
  RowVector mixed = 0.5 * world.prototypes.row(other) + 0.5 * noise;
  return relu(RowVector(target_iou * gt.feature + (1.0 - target_iou) * mixed));
}

Dataset build_training_set(const World& world, const DomainConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, Stream::kTrainSet);
  Dataset ds;
  ds.split = Split::kTrainSeen;
  ds.records.reserve(static_cast<std::size_t>(config.num_gt) *
                     (1 + 2 * static_cast<std::size_t>(config.samples_per_gt)));
  std::uniform_real_distribution<double> fg_iou(config.fg_threshold, 1.0);
  std::uniform_real_distribution<double> bg_iou(0.0, config.bg_threshold);
  const int s = static_cast<int>(world.seen.size());
  for (int i = 0; i < config.num_gt; ++i) {
    const int cls = world.seen[static_cast<std::size_t>(i % s)];
    SampleRecord gt = sample_gt_feature(world, config, cls, rng);
    ds.records.push_back(gt);
    for (int j = 0; j < config.samples_per_gt; ++j) {
      const double t = fg_iou(rng);
      ds.records.push_back({cls, SampleKind::kFg, t, corrupt_to_iou(world, config, gt, t, rng)});
    }
    for (int j = 0; j < config.samples_per_gt; ++j) {
      const double t = bg_iou(rng);
      ds.records.push_back({cls, SampleKind::kBg, t, corrupt_to_iou(world, config, gt, t, rng)});
    }
  }
  check_zero_shot(ds, world);
  return ds;
}

Dataset build_labeled_set(const World& world, const DomainConfig& config, Split which, int num_gt,
                          Rng& rng) {
  const std::vector<int>& classes = which == Split::kTestUnseen ? world.unseen : world.seen;
  Dataset ds;
  ds.split = which;
  std::uniform_real_distribution<double> fg_iou(config.fg_threshold, 1.0);
  std::uniform_real_distribution<double> bg_iou(0.0, config.bg_threshold);
  for (int i = 0; i < num_gt; ++i) {
    const int cls = classes[static_cast<std::size_t>(i) % classes.size()];
    SampleRecord gt = sample_gt_feature(world, config, cls, rng);
    ds.records.push_back(gt);
    const double tf = fg_iou(rng);
    ds.records.push_back({cls, SampleKind::kFg, tf, corrupt_to_iou(world, config, gt, tf, rng)});
    const double tb = bg_iou(rng);
    ds.records.push_back({cls, SampleKind::kBg, tb, corrupt_to_iou(world, config, gt, tb, rng)});
  }
  return ds;
}

EvalSet build_eval_set(const World& world, const DomainConfig& config, Split which) {
  config.validate();
  if (which == Split::kTrainSeen) {
    throw std::invalid_argument("build_eval_set: split must be test-unseen or test-seen");
  }
  const std::vector<int>& classes = which == Split::kTestUnseen ? world.unseen : world.seen;
  Rng rng = make_rng(config.seed,
                     which == Split::kTestUnseen ? Stream::kEvalUnseen : Stream::kEvalSeen);
  const ClutterPool pool = config.eval_clutter_all_classes ? ClutterPool::kAllClasses : ClutterPool::kSeen;
  EvalSet set;
  set.split = which;
  const double cell = kCanvas / kGridCells;
  std::uniform_int_distribution<int> gt_count(1, config.max_gt_per_image);
  std::uniform_int_distribution<std::size_t> class_pick(0, classes.size() - 1);
  std::uniform_real_distribution<double> extent(0.4 * cell, 0.7 * cell);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> fg_iou(config.fg_proposal_min_iou, 1.0);
  std::uniform_real_distribution<double> bg_iou(0.0, config.bg_proposal_max_iou);
  std::uniform_real_distribution<double> clutter_extent(0.2 * cell, 0.8 * cell);
  std::uniform_real_distribution<double> clutter_pos(0.0, kCanvas);

  for (int im = 0; im < config.eval_images; ++im) {
    EvalImage image;
    image.image_id = im;
    std::array<int, kGridCells * kGridCells> cells{};
    std::iota(cells.begin(), cells.end(), 0);
    std::shuffle(cells.begin(), cells.end(), rng);
    const int n_gt = gt_count(rng);
    for (int g = 0; g < n_gt; ++g) {
      const int cls = classes[class_pick(rng)];
      const double w = extent(rng);
      const double h = extent(rng);
      const double cx = (cells[static_cast<std::size_t>(g)] % kGridCells) * cell;
      const double cy = (cells[static_cast<std::size_t>(g)] / kGridCells) * cell;
      BoxRect box{cx + unit(rng) * (cell - w), cy + unit(rng) * (cell - h), 0.0, 0.0};
      box.x2 = box.x1 + w;
      box.y2 = box.y1 + h;
      SampleRecord gt = sample_gt_feature(world, config, cls, rng);
      image.gts.push_back({box, cls, gt.feature});
      auto add_proposal = [&](double t) {
        Proposal p;
        p.box = shifted_box(box, t, rng);
        p.feature = corrupt_to_iou(world, config, gt, t, rng, pool);
        p.gt_index = g;
        p.target_iou = t;
        image.proposals.push_back(std::move(p));
      };
      for (int k = 0; k < config.fg_proposals_per_gt; ++k) add_proposal(fg_iou(rng));
      for (int k = 0; k < config.bg_proposals_per_gt; ++k) add_proposal(bg_iou(rng));
    }
    for (int k = 0; k < config.clutter_proposals; ++k) {
      Proposal p;
      const double w = clutter_extent(rng);
      const double h = clutter_extent(rng);
      p.box.x1 = clutter_pos(rng) * (kCanvas - w) / kCanvas;
      p.box.y1 = clutter_pos(rng) * (kCanvas - h) / kCanvas;
      p.box.x2 = p.box.x1 + w;
      p.box.y2 = p.box.y1 + h;
      p.feature = clutter(world, config, -1, rng, pool);
      image.proposals.push_back(std::move(p));
    }
    set.images.push_back(std::move(image));
  }
  return set;
}

void check_zero_shot(const Dataset& dataset, const World& world) {
  if (dataset.split != Split::kTrainSeen) return;
  for (std::size_t i = 0; i < dataset.records.size(); ++i) {
    if (!world.is_seen(dataset.records[i].class_id)) {
      throw DataError("zero-shot violation: train-seen record " + std::to_string(i) +
                      " carries class " + std::to_string(dataset.records[i].class_id) +
                      " which is not a seen class");
    }
  }
}

void write_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (const auto& r : dataset.records) {
    nlohmann::json j;
    j["class_id"] = r.class_id;
    j["kind"] = std::string(to_string(r.kind));
    j["iou"] = r.iou;
    j["feature"] = std::vector<double>(r.feature.data(), r.feature.data() + r.feature.size());
    out << j.dump() << '\n';
  }
}

Dataset ingest_jsonl(const std::filesystem::path& path, const DomainConfig& config, Split split) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  Dataset ds;
  ds.split = split;
  std::string line;
  std::size_t lineno = 0;
  Eigen::Index width = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(path.string() + ": line " + std::to_string(lineno) + ": malformed JSON (" +
                      e.what() + ")");
    }
    SampleRecord r;
    std::vector<double> feature;
    std::string kind;
    try {
      r.class_id = j.at("class_id").get<int>();
      kind = j.at("kind").get<std::string>();
      r.iou = j.at("iou").get<double>();
      feature = j.at("feature").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
    r.kind = parse_kind(kind, lineno);
    const std::string where = path.string() + ": line " + std::to_string(lineno) + " (" + kind +
                              " record, class " + std::to_string(r.class_id) + ")";
    if (feature.empty()) throw DataError(where + ": empty feature");
    if (width < 0) width = static_cast<Eigen::Index>(feature.size());
    if (static_cast<Eigen::Index>(feature.size()) != width) {
      throw DataError(where + ": feature width " + std::to_string(feature.size()) +
                      " differs from " + std::to_string(width));
    }
    for (double v : feature) {
      if (!std::isfinite(v) || v < 0.0) throw DataError(where + ": features must be finite and >= 0");
    }
    switch (r.kind) {
      case SampleKind::kGt:
        if (r.iou != 1.0) throw DataError(where + ": iou " + std::to_string(r.iou) + " must be 1.0");
        break;
      case SampleKind::kFg:
        if (!(r.iou >= config.fg_threshold && r.iou <= 1.0)) {
          throw DataError(where + ": iou " + std::to_string(r.iou) + " outside [t_f=" +
                          std::to_string(config.fg_threshold) + ", 1]");
        }
        break;
      case SampleKind::kBg:
        if (!(r.iou >= 0.0 && r.iou <= config.bg_threshold)) {
          throw DataError(where + ": iou " + std::to_string(r.iou) + " outside [0, t_b=" +
                          std::to_string(config.bg_threshold) + "]");
        }
        break;
    }
    r.feature = Eigen::Map<const RowVector>(feature.data(), width);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

void write_embeddings(const World& world, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  for (int k = 0; k < world.num_classes(); ++k) {
    nlohmann::json j;
    j["class_id"] = k;
    const RowVector e = world.embeddings.row(k);
    j["embedding"] = std::vector<double>(e.data(), e.data() + e.size());
    j["seen"] = world.is_seen(k);
    out << j.dump() << '\n';
  }
}

World read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  struct Row {
    int id;
    std::vector<double> e;
    bool seen;
  };
  std::vector<Row> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      rows.push_back({j.at("class_id").get<int>(), j.at("embedding").get<std::vector<double>>(),
                      j.at("seen").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (rows.empty()) throw DataError(path.string() + ": no embeddings");
  std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.id < b.id; });
  World world;
  const auto width = static_cast<Eigen::Index>(rows.front().e.size());
  world.embeddings.resize(static_cast<Eigen::Index>(rows.size()), width);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].id != static_cast<int>(i)) {
      throw DataError(path.string() + ": class ids must be 0..N-1, missing " + std::to_string(i));
    }
    if (static_cast<Eigen::Index>(rows[i].e.size()) != width) {
      throw DataError(path.string() + ": class " + std::to_string(i) + " has embedding width " +
                      std::to_string(rows[i].e.size()));
    }
    world.embeddings.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const RowVector>(rows[i].e.data(), width);
    (rows[i].seen ? world.seen : world.unseen).push_back(rows[i].id);
  }
  return world;
}

}  // namespace zsd::domain
