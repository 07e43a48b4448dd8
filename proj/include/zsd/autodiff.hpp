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
// Define-by-run reverse-mode differentiation over dense row-major matrices.
//
// Every primitive evaluates eagerly and appends one node to the tape. A node
// only ever references strictly earlier nodes, so the tape is a topological
// order and backward() is a single reverse sweep.
//
// input_gradient() builds d(sum of output)/d(input) as *further tape nodes*
// (a symbolic reverse pass). Differentiating that expression again with
// backward() gives the parameter gradient of a gradient penalty without a
// second-order tape. Activation masks (relu, leaky relu) enter as constants,
// which is exact almost everywhere.
#ifndef ZSD_AUTODIFF_HPP
#define ZSD_AUTODIFF_HPP

#include "zsd/types.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace zsd::ad {

enum class Op {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,         // elementwise
  kScale,       // by a scalar
  kAddRow,      // n x c plus a broadcast 1 x c row
  kMulCol,      // n x c times a broadcast n x 1 column
  kMatMul,
  kTranspose,
  kConcatCols,
  kSliceCols,
  kGatherRows,
  kRelu,
  kLeakyRelu,
  kTanh,
  kSquare,
  kSqrt,
  kLog,
  kReciprocal,
  kMeanRows,    // n x c -> 1 x c
  kMean,        // -> 1 x 1
  kSum,         // -> 1 x 1
  kRowSum,      // n x c -> n x 1
  kSoftmaxRows,
  kLogSoftmaxRows,
  kPickCols,    // n x c, one column index per row -> n x 1
  kL2NormRows,  // n x c -> n x 1
};

inline std::string_view op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kScale: return "scale";
    case Op::kAddRow: return "add-row";
    case Op::kMulCol: return "mul-col";
    case Op::kMatMul: return "matmul";
    case Op::kTranspose: return "transpose";
    case Op::kConcatCols: return "concat-cols";
    case Op::kSliceCols: return "slice-cols";
    case Op::kGatherRows: return "gather-rows";
    case Op::kRelu: return "relu";
    case Op::kLeakyRelu: return "leaky-relu";
    case Op::kTanh: return "tanh";
    case Op::kSquare: return "square";
    case Op::kSqrt: return "sqrt";
    case Op::kLog: return "log";
    case Op::kReciprocal: return "reciprocal";
    case Op::kMeanRows: return "row-mean";
    case Op::kMean: return "mean";
    case Op::kSum: return "sum";
    case Op::kRowSum: return "row-sum";
    case Op::kSoftmaxRows: return "softmax-rows";
    case Op::kLogSoftmaxRows: return "log-softmax-rows";
    case Op::kPickCols: return "pick-cols";
    case Op::kL2NormRows: return "l2-norm-rows";
  }
  return "unknown";
}

inline constexpr double kLeakySlope = 0.2;
// Default for l2_norm_rows: keeps a row norm differentiable and invertible at the origin.
inline constexpr double kNormEpsilon = 1e-12;

struct NodeId {
  std::size_t index = 0;
  friend bool operator==(NodeId, NodeId) = default;
};

template <typename Scalar>
class Tape {
 public:
  using Matrix = MatrixX<Scalar>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  NodeId constant(Matrix value) { return push(Op::kConstant, {}, std::move(value), false); }
  NodeId constant(Scalar value, Eigen::Index rows = 1, Eigen::Index cols = 1) {
    return constant(Matrix::Constant(rows, cols, value));
  }
  NodeId parameter(Matrix value) { return push(Op::kParameter, {}, std::move(value), true); }

  NodeId add(NodeId a, NodeId b) {
    require_same_shape("add", a, b);
    return push(Op::kAdd, {a, b}, value(a) + value(b));
  }
  NodeId sub(NodeId a, NodeId b) {
    require_same_shape("sub", a, b);
    return push(Op::kSub, {a, b}, value(a) - value(b));
  }
  NodeId mul(NodeId a, NodeId b) {
    require_same_shape("mul", a, b);
    return push(Op::kMul, {a, b}, value(a).cwiseProduct(value(b)));
  }
  NodeId scale(NodeId a, Scalar s) {
    NodeId id = push(Op::kScale, {a}, value(a) * s);
    nodes_[id.index].scalar = s;
    return id;
  }
  NodeId add_row(NodeId a, NodeId row) {
    const Matrix& x = value(a);
    const Matrix& r = value(row);
    if (r.rows() != 1 || r.cols() != x.cols()) {
      throw ShapeError("add-row: operand " + shape_string(x) + " vs row " + shape_string(r));
    }
    Matrix out = x;
    out.rowwise() += r.row(0);
    return push(Op::kAddRow, {a, row}, std::move(out));
  }
  NodeId mul_col(NodeId a, NodeId col) {
    const Matrix& x = value(a);
    const Matrix& c = value(col);
    if (c.cols() != 1 || c.rows() != x.rows()) {
      throw ShapeError("mul-col: operand " + shape_string(x) + " vs column " + shape_string(c));
    }
    Matrix out = x.array().colwise() * c.col(0).array();
    return push(Op::kMulCol, {a, col}, std::move(out));
  }
  NodeId matmul(NodeId a, NodeId b) {
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    if (x.cols() != y.rows()) {
      throw ShapeError("matmul: lhs " + shape_string(x) + " vs rhs " + shape_string(y));
    }
    Matrix out = x * y;
    return push(Op::kMatMul, {a, b}, std::move(out));
  }
  NodeId transpose(NodeId a) { return push(Op::kTranspose, {a}, value(a).transpose()); }
  NodeId concat_cols(NodeId a, NodeId b) {
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    if (x.rows() != y.rows()) {
      throw ShapeError("concat-cols: lhs " + shape_string(x) + " vs rhs " + shape_string(y));
    }
    Matrix out(x.rows(), x.cols() + y.cols());
    out << x, y;
    return push(Op::kConcatCols, {a, b}, std::move(out));
  }
  NodeId slice_cols(NodeId a, Eigen::Index offset, Eigen::Index width) {
    const Matrix& x = value(a);
    if (offset < 0 || width <= 0 || offset + width > x.cols()) {
      throw ShapeError("slice-cols: columns [" + std::to_string(offset) + ", " +
                       std::to_string(offset + width) + ") out of " + shape_string(x));
    }
    NodeId id = push(Op::kSliceCols, {a}, x.middleCols(offset, width));
    nodes_[id.index].offset = offset;
    return id;
  }
  NodeId gather_rows(NodeId a, std::vector<Eigen::Index> rows) {
    const Matrix& x = value(a);
    if (rows.empty()) throw ShapeError("gather-rows: empty index list");
    Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= x.rows()) {
        throw ShapeError("gather-rows: row " + std::to_string(rows[i]) + " out of " +
                         shape_string(x));
      }
      out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    }
    NodeId id = push(Op::kGatherRows, {a}, std::move(out));
    nodes_[id.index].indices = std::move(rows);
    return id;
  }

  NodeId relu(NodeId a) { return push(Op::kRelu, {a}, value(a).cwiseMax(Scalar(0))); }
  NodeId leaky_relu(NodeId a) {
    const Matrix& x = value(a);
    Matrix out = x.unaryExpr(
        [](Scalar v) { return v > Scalar(0) ? v : Scalar(kLeakySlope) * v; });
    return push(Op::kLeakyRelu, {a}, std::move(out));
  }
  NodeId tanh(NodeId a) { return push(Op::kTanh, {a}, value(a).array().tanh().matrix()); }
  NodeId square(NodeId a) { return push(Op::kSquare, {a}, value(a).array().square().matrix()); }
  NodeId sqrt(NodeId a) {
    const Matrix& x = value(a);
    if ((x.array() < Scalar(0)).any()) throw NumericalError("sqrt: negative operand");
    return push(Op::kSqrt, {a}, x.array().sqrt().matrix());
  }
  NodeId log(NodeId a) {
    const Matrix& x = value(a);
    if ((x.array() <= Scalar(0)).any()) throw NumericalError("log: non-positive operand");
    return push(Op::kLog, {a}, x.array().log().matrix());
  }
  NodeId reciprocal(NodeId a) {
    const Matrix& x = value(a);
    if ((x.array() == Scalar(0)).any()) throw NumericalError("reciprocal: zero operand");
    return push(Op::kReciprocal, {a}, x.array().inverse().matrix());
  }

  NodeId mean_rows(NodeId a) { return push(Op::kMeanRows, {a}, value(a).colwise().mean()); }
  NodeId mean(NodeId a) { return push(Op::kMean, {a}, Matrix::Constant(1, 1, value(a).mean())); }
  NodeId sum(NodeId a) { return push(Op::kSum, {a}, Matrix::Constant(1, 1, value(a).sum())); }
  NodeId row_sum(NodeId a) { return push(Op::kRowSum, {a}, value(a).rowwise().sum()); }

  NodeId softmax_rows(NodeId a) { return push(Op::kSoftmaxRows, {a}, softmax(value(a))); }
  NodeId log_softmax_rows(NodeId a) {
    const Matrix& x = value(a);
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> lse = log_sum_exp(x);
    Matrix out = x.colwise() - lse;
    return push(Op::kLogSoftmaxRows, {a}, std::move(out));
  }
  NodeId pick_cols(NodeId a, std::vector<Eigen::Index> cols) {
    const Matrix& x = value(a);
    if (static_cast<Eigen::Index>(cols.size()) != x.rows()) {
      throw ShapeError("pick-cols: " + std::to_string(cols.size()) + " indices for " +
                       shape_string(x));
    }
    Matrix out(x.rows(), 1);
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const Eigen::Index c = cols[static_cast<std::size_t>(i)];
      if (c < 0 || c >= x.cols()) {
        throw ShapeError("pick-cols: column " + std::to_string(c) + " out of " + shape_string(x));
      }
      out(i, 0) = x(i, c);
    }
    NodeId id = push(Op::kPickCols, {a}, std::move(out));
    nodes_[id.index].indices = std::move(cols);
    return id;
  }
  // epsilon = 0 gives the exact norm; a zero row then gets a zero subgradient.
  NodeId l2_norm_rows(NodeId a, Scalar epsilon = kNormEpsilon) {
    if (epsilon < Scalar(0)) throw NumericalError("l2_norm_rows: negative epsilon");
    Matrix out = (value(a).rowwise().squaredNorm().array() + epsilon).sqrt().matrix();
    return push(Op::kL2NormRows, {a}, std::move(out));
  }

  [[nodiscard]] const Matrix& value(NodeId id) const { return values_.at(id.index); }
  [[nodiscard]] Scalar scalar(NodeId id) const {
    const Matrix& v = value(id);
    if (v.size() != 1) throw ShapeError("scalar: node is " + shape_string(v));
    return v(0, 0);
  }
  [[nodiscard]] Op op(NodeId id) const { return nodes_.at(id.index).op; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }

  // Fills adjoints of every node with d(root)/d(node). Nodes that do not
  // depend on any parameter keep an empty adjoint.
  void backward(NodeId root) {
    const Matrix& r = value(root);
    if (r.rows() != 1 || r.cols() != 1) {
      throw ShapeError("backward: root must be 1x1, got " + shape_string(r));
    }
    adjoints_.assign(nodes_.size(), Matrix());
    adjoints_[root.index] = Matrix::Ones(1, 1);
    for (std::size_t k = root.index + 1; k-- > 0;) {
      if (!nodes_[k].requires_grad || adjoints_[k].size() == 0) continue;
      propagate(k);
    }
  }

  // Zero matrix of the node's shape when no gradient reached it.
  [[nodiscard]] Matrix adjoint(NodeId id) const {
    if (id.index < adjoints_.size() && adjoints_[id.index].size() != 0) {
      return adjoints_[id.index];
    }
    const Matrix& v = value(id);
    return Matrix::Zero(v.rows(), v.cols());
  }

  // Node holding d(sum of output)/d(input), shaped like input. For row-wise
  // networks (every MLP) row i is the gradient of output row i w.r.t. input
  // row i. Throws ShapeError when a primitive on the path has no registered
  // input-Jacobian rule.
  NodeId input_gradient(NodeId output, NodeId input) {
    if (input.index >= output.index) {
      throw ShapeError("input_gradient: input must precede output on the tape");
    }
    const std::size_t lo = input.index;
    const std::size_t hi = output.index;
    // depends[k]: node k is a function of input. needed[k]: output depends on k.
    std::vector<char> depends(hi + 1, 0), needed(hi + 1, 0);
    depends[lo] = 1;
    for (std::size_t k = lo + 1; k <= hi; ++k) {
      for (int j = 0; j < nodes_[k].arity; ++j) {
        if (nodes_[k].in[j].index >= lo && depends[nodes_[k].in[j].index]) depends[k] = 1;
      }
    }
    if (!depends[hi]) {
      throw ShapeError("input_gradient: output does not depend on input");
    }
    needed[hi] = 1;
    for (std::size_t k = hi + 1; k-- > lo;) {
      if (!needed[k] || k == lo) continue;
      for (int j = 0; j < nodes_[k].arity; ++j) {
        const std::size_t p = nodes_[k].in[j].index;
        if (p >= lo && depends[p]) needed[p] = 1;
      }
    }

    std::unordered_map<std::size_t, NodeId> adj;
    const Matrix& out = value(output);
    adj.emplace(hi, constant(Matrix::Ones(out.rows(), out.cols())));
    auto accumulate = [&](NodeId target, NodeId contribution) {
      auto it = adj.find(target.index);
      if (it == adj.end()) {
        adj.emplace(target.index, contribution);
      } else {
        it->second = add(it->second, contribution);
      }
    };
    auto on_path = [&](NodeId n) { return n.index >= lo && needed[n.index]; };

    for (std::size_t k = hi + 1; k-- > lo + 1;) {
      if (!needed[k]) continue;
      auto it = adj.find(k);
      if (it == adj.end()) continue;
      const NodeId g = it->second;
      // Copy: the node vector may reallocate as contributions are recorded.
      const Node node = nodes_[k];
      const NodeId self{k};
      const NodeId a = node.in[0];
      const NodeId b = node.in[1];
      switch (node.op) {
        case Op::kAdd:
          if (on_path(a)) accumulate(a, g);
          if (on_path(b)) accumulate(b, g);
          break;
        case Op::kSub:
          if (on_path(a)) accumulate(a, g);
          if (on_path(b)) accumulate(b, scale(g, Scalar(-1)));
          break;
        case Op::kMul:
          if (on_path(a)) accumulate(a, mul(g, b));
          if (on_path(b)) accumulate(b, mul(g, a));
          break;
        case Op::kScale:
          accumulate(a, scale(g, node.scalar));
          break;
        case Op::kAddRow:
          if (on_path(b)) reject_jacobian(node.op);
          accumulate(a, g);
          break;
        case Op::kMatMul:
          if (on_path(a)) accumulate(a, matmul(g, transpose(b)));
          if (on_path(b)) accumulate(b, matmul(transpose(a), g));
          break;
        case Op::kTranspose:
          accumulate(a, transpose(g));
          break;
        case Op::kConcatCols: {
          const Eigen::Index left = value(a).cols();
          const Eigen::Index right = value(b).cols();
          if (on_path(a)) accumulate(a, slice_cols(g, 0, left));
          if (on_path(b)) accumulate(b, slice_cols(g, left, right));
          break;
        }
        case Op::kRelu: {
          Matrix mask = (value(a).array() > Scalar(0)).template cast<Scalar>().matrix();
          accumulate(a, mul(g, constant(std::move(mask))));
          break;
        }
        case Op::kLeakyRelu: {
          Matrix mask = value(a).unaryExpr(
              [](Scalar v) { return v > Scalar(0) ? Scalar(1) : Scalar(kLeakySlope); });
          accumulate(a, mul(g, constant(std::move(mask))));
          break;
        }
        case Op::kTanh: {
          const Matrix& y = value(self);
          NodeId one = constant(Matrix::Ones(y.rows(), y.cols()));
          accumulate(a, mul(g, sub(one, square(self))));
          break;
        }
        case Op::kSquare:
          accumulate(a, mul(g, scale(a, Scalar(2))));
          break;
        default:
          reject_jacobian(node.op);
      }
    }
    auto it = adj.find(lo);
    if (it == adj.end()) throw ShapeError("input_gradient: no path from input to output");
    return it->second;
  }

  static Matrix softmax(const Matrix& x) {
    Matrix out = x.colwise() - x.rowwise().maxCoeff();
    out = out.array().exp().matrix();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z = out.rowwise().sum();
    out.array().colwise() /= z.array();
    return out;
  }

  static Eigen::Matrix<Scalar, Eigen::Dynamic, 1> log_sum_exp(const Matrix& x) {
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> m = x.rowwise().maxCoeff();
    Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s =
        (x.colwise() - m).array().exp().matrix().rowwise().sum();
    return m.array() + s.array().log();
  }

 private:
  struct Node {
    Op op = Op::kConstant;
    std::array<NodeId, 2> in{};
    int arity = 0;
    bool requires_grad = false;
    Scalar scalar = Scalar(0);
    Eigen::Index offset = 0;
    std::vector<Eigen::Index> indices;
  };

  NodeId push(Op op, std::initializer_list<NodeId> inputs, Matrix value, bool leaf_grad = false) {
    Node node;
    node.op = op;
    node.requires_grad = leaf_grad;
    for (NodeId id : inputs) {
      node.in[static_cast<std::size_t>(node.arity++)] = id;
      node.requires_grad = node.requires_grad || nodes_[id.index].requires_grad;
    }
    nodes_.push_back(std::move(node));
    values_.push_back(std::move(value));
    return NodeId{nodes_.size() - 1};
  }

  void require_same_shape(const char* what, NodeId a, NodeId b) const {
    const Matrix& x = value(a);
    const Matrix& y = value(b);
    if (x.rows() != y.rows() || x.cols() != y.cols()) {
      throw ShapeError(std::string(what) + ": lhs " + shape_string(x) + " vs rhs " +
                       shape_string(y));
    }
  }

  [[noreturn]] static void reject_jacobian(Op op) {
    throw ShapeError("input_gradient: no input-Jacobian rule for primitive '" +
                     std::string(op_name(op)) + "'");
  }

  void accumulate_adjoint(NodeId target, const Matrix& contribution) {
    if (!nodes_[target.index].requires_grad) return;
    Matrix& slot = adjoints_[target.index];
    if (slot.size() == 0) {
      slot = contribution;
    } else {
      slot += contribution;
    }
  }

  void propagate(std::size_t k) {
    const Node& node = nodes_[k];
    const Matrix& g = adjoints_[k];
    const Matrix& y = values_[k];
    const NodeId a = node.in[0];
    const NodeId b = node.in[1];
    auto needs = [&](NodeId n) { return nodes_[n.index].requires_grad; };
    switch (node.op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kAdd:
        accumulate_adjoint(a, g);
        accumulate_adjoint(b, g);
        break;
      case Op::kSub:
        accumulate_adjoint(a, g);
        if (needs(b)) accumulate_adjoint(b, -g);
        break;
      case Op::kMul:
        if (needs(a)) accumulate_adjoint(a, g.cwiseProduct(value(b)));
        if (needs(b)) accumulate_adjoint(b, g.cwiseProduct(value(a)));
        break;
      case Op::kScale:
        if (needs(a)) accumulate_adjoint(a, g * node.scalar);
        break;
      case Op::kAddRow:
        accumulate_adjoint(a, g);
        if (needs(b)) accumulate_adjoint(b, g.colwise().sum());
        break;
      case Op::kMulCol: {
        const Matrix& c = value(b);
        if (needs(a)) {
          Matrix ga = g.array().colwise() * c.col(0).array();
          accumulate_adjoint(a, ga);
        }
        if (needs(b)) accumulate_adjoint(b, g.cwiseProduct(value(a)).rowwise().sum());
        break;
      }
      case Op::kMatMul:
        if (needs(a)) accumulate_adjoint(a, g * value(b).transpose());
        if (needs(b)) accumulate_adjoint(b, value(a).transpose() * g);
        break;
      case Op::kTranspose:
        accumulate_adjoint(a, g.transpose());
        break;
      case Op::kConcatCols: {
        const Eigen::Index left = value(a).cols();
        if (needs(a)) accumulate_adjoint(a, g.leftCols(left));
        if (needs(b)) accumulate_adjoint(b, g.rightCols(g.cols() - left));
        break;
      }
      case Op::kSliceCols: {
        const Matrix& x = value(a);
        Matrix ga = Matrix::Zero(x.rows(), x.cols());
        ga.middleCols(node.offset, g.cols()) = g;
        accumulate_adjoint(a, ga);
        break;
      }
      case Op::kGatherRows: {
        const Matrix& x = value(a);
        Matrix ga = Matrix::Zero(x.rows(), x.cols());
        for (std::size_t i = 0; i < node.indices.size(); ++i) {
          ga.row(node.indices[i]) += g.row(static_cast<Eigen::Index>(i));
        }
        accumulate_adjoint(a, ga);
        break;
      }
      case Op::kRelu:
        accumulate_adjoint(
            a, (value(a).array() > Scalar(0)).select(g.array(), Scalar(0)).matrix());
        break;
      case Op::kLeakyRelu:
        accumulate_adjoint(
            a, (value(a).array() > Scalar(0)).select(g.array(), Scalar(kLeakySlope) * g.array())
                   .matrix());
        break;
      case Op::kTanh:
        accumulate_adjoint(a, (g.array() * (Scalar(1) - y.array().square())).matrix());
        break;
      case Op::kSquare:
        accumulate_adjoint(a, (Scalar(2) * g.array() * value(a).array()).matrix());
        break;
      case Op::kSqrt:
        accumulate_adjoint(a, (g.array() / (Scalar(2) * y.array())).matrix());
        break;
      case Op::kLog:
        accumulate_adjoint(a, (g.array() / value(a).array()).matrix());
        break;
      case Op::kReciprocal:
        accumulate_adjoint(a, (-g.array() * y.array().square()).matrix());
        break;
      case Op::kMeanRows: {
        const Matrix& x = value(a);
        Matrix ga = g.replicate(x.rows(), 1) / static_cast<Scalar>(x.rows());
        accumulate_adjoint(a, ga);
        break;
      }
      case Op::kMean: {
        const Matrix& x = value(a);
        accumulate_adjoint(
            a, Matrix::Constant(x.rows(), x.cols(), g(0, 0) / static_cast<Scalar>(x.size())));
        break;
      }
      case Op::kSum: {
        const Matrix& x = value(a);
        accumulate_adjoint(a, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
        break;
      }
      case Op::kRowSum:
        accumulate_adjoint(a, g.replicate(1, value(a).cols()));
        break;
      case Op::kSoftmaxRows: {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dot = g.cwiseProduct(y).rowwise().sum();
        Matrix ga = y.array() * (g.colwise() - dot).array();
        accumulate_adjoint(a, ga);
        break;
      }
      case Op::kLogSoftmaxRows: {
        Matrix p = y.array().exp();
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> total = g.rowwise().sum();
        Matrix ga = g - Matrix(p.array().colwise() * total.array());
        accumulate_adjoint(a, ga);
        break;
      }
      case Op::kPickCols: {
        const Matrix& x = value(a);
        Matrix ga = Matrix::Zero(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
          ga(i, node.indices[static_cast<std::size_t>(i)]) = g(i, 0);
        }
        accumulate_adjoint(a, ga);
        break;
      }
      case Op::kL2NormRows: {
        Eigen::Matrix<Scalar, Eigen::Dynamic, 1> ratio =
            (y.col(0).array() > Scalar(0)).select(g.col(0).array() / y.col(0).array(), Scalar(0));
        Matrix ga = value(a).array().colwise() * ratio.array();
        accumulate_adjoint(a, ga);
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  std::vector<Matrix> values_;
  std::vector<Matrix> adjoints_;
};

}  // namespace zsd::ad

#endif  // ZSD_AUTODIFF_HPP
