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
#ifndef ZSD_MLP_HPP
#define ZSD_MLP_HPP

#include "zsd/autodiff.hpp"
#include "zsd/types.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace zsd::ad {

enum class Activation { kIdentity, kRelu, kLeakyRelu, kTanh };

template <typename Scalar>
struct Dense {
  MatrixX<Scalar> weight;  // in x out
  MatrixX<Scalar> bias;    // 1 x out
};

// Stack of affine layers, hidden activation between them and a separate
// activation on the output.
template <typename Scalar>
class Mlp {
 public:
  using Matrix = MatrixX<Scalar>;

  struct Bound {
    std::vector<NodeId> weights;
    std::vector<NodeId> biases;
  };

  Mlp() = default;

  // widths = {input, hidden..., output}. Weights ~ N(0, 1/fan_in), zero bias.
  template <typename Engine>
  Mlp(const std::vector<Eigen::Index>& widths, Activation hidden, Activation output, Engine& rng)
      : hidden_(hidden), output_(output) {
    if (widths.size() < 2) throw ShapeError("Mlp: need at least input and output widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
      if (widths[i] <= 0 || widths[i + 1] <= 0) throw ShapeError("Mlp: widths must be positive");
      std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(widths[i])));
      Dense<Scalar> layer;
      layer.weight.resize(widths[i], widths[i + 1]);
      for (Eigen::Index k = 0; k < layer.weight.size(); ++k) {
        layer.weight.data()[k] = static_cast<Scalar>(dist(rng));
      }
      layer.bias = Matrix::Zero(1, widths[i + 1]);
      layers_.push_back(std::move(layer));
    }
  }

  Mlp(std::vector<Dense<Scalar>> layers, Activation hidden, Activation output)
      : layers_(std::move(layers)), hidden_(hidden), output_(output) {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.rows() != 1 || l.bias.cols() != l.weight.cols() ||
          (i > 0 && layers_[i - 1].weight.cols() != l.weight.rows())) {
        throw ShapeError("Mlp: inconsistent layer " + std::to_string(i));
      }
    }
  }

  [[nodiscard]] Eigen::Index input_width() const { return layers_.front().weight.rows(); }
  [[nodiscard]] Eigen::Index output_width() const { return layers_.back().weight.cols(); }
  [[nodiscard]] const std::vector<Dense<Scalar>>& layers() const { return layers_; }
  [[nodiscard]] Activation hidden_activation() const { return hidden_; }
  [[nodiscard]] Activation output_activation() const { return output_; }

  // Records the weights as parameter nodes (trainable) or constants.
  Bound bind(Tape<Scalar>& tape, bool trainable) const {
    Bound bound;
    for (const auto& l : layers_) {
      bound.weights.push_back(trainable ? tape.parameter(l.weight) : tape.constant(l.weight));
      bound.biases.push_back(trainable ? tape.parameter(l.bias) : tape.constant(l.bias));
    }
    return bound;
  }

  NodeId forward(Tape<Scalar>& tape, const Bound& bound, NodeId x) const {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      x = tape.add_row(tape.matmul(x, bound.weights[i]), bound.biases[i]);
      x = activate(tape, x, i + 1 == layers_.size() ? output_ : hidden_);
    }
    return x;
  }

  // Tape-free evaluation, identical arithmetic to forward().
  [[nodiscard]] Matrix apply(const Matrix& input) const {
    if (input.cols() != input_width()) {
      throw ShapeError("Mlp::apply: input " + shape_string(input) + " vs width " +
                       std::to_string(input_width()));
    }
    Matrix x = input;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      Matrix y = x * layers_[i].weight;
      y.rowwise() += layers_[i].bias.row(0);
      x = activate(std::move(y), i + 1 == layers_.size() ? output_ : hidden_);
    }
    return x;
  }

  // Flat parameter list in bind() order: w0, b0, w1, b1, ...
  std::vector<Matrix*> parameters() {
    std::vector<Matrix*> out;
    for (auto& l : layers_) {
      out.push_back(&l.weight);
      out.push_back(&l.bias);
    }
    return out;
  }

  static std::vector<NodeId> nodes(const Bound& bound) {
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < bound.weights.size(); ++i) {
      out.push_back(bound.weights[i]);
      out.push_back(bound.biases[i]);
    }
    return out;
  }

  static std::vector<Matrix> gradients(const Tape<Scalar>& tape, const Bound& bound) {
    std::vector<Matrix> out;
    for (NodeId id : nodes(bound)) out.push_back(tape.adjoint(id));
    return out;
  }

 private:
  static NodeId activate(Tape<Scalar>& tape, NodeId x, Activation act) {
    switch (act) {
      case Activation::kIdentity: return x;
      case Activation::kRelu: return tape.relu(x);
      case Activation::kLeakyRelu: return tape.leaky_relu(x);
      case Activation::kTanh: return tape.tanh(x);
    }
    return x;
  }

  static Matrix activate(Matrix x, Activation act) {
    switch (act) {
      case Activation::kIdentity: return x;
      case Activation::kRelu: return x.cwiseMax(Scalar(0));
      case Activation::kLeakyRelu:
        return x.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : Scalar(kLeakySlope) * v; });
      case Activation::kTanh: return x.array().tanh().matrix();
    }
    return x;
  }

  std::vector<Dense<Scalar>> layers_;
  Activation hidden_ = Activation::kLeakyRelu;
  Activation output_ = Activation::kIdentity;
};

}  // namespace zsd::ad

#endif  // ZSD_MLP_HPP
