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
#ifndef ZSD_ADAM_HPP
#define ZSD_ADAM_HPP

#include "zsd/types.hpp"

#include <cmath>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zsd::ad {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  std::vector<MatrixX<Scalar>> first_moment;
  std::vector<MatrixX<Scalar>> second_moment;
  long step = 0;
};

// One bias-corrected Adam update. `label` names the loss term in the
// diagnostic raised for a non-finite gradient; nothing is modified then.
template <typename Scalar>
void adam_step(std::span<MatrixX<Scalar>* const> params, std::span<const MatrixX<Scalar>> grads,
               AdamState<Scalar>& state, const AdamConfig& config, std::string_view label) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads[i].rows() || params[i]->cols() != grads[i].cols()) {
      throw ShapeError("adam_step: parameter " + std::to_string(i) + " is " +
                       shape_string(*params[i]) + " but gradient is " + shape_string(grads[i]));
    }
    if (!grads[i].allFinite()) {
      throw NumericalError("non-finite gradient in " + std::string(label) + " (parameter " +
                           std::to_string(i) + ")");
    }
  }
  if (state.first_moment.empty()) {
    for (const auto* p : params) {
      state.first_moment.push_back(MatrixX<Scalar>::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(MatrixX<Scalar>::Zero(p->rows(), p->cols()));
    }
  } else if (state.first_moment.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state tracks " +
                     std::to_string(state.first_moment.size()) + " parameters, got " +
                     std::to_string(params.size()));
  }
  ++state.step;
  const Scalar b1 = static_cast<Scalar>(config.beta1);
  const Scalar b2 = static_cast<Scalar>(config.beta2);
  const Scalar correction1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.step));
  const Scalar correction2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.step));
  const Scalar step_size = static_cast<Scalar>(config.learning_rate) / correction1;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    m = b1 * m + (Scalar(1) - b1) * grads[i];
    v = b2 * v + (Scalar(1) - b2) * grads[i].cwiseAbs2();
    params[i]->array() -=
        step_size * m.array() /
        ((v.array() / correction2).sqrt() + static_cast<Scalar>(config.epsilon));
  }
}

}  // namespace zsd::ad

#endif  // ZSD_ADAM_HPP
