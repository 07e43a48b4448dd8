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
#include "zsd/rng.hpp"

#include <numeric>
#include <utility>

namespace zsd {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double sigma, Rng& rng) {
  Matrix out(rows, cols);
  if (sigma == 0.0) {
    out.setZero();
    return out;
  }
  std::normal_distribution<double> dist(0.0, sigma);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = dist(rng);
  return out;
}

Matrix uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, Rng& rng) {
  Matrix out(rows, cols);
  std::uniform_real_distribution<double> dist(lo, hi);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = dist(rng);
  return out;
}

std::vector<Eigen::Index> random_derangement(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  for (Eigen::Index i = n - 1; i > 0; --i) {
    std::uniform_int_distribution<Eigen::Index> pick(0, i - 1);
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(pick(rng))]);
  }
  return perm;
}

}  // namespace zsd
