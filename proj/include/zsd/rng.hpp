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
#ifndef ZSD_RNG_HPP
#define ZSD_RNG_HPP

#include "zsd/types.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace zsd {

using Rng = std::mt19937_64;

// Named sub-streams of one experiment seed. Each consumer draws from its own
// stream so that changing one stage never shifts the draws of another.
enum class Stream : std::uint64_t {
  kDomain = 1,
  kEvalUnseen = 2,
  kEvalSeen = 3,
  kSeenHead = 4,
  kGanInit = 5,
  kGanCfu = 6,
  kGanFfu = 7,
  kGanBfu = 8,
  kSynthesis = 9,
  kUnseenHead = 10,
  kBaseline = 11,
  kHeldOut = 12,
  kTrainSet = 13,
};

// Counter-based derivation (splitmix64 finalizer over seed and counter).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t counter);

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(stream)));
}

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double sigma, Rng& rng);
Matrix uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, Rng& rng);

// Uniformly random cyclic permutation (Sattolo); no fixed points for n >= 2.
std::vector<Eigen::Index> random_derangement(Eigen::Index n, Rng& rng);

}  // namespace zsd

#endif  // ZSD_RNG_HPP
