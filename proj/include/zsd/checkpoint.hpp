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
// model.bin: a versioned container for a trained pipeline.
//
//   bytes 0..7   magic "ZSDCKPT\0"
//   u32          format version
//   u64          header length n
//   n bytes      JSON header: dims, config echo, class maps, tensor table
//   ...          tensors, row-major little-endian float64, in table order
#ifndef ZSD_CHECKPOINT_HPP
#define ZSD_CHECKPOINT_HPP

#include "zsd/domain.hpp"
#include "zsd/head.hpp"
#include "zsd/iougan.hpp"
#include "zsd/types.hpp"

#include <filesystem>
#include <optional>

#include "json.hpp"

namespace zsd {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  gan::IoUGANModel model;
  std::optional<ClassifierHead> seen_head;
  std::optional<ClassifierHead> unseen_head;
  domain::World world;
  nlohmann::json config = nlohmann::json::object();
};

// Optimizer moments are not stored; a loaded model is for inference.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);

// Throws DataError naming the path on a bad magic, version or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace zsd

#endif  // ZSD_CHECKPOINT_HPP
