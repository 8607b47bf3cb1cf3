/* Copyright 2026 The AFDM Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef AFDM_CHECKPOINT_HPP_
#define AFDM_CHECKPOINT_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "afdm/optim.hpp"

namespace afdm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Named tensors plus string metadata (config echo, counters).
///
/// Binary layout, little-endian: the 8 bytes "AFDMCKPT", u32 version, u32
/// metadata count, then (u32 length, key bytes, u32 length, value bytes)
/// pairs, u32 tensor count, then per tensor u32 name length, name bytes, u32
/// rank, u64 dims, f64 values.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<NamedTensor> tensors;

  const Tensor* find(const std::string& name) const;
  bool has_prefix(const std::string& prefix) const;
};

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& file);

/// Appends deep copies of `params`, optionally renamed with a prefix.
void add_tensors(Checkpoint& ckpt, const ParamList& params, const std::string& prefix = "");

/// Copies values into `params`. The checkpoint tensors under `prefix` must
/// match the parameter names and shapes exactly (DataError otherwise).
void load_tensors(const Checkpoint& ckpt, ParamList& params, const std::string& prefix = "");

void add_adam_state(Checkpoint& ckpt, const std::string& prefix, const ParamList& params,
                    const AdamState& state);
void load_adam_state(const Checkpoint& ckpt, const std::string& prefix, const ParamList& params,
                     AdamState& state);

}  // namespace afdm

#endif  // AFDM_CHECKPOINT_HPP_
