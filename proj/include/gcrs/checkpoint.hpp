// Copyright 2026 The GCRS Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <string>

#include "gcrs/learner.hpp"

namespace gcrs {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// On-disk layout, all integers and floats little-endian:
///   "GCRS" | u32 version | u64 config digest | u64 global step
///   | u32 obs_dim | u32 hidden | u32 action_dim
///   | u32 abstraction | u32 subgoal_enabled | u32 room_pos
///   | u32 max_items | u32 max_doors | u32 max_rooms
///   | u64 n | f64[n] parameters in PolicyParams::flatten order
struct Checkpoint {
  std::uint64_t config_digest = 0;
  std::uint64_t global_step = 0;
  ObservationLayout layout;
  PolicyParams<double> params;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
/// Throws Io for unreadable files and CheckpointMismatch for bad magic,
/// version, or inconsistent shapes.
Checkpoint load_checkpoint(const std::string& path);

std::uint64_t fnv1a(const void* data, std::size_t bytes);
/// Human-readable shapes and per-array digests.
std::string describe_checkpoint(const Checkpoint& ckpt);

}  // namespace gcrs
