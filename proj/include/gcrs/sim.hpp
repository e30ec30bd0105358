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
#include <optional>
#include <string>
#include <vector>

#include "gcrs/world.hpp"

namespace gcrs {

/// Physical constants of the point-mass world. Lengths in meters, times in
/// seconds; friction is a per-step velocity decay factor.
struct SimParams {
  double dt = 0.05;
  double friction = 0.05;
  double accel = 10.0;  // F_max / mass
  double agent_half = 0.2;
  double object_half = 0.15;
  double key_half = 0.1;
  double door_half_thickness = 0.05;
  double grab_radius = 0.6;
  double hold_offset = 0.35;
  double door_rate = 1.0;
  double rest_eps = 0.05;
};

struct ObjectState {
  ObjectKind kind;
  Vec2 pos = Vec2::Zero();
  Vec2 vel = Vec2::Zero();
  bool held = false;
  bool operator==(const ObjectState&) const = default;
};

struct KeyState {
  Color color = Color::Red;
  Vec2 pos = Vec2::Zero();
  bool held = false;
  bool consumed = false;
  bool operator==(const KeyState&) const = default;
};

struct DoorState {
  Cell cell;
  Color color = Color::Red;
  bool locked = true;
  double open_fraction = 0.0;
  bool operator==(const DoorState&) const = default;
};

struct SimState {
  Vec2 agent_pos = Vec2::Zero();
  Vec2 agent_vel = Vec2::Zero();
  std::vector<ObjectState> objects;
  std::vector<KeyState> keys;
  std::vector<DoorState> doors;
  Vec2 hold_offset = Vec2::Zero();  // held item position relative to the agent
  int step_count = 0;
  std::uint64_t rng_state = 0;

  /// Item id (keys first, then objects) of the held item, if any.
  std::optional<int> held_item() const;
  Vec2 item_pos(int item) const;
  bool operator==(const SimState&) const = default;
};

struct ActionCommand {
  Vec2 force = Vec2::Zero();
  double grab = -1.0;

  ActionCommand clamped() const;
};

enum class TerminalClass : std::uint8_t { Nonterminal, Goal, Failure };
enum class StepReason : std::uint8_t { None, Goal, Lava, Timeout };

struct StepOutcome {
  SimState next;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  StepReason reason = StepReason::None;
};

/// Axis-aligned box [lo, hi].
struct Box {
  Vec2 lo;
  Vec2 hi;
};

SimState reset(const WorldSpec& spec, std::uint64_t seed, const SimParams& params = {});
StepOutcome step(const SimState& state, const ActionCommand& action, const WorldSpec& spec,
                 const SimParams& params = {});
TerminalClass is_terminal_class(const SimState& state, const WorldSpec& spec,
                                const SimParams& params = {});

/// Solid boxes (wall cells and the closed part of each door) overlapping
/// `region`. The arena boundary is not included.
std::vector<Box> solids_near(const WorldSpec& spec, const SimState& state, const Box& region,
                             const SimParams& params = {});
/// The currently blocking slab of a door, empty when fully open.
std::optional<Box> door_slab(const WorldSpec& spec, const DoorState& door,
                             const SimParams& params = {});
/// True if a box of half-extent `half` centered at `center` overlaps any
/// solid by more than `tolerance`, or leaves the arena.
bool penetrates(const WorldSpec& spec, const SimState& state, const Vec2& center, double half,
                const SimParams& params = {}, double tolerance = 1e-9);

std::string_view to_string(StepReason reason);
std::string_view to_string(TerminalClass c);

/// One comma-separated trajectory line (no trailing newline).
std::string trajectory_line(int step, const SimState& state, const ActionCommand& action,
                            const StepOutcome& outcome, const std::string& abstract_state_id);
inline constexpr const char* kTrajectoryHeader =
    "step,agent_x,agent_y,vel_x,vel_y,action_fx,action_fy,grab,reward,terminated,truncated,"
    "abstract_state_id";

std::string format_double(double v);

}  // namespace gcrs
