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
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gcrs/sim.hpp"
#include "gcrs/world.hpp"

namespace gcrs {

enum class AbstractionKind : std::uint8_t { Grid, Room };
enum class DoorStatus : std::uint8_t { Locked, ClosedUnlocked, Open };

/// Bit layout of AbstractState::near: items occupy bits [0, 16), doors bits
/// [16, 31), and bit 31 marks nearness to a goal cell.
inline constexpr int kNearDoorBit = 16;
inline constexpr int kNearGoalBit = 31;
inline constexpr int kMaxItems = 16;
inline constexpr int kMaxDoors = 15;

/// A discrete snapshot under one of the abstractions. Fields that do not
/// belong to `kind` stay at their defaults and take no part in equality.
///
/// Items are numbered keys first, then objects, in WorldSpec order.
struct AbstractState {
  AbstractionKind kind = AbstractionKind::Grid;

  // Grid.
  Cell agent_cell;
  std::vector<std::optional<Cell>> item_cells;  // nullopt: carried or consumed

  // Room.
  int agent_room = 0;
  std::vector<int> item_rooms;  // -1: carried or consumed
  std::uint32_t near = 0;
  bool target_at_goal = false;

  int carried = -1;
  std::uint32_t consumed = 0;  // keys used up on a door
  std::vector<DoorStatus> doors;
  TerminalClass terminal = TerminalClass::Nonterminal;

  bool is_terminal() const { return terminal != TerminalClass::Nonterminal; }
  bool operator==(const AbstractState& o) const;
};

struct AbstractStateHash {
  std::size_t operator()(const AbstractState& s) const noexcept;
};

/// Sorted-field textual form; stable across runs and injective on the
/// fields that define equality.
std::string canonical_string(const AbstractState& s);

enum class MacroKind : std::uint8_t {
  MoveTo,
  MoveNear,
  GoThroughDoor,
  PickUp,
  Drop,
  UnlockDoor,
  OpenDoor,
};

/// `cell` is the MoveTo target; `index` is the item id (PickUp, Drop), door
/// id (GoThroughDoor, UnlockDoor, OpenDoor), or near-bit (MoveNear).
/// Ordering is lexicographic in (kind, cell, index).
struct MacroAction {
  MacroKind kind = MacroKind::MoveTo;
  Cell cell;
  int index = 0;
  auto operator<=>(const MacroAction&) const = default;
};

std::string to_string(const MacroAction& a);

struct Successor {
  MacroAction action;
  AbstractState next;
  double cost = 1.0;
};

struct AbstractionParams {
  double passable_threshold = 0.6;  // open_fraction at which a door counts as Open
  double near_radius = 1.0;
  double rest_eps = 0.05;
};

/// Connected components of non-Wall, non-Door cells. Room ids follow the
/// row-major order of each component's first cell.
struct RoomMap {
  int width = 0;
  int height = 0;
  std::vector<int> room_of;  // -1 for walls and doors
  int count = 0;
  std::vector<std::pair<int, int>> door_rooms;  // per door: rooms on (low, high) side
  std::vector<char> goal_room;                  // per room

  int at(Cell c) const { return room_of[static_cast<std::size_t>(c.row * width + c.col)]; }
};

RoomMap compute_rooms(const WorldSpec& spec);

/// Maps a position to a cell, assigning points inside a door cell to the
/// neighbour on their side of the door plane.
Cell dealiased_cell(const WorldSpec& spec, const Vec2& pos);

AbstractState phi_grid(const SimState& state, const WorldSpec& spec,
                       const AbstractionParams& params = {});
AbstractState phi_room(const SimState& state, const WorldSpec& spec, const RoomMap& rooms,
                       const AbstractionParams& params = {});
AbstractState phi_room(const SimState& state, const WorldSpec& spec,
                       const AbstractionParams& params = {});

/// Optional non-uniform macro-action costs. Must return > 0.
using CostFunction = std::function<double(const AbstractState&, const MacroAction&)>;

/// The abstract MDP for one task: the state abstraction, the successor
/// function (deterministic T with applicable actions A(s)), and the goal and
/// failure predicates.
class AbstractModel {
 public:
  AbstractModel(WorldSpec spec, AbstractionKind kind, AbstractionParams params = {},
                CostFunction cost = {});

  AbstractState phi(const SimState& state) const;
  std::vector<Successor> successors(const AbstractState& s) const;
  /// Applies one macro-action; nullopt if it is not applicable in `s`.
  std::optional<AbstractState> apply(const AbstractState& s, const MacroAction& a) const;
  TerminalClass classify(const AbstractState& s) const;

  const WorldSpec& spec() const { return spec_; }
  const TaskDescriptor& task() const { return spec_.task; }
  AbstractionKind kind() const { return kind_; }
  const RoomMap& rooms() const { return rooms_; }
  const AbstractionParams& params() const { return params_; }
  /// Upper bound on any finite path cost, used to floor failure potentials.
  double worst_case_cost() const;

 private:
  void grid_successors(const AbstractState& s, std::vector<Successor>& out) const;
  void room_successors(const AbstractState& s, std::vector<Successor>& out) const;
  bool pickable(int item) const;

  WorldSpec spec_;
  AbstractionKind kind_;
  AbstractionParams params_;
  CostFunction cost_;
  RoomMap rooms_;
  std::optional<int> target_;
};

}  // namespace gcrs
