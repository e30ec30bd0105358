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

#include "gcrs/abstraction.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "gcrs/error.hpp"
#include "gcrs/random.hpp"

namespace gcrs {

bool AbstractState::operator==(const AbstractState& o) const {
  if (kind != o.kind || carried != o.carried || consumed != o.consumed || doors != o.doors ||
      terminal != o.terminal) {
    return false;
  }
  if (kind == AbstractionKind::Grid) return agent_cell == o.agent_cell && item_cells == o.item_cells;
  return agent_room == o.agent_room && item_rooms == o.item_rooms && near == o.near &&
         target_at_goal == o.target_at_goal;
}

std::size_t AbstractStateHash::operator()(const AbstractState& s) const noexcept {
  std::uint64_t h = mix_seed(static_cast<std::uint64_t>(s.kind) * 4u +
                             static_cast<std::uint64_t>(s.terminal));
  auto add = [&h](std::uint64_t v) { h = derive_seed(h, v); };
  add(static_cast<std::uint64_t>(s.carried + 1));
  add(s.consumed);
  for (DoorStatus d : s.doors) add(static_cast<std::uint64_t>(d));
  if (s.kind == AbstractionKind::Grid) {
    add((static_cast<std::uint64_t>(s.agent_cell.col) << 32) |
        static_cast<std::uint32_t>(s.agent_cell.row));
    for (const auto& c : s.item_cells) {
      add(c ? ((static_cast<std::uint64_t>(c->col) << 32) | static_cast<std::uint32_t>(c->row))
            : ~0ULL);
    }
  } else {
    add(static_cast<std::uint64_t>(s.agent_room));
    add(s.near);
    add(s.target_at_goal ? 1u : 0u);
    for (int r : s.item_rooms) add(static_cast<std::uint64_t>(r + 1));
  }
  return static_cast<std::size_t>(h);
}

namespace {

char door_char(DoorStatus d) {
  switch (d) {
    case DoorStatus::Locked: return 'L';
    case DoorStatus::ClosedUnlocked: return 'C';
    case DoorStatus::Open: return 'O';
  }
  return '?';
}

std::string cell_str(Cell c) { return std::to_string(c.col) + "," + std::to_string(c.row); }

}  // namespace

std::string canonical_string(const AbstractState& s) {
  std::ostringstream os;
  const bool grid = s.kind == AbstractionKind::Grid;
  os << (grid ? "grid" : "room");
  if (grid) {
    os << "|agent=" << cell_str(s.agent_cell);
  } else {
    os << "|room=" << s.agent_room << "|near=";
    bool first = true;
    for (int b = 0; b < 32; ++b) {
      if (!(s.near & (1u << b))) continue;
      if (!first) os << ';';
      first = false;
      if (b == kNearGoalBit) {
        os << "goal";
      } else if (b >= kNearDoorBit) {
        os << 'd' << (b - kNearDoorBit);
      } else {
        os << 'i' << b;
      }
    }
  }
  os << "|items=";
  const std::size_t n = grid ? s.item_cells.size() : s.item_rooms.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) os << ';';
    os << i << ':';
    if (s.carried == static_cast<int>(i)) {
      os << "held";
    } else if (s.consumed & (1u << i)) {
      os << "used";
    } else if (grid) {
      os << (s.item_cells[i] ? cell_str(*s.item_cells[i]) : "none");
    } else {
      os << 'r' << s.item_rooms[i];
    }
  }
  os << "|doors=";
  for (DoorStatus d : s.doors) os << door_char(d);
  if (!grid) os << "|delivered=" << (s.target_at_goal ? 1 : 0);
  os << "|term=" << to_string(s.terminal);
  return os.str();
}

std::string to_string(const MacroAction& a) {
  switch (a.kind) {
    case MacroKind::MoveTo: return "MoveTo(" + cell_str(a.cell) + ")";
    case MacroKind::MoveNear:
      if (a.index == kNearGoalBit) return "MoveNear(goal)";
      if (a.index >= kNearDoorBit) return "MoveNear(door" + std::to_string(a.index - kNearDoorBit) + ")";
      return "MoveNear(item" + std::to_string(a.index) + ")";
    case MacroKind::GoThroughDoor: return "GoThroughDoor(door" + std::to_string(a.index) + ")";
    case MacroKind::PickUp: return "PickUp(item" + std::to_string(a.index) + ")";
    case MacroKind::Drop: return "Drop(item" + std::to_string(a.index) + ")";
    case MacroKind::UnlockDoor: return "UnlockDoor(door" + std::to_string(a.index) + ")";
    case MacroKind::OpenDoor: return "OpenDoor(door" + std::to_string(a.index) + ")";
  }
  return "?";
}

RoomMap compute_rooms(const WorldSpec& spec) {
  RoomMap map;
  map.width = spec.width;
  map.height = spec.height;
  map.room_of.assign(spec.cells.size(), -1);
  auto idx = [&](Cell c) { return static_cast<std::size_t>(c.row * spec.width + c.col); };
  auto open = [&](Cell c) {
    return spec.in_bounds(c) && spec.at(c).type != CellType::Wall &&
           spec.at(c).type != CellType::Door;
  };
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const Cell seed{c, r};
      if (!open(seed) || map.room_of[idx(seed)] >= 0) continue;
      const int id = map.count++;
      std::deque<Cell> queue{seed};
      map.room_of[idx(seed)] = id;
      while (!queue.empty()) {
        const Cell cur = queue.front();
        queue.pop_front();
        constexpr int dc[4] = {1, -1, 0, 0};
        constexpr int dr[4] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const Cell n{cur.col + dc[k], cur.row + dr[k]};
          if (!open(n) || map.room_of[idx(n)] >= 0) continue;
          map.room_of[idx(n)] = id;
          queue.push_back(n);
        }
      }
    }
  }
  for (const auto& d : spec.doors) {
    const auto [lo, hi] = door_sides(spec, d.cell);
    const int a = spec.in_bounds(lo) ? map.at(lo) : -1;
    const int b = spec.in_bounds(hi) ? map.at(hi) : -1;
    map.door_rooms.emplace_back(a, b);
  }
  map.goal_room.assign(static_cast<std::size_t>(map.count), 0);
  for (Cell g : spec.goal_cells) {
    if (map.at(g) >= 0) map.goal_room[static_cast<std::size_t>(map.at(g))] = 1;
  }
  return map;
}

Cell dealiased_cell(const WorldSpec& spec, const Vec2& pos) {
  const Cell cell = spec.cell_of(pos);
  if (!spec.is_door(cell)) return cell;
  const auto [lo, hi] = door_sides(spec, cell);
  const int axis = static_cast<int>(door_passage_axis(spec, cell));
  return pos[axis] < spec.cell_center(cell)[axis] ? lo : hi;
}

namespace {

DoorStatus door_status(const DoorState& d, const AbstractionParams& params) {
  if (d.locked) return DoorStatus::Locked;
  return d.open_fraction >= params.passable_threshold ? DoorStatus::Open
                                                      : DoorStatus::ClosedUnlocked;
}

// Fields shared by both abstractions: carried item, consumed keys, doors.
void fill_common(AbstractState& s, const SimState& state, const AbstractionParams& params) {
  if (const auto h = state.held_item()) s.carried = *h;
  for (std::size_t i = 0; i < state.keys.size(); ++i) {
    if (state.keys[i].consumed) s.consumed |= 1u << i;
  }
  for (const auto& d : state.doors) s.doors.push_back(door_status(d, params));
}

bool target_moving(const SimState& state, const WorldSpec& spec, const AbstractionParams& params) {
  const auto t = spec.target_item();
  if (!t) return false;
  return state.objects[static_cast<std::size_t>(*t) - state.keys.size()].vel.norm() >=
         params.rest_eps;
}

bool item_gone(const SimState& state, int item) {
  const auto k = static_cast<std::size_t>(item);
  if (k < state.keys.size()) return state.keys[k].held || state.keys[k].consumed;
  return state.objects[k - state.keys.size()].held;
}

}  // namespace

AbstractModel::AbstractModel(WorldSpec spec, AbstractionKind kind, AbstractionParams params,
                             CostFunction cost)
    : spec_(std::move(spec)),
      kind_(kind),
      params_(params),
      cost_(std::move(cost)),
      rooms_(compute_rooms(spec_)),
      target_(spec_.target_item()) {
  if (spec_.item_count() > kMaxItems || static_cast<int>(spec_.doors.size()) > kMaxDoors) {
    throw Error(ErrorCode::InvalidConfig, "too many items or doors for the abstraction");
  }
}

TerminalClass AbstractModel::classify(const AbstractState& s) const {
  if (s.kind == AbstractionKind::Grid) {
    if (spec_.is_lava(s.agent_cell)) return TerminalClass::Failure;
    if (target_) {
      const auto& c = s.item_cells[static_cast<std::size_t>(*target_)];
      return (s.carried != *target_ && c && spec_.is_goal(*c)) ? TerminalClass::Goal
                                                               : TerminalClass::Nonterminal;
    }
    return spec_.is_goal(s.agent_cell) ? TerminalClass::Goal : TerminalClass::Nonterminal;
  }
  if (target_) {
    return (s.target_at_goal && s.carried != *target_) ? TerminalClass::Goal
                                                       : TerminalClass::Nonterminal;
  }
  return rooms_.goal_room[static_cast<std::size_t>(s.agent_room)] ? TerminalClass::Goal
                                                                 : TerminalClass::Nonterminal;
}

AbstractState phi_grid(const SimState& state, const WorldSpec& spec,
                       const AbstractionParams& params) {
  return AbstractModel(spec, AbstractionKind::Grid, params).phi(state);
}

AbstractState phi_room(const SimState& state, const WorldSpec& spec, const RoomMap& /*rooms*/,
                       const AbstractionParams& params) {
  return AbstractModel(spec, AbstractionKind::Room, params).phi(state);
}

AbstractState phi_room(const SimState& state, const WorldSpec& spec,
                       const AbstractionParams& params) {
  return AbstractModel(spec, AbstractionKind::Room, params).phi(state);
}

AbstractState AbstractModel::phi(const SimState& state) const {
  AbstractState s;
  s.kind = kind_;
  fill_common(s, state, params_);
  const int n_items = spec_.item_count();
  const Cell agent = dealiased_cell(spec_, state.agent_pos);

  if (kind_ == AbstractionKind::Grid) {
    s.agent_cell = agent;
    s.item_cells.resize(static_cast<std::size_t>(n_items));
    for (int i = 0; i < n_items; ++i) {
      if (!item_gone(state, i)) {
        s.item_cells[static_cast<std::size_t>(i)] = dealiased_cell(spec_, state.item_pos(i));
      }
    }
  } else {
    s.agent_room = std::max(0, rooms_.at(agent));
    s.item_rooms.assign(static_cast<std::size_t>(n_items), -1);
    const double r2 = params_.near_radius * params_.near_radius;
    for (int i = 0; i < n_items; ++i) {
      if (item_gone(state, i)) continue;
      const Vec2 p = state.item_pos(i);
      s.item_rooms[static_cast<std::size_t>(i)] = rooms_.at(dealiased_cell(spec_, p));
      if ((p - state.agent_pos).squaredNorm() <= r2) s.near |= 1u << i;
    }
    for (std::size_t d = 0; d < spec_.doors.size(); ++d) {
      if ((spec_.cell_center(spec_.doors[d].cell) - state.agent_pos).squaredNorm() <= r2) {
        s.near |= 1u << (kNearDoorBit + d);
      }
    }
    if (target_) {
      for (Cell g : spec_.goal_cells) {
        if ((spec_.cell_center(g) - state.agent_pos).squaredNorm() <= r2) {
          s.near |= 1u << kNearGoalBit;
        }
      }
      const auto t = static_cast<std::size_t>(*target_);
      s.target_at_goal = s.item_rooms[t] >= 0 &&
                         spec_.is_goal(dealiased_cell(spec_, state.item_pos(*target_)));
    }
  }

  if (spec_.is_lava(spec_.cell_of(state.agent_pos))) {
    s.terminal = TerminalClass::Failure;
  } else {
    s.terminal = classify(s);
    // A delivered target still sliding has not come to rest yet.
    if (target_ && s.terminal == TerminalClass::Goal && target_moving(state, spec_, params_)) {
      s.terminal = TerminalClass::Nonterminal;
    }
  }
  return s;
}

bool AbstractModel::pickable(int item) const {
  return static_cast<std::size_t>(item) < spec_.keys.size() || (target_ && item == *target_);
}

double AbstractModel::worst_case_cost() const {
  int floor_cells = 0;
  for (int r = 0; r < spec_.height; ++r) {
    for (int c = 0; c < spec_.width; ++c) {
      if (spec_.at({c, r}).type != CellType::Wall) ++floor_cells;
    }
  }
  return static_cast<double>(floor_cells * (1 + spec_.item_count()) +
                             3 * static_cast<int>(spec_.doors.size()));
}

std::vector<Successor> AbstractModel::successors(const AbstractState& s) const {
  if (s.is_terminal()) {
    throw Error(ErrorCode::TerminalStateExpansion, "cannot expand " + canonical_string(s));
  }
  if (s.kind != kind_) throw Error(ErrorCode::VariantMismatch, "state kind differs from model");
  std::vector<Successor> out;
  if (kind_ == AbstractionKind::Grid) {
    grid_successors(s, out);
  } else {
    room_successors(s, out);
  }
  std::erase_if(out, [&](const Successor& x) { return x.next == s; });
  for (auto& x : out) {
    x.next.terminal = classify(x.next);
    if (cost_) {
      x.cost = cost_(s, x.action);
      if (!(x.cost > 0.0)) throw Error(ErrorCode::InvalidConfig, "macro-action cost must be > 0");
    }
  }
  return out;
}

std::optional<AbstractState> AbstractModel::apply(const AbstractState& s,
                                                  const MacroAction& a) const {
  for (auto& x : successors(s)) {
    if (x.action == a) return std::move(x.next);
  }
  return std::nullopt;
}

void AbstractModel::grid_successors(const AbstractState& s, std::vector<Successor>& out) const {
  constexpr int dc[4] = {1, -1, 0, 0};
  constexpr int dr[4] = {0, 0, 1, -1};
  const Cell a = s.agent_cell;

  for (int k = 0; k < 4; ++k) {
    Cell n{a.col + dc[k], a.row + dr[k]};
    if (const auto d = spec_.door_index(n)) {
      if (s.doors[static_cast<std::size_t>(*d)] != DoorStatus::Open) continue;
      n = {n.col + dc[k], n.row + dr[k]};
    }
    if (!spec_.is_floor(n)) continue;
    AbstractState next = s;
    next.agent_cell = n;
    out.push_back({{MacroKind::MoveTo, n, 0}, std::move(next), 1.0});
  }

  const int n_items = static_cast<int>(s.item_cells.size());
  if (s.carried < 0) {
    for (int i = 0; i < n_items; ++i) {
      const auto& c = s.item_cells[static_cast<std::size_t>(i)];
      if (!c || *c != a || !pickable(i)) continue;
      AbstractState next = s;
      next.carried = i;
      next.item_cells[static_cast<std::size_t>(i)].reset();
      out.push_back({{MacroKind::PickUp, {}, i}, std::move(next), 1.0});
    }
  } else {
    AbstractState next = s;
    next.item_cells[static_cast<std::size_t>(s.carried)] = a;
    next.carried = -1;
    out.push_back({{MacroKind::Drop, {}, s.carried}, std::move(next), 1.0});
  }

  for (std::size_t d = 0; d < spec_.doors.size(); ++d) {
    const Cell dc_ = spec_.doors[d].cell;
    if (std::abs(dc_.col - a.col) + std::abs(dc_.row - a.row) != 1) continue;
    const int di = static_cast<int>(d);
    if (s.doors[d] == DoorStatus::Locked) {
      const bool has_key = s.carried >= 0 &&
                           static_cast<std::size_t>(s.carried) < spec_.keys.size() &&
                           spec_.keys[static_cast<std::size_t>(s.carried)].color == spec_.doors[d].color;
      if (!has_key) continue;
      AbstractState next = s;
      next.doors[d] = DoorStatus::ClosedUnlocked;
      next.consumed |= 1u << s.carried;
      next.carried = -1;
      out.push_back({{MacroKind::UnlockDoor, {}, di}, std::move(next), 1.0});
    } else if (s.doors[d] == DoorStatus::ClosedUnlocked) {
      AbstractState next = s;
      next.doors[d] = DoorStatus::Open;
      out.push_back({{MacroKind::OpenDoor, {}, di}, std::move(next), 1.0});
    }
  }
}

void AbstractModel::room_successors(const AbstractState& s, std::vector<Successor>& out) const {
  const int room = s.agent_room;
  const int n_items = static_cast<int>(s.item_rooms.size());
  auto near_only = [&](int bit) {
    AbstractState next = s;
    next.near = 1u << bit;
    return next;
  };

  for (int i = 0; i < n_items; ++i) {
    if (s.item_rooms[static_cast<std::size_t>(i)] != room) continue;
    if (s.near == (1u << i)) continue;
    out.push_back({{MacroKind::MoveNear, {}, i}, near_only(i), 1.0});
  }
  for (std::size_t d = 0; d < spec_.doors.size(); ++d) {
    const auto [lo, hi] = rooms_.door_rooms[d];
    if (lo != room && hi != room) continue;
    const int bit = kNearDoorBit + static_cast<int>(d);
    if (s.near != (1u << bit)) out.push_back({{MacroKind::MoveNear, {}, bit}, near_only(bit), 1.0});
    if ((s.near & (1u << bit)) && s.doors[d] == DoorStatus::Open) {
      AbstractState next = near_only(bit);
      next.agent_room = lo == room ? hi : lo;
      out.push_back({{MacroKind::GoThroughDoor, {}, static_cast<int>(d)}, std::move(next), 1.0});
    }
  }
  if (target_) {
    const bool goal_here = std::any_of(spec_.goal_cells.begin(), spec_.goal_cells.end(),
                                       [&](Cell g) { return rooms_.at(g) == room; });
    if (goal_here && s.near != (1u << kNearGoalBit)) {
      out.push_back({{MacroKind::MoveNear, {}, kNearGoalBit}, near_only(kNearGoalBit), 1.0});
    }
  }

  if (s.carried < 0) {
    for (int i = 0; i < n_items; ++i) {
      if (!(s.near & (1u << i)) || s.item_rooms[static_cast<std::size_t>(i)] != room ||
          !pickable(i)) {
        continue;
      }
      AbstractState next = s;
      next.carried = i;
      next.item_rooms[static_cast<std::size_t>(i)] = -1;
      next.near &= ~(1u << i);
      if (target_ && i == *target_) next.target_at_goal = false;
      out.push_back({{MacroKind::PickUp, {}, i}, std::move(next), 1.0});
    }
  } else {
    AbstractState next = s;
    const int i = s.carried;
    next.item_rooms[static_cast<std::size_t>(i)] = room;
    next.near |= 1u << i;
    next.carried = -1;
    if (target_ && i == *target_) next.target_at_goal = (s.near & (1u << kNearGoalBit)) != 0;
    out.push_back({{MacroKind::Drop, {}, i}, std::move(next), 1.0});
  }

  for (std::size_t d = 0; d < spec_.doors.size(); ++d) {
    const int bit = kNearDoorBit + static_cast<int>(d);
    if (!(s.near & (1u << bit))) continue;
    const int di = static_cast<int>(d);
    if (s.doors[d] == DoorStatus::Locked) {
      const bool has_key = s.carried >= 0 &&
                           static_cast<std::size_t>(s.carried) < spec_.keys.size() &&
                           spec_.keys[static_cast<std::size_t>(s.carried)].color == spec_.doors[d].color;
      if (!has_key) continue;
      AbstractState next = s;
      next.doors[d] = DoorStatus::ClosedUnlocked;
      next.consumed |= 1u << s.carried;
      next.carried = -1;
      out.push_back({{MacroKind::UnlockDoor, {}, di}, std::move(next), 1.0});
    } else if (s.doors[d] == DoorStatus::ClosedUnlocked) {
      AbstractState next = s;
      next.doors[d] = DoorStatus::Open;
      out.push_back({{MacroKind::OpenDoor, {}, di}, std::move(next), 1.0});
    }
  }
}

}  // namespace gcrs
