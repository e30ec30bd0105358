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

#include "gcrs/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>

#include "gcrs/random.hpp"

namespace gcrs {

namespace {

constexpr double kContactTol = 1e-6;
constexpr double kOverlapTol = 1e-12;

bool overlaps_strictly(double a_lo, double a_hi, double b_lo, double b_hi) {
  return b_lo < a_hi - kOverlapTol && b_hi > a_lo + kOverlapTol;
}

struct Sweep {
  double coord;
  bool blocked;
};

// Moves a box along one axis, stopping flush against the first solid face or
// the arena edge in the direction of travel.
Sweep sweep_axis(const WorldSpec& spec, const SimState& state, const Vec2& center, double half,
                 int axis, double delta, const SimParams& params) {
  const double start = center[axis];
  if (delta == 0.0) return {start, false};
  const int other = 1 - axis;
  const double other_lo = center[other] - half;
  const double other_hi = center[other] + half;
  const double extent = axis == 0 ? spec.width_m() : spec.height_m();

  Box region;
  region.lo[other] = other_lo;
  region.hi[other] = other_hi;
  if (delta > 0) {
    region.lo[axis] = start + half - kContactTol;
    region.hi[axis] = start + half + delta;
  } else {
    region.lo[axis] = start - half + delta;
    region.hi[axis] = start - half + kContactTol;
  }

  if (delta > 0) {
    const double front = start + half;
    double limit = front + delta;
    bool blocked = false;
    if (limit >= extent) {
      limit = extent;
      blocked = true;
    }
    for (const Box& s : solids_near(spec, state, region, params)) {
      if (!overlaps_strictly(other_lo, other_hi, s.lo[other], s.hi[other])) continue;
      if (s.lo[axis] >= front - kContactTol && s.lo[axis] <= limit) {
        limit = s.lo[axis];
        blocked = true;
      }
    }
    return blocked ? Sweep{limit - half, true} : Sweep{start + delta, false};
  }
  const double front = start - half;
  double limit = front + delta;
  bool blocked = false;
  if (limit <= 0.0) {
    limit = 0.0;
    blocked = true;
  }
  for (const Box& s : solids_near(spec, state, region, params)) {
    if (!overlaps_strictly(other_lo, other_hi, s.lo[other], s.hi[other])) continue;
    if (s.hi[axis] <= front + kContactTol && s.hi[axis] >= limit) {
      limit = s.hi[axis];
      blocked = true;
    }
  }
  return blocked ? Sweep{limit + half, true} : Sweep{start + delta, false};
}

// Moves a box by `delta`, x first then y. Blocked velocity components are
// zeroed when `vel` is given.
Vec2 move_box(const WorldSpec& spec, const SimState& state, Vec2 center, double half,
              const Vec2& delta, Vec2* vel, const SimParams& params) {
  for (int axis = 0; axis < 2; ++axis) {
    const Sweep s = sweep_axis(spec, state, center, half, axis, delta[axis], params);
    center[axis] = s.coord;
    if (s.blocked && vel) (*vel)[axis] = 0.0;
  }
  return center;
}

bool in_goal(const WorldSpec& spec, const Vec2& p) { return spec.is_goal(spec.cell_of(p)); }

}  // namespace

std::optional<int> SimState::held_item() const {
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (keys[i].held) return static_cast<int>(i);
  }
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].held) return static_cast<int>(keys.size() + i);
  }
  return std::nullopt;
}

Vec2 SimState::item_pos(int item) const {
  const auto k = static_cast<std::size_t>(item);
  return k < keys.size() ? keys[k].pos : objects[k - keys.size()].pos;
}

ActionCommand ActionCommand::clamped() const {
  ActionCommand a;
  a.force = force.cwiseMax(-1.0).cwiseMin(1.0);
  a.grab = std::clamp(grab, -1.0, 1.0);
  if (!std::isfinite(a.force.x())) a.force.x() = 0.0;
  if (!std::isfinite(a.force.y())) a.force.y() = 0.0;
  if (!std::isfinite(a.grab)) a.grab = -1.0;
  return a;
}

std::optional<Box> door_slab(const WorldSpec& spec, const DoorState& door,
                             const SimParams& params) {
  if (door.open_fraction >= 1.0) return std::nullopt;
  const double cs = spec.cell_size;
  const Vec2 center = spec.cell_center(door.cell);
  const Vec2 origin{door.cell.col * cs, door.cell.row * cs};
  const double open = std::clamp(door.open_fraction, 0.0, 1.0) * cs;
  const double t = params.door_half_thickness;
  Box b;
  if (door_passage_axis(spec, door.cell) == Axis::X) {
    b.lo = {center.x() - t, origin.y() + open};
    b.hi = {center.x() + t, origin.y() + cs};
  } else {
    b.lo = {origin.x() + open, center.y() - t};
    b.hi = {origin.x() + cs, center.y() + t};
  }
  return b;
}

std::vector<Box> solids_near(const WorldSpec& spec, const SimState& state, const Box& region,
                             const SimParams& params) {
  std::vector<Box> out;
  const double cs = spec.cell_size;
  const int c0 = std::max(0, static_cast<int>(std::floor(region.lo.x() / cs)) - 1);
  const int c1 = std::min(spec.width - 1, static_cast<int>(std::floor(region.hi.x() / cs)) + 1);
  const int r0 = std::max(0, static_cast<int>(std::floor(region.lo.y() / cs)) - 1);
  const int r1 = std::min(spec.height - 1, static_cast<int>(std::floor(region.hi.y() / cs)) + 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const Cell cell{c, r};
      const CellType t = spec.at(cell).type;
      if (t == CellType::Wall) {
        out.push_back({{c * cs, r * cs}, {(c + 1) * cs, (r + 1) * cs}});
      } else if (t == CellType::Door) {
        for (const auto& d : state.doors) {
          if (d.cell != cell) continue;
          if (auto slab = door_slab(spec, d, params)) out.push_back(*slab);
        }
      }
    }
  }
  return out;
}

bool penetrates(const WorldSpec& spec, const SimState& state, const Vec2& center, double half,
                const SimParams& params, double tolerance) {
  const Box box{center.array() - half, center.array() + half};
  if (box.lo.x() < -tolerance || box.lo.y() < -tolerance ||
      box.hi.x() > spec.width_m() + tolerance || box.hi.y() > spec.height_m() + tolerance) {
    return true;
  }
  for (const Box& s : solids_near(spec, state, box, params)) {
    const bool ox = s.lo.x() < box.hi.x() - tolerance && s.hi.x() > box.lo.x() + tolerance;
    const bool oy = s.lo.y() < box.hi.y() - tolerance && s.hi.y() > box.lo.y() + tolerance;
    if (ox && oy) return true;
  }
  return false;
}

SimState reset(const WorldSpec& spec, std::uint64_t seed, const SimParams& /*params*/) {
  SimState s;
  s.agent_pos = spec.agent_spawn;
  for (const auto& o : spec.objects) s.objects.push_back({o.kind, spec.cell_center(o.cell)});
  for (const auto& k : spec.keys) s.keys.push_back({k.color, spec.cell_center(k.cell)});
  for (const auto& d : spec.doors) s.doors.push_back({d.cell, d.color, d.locked, 0.0});
  s.rng_state = derive_seed(spec.seed, seed);
  return s;
}

TerminalClass is_terminal_class(const SimState& state, const WorldSpec& spec,
                                const SimParams& params) {
  if (spec.is_lava(spec.cell_of(state.agent_pos))) return TerminalClass::Failure;
  if (spec.task.family == Family::ObjectDelivery) {
    const auto target = spec.target_item();
    if (!target) return TerminalClass::Nonterminal;
    const auto& obj = state.objects[static_cast<std::size_t>(*target) - state.keys.size()];
    if (!obj.held && in_goal(spec, obj.pos) && obj.vel.norm() < params.rest_eps) {
      return TerminalClass::Goal;
    }
    return TerminalClass::Nonterminal;
  }
  return in_goal(spec, state.agent_pos) ? TerminalClass::Goal : TerminalClass::Nonterminal;
}

StepOutcome step(const SimState& state, const ActionCommand& command, const WorldSpec& spec,
                 const SimParams& p) {
  const ActionCommand action = command.clamped();
  StepOutcome out;
  SimState& s = out.next;
  s = state;

  // Magnet.
  const auto held = s.held_item();
  if (action.grab >= 0.0 && !held) {
    int best = -1;
    double best_dist = p.grab_radius;
    for (int i = 0; i < spec.item_count(); ++i) {
      const auto k = static_cast<std::size_t>(i);
      if (k < s.keys.size() && s.keys[k].consumed) continue;
      const double d = (s.item_pos(i) - s.agent_pos).norm();
      if (d <= best_dist) {
        best = i;
        best_dist = d;
      }
    }
    if (best >= 0) {
      const auto k = static_cast<std::size_t>(best);
      if (k < s.keys.size()) {
        s.keys[k].held = true;
      } else {
        s.objects[k - s.keys.size()].held = true;
      }
      const Vec2 rel = s.item_pos(best) - s.agent_pos;
      s.hold_offset = rel.norm() > 1e-9 ? Vec2(rel.normalized() * p.hold_offset)
                                        : Vec2(p.hold_offset, 0.0);
    }
  } else if (action.grab < 0.0 && held) {
    const auto k = static_cast<std::size_t>(*held);
    if (k < s.keys.size()) {
      s.keys[k].held = false;
    } else {
      auto& obj = s.objects[k - s.keys.size()];
      obj.held = false;
      obj.vel = s.agent_vel;
    }
  }

  // Agent dynamics: semi-implicit Euler, then axis-separated collision.
  s.agent_vel = (s.agent_vel + action.force * (p.accel * p.dt)) * (1.0 - p.friction);
  s.agent_pos = move_box(spec, s, s.agent_pos, p.agent_half, s.agent_vel * p.dt, &s.agent_vel, p);

  // Doors react to an agent pressing against them.
  for (auto& door : s.doors) {
    const auto slab = door_slab(spec, door, p);
    if (!slab) continue;
    const int axis = static_cast<int>(door_passage_axis(spec, door.cell));
    const int other = 1 - axis;
    const double slab_mid = 0.5 * (slab->lo[axis] + slab->hi[axis]);
    const double dir = s.agent_pos[axis] < slab_mid ? 1.0 : -1.0;
    if (action.force[axis] * dir <= 0.0) continue;
    if (!overlaps_strictly(s.agent_pos[other] - p.agent_half, s.agent_pos[other] + p.agent_half,
                           slab->lo[other], slab->hi[other])) {
      continue;
    }
    const double gap = dir > 0 ? slab->lo[axis] - (s.agent_pos[axis] + p.agent_half)
                               : (s.agent_pos[axis] - p.agent_half) - slab->hi[axis];
    if (std::abs(gap) > kContactTol) continue;
    if (door.locked) {
      const auto h = s.held_item();
      if (h && static_cast<std::size_t>(*h) < s.keys.size()) {
        auto& key = s.keys[static_cast<std::size_t>(*h)];
        if (key.color == door.color) {
          door.locked = false;
          key.held = false;
          key.consumed = true;
        }
      }
    } else {
      door.open_fraction = std::min(1.0, door.open_fraction + p.door_rate * p.dt);
    }
  }

  // Held item follows its anchor point; it stops at walls rather than
  // passing through them.
  if (const auto h = s.held_item()) {
    const auto k = static_cast<std::size_t>(*h);
    const Vec2 anchor = s.agent_pos + s.hold_offset;
    if (k < s.keys.size()) {
      auto& key = s.keys[k];
      key.pos = move_box(spec, s, key.pos, p.key_half, anchor - key.pos, nullptr, p);
    } else {
      auto& obj = s.objects[k - s.keys.size()];
      obj.pos = move_box(spec, s, obj.pos, p.object_half, anchor - obj.pos, nullptr, p);
      obj.vel = s.agent_vel;
    }
  }

  // Free objects coast and decelerate.
  for (auto& obj : s.objects) {
    if (obj.held) continue;
    if (obj.vel.x() == 0.0 && obj.vel.y() == 0.0) continue;
    obj.vel *= (1.0 - p.friction);
    obj.pos = move_box(spec, s, obj.pos, p.object_half, obj.vel * p.dt, &obj.vel, p);
  }

  ++s.step_count;
  switch (is_terminal_class(s, spec, p)) {
    case TerminalClass::Goal:
      out.terminated = true;
      out.reason = StepReason::Goal;
      out.reward = 1.0;
      break;
    case TerminalClass::Failure:
      out.terminated = true;
      out.reason = StepReason::Lava;
      break;
    case TerminalClass::Nonterminal: break;
  }
  if (!out.terminated && s.step_count >= episode_limit(spec)) {
    out.truncated = true;
    out.reason = StepReason::Timeout;
  }
  return out;
}

std::string_view to_string(StepReason reason) {
  switch (reason) {
    case StepReason::None: return "none";
    case StepReason::Goal: return "goal";
    case StepReason::Lava: return "lava";
    case StepReason::Timeout: return "timeout";
  }
  return "?";
}

std::string_view to_string(TerminalClass c) {
  switch (c) {
    case TerminalClass::Nonterminal: return "N";
    case TerminalClass::Goal: return "G";
    case TerminalClass::Failure: return "F";
  }
  return "?";
}

std::string format_double(double v) {
  char buf[64];
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trajectory_line(int step_index, const SimState& state, const ActionCommand& action,
                            const StepOutcome& outcome, const std::string& abstract_state_id) {
  const ActionCommand a = action.clamped();
  std::string line = std::to_string(step_index);
  for (double v : {state.agent_pos.x(), state.agent_pos.y(), state.agent_vel.x(),
                   state.agent_vel.y(), a.force.x(), a.force.y(), a.grab, outcome.reward}) {
    line += ',';
    line += format_double(v);
  }
  line += outcome.terminated ? ",1" : ",0";
  line += outcome.truncated ? ",1," : ",0,";
  // Canonical ids contain commas; quote them for CSV.
  line += '"';
  line += abstract_state_id;
  line += '"';
  return line;
}

}  // namespace gcrs
