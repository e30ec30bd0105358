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

#include <Eigen/Core>

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace gcrs {

using Vec2 = Eigen::Vector2d;

enum class Color : std::uint8_t { Red, Blue, Green, Yellow };
enum class Shape : std::uint8_t { Ball, Box };

inline constexpr std::array<Color, 4> kAllColors{Color::Red, Color::Blue, Color::Green,
                                                 Color::Yellow};
inline constexpr std::array<Shape, 2> kAllShapes{Shape::Ball, Shape::Box};

enum class Family : std::uint8_t {
  UMaze,
  SimpleCrossing,
  LavaCrossing,
  DoorKey,
  ObjectDelivery,
  MultiGoal,
};
inline constexpr int kFamilyCount = 6;

/// MultiGoal layouts; stored in TaskDescriptor::difficulty.
enum class MultiGoalLayout : int { Empty = 0, HallwayChoice = 1, RandomCorner = 2 };

std::string_view to_string(Color c);
std::string_view to_string(Shape s);
std::string_view to_string(Family f);
Family parse_family(std::string_view name);
Color parse_color(std::string_view name);

/// Bit set over Color, used to restrict ObjectDelivery palettes.
using ColorMask = std::uint8_t;
constexpr ColorMask color_bit(Color c) { return static_cast<ColorMask>(1u << static_cast<int>(c)); }
inline constexpr ColorMask kAllColorMask = 0x0f;

struct Cell {
  int col = 0;
  int row = 0;
  auto operator<=>(const Cell&) const = default;
};

enum class CellType : std::uint8_t { Empty, Wall, Lava, Goal, Door, KeySpawn, ObjectSpawn };

struct CellKind {
  CellType type = CellType::Empty;
  Color color = Color::Red;  // Door, KeySpawn, ObjectSpawn
  bool locked = false;       // Door
  Shape shape = Shape::Ball; // ObjectSpawn

  bool operator==(const CellKind& o) const {
    if (type != o.type) return false;
    switch (type) {
      case CellType::Door: return color == o.color && locked == o.locked;
      case CellType::KeySpawn: return color == o.color;
      case CellType::ObjectSpawn: return color == o.color && shape == o.shape;
      default: return true;
    }
  }
};

struct ObjectKind {
  Shape shape = Shape::Ball;
  Color color = Color::Red;
  auto operator<=>(const ObjectKind&) const = default;
};

struct ObjectSpec {
  ObjectKind kind;
  Cell cell;
  bool operator==(const ObjectSpec&) const = default;
};

struct KeySpec {
  Color color = Color::Red;
  Cell cell;
  bool operator==(const KeySpec&) const = default;
};

struct DoorSpec {
  Cell cell;
  Color color = Color::Red;
  bool locked = true;
  bool operator==(const DoorSpec&) const = default;
};

/// Task context: which family, how hard, and for ObjectDelivery which object
/// must be delivered. `arena` and `palette` parameterize generation; an arena
/// of 0 selects the family default.
struct TaskDescriptor {
  Family family = Family::SimpleCrossing;
  int difficulty = 1;
  std::optional<ObjectKind> target;
  std::uint64_t seed = 0;
  int arena = 0;
  ColorMask palette = color_bit(Color::Red) | color_bit(Color::Blue);

  bool operator==(const TaskDescriptor&) const = default;
};

struct TaskDescriptorHash {
  std::size_t operator()(const TaskDescriptor& t) const noexcept;
};

/// Immutable description of one task instance. Cells are row-major with row 0
/// at y = 0; cell (c, r) covers [c, c+1) x [r, r+1) scaled by cell_size.
/// Item spawn cells keep their KeySpawn/ObjectSpawn tag in `cells` (the floor
/// underneath is walkable) and are also listed in `keys` / `objects` in
/// row-major order.
struct WorldSpec {
  int width = 0;
  int height = 0;
  double cell_size = 1.0;
  std::vector<CellKind> cells;
  Vec2 agent_spawn = Vec2::Zero();
  std::vector<Cell> goal_cells;
  std::vector<ObjectSpec> objects;
  std::vector<KeySpec> keys;
  std::vector<DoorSpec> doors;
  TaskDescriptor task;
  std::uint64_t seed = 0;

  bool in_bounds(Cell c) const { return c.col >= 0 && c.row >= 0 && c.col < width && c.row < height; }
  const CellKind& at(Cell c) const { return cells[static_cast<std::size_t>(c.row * width + c.col)]; }
  CellKind& at(Cell c) { return cells[static_cast<std::size_t>(c.row * width + c.col)]; }

  /// Out-of-bounds counts as wall.
  bool is_wall(Cell c) const { return !in_bounds(c) || at(c).type == CellType::Wall; }
  bool is_lava(Cell c) const { return in_bounds(c) && at(c).type == CellType::Lava; }
  bool is_goal(Cell c) const { return in_bounds(c) && at(c).type == CellType::Goal; }
  bool is_door(Cell c) const { return in_bounds(c) && at(c).type == CellType::Door; }
  /// Walkable floor: Empty, Goal, or an item spawn.
  bool is_floor(Cell c) const;

  std::optional<int> door_index(Cell c) const;
  Vec2 cell_center(Cell c) const {
    return {(c.col + 0.5) * cell_size, (c.row + 0.5) * cell_size};
  }
  Cell cell_of(const Vec2& p) const;
  double width_m() const { return width * cell_size; }
  double height_m() const { return height * cell_size; }

  /// Item id of the delivery target (keys come first in item numbering).
  std::optional<int> target_item() const;
  int item_count() const { return static_cast<int>(keys.size() + objects.size()); }

  bool operator==(const WorldSpec& o) const;
};

/// Orientation of a door: the axis along which an agent passes through it.
/// A door whose left and right neighbours are both open passes along x and
/// its blocking plane is vertical (x = cell center).
enum class Axis : std::uint8_t { X = 0, Y = 1 };
Axis door_passage_axis(const WorldSpec& spec, Cell door);
/// The two floor cells a door connects, ordered (low side, high side).
std::pair<Cell, Cell> door_sides(const WorldSpec& spec, Cell door);

struct MapOptions {
  Family family = Family::SimpleCrossing;
  bool infer_family = true;
  int difficulty = 0;
  double cell_size = 1.0;
  std::uint64_t seed = 0;
};

/// Parses the text map format. See README for the alphabet.
WorldSpec parse_map(std::string_view text, const MapOptions& options = {});
std::string render_map(const WorldSpec& spec);

/// Deterministic in the descriptor fields (family, difficulty, seed, arena,
/// palette). Resamples internal layouts until the spec is solvable.
WorldSpec generate_task(const TaskDescriptor& task);
WorldSpec generate_task(Family family, int difficulty, std::uint64_t seed);

std::pair<int, int> difficulty_range(Family family);
int default_arena(Family family);

/// Cell-level reachability: the agent can reach a goal (through doors whose
/// key is reachable first), and for ObjectDelivery it can carry the target.
bool is_solvable(const WorldSpec& spec);

/// Steps before an episode is truncated. Scale families follow 80 steps per
/// unit of difficulty; grid families get 64 steps per arena cell of width.
int episode_limit(const WorldSpec& spec);

/// Number of distinct ObjectDelivery placements for a given arena: unordered
/// placement of three objects on the free cells, each with any palette
/// (shape, color), times the choice of target among the three.
std::uint64_t object_configuration_count(int free_cells, int palette_colors);

struct TaskDistribution {
  std::vector<TaskDescriptor> templates;
  std::vector<std::string> names;
};

/// Templates have seed 0; callers draw a fresh seed per episode.
std::pair<TaskDistribution, TaskDistribution> training_and_eval_distributions(
    std::string_view suite, int arena = 0);

TaskDistribution single_task_distribution(Family family, int difficulty, int arena = 0);
std::string task_name(const TaskDescriptor& task);

}  // namespace gcrs
