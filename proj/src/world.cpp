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

#include "gcrs/world.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "gcrs/error.hpp"
#include "gcrs/random.hpp"

namespace gcrs {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RaggedRows: return "RaggedRows";
    case ErrorCode::UnknownChar: return "UnknownChar";
    case ErrorCode::NoAgent: return "NoAgent";
    case ErrorCode::NoGoal: return "NoGoal";
    case ErrorCode::Unsolvable: return "Unsolvable";
    case ErrorCode::DifficultyOutOfRange: return "DifficultyOutOfRange";
    case ErrorCode::UnknownSuite: return "UnknownSuite";
    case ErrorCode::TerminalStateExpansion: return "TerminalStateExpansion";
    case ErrorCode::NoPathToGoal: return "NoPathToGoal";
    case ErrorCode::VariantMismatch: return "VariantMismatch";
    case ErrorCode::NonFiniteParams: return "NonFiniteParams";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyBuffer: return "EmptyBuffer";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

std::string_view to_string(Color c) {
  switch (c) {
    case Color::Red: return "red";
    case Color::Blue: return "blue";
    case Color::Green: return "green";
    case Color::Yellow: return "yellow";
  }
  return "?";
}

std::string_view to_string(Shape s) { return s == Shape::Ball ? "ball" : "box"; }

std::string_view to_string(Family f) {
  switch (f) {
    case Family::UMaze: return "UMaze";
    case Family::SimpleCrossing: return "SimpleCrossing";
    case Family::LavaCrossing: return "LavaCrossing";
    case Family::DoorKey: return "DoorKey";
    case Family::ObjectDelivery: return "ObjectDelivery";
    case Family::MultiGoal: return "MultiGoal";
  }
  return "?";
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  out.erase(std::remove(out.begin(), out.end(), '-'), out.end());
  out.erase(std::remove(out.begin(), out.end(), '_'), out.end());
  return out;
}

char color_code(Color c) { return "rbgy"[static_cast<int>(c)]; }

std::optional<Color> color_from_code(char ch) {
  switch (ch) {
    case 'r': return Color::Red;
    case 'b': return Color::Blue;
    case 'g': return Color::Green;
    case 'y': return Color::Yellow;
    default: return std::nullopt;
  }
}

}  // namespace

Family parse_family(std::string_view name) {
  const std::string key = lower(name);
  for (int i = 0; i < kFamilyCount; ++i) {
    const auto f = static_cast<Family>(i);
    if (lower(to_string(f)) == key) return f;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown family '" + std::string(name) + "'");
}

Color parse_color(std::string_view name) {
  const std::string key = lower(name);
  for (Color c : kAllColors) {
    if (to_string(c) == key) return c;
  }
  throw Error(ErrorCode::InvalidConfig, "unknown color '" + std::string(name) + "'");
}

std::size_t TaskDescriptorHash::operator()(const TaskDescriptor& t) const noexcept {
  std::uint64_t h = mix_seed(static_cast<std::uint64_t>(t.family));
  h = derive_seed(h, static_cast<std::uint64_t>(t.difficulty));
  h = derive_seed(h, t.seed);
  h = derive_seed(h, static_cast<std::uint64_t>(t.arena));
  h = derive_seed(h, t.palette);
  if (t.target) {
    h = derive_seed(h, 1000u + static_cast<std::uint64_t>(t.target->shape) * 8u +
                           static_cast<std::uint64_t>(t.target->color));
  }
  return static_cast<std::size_t>(h);
}

bool WorldSpec::is_floor(Cell c) const {
  if (!in_bounds(c)) return false;
  switch (at(c).type) {
    case CellType::Empty:
    case CellType::Goal:
    case CellType::KeySpawn:
    case CellType::ObjectSpawn: return true;
    default: return false;
  }
}

std::optional<int> WorldSpec::door_index(Cell c) const {
  for (std::size_t i = 0; i < doors.size(); ++i) {
    if (doors[i].cell == c) return static_cast<int>(i);
  }
  return std::nullopt;
}

Cell WorldSpec::cell_of(const Vec2& p) const {
  Cell c{static_cast<int>(std::floor(p.x() / cell_size)),
         static_cast<int>(std::floor(p.y() / cell_size))};
  c.col = std::clamp(c.col, 0, width - 1);
  c.row = std::clamp(c.row, 0, height - 1);
  return c;
}

std::optional<int> WorldSpec::target_item() const {
  if (task.family != Family::ObjectDelivery || !task.target) return std::nullopt;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].kind == *task.target) return static_cast<int>(keys.size() + i);
  }
  return std::nullopt;
}

bool WorldSpec::operator==(const WorldSpec& o) const {
  return width == o.width && height == o.height && cell_size == o.cell_size &&
         cells == o.cells && agent_spawn == o.agent_spawn && goal_cells == o.goal_cells &&
         objects == o.objects && keys == o.keys && doors == o.doors && task == o.task &&
         seed == o.seed;
}

Axis door_passage_axis(const WorldSpec& spec, Cell door) {
  const Cell left{door.col - 1, door.row};
  const Cell right{door.col + 1, door.row};
  if (!spec.is_wall(left) && !spec.is_wall(right)) return Axis::X;
  return Axis::Y;
}

std::pair<Cell, Cell> door_sides(const WorldSpec& spec, Cell door) {
  if (door_passage_axis(spec, door) == Axis::X) {
    return {{door.col - 1, door.row}, {door.col + 1, door.row}};
  }
  return {{door.col, door.row - 1}, {door.col, door.row + 1}};
}

// ---------------------------------------------------------------------------
// Map text format

namespace {

struct Token {
  char glyph;
  std::optional<Color> color;  // set for escapes
};

std::vector<Token> tokenize_row(std::string_view row, int row_index) {
  std::vector<Token> out;
  for (std::size_t i = 0; i < row.size(); ++i) {
    const char ch = row[i];
    if (ch != '{') {
      out.push_back({ch, std::nullopt});
      continue;
    }
    if (i + 3 >= row.size() || row[i + 3] != '}') {
      throw Error(ErrorCode::UnknownChar,
                  "unterminated escape at row " + std::to_string(row_index));
    }
    const auto color = color_from_code(row[i + 1]);
    const char glyph = row[i + 2];
    if (!color || std::string_view("DdKOX").find(glyph) == std::string_view::npos) {
      throw Error(ErrorCode::UnknownChar, "bad escape '" + std::string(row.substr(i, 4)) +
                                              "' at row " + std::to_string(row_index));
    }
    out.push_back({glyph, color});
    i += 3;
  }
  return out;
}

std::optional<ObjectKind> first_unique_kind(const std::vector<ObjectSpec>& objects) {
  for (const auto& o : objects) {
    const auto n = std::count_if(objects.begin(), objects.end(),
                                 [&](const ObjectSpec& p) { return p.kind == o.kind; });
    if (n == 1) return o.kind;
  }
  return std::nullopt;
}

}  // namespace

WorldSpec parse_map(std::string_view text, const MapOptions& options) {
  std::vector<std::string_view> rows;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      if (start < text.size()) rows.push_back(text.substr(start));
      break;
    }
    rows.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (rows.empty()) throw Error(ErrorCode::NoAgent, "empty map");

  std::vector<std::vector<Token>> grid;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    grid.push_back(tokenize_row(rows[r], static_cast<int>(r)));
    if (grid.back().size() != grid.front().size()) {
      throw Error(ErrorCode::RaggedRows, "row " + std::to_string(r) + " has " +
                                             std::to_string(grid.back().size()) +
                                             " cells, expected " +
                                             std::to_string(grid.front().size()));
    }
  }

  WorldSpec spec;
  spec.width = static_cast<int>(grid.front().size());
  spec.height = static_cast<int>(grid.size());
  spec.cell_size = options.cell_size;
  spec.cells.resize(static_cast<std::size_t>(spec.width * spec.height));
  spec.seed = options.seed;
  int agents = 0;
  bool has_lava = false;

  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const Token& tok = grid[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      const Cell cell{c, r};
      CellKind kind;
      const Color color = tok.color.value_or(Color::Red);
      switch (tok.glyph) {
        case '.': break;
        case 'W': kind.type = CellType::Wall; break;
        case 'L':
          kind.type = CellType::Lava;
          has_lava = true;
          break;
        case 'G':
          kind.type = CellType::Goal;
          spec.goal_cells.push_back(cell);
          break;
        case 'A':
          ++agents;
          spec.agent_spawn = spec.cell_center(cell);
          break;
        case 'D':
        case 'd':
          kind.type = CellType::Door;
          kind.color = color;
          kind.locked = tok.glyph == 'D';
          spec.doors.push_back({cell, color, kind.locked});
          break;
        case 'K':
          kind.type = CellType::KeySpawn;
          kind.color = color;
          spec.keys.push_back({color, cell});
          break;
        case 'O':
        case 'X':
          kind.type = CellType::ObjectSpawn;
          kind.color = color;
          kind.shape = tok.glyph == 'O' ? Shape::Ball : Shape::Box;
          spec.objects.push_back({{kind.shape, color}, cell});
          break;
        default:
          throw Error(ErrorCode::UnknownChar, std::string("character '") + tok.glyph +
                                                  "' at (" + std::to_string(c) + "," +
                                                  std::to_string(r) + ")");
      }
      spec.at(cell) = kind;
    }
  }
  if (agents != 1) {
    throw Error(ErrorCode::NoAgent, "expected exactly one 'A', found " + std::to_string(agents));
  }
  if (spec.goal_cells.empty()) throw Error(ErrorCode::NoGoal, "map has no 'G' cell");

  Family family = options.family;
  if (options.infer_family) {
    if (!spec.objects.empty()) {
      family = Family::ObjectDelivery;
    } else if (!spec.doors.empty() || !spec.keys.empty()) {
      family = Family::DoorKey;
    } else if (has_lava) {
      family = Family::LavaCrossing;
    } else {
      family = Family::SimpleCrossing;
    }
  }
  spec.task.family = family;
  spec.task.difficulty = options.difficulty;
  spec.task.seed = options.seed;
  spec.task.arena = 0;
  if (family == Family::ObjectDelivery) {
    spec.task.target = first_unique_kind(spec.objects);
    if (!spec.task.target) {
      throw Error(ErrorCode::Unsolvable, "no uniquely identifiable delivery target");
    }
    spec.task.palette = 0;
    for (const auto& o : spec.objects) spec.task.palette |= color_bit(o.kind.color);
  }
  if (!is_solvable(spec)) throw Error(ErrorCode::Unsolvable, "no path from agent to goal");
  return spec;
}

std::string render_map(const WorldSpec& spec) {
  const Cell agent = spec.cell_of(spec.agent_spawn);
  std::string out;
  for (int r = 0; r < spec.height; ++r) {
    if (r > 0) out.push_back('\n');
    for (int c = 0; c < spec.width; ++c) {
      const Cell cell{c, r};
      const CellKind& k = spec.at(cell);
      auto glyph = [&](char g) {
        if (k.color == Color::Red) {
          out.push_back(g);
        } else {
          out.push_back('{');
          out.push_back(color_code(k.color));
          out.push_back(g);
          out.push_back('}');
        }
      };
      switch (k.type) {
        case CellType::Empty: out.push_back(cell == agent ? 'A' : '.'); break;
        case CellType::Wall: out.push_back('W'); break;
        case CellType::Lava: out.push_back('L'); break;
        case CellType::Goal: out.push_back('G'); break;
        case CellType::Door: glyph(k.locked ? 'D' : 'd'); break;
        case CellType::KeySpawn: glyph('K'); break;
        case CellType::ObjectSpawn: glyph(k.shape == Shape::Ball ? 'O' : 'X'); break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Solvability

bool is_solvable(const WorldSpec& spec) {
  const Cell start = spec.cell_of(spec.agent_spawn);
  if (!spec.is_floor(start)) return false;

  std::vector<bool> unlocked(spec.doors.size());
  for (std::size_t i = 0; i < spec.doors.size(); ++i) unlocked[i] = !spec.doors[i].locked;

  std::vector<char> reached;
  auto flood = [&] {
    reached.assign(spec.cells.size(), 0);
    std::deque<Cell> queue{start};
    reached[static_cast<std::size_t>(start.row * spec.width + start.col)] = 1;
    while (!queue.empty()) {
      const Cell cur = queue.front();
      queue.pop_front();
      constexpr int dc[4] = {1, -1, 0, 0};
      constexpr int dr[4] = {0, 0, 1, -1};
      for (int k = 0; k < 4; ++k) {
        const Cell next{cur.col + dc[k], cur.row + dr[k]};
        if (!spec.in_bounds(next)) continue;
        auto& seen = reached[static_cast<std::size_t>(next.row * spec.width + next.col)];
        if (seen) continue;
        bool passable = spec.is_floor(next);
        if (const auto d = spec.door_index(next)) passable = unlocked[static_cast<std::size_t>(*d)];
        if (!passable) continue;
        seen = 1;
        queue.push_back(next);
      }
    }
  };
  auto is_reached = [&](Cell c) {
    return reached[static_cast<std::size_t>(c.row * spec.width + c.col)] != 0;
  };
  auto touches_region = [&](Cell c) {
    constexpr int dc[4] = {1, -1, 0, 0};
    constexpr int dr[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const Cell n{c.col + dc[k], c.row + dr[k]};
      if (spec.in_bounds(n) && is_reached(n)) return true;
    }
    return false;
  };

  // Unlock doors whose key is reachable until nothing changes. Keys are not
  // counted off per door; generated tasks carry one key per door.
  for (bool changed = true; changed;) {
    flood();
    changed = false;
    for (std::size_t d = 0; d < spec.doors.size(); ++d) {
      if (unlocked[d] || !touches_region(spec.doors[d].cell)) continue;
      for (const auto& key : spec.keys) {
        if (key.color == spec.doors[d].color && is_reached(key.cell)) {
          unlocked[d] = true;
          changed = true;
          break;
        }
      }
    }
  }

  const bool goal_reachable = std::any_of(spec.goal_cells.begin(), spec.goal_cells.end(),
                                          [&](Cell g) { return is_reached(g); });
  if (!goal_reachable) return false;
  if (spec.task.family == Family::ObjectDelivery) {
    const auto target = spec.target_item();
    if (!target) return false;
    const auto& obj = spec.objects[static_cast<std::size_t>(*target) - spec.keys.size()];
    return is_reached(obj.cell);
  }
  return true;
}

int episode_limit(const WorldSpec& spec) {
  const Family f = spec.task.family;
  if ((f == Family::UMaze || f == Family::ObjectDelivery) && spec.task.difficulty > 0) {
    return 400 * spec.task.difficulty / 5;
  }
  const double extent = std::max(spec.width, spec.height) * spec.cell_size;
  return std::max(64, static_cast<int>(std::lround(64.0 * extent)));
}

std::uint64_t object_configuration_count(int free_cells, int palette_colors) {
  if (free_cells < 3 || palette_colors < 1) return 0;
  const auto n = static_cast<std::uint64_t>(free_cells);
  const std::uint64_t placements = n * (n - 1) * (n - 2) / 6;
  const auto kinds = static_cast<std::uint64_t>(kAllShapes.size()) *
                     static_cast<std::uint64_t>(palette_colors);
  return placements * kinds * kinds * kinds * 3;
}

// ---------------------------------------------------------------------------
// Procedural generation

std::pair<int, int> difficulty_range(Family family) {
  switch (family) {
    case Family::UMaze:
    case Family::ObjectDelivery: return {2, 12};
    case Family::DoorKey: return {6, 12};
    case Family::SimpleCrossing:
    case Family::LavaCrossing: return {1, 3};
    case Family::MultiGoal: return {0, 2};
  }
  return {0, 0};
}

int default_arena(Family family) {
  switch (family) {
    case Family::UMaze:
    case Family::ObjectDelivery: return 5;
    case Family::SimpleCrossing:
    case Family::LavaCrossing: return 9;
    case Family::MultiGoal: return 7;
    case Family::DoorKey: return 0;
  }
  return 0;
}

namespace {

class Builder {
 public:
  Builder(int width, int height, double cell_size) {
    spec_.width = width;
    spec_.height = height;
    spec_.cell_size = cell_size;
    spec_.cells.assign(static_cast<std::size_t>(width * height), CellKind{});
  }

  void set(Cell c, CellType t) { spec_.at(c).type = t; }
  CellType get(Cell c) const { return spec_.at(c).type; }

  void border() {
    for (int c = 0; c < spec_.width; ++c) {
      set({c, 0}, CellType::Wall);
      set({c, spec_.height - 1}, CellType::Wall);
    }
    for (int r = 0; r < spec_.height; ++r) {
      set({0, r}, CellType::Wall);
      set({spec_.width - 1, r}, CellType::Wall);
    }
  }

  void agent(Cell c) { spec_.agent_spawn = spec_.cell_center(c); }
  void goal(Cell c) {
    set(c, CellType::Goal);
    spec_.goal_cells.push_back(c);
  }
  void door(Cell c, Color color, bool locked) {
    CellKind& k = spec_.at(c);
    k.type = CellType::Door;
    k.color = color;
    k.locked = locked;
  }
  void key(Cell c, Color color) {
    CellKind& k = spec_.at(c);
    k.type = CellType::KeySpawn;
    k.color = color;
  }
  void object(Cell c, ObjectKind kind) {
    CellKind& k = spec_.at(c);
    k.type = CellType::ObjectSpawn;
    k.color = kind.color;
    k.shape = kind.shape;
  }

  /// Rebuilds the item lists in row-major order from the cell tags.
  WorldSpec finish(const TaskDescriptor& task) {
    spec_.task = task;
    spec_.seed = task.seed;
    std::sort(spec_.goal_cells.begin(), spec_.goal_cells.end(),
              [](Cell a, Cell b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
    for (int r = 0; r < spec_.height; ++r) {
      for (int c = 0; c < spec_.width; ++c) {
        const Cell cell{c, r};
        const CellKind& k = spec_.at(cell);
        if (k.type == CellType::Door) spec_.doors.push_back({cell, k.color, k.locked});
        if (k.type == CellType::KeySpawn) spec_.keys.push_back({k.color, cell});
        if (k.type == CellType::ObjectSpawn) spec_.objects.push_back({{k.shape, k.color}, cell});
      }
    }
    return std::move(spec_);
  }

 private:
  WorldSpec spec_;
};

WorldSpec make_umaze(const TaskDescriptor& task) {
  // 5x5 arena bounded by the arena edge; the wall stub forces a U-shaped path
  // of 8 cell moves from spawn to goal.
  Builder b(5, 5, 0.5 * task.difficulty);
  for (int c = 0; c < 3; ++c) b.set({c, 2}, CellType::Wall);
  b.agent({0, 1});
  b.goal({0, 3});
  return b.finish(task);
}

WorldSpec make_crossing(const TaskDescriptor& task, Rng& rng) {
  const int n = task.arena;
  const CellType barrier =
      task.family == Family::LavaCrossing ? CellType::Lava : CellType::Wall;
  Builder b(n, n, 1.0);
  b.border();

  struct Line {
    Axis axis;  // X: vertical wall at column `at`; Y: horizontal wall at row `at`
    int at;
  };
  std::vector<Line> lines;
  for (int i = 2; i <= n - 3; i += 2) lines.push_back({Axis::X, i});
  for (int i = 2; i <= n - 3; i += 2) lines.push_back({Axis::Y, i});
  rng.shuffle(lines);
  lines.resize(static_cast<std::size_t>(task.difficulty));

  std::vector<int> xs{0}, ys{0};
  for (const auto& l : lines) (l.axis == Axis::X ? xs : ys).push_back(l.at);
  std::sort(xs.begin() + 1, xs.end());
  std::sort(ys.begin() + 1, ys.end());
  for (std::size_t i = 1; i < xs.size(); ++i) {
    for (int r = 1; r < n - 1; ++r) b.set({xs[i], r}, barrier);
  }
  for (std::size_t i = 1; i < ys.size(); ++i) {
    for (int c = 1; c < n - 1; ++c) b.set({c, ys[i]}, barrier);
  }
  xs.push_back(n - 1);
  ys.push_back(n - 1);

  // A monotone room-to-room walk from the top-left to the bottom-right room
  // opens exactly one gap in every line.
  std::vector<Axis> path;
  path.insert(path.end(), xs.size() - 2, Axis::X);
  path.insert(path.end(), ys.size() - 2, Axis::Y);
  rng.shuffle(path);
  std::size_t room_x = 0, room_y = 0;
  for (Axis step : path) {
    if (step == Axis::X) {
      const int lo = ys[room_y] + 1, hi = ys[room_y + 1] - 1;
      b.set({xs[room_x + 1], lo + rng.below(hi - lo + 1)}, CellType::Empty);
      ++room_x;
    } else {
      const int lo = xs[room_x] + 1, hi = xs[room_x + 1] - 1;
      b.set({lo + rng.below(hi - lo + 1), ys[room_y + 1]}, CellType::Empty);
      ++room_y;
    }
  }
  b.agent({1, 1});
  b.goal({n - 2, n - 2});
  return b.finish(task);
}

WorldSpec make_doorkey(const TaskDescriptor& task, Rng& rng) {
  const int n = task.difficulty;
  Builder b(n, n, 1.0);
  b.border();
  const int split = 2 + rng.below(n - 4);  // [2, n-3]
  for (int r = 1; r < n - 1; ++r) b.set({split, r}, CellType::Wall);
  const Color color = kAllColors[static_cast<std::size_t>(rng.below(4))];
  b.door({split, 1 + rng.below(n - 2)}, color, true);
  b.goal({n - 2, n - 2});

  const int left_cells = (split - 1) * (n - 2);
  const int agent_idx = rng.below(left_cells);
  int key_idx = rng.below(left_cells - 1);
  if (key_idx >= agent_idx) ++key_idx;
  auto left_cell = [&](int idx) { return Cell{1 + idx % (split - 1), 1 + idx / (split - 1)}; };
  b.agent(left_cell(agent_idx));
  b.key(left_cell(key_idx), color);
  return b.finish(task);
}

WorldSpec make_delivery(const TaskDescriptor& task, Rng& rng) {
  const int n = task.arena;
  Builder b(n, n, 0.5 * task.difficulty);
  std::vector<Color> palette;
  for (Color c : kAllColors) {
    if (task.palette & color_bit(c)) palette.push_back(c);
  }
  std::vector<int> cells(static_cast<std::size_t>(n * n));
  for (std::size_t i = 0; i < cells.size(); ++i) cells[i] = static_cast<int>(i);
  rng.shuffle(cells);
  auto cell = [&](std::size_t i) { return Cell{cells[i] % n, cells[i] / n}; };

  std::array<ObjectKind, 3> kinds{};
  int target = 0;
  for (;;) {
    for (auto& k : kinds) {
      k.shape = kAllShapes[static_cast<std::size_t>(rng.below(2))];
      k.color = palette[static_cast<std::size_t>(rng.below(static_cast<int>(palette.size())))];
    }
    target = rng.below(3);
    const auto matches = std::count(kinds.begin(), kinds.end(), kinds[static_cast<std::size_t>(target)]);
    if (matches == 1) break;
  }
  b.goal(cell(0));
  b.agent(cell(1));
  for (std::size_t i = 0; i < 3; ++i) b.object(cell(2 + i), kinds[i]);
  TaskDescriptor t = task;
  t.target = kinds[static_cast<std::size_t>(target)];
  return b.finish(t);
}

WorldSpec make_multigoal(const TaskDescriptor& task, Rng& rng) {
  const int n = task.arena;
  const int mid = (n - 1) / 2;
  Builder b(n, n, 1.0);
  b.border();
  switch (static_cast<MultiGoalLayout>(task.difficulty)) {
    case MultiGoalLayout::Empty:
      b.agent({1, 1});
      b.goal({n - 2, n - 2});
      break;
    case MultiGoalLayout::HallwayChoice: {
      for (int r = 1; r < n - 1; ++r) {
        for (int c = 1; c < n - 1; ++c) {
          if (r != 1 && c != mid) b.set({c, r}, CellType::Wall);
        }
      }
      b.agent({mid, n - 2});
      b.goal(rng.below(2) == 0 ? Cell{1, 1} : Cell{n - 2, 1});
      break;
    }
    case MultiGoalLayout::RandomCorner: {
      const std::array<Cell, 4> corners{Cell{1, 1}, Cell{n - 2, 1}, Cell{1, n - 2},
                                        Cell{n - 2, n - 2}};
      b.agent({mid, mid});
      b.goal(corners[static_cast<std::size_t>(rng.below(4))]);
      break;
    }
  }
  return b.finish(task);
}

void validate_descriptor(TaskDescriptor& task) {
  const auto [lo, hi] = difficulty_range(task.family);
  if (task.difficulty < lo || task.difficulty > hi) {
    throw Error(ErrorCode::DifficultyOutOfRange,
                std::string(to_string(task.family)) + " difficulty " +
                    std::to_string(task.difficulty) + " outside [" + std::to_string(lo) + ", " +
                    std::to_string(hi) + "]");
  }
  if (task.arena == 0) task.arena = default_arena(task.family);
  switch (task.family) {
    case Family::SimpleCrossing:
    case Family::LavaCrossing: {
      const int lines = 2 * ((task.arena - 3) / 2);
      if (task.arena < 5 || task.difficulty > lines) {
        throw Error(ErrorCode::DifficultyOutOfRange,
                    std::to_string(task.difficulty) + " walls do not fit a " +
                        std::to_string(task.arena) + "x" + std::to_string(task.arena) + " arena");
      }
      break;
    }
    case Family::ObjectDelivery:
      if (task.arena < 3) throw Error(ErrorCode::DifficultyOutOfRange, "arena too small");
      if ((task.palette & kAllColorMask) == 0) {
        throw Error(ErrorCode::DifficultyOutOfRange, "empty palette");
      }
      break;
    case Family::MultiGoal:
      if (task.arena < 5) throw Error(ErrorCode::DifficultyOutOfRange, "arena too small");
      break;
    case Family::UMaze:
      task.arena = 5;
      break;
    case Family::DoorKey:
      task.arena = task.difficulty;
      break;
  }
  if (task.family != Family::ObjectDelivery) task.target.reset();
}

}  // namespace

WorldSpec generate_task(const TaskDescriptor& descriptor) {
  TaskDescriptor task = descriptor;
  validate_descriptor(task);
  Rng rng(derive_seed(task.seed, 0x5eed0000u + static_cast<std::uint64_t>(task.family)));
  constexpr int kMaxAttempts = 1000;
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    WorldSpec spec;
    switch (task.family) {
      case Family::UMaze: spec = make_umaze(task); break;
      case Family::SimpleCrossing:
      case Family::LavaCrossing: spec = make_crossing(task, rng); break;
      case Family::DoorKey: spec = make_doorkey(task, rng); break;
      case Family::ObjectDelivery: spec = make_delivery(task, rng); break;
      case Family::MultiGoal: spec = make_multigoal(task, rng); break;
    }
    if (is_solvable(spec)) return spec;
  }
  throw Error(ErrorCode::Unsolvable, "no solvable layout after 1000 attempts for " +
                                         task_name(task));
}

WorldSpec generate_task(Family family, int difficulty, std::uint64_t seed) {
  TaskDescriptor t;
  t.family = family;
  t.difficulty = difficulty;
  t.seed = seed;
  return generate_task(t);
}

std::string task_name(const TaskDescriptor& task) {
  std::ostringstream os;
  os << to_string(task.family) << '-';
  if (task.family == Family::MultiGoal) {
    switch (static_cast<MultiGoalLayout>(task.difficulty)) {
      case MultiGoalLayout::Empty: os << "Empty"; break;
      case MultiGoalLayout::HallwayChoice: os << "HallwayChoice"; break;
      case MultiGoalLayout::RandomCorner: os << "RandomCorner"; break;
      default: os << task.difficulty;
    }
  } else {
    os << task.difficulty;
  }
  if (task.arena > 0 && task.family != Family::DoorKey && task.family != Family::UMaze) {
    os << '@' << task.arena;
  }
  if (task.family == Family::ObjectDelivery) {
    os << '[';
    bool first = true;
    for (Color c : kAllColors) {
      if (!(task.palette & color_bit(c))) continue;
      if (!first) os << '+';
      os << to_string(c);
      first = false;
    }
    os << ']';
  }
  return os.str();
}

TaskDistribution single_task_distribution(Family family, int difficulty, int arena) {
  TaskDescriptor t;
  t.family = family;
  t.difficulty = difficulty;
  t.arena = arena;
  validate_descriptor(t);
  return {{t}, {task_name(t)}};
}

std::pair<TaskDistribution, TaskDistribution> training_and_eval_distributions(
    std::string_view suite, int arena) {
  TaskDistribution train, eval;
  auto add = [](TaskDistribution& d, TaskDescriptor t) {
    validate_descriptor(t);
    d.names.push_back(task_name(t));
    d.templates.push_back(t);
  };
  const std::string key = lower(suite);
  if (key == "multigoal") {
    const int n = arena > 0 ? arena : default_arena(Family::SimpleCrossing);
    for (int layout = 0; layout < 3; ++layout) {
      add(train, {Family::MultiGoal, layout, std::nullopt, 0, n});
    }
    add(train, {Family::SimpleCrossing, 1, std::nullopt, 0, n});
    add(eval, {Family::SimpleCrossing, 2, std::nullopt, 0, n});
    add(eval, {Family::SimpleCrossing, 3, std::nullopt, 0, n});
  } else if (key == "objectcolors") {
    TaskDescriptor t{Family::ObjectDelivery, 2, std::nullopt, 0, arena};
    t.palette = color_bit(Color::Red) | color_bit(Color::Blue);
    add(train, t);
    t.palette = color_bit(Color::Green) | color_bit(Color::Yellow);
    add(eval, t);
  } else {
    throw Error(ErrorCode::UnknownSuite, "unknown suite '" + std::string(suite) + "'");
  }
  return {std::move(train), std::move(eval)};
}

}  // namespace gcrs
