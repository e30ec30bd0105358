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

#include <cstddef>
#include <cstdint>
#include <atomic>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include "gcrs/abstraction.hpp"

namespace gcrs {

struct PlanNode {
  double value = 0.0;                  // -inf when no goal is reachable
  std::optional<MacroAction> action;   // empty at terminal and dead-end states
  std::optional<AbstractState> next;   // T(s, action)
};

/// V* and pi* over the abstract states forward-reachable from `origin`.
struct PlanSolution {
  AbstractState origin;
  std::unordered_map<AbstractState, PlanNode, AbstractStateHash> nodes;
  std::size_t expanded = 0;

  const PlanNode* find(const AbstractState& s) const;
  bool contains(const AbstractState& s) const { return find(s) != nullptr; }
  double value(const AbstractState& s) const;
  /// Follows the policy from `s` until a terminal state.
  std::vector<Successor> plan_from(const AbstractState& s) const;
};

/// Uniform-cost search: forward reachability from `s0`, then Dijkstra
/// backwards from every reached goal state. Ties go to the smallest
/// MacroAction, then the smallest successor canonical string.
PlanSolution solve(const AbstractModel& model, const AbstractState& s0,
                   std::size_t max_states = 4'000'000);

/// Potential assigned to failure states and dead ends.
double failure_potential(const AbstractModel& model);

struct CacheStats {
  std::uint64_t solves = 0;
  std::uint64_t expansions = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t evictions = 0;
};

/// Result of one lookup: phi(x), the subgoal, and the potential.
struct PlanQuery {
  AbstractState phi;
  AbstractState subgoal;
  double potential = 0.0;
};

/// Per-task plan memo with lazy replanning. Readers share a lock; a miss
/// solves outside the lock and merges the result under an exclusive lock.
/// The least recently used tasks are evicted beyond `capacity`.
class PlannerCache {
 public:
  explicit PlannerCache(AbstractionKind kind, AbstractionParams params = {},
                        std::size_t capacity = 512, CostFunction cost = {});

  PlanQuery query(const SimState& x, const WorldSpec& spec);
  AbstractState subgoal(const SimState& x, const WorldSpec& spec) { return query(x, spec).subgoal; }
  double potential(const SimState& x, const WorldSpec& spec) { return query(x, spec).potential; }

  /// The model used for `spec`, creating the entry if needed.
  std::shared_ptr<const AbstractModel> model(const WorldSpec& spec);

  CacheStats stats() const;
  std::size_t size() const;
  void clear();
  AbstractionKind kind() const { return kind_; }

 private:
  struct Entry {
    std::shared_ptr<const AbstractModel> model;
    PlanSolution solution;
    std::atomic<std::uint64_t> last_used{0};
  };

  Entry& entry_locked(const WorldSpec& spec);

  AbstractionKind kind_;
  AbstractionParams params_;
  std::size_t capacity_;
  CostFunction cost_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<TaskDescriptor, std::unique_ptr<Entry>, TaskDescriptorHash> entries_;
  std::atomic<std::uint64_t> tick_{0};
  std::atomic<std::uint64_t> solves_{0};
  std::atomic<std::uint64_t> expansions_{0};
  std::atomic<std::uint64_t> hits_{0};
  std::atomic<std::uint64_t> misses_{0};
  std::atomic<std::uint64_t> evictions_{0};
};

AbstractState subgoal(const SimState& x, const WorldSpec& spec, PlannerCache& cache);
double potential(const SimState& x, const WorldSpec& spec, PlannerCache& cache);

}  // namespace gcrs
