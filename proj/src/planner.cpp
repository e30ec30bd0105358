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

#include "gcrs/planner.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <mutex>
#include <queue>

#include "gcrs/error.hpp"

namespace gcrs {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Edge {
  MacroAction action;
  std::size_t to;
  double cost;
};

}  // namespace

const PlanNode* PlanSolution::find(const AbstractState& s) const {
  const auto it = nodes.find(s);
  return it == nodes.end() ? nullptr : &it->second;
}

double PlanSolution::value(const AbstractState& s) const {
  const PlanNode* n = find(s);
  if (n == nullptr) throw Error(ErrorCode::NoPathToGoal, "state not in plan: " + canonical_string(s));
  return n->value;
}

std::vector<Successor> PlanSolution::plan_from(const AbstractState& s) const {
  std::vector<Successor> out;
  const PlanNode* n = find(s);
  AbstractState cur = s;
  while (n != nullptr && n->action && n->next) {
    out.push_back({*n->action, *n->next, value(*n->next) - n->value});
    cur = *n->next;
    n = find(cur);
    if (out.size() > nodes.size()) break;
  }
  return out;
}

PlanSolution solve(const AbstractModel& model, const AbstractState& s0, std::size_t max_states) {
  PlanSolution sol;
  sol.origin = s0;

  std::vector<AbstractState> states{s0};
  std::unordered_map<AbstractState, std::size_t, AbstractStateHash> index{{s0, 0}};
  std::vector<std::vector<Edge>> out_edges(1);
  std::deque<std::size_t> frontier{0};
  while (!frontier.empty()) {
    const std::size_t id = frontier.front();
    frontier.pop_front();
    if (states[id].is_terminal()) continue;
    ++sol.expanded;
    for (auto& succ : model.successors(states[id])) {
      auto [it, inserted] = index.try_emplace(succ.next, states.size());
      if (inserted) {
        if (states.size() >= max_states) {
          throw Error(ErrorCode::NoPathToGoal, "abstract state space exceeds search limit");
        }
        states.push_back(std::move(succ.next));
        out_edges.emplace_back();
        frontier.push_back(it->second);
      }
      out_edges[id].push_back({succ.action, it->second, succ.cost});
    }
  }

  std::vector<std::vector<std::pair<std::size_t, double>>> in_edges(states.size());
  for (std::size_t u = 0; u < states.size(); ++u) {
    for (const auto& e : out_edges[u]) in_edges[e.to].emplace_back(u, e.cost);
  }

  std::vector<double> dist(states.size(), kInf);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  for (std::size_t u = 0; u < states.size(); ++u) {
    if (states[u].terminal == TerminalClass::Goal) {
      dist[u] = 0.0;
      pq.emplace(0.0, u);
    }
  }
  if (pq.empty()) {
    throw Error(ErrorCode::NoPathToGoal, "no goal reachable from " + canonical_string(s0));
  }
  while (!pq.empty()) {
    const auto [d, v] = pq.top();
    pq.pop();
    if (d > dist[v]) continue;
    for (const auto& [u, c] : in_edges[v]) {
      if (states[u].is_terminal()) continue;
      const double nd = d + c;
      if (nd < dist[u]) {
        dist[u] = nd;
        pq.emplace(nd, u);
      }
    }
  }
  if (!std::isfinite(dist[0])) {
    throw Error(ErrorCode::NoPathToGoal, "no goal reachable from " + canonical_string(s0));
  }

  sol.nodes.reserve(states.size());
  for (std::size_t u = 0; u < states.size(); ++u) {
    PlanNode node;
    node.value = -dist[u];
    if (!states[u].is_terminal() && std::isfinite(dist[u])) {
      const Edge* best = nullptr;
      double best_q = kInf;
      for (const auto& e : out_edges[u]) {
        const double q = e.cost + dist[e.to];
        if (!std::isfinite(q)) continue;
        bool better = best == nullptr || q < best_q;
        if (!better && q == best_q) {
          better = e.action < best->action ||
                   (e.action == best->action &&
                    canonical_string(states[e.to]) < canonical_string(states[best->to]));
        }
        if (better) {
          best = &e;
          best_q = q;
        }
      }
      node.action = best->action;
      node.next = states[best->to];
    }
    sol.nodes.emplace(states[u], std::move(node));
  }
  return sol;
}

double failure_potential(const AbstractModel& model) { return -2.0 * model.worst_case_cost(); }

PlannerCache::PlannerCache(AbstractionKind kind, AbstractionParams params, std::size_t capacity,
                           CostFunction cost)
    : kind_(kind), params_(params), capacity_(std::max<std::size_t>(1, capacity)),
      cost_(std::move(cost)) {}

PlannerCache::Entry& PlannerCache::entry_locked(const WorldSpec& spec) {
  auto it = entries_.find(spec.task);
  if (it != entries_.end() && it->second->model->spec() == spec) return *it->second;
  if (it == entries_.end() && entries_.size() >= capacity_) {
    auto victim = std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
      return a.second->last_used.load() < b.second->last_used.load();
    });
    entries_.erase(victim);
    ++evictions_;
  }
  auto entry = std::make_unique<Entry>();
  entry->model = std::make_shared<const AbstractModel>(spec, kind_, params_, cost_);
  entry->last_used = ++tick_;
  Entry& ref = *entry;
  entries_[spec.task] = std::move(entry);
  return ref;
}

std::shared_ptr<const AbstractModel> PlannerCache::model(const WorldSpec& spec) {
  {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(spec.task);
    if (it != entries_.end() && it->second->model->spec() == spec) {
      it->second->last_used = ++tick_;
      return it->second->model;
    }
  }
  std::unique_lock lock(mutex_);
  return entry_locked(spec).model;
}

namespace {

PlanQuery answer(const AbstractState& phi, const PlanNode& node) {
  if (!node.action) {
    throw Error(ErrorCode::NoPathToGoal, "dead end at " + canonical_string(phi));
  }
  return {phi, *node.next, node.value};
}

}  // namespace

PlanQuery PlannerCache::query(const SimState& x, const WorldSpec& spec) {
  const auto m = model(spec);
  AbstractState phi = m->phi(x);
  if (phi.is_terminal()) {
    const double v = phi.terminal == TerminalClass::Goal ? 0.0 : failure_potential(*m);
    return {phi, phi, v};
  }
  {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(spec.task);
    if (it != entries_.end() && it->second->model == m) {
      if (const PlanNode* node = it->second->solution.find(phi)) {
        ++hits_;
        return answer(phi, *node);
      }
    }
  }
  ++misses_;
  PlanSolution fresh = solve(*m, phi);
  ++solves_;
  expansions_ += fresh.expanded;
  PlanQuery result = answer(phi, fresh.nodes.at(phi));
  std::unique_lock lock(mutex_);
  Entry& e = entry_locked(spec);
  if (e.solution.nodes.empty()) {
    e.solution = std::move(fresh);
  } else {
    for (auto& [s, node] : fresh.nodes) e.solution.nodes.try_emplace(s, std::move(node));
    e.solution.expanded += fresh.expanded;
  }
  return result;
}

CacheStats PlannerCache::stats() const {
  return {solves_.load(), expansions_.load(), hits_.load(), misses_.load(), evictions_.load()};
}

std::size_t PlannerCache::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

void PlannerCache::clear() {
  std::unique_lock lock(mutex_);
  entries_.clear();
}

AbstractState subgoal(const SimState& x, const WorldSpec& spec, PlannerCache& cache) {
  return cache.subgoal(x, spec);
}

double potential(const SimState& x, const WorldSpec& spec, PlannerCache& cache) {
  return cache.potential(x, spec);
}

}  // namespace gcrs
