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

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gcrs/abstraction.hpp"
#include "gcrs/learner.hpp"
#include "gcrs/planner.hpp"
#include "gcrs/sim.hpp"
#include "gcrs/world.hpp"

namespace gcrs {

double shaped_reward(double r, double phi_prev, double phi_next, double gamma);

enum class AbstractionChoice : std::uint8_t { None, Grid, Room, RoomPos };

std::string_view to_string(AbstractionChoice a);
AbstractionChoice parse_abstraction(std::string_view name);

/// The (abstraction, subgoal, shaping) mode of a run. Vanilla has no
/// abstraction; Plan-RS shapes without subgoals; GCRS does both.
struct Method {
  AbstractionChoice abstraction = AbstractionChoice::Grid;
  bool subgoals = true;
  bool shaping = true;

  bool uses_planner() const { return abstraction != AbstractionChoice::None && (subgoals || shaping); }
  /// Throws InvalidConfig for shaping or subgoals without an abstraction.
  void validate() const;
  static Method gcrs(AbstractionChoice a = AbstractionChoice::Grid) { return {a, true, true}; }
  static Method plan_rs(AbstractionChoice a = AbstractionChoice::Grid) { return {a, false, true}; }
  static Method vanilla() { return {AbstractionChoice::None, false, false}; }
};

AbstractionKind abstraction_kind(AbstractionChoice a);
ObservationLayout make_layout(const Method& method, int max_items, int max_doors, int max_rooms);
std::unique_ptr<PlannerCache> make_cache(const Method& method, std::size_t capacity = 512);

struct TransitionRecord {
  Eigen::VectorXd observation;
  AbstractState subgoal;
  TaskDescriptor task;
  ActionCommand action;
  double raw_reward = 0.0;
  double shaped_reward = 0.0;
  double potential_prev = 0.0;
  double potential_next = 0.0;
  bool terminated = false;
  bool truncated = false;
  double value_estimate = 0.0;
  double log_prob = 0.0;
};

/// Planner view of a state for a method: phi, subgoal, and the potential
/// actually used for shaping (0 when shaping is off).
struct ShapingView {
  std::optional<PlanQuery> query;
  double potential = 0.0;
};

ShapingView shaping_view(const Method& method, PlannerCache* cache, const SimState& x,
                         const WorldSpec& spec);
void encode_with_view(const ObservationLayout& layout, const SimState& x, const ShapingView& view,
                      const WorldSpec& spec, Eigen::Ref<Eigen::VectorXd> out);

struct EpisodeResult {
  bool success = false;
  bool aborted = false;  // NoPathToGoal from the planner
  int length = 0;
  double raw_return = 0.0;
  double shaped_return = 0.0;
  double discounted_raw = 0.0;
  double discounted_shaped = 0.0;
  double potential_initial = 0.0;
  double potential_final = 0.0;
  std::vector<TransitionRecord> transitions;  // filled when requested
};

/// Chooses an action from the state, the planner view, and the encoded
/// observation; also reports (value, log_prob) for the record.
using Controller = std::function<ActionSample(const SimState&, const ShapingView&,
                                              const Eigen::VectorXd&)>;

/// Single-environment episode driver used by evaluation and the property
/// suites. Runs until termination or the spec's step limit.
EpisodeResult run_episode(const WorldSpec& spec, std::uint64_t reset_seed, const Method& method,
                          const ObservationLayout& layout, PlannerCache* cache, double gamma,
                          const Controller& controller, bool keep_transitions = false,
                          const SimParams& sim = {});

struct TrainerOptions {
  TrainConfig learner;
  Method method;
  int max_items = 4;
  int max_doors = 1;
  int max_rooms = 4;
  std::int64_t total_steps = 100000;
  std::uint64_t seed = 0;
  bool record_wall_clock = true;
  std::size_t cache_capacity = 512;
  int success_window = 100;
  bool bootstrap_truncation = true;
  std::string dump_path;
  SimParams sim;
};

struct MetricsRow {
  std::int64_t global_step = 0;
  std::int64_t episodes = 0;
  double success_rate = 0.0;
  double mean_raw_return = 0.0;
  double mean_shaped_return = 0.0;
  double mean_episode_len = 0.0;
  std::uint64_t planner_solves = 0;
  double wall_clock_s = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "global_step,episodes,success_rate,mean_raw_return,mean_shaped_return,mean_episode_len,"
    "planner_solves,wall_clock_s";
std::string metrics_line(const MetricsRow& row);

/// Lockstep trainer: `workers` environments step together, tasks are
/// resampled from the distribution whenever an episode ends, and the policy
/// is updated each time the rollout buffer fills.
class Trainer {
 public:
  Trainer(TaskDistribution dist, TrainerOptions options);

  /// Steps until the buffer fills, then updates. Returns the metrics row.
  MetricsRow iterate();
  void run(const std::function<void(const MetricsRow&)>& on_update = {});
  bool done() const { return global_step_ >= options_.total_steps; }

  const PolicyParams<double>& params() const { return params_; }
  PolicyParams<double>& params() { return params_; }
  const ObservationLayout& layout() const { return layout_; }
  const TrainerOptions& options() const { return options_; }
  std::int64_t global_step() const { return global_step_; }
  std::int64_t aborted_episodes() const { return aborted_; }
  PlannerCache* cache() { return cache_.get(); }
  const UpdateStats& last_update() const { return last_update_; }

 private:
  struct Worker {
    std::shared_ptr<const WorldSpec> spec;
    SimState state;
    ShapingView view;
    int length = 0;
    double raw_return = 0.0;
    double shaped_return = 0.0;
  };
  struct Finished {
    bool success;
    int length;
    double raw_return;
    double shaped_return;
  };

  void start_episode(Worker& w);
  void finish_episode(const Worker& w, bool success);
  MetricsRow metrics() const;

  TaskDistribution dist_;
  TrainerOptions options_;
  ObservationLayout layout_;
  std::unique_ptr<PlannerCache> cache_;
  PolicyParams<double> params_;
  Adam adam_;
  RolloutBuffer buffer_;
  std::vector<Worker> workers_;
  Rng task_rng_;
  Rng policy_rng_;
  Rng update_rng_;
  std::int64_t global_step_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t aborted_ = 0;
  int updates_ = 0;
  int total_updates_ = 1;
  std::deque<Finished> recent_;
  UpdateStats last_update_;
  double start_time_ = 0.0;
  Eigen::MatrixXd obs_;
};

struct EvalResult {
  double success_rate = 0.0;
  double mean_episode_len = 0.0;
  int episodes = 0;
  int aborted = 0;
};

/// Deterministic-policy evaluation on `episodes` tasks drawn from `dist`
/// (templates in rotation, seeds derived from `seed`).
EvalResult evaluate(const PolicyParams<double>& params, const ObservationLayout& layout,
                    const Method& method, const TaskDistribution& dist, int episodes,
                    std::uint64_t seed, const SimParams& sim = {});

/// Task drawn from a distribution: a template chosen uniformly with a fresh
/// generator seed.
TaskDescriptor sample_task(const TaskDistribution& dist, Rng& rng);

}  // namespace gcrs
