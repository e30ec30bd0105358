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

#include "gcrs/shaping.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "gcrs/error.hpp"

namespace gcrs {

double shaped_reward(double r, double phi_prev, double phi_next, double gamma) {
  return r + gamma * phi_next - phi_prev;
}

std::string_view to_string(AbstractionChoice a) {
  switch (a) {
    case AbstractionChoice::None: return "none";
    case AbstractionChoice::Grid: return "grid";
    case AbstractionChoice::Room: return "room";
    case AbstractionChoice::RoomPos: return "room+pos";
  }
  return "?";
}

AbstractionChoice parse_abstraction(std::string_view name) {
  if (name == "none") return AbstractionChoice::None;
  if (name == "grid") return AbstractionChoice::Grid;
  if (name == "room") return AbstractionChoice::Room;
  if (name == "room+pos" || name == "room_pos") return AbstractionChoice::RoomPos;
  throw Error(ErrorCode::InvalidConfig, "unknown abstraction '" + std::string(name) + "'");
}

void Method::validate() const {
  if (abstraction == AbstractionChoice::None && (subgoals || shaping)) {
    throw Error(ErrorCode::InvalidConfig,
                "abstraction none requires shaping = false and subgoal_conditioning = false");
  }
}

AbstractionKind abstraction_kind(AbstractionChoice a) {
  return (a == AbstractionChoice::Room || a == AbstractionChoice::RoomPos) ? AbstractionKind::Room
                                                                           : AbstractionKind::Grid;
}

ObservationLayout make_layout(const Method& method, int max_items, int max_doors, int max_rooms) {
  ObservationLayout l;
  l.kind = abstraction_kind(method.abstraction);
  l.subgoal_enabled = method.subgoals;
  l.room_pos = method.abstraction == AbstractionChoice::RoomPos;
  l.max_items = max_items;
  l.max_doors = max_doors;
  l.max_rooms = max_rooms;
  return l;
}

std::unique_ptr<PlannerCache> make_cache(const Method& method, std::size_t capacity) {
  if (!method.uses_planner()) return nullptr;
  return std::make_unique<PlannerCache>(abstraction_kind(method.abstraction), AbstractionParams{},
                                        capacity);
}

ShapingView shaping_view(const Method& method, PlannerCache* cache, const SimState& x,
                         const WorldSpec& spec) {
  ShapingView v;
  if (cache == nullptr || !method.uses_planner()) return v;
  v.query = cache->query(x, spec);
  v.potential = method.shaping ? v.query->potential : 0.0;
  return v;
}

void encode_with_view(const ObservationLayout& layout, const SimState& x, const ShapingView& view,
                      const WorldSpec& spec, Eigen::Ref<Eigen::VectorXd> out) {
  if (layout.subgoal_enabled && view.query) {
    encode_observation_into(layout, x, &view.query->phi, &view.query->subgoal, spec, out);
  } else {
    encode_observation_into(layout, x, nullptr, nullptr, spec, out);
  }
}

namespace {

bool is_no_path(const Error& e) { return e.code() == ErrorCode::NoPathToGoal; }

double abort_potential(const Method& method, PlannerCache* cache, const WorldSpec& spec) {
  if (!method.shaping || cache == nullptr) return 0.0;
  return failure_potential(*cache->model(spec));
}

}  // namespace

EpisodeResult run_episode(const WorldSpec& spec, std::uint64_t reset_seed, const Method& method,
                          const ObservationLayout& layout, PlannerCache* cache, double gamma,
                          const Controller& controller, bool keep_transitions,
                          const SimParams& sim) {
  EpisodeResult result;
  SimState state = reset(spec, reset_seed, sim);
  ShapingView view;
  try {
    view = shaping_view(method, cache, state, spec);
  } catch (const Error& e) {
    if (!is_no_path(e)) throw;
    result.aborted = true;
    return result;
  }
  result.potential_initial = view.potential;
  Eigen::VectorXd obs(layout.size());
  double discount = 1.0;
  while (true) {
    encode_with_view(layout, state, view, spec, obs);
    const ActionSample a = controller(state, view, obs);
    StepOutcome out = step(state, a.command, spec, sim);
    ShapingView next_view;
    bool aborted = false;
    try {
      next_view = shaping_view(method, cache, out.next, spec);
    } catch (const Error& e) {
      if (!is_no_path(e)) throw;
      aborted = true;
      next_view.potential = abort_potential(method, cache, spec);
    }
    const double shaped = shaped_reward(out.reward, view.potential, next_view.potential, gamma);
    const bool terminated = out.terminated || aborted;
    const bool truncated = out.truncated && !terminated;
    result.raw_return += out.reward;
    result.shaped_return += shaped;
    result.discounted_raw += discount * out.reward;
    result.discounted_shaped += discount * shaped;
    discount *= gamma;
    ++result.length;
    if (keep_transitions) {
      TransitionRecord rec;
      rec.observation = obs;
      if (view.query) rec.subgoal = view.query->subgoal;
      rec.task = spec.task;
      rec.action = a.command;
      rec.raw_reward = out.reward;
      rec.shaped_reward = shaped;
      rec.potential_prev = view.potential;
      rec.potential_next = next_view.potential;
      rec.terminated = terminated;
      rec.truncated = truncated;
      rec.value_estimate = a.value;
      rec.log_prob = a.log_prob;
      result.transitions.push_back(std::move(rec));
    }
    if (terminated || truncated) {
      result.success = out.reason == StepReason::Goal;
      result.aborted = aborted;
      result.potential_final = next_view.potential;
      return result;
    }
    state = std::move(out.next);
    view = std::move(next_view);
  }
}

std::string metrics_line(const MetricsRow& r) {
  return std::to_string(r.global_step) + ',' + std::to_string(r.episodes) + ',' +
         format_double(r.success_rate) + ',' + format_double(r.mean_raw_return) + ',' +
         format_double(r.mean_shaped_return) + ',' + format_double(r.mean_episode_len) + ',' +
         std::to_string(r.planner_solves) + ',' + format_double(r.wall_clock_s);
}

TaskDescriptor sample_task(const TaskDistribution& dist, Rng& rng) {
  if (dist.templates.empty()) throw Error(ErrorCode::InvalidConfig, "empty task distribution");
  TaskDescriptor t = dist.templates[static_cast<std::size_t>(
      rng.below(static_cast<std::uint64_t>(dist.templates.size())))];
  t.seed = rng.next_u64();
  return t;
}

namespace {

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

}  // namespace

Trainer::Trainer(TaskDistribution dist, TrainerOptions options)
    : dist_(std::move(dist)),
      options_(std::move(options)),
      layout_(make_layout(options_.method, options_.max_items, options_.max_doors, options_.max_rooms)),
      cache_(make_cache(options_.method, options_.cache_capacity)),
      task_rng_(derive_seed(options_.seed, 1)),
      policy_rng_(derive_seed(options_.seed, 2)),
      update_rng_(derive_seed(options_.seed, 3)) {
  options_.learner.validate();
  options_.method.validate();
  if (options_.total_steps <= 0) throw Error(ErrorCode::InvalidConfig, "n_env_steps must be > 0");
  if (dist_.templates.empty()) throw Error(ErrorCode::InvalidConfig, "empty task distribution");
  Rng init_rng(derive_seed(options_.seed, 4));
  params_ = PolicyParams<double>::random(layout_.size(), options_.learner.hidden, init_rng,
                                         options_.learner.log_std_init);
  const std::int64_t per_update =
      static_cast<std::int64_t>(options_.learner.rollout_len) * options_.learner.workers;
  total_updates_ = static_cast<int>((options_.total_steps + per_update - 1) / per_update);
  workers_.resize(static_cast<std::size_t>(options_.learner.workers));
  obs_.setZero(layout_.size(), options_.learner.workers);
  start_time_ = now_seconds();
  for (auto& w : workers_) start_episode(w);
}

void Trainer::start_episode(Worker& w) {
  for (int attempt = 0;; ++attempt) {
    const TaskDescriptor task = sample_task(dist_, task_rng_);
    w.spec = std::make_shared<const WorldSpec>(generate_task(task));
    w.state = reset(*w.spec, task_rng_.next_u64(), options_.sim);
    w.length = 0;
    w.raw_return = 0.0;
    w.shaped_return = 0.0;
    try {
      w.view = shaping_view(options_.method, cache_.get(), w.state, *w.spec);
      return;
    } catch (const Error& e) {
      if (!is_no_path(e) || attempt >= 100) throw;
      ++aborted_;
      ++episodes_;
      recent_.push_back({false, 0, 0.0, 0.0});
      if (static_cast<int>(recent_.size()) > options_.success_window) recent_.pop_front();
    }
  }
}

void Trainer::finish_episode(const Worker& w, bool success) {
  ++episodes_;
  recent_.push_back({success, w.length, w.raw_return, w.shaped_return});
  if (static_cast<int>(recent_.size()) > options_.success_window) recent_.pop_front();
}

MetricsRow Trainer::metrics() const {
  MetricsRow row;
  row.global_step = global_step_;
  row.episodes = episodes_;
  if (!recent_.empty()) {
    const double n = static_cast<double>(recent_.size());
    for (const auto& f : recent_) {
      row.success_rate += f.success ? 1.0 : 0.0;
      row.mean_raw_return += f.raw_return;
      row.mean_shaped_return += f.shaped_return;
      row.mean_episode_len += f.length;
    }
    row.success_rate /= n;
    row.mean_raw_return /= n;
    row.mean_shaped_return /= n;
    row.mean_episode_len /= n;
  }
  row.planner_solves = cache_ ? cache_->stats().solves : 0;
  row.wall_clock_s = options_.record_wall_clock ? now_seconds() - start_time_ : 0.0;
  return row;
}

MetricsRow Trainer::iterate() {
  const TrainConfig& cfg = options_.learner;
  const int n_workers = cfg.workers;
  buffer_.reset(cfg.rollout_len, n_workers, layout_.size());
  Eigen::VectorXd tail_obs(layout_.size());

  for (int t = 0; t < cfg.rollout_len; ++t) {
    for (int wi = 0; wi < n_workers; ++wi) {
      const Worker& w = workers_[static_cast<std::size_t>(wi)];
      encode_with_view(layout_, w.state, w.view, *w.spec, obs_.col(wi));
    }
    const auto samples = sample_actions(params_, obs_, PolicyMode::Train, policy_rng_, cfg.rpo_alpha);
    for (int wi = 0; wi < n_workers; ++wi) {
      Worker& w = workers_[static_cast<std::size_t>(wi)];
      const ActionSample& a = samples[static_cast<std::size_t>(wi)];
      const Eigen::Index idx = buffer_.index(t, wi);
      buffer_.obs.col(idx) = obs_.col(wi);
      buffer_.actions.col(idx) = a.raw;
      buffer_.perturbations.col(idx) = a.perturbation;
      buffer_.log_probs(idx) = a.log_prob;
      buffer_.values(idx) = a.value;

      StepOutcome out = step(w.state, a.command, *w.spec, options_.sim);
      ShapingView next_view;
      bool aborted = false;
      try {
        next_view = shaping_view(options_.method, cache_.get(), out.next, *w.spec);
      } catch (const Error& e) {
        if (!is_no_path(e)) throw;
        aborted = true;
        next_view.potential = abort_potential(options_.method, cache_.get(), *w.spec);
      }
      const double shaped =
          shaped_reward(out.reward, w.view.potential, next_view.potential, cfg.gamma);
      const bool terminated = out.terminated || aborted;
      const bool truncated = out.truncated && !terminated;
      buffer_.rewards(idx) = shaped;
      buffer_.terminated[static_cast<std::size_t>(idx)] =
          terminated || (truncated && !options_.bootstrap_truncation);
      buffer_.truncated[static_cast<std::size_t>(idx)] = truncated;
      if (truncated && options_.bootstrap_truncation) {
        encode_with_view(layout_, out.next, next_view, *w.spec, tail_obs);
        buffer_.bootstrap(idx) = params_.critic.forward(tail_obs)(0, 0);
      }
      ++w.length;
      w.raw_return += out.reward;
      w.shaped_return += shaped;
      if (terminated || truncated) {
        if (aborted) ++aborted_;
        finish_episode(w, out.reason == StepReason::Goal);
        start_episode(w);
      } else {
        w.state = std::move(out.next);
        w.view = std::move(next_view);
      }
    }
    global_step_ += n_workers;
    buffer_.filled = t + 1;
  }

  for (int wi = 0; wi < n_workers; ++wi) {
    const Worker& w = workers_[static_cast<std::size_t>(wi)];
    encode_with_view(layout_, w.state, w.view, *w.spec, obs_.col(wi));
  }
  const Eigen::VectorXd last_values = params_.critic.forward(obs_).row(0).transpose();
  const Advantages adv = compute_gae(buffer_, last_values, cfg.gamma, cfg.gae_lambda);
  double lr = cfg.learning_rate;
  if (cfg.anneal_lr) lr *= std::max(0.0, 1.0 - static_cast<double>(updates_) / total_updates_);
  last_update_ = update(params_, adam_, buffer_, adv, cfg, lr, update_rng_, options_.dump_path);
  ++updates_;
  return metrics();
}

void Trainer::run(const std::function<void(const MetricsRow&)>& on_update) {
  while (!done()) {
    const MetricsRow row = iterate();
    if (on_update) on_update(row);
  }
}

EvalResult evaluate(const PolicyParams<double>& params, const ObservationLayout& layout,
                    const Method& method, const TaskDistribution& dist, int episodes,
                    std::uint64_t seed, const SimParams& sim) {
  if (episodes <= 0) throw Error(ErrorCode::InvalidConfig, "episodes must be > 0");
  if (dist.templates.empty()) throw Error(ErrorCode::InvalidConfig, "empty task distribution");
  Method eval_method = method;
  eval_method.shaping = false;
  auto cache = make_cache(eval_method);
  Rng rng(seed);
  const Controller controller = [&](const SimState&, const ShapingView&, const Eigen::VectorXd& obs) {
    return sample_action(params, obs, PolicyMode::Eval, rng, 0.0);
  };
  EvalResult r;
  r.episodes = episodes;
  double total_len = 0.0;
  int successes = 0;
  for (int i = 0; i < episodes; ++i) {
    TaskDescriptor t = dist.templates[static_cast<std::size_t>(i) % dist.templates.size()];
    t.seed = derive_seed(seed, 2 * static_cast<std::uint64_t>(i));
    const WorldSpec spec = generate_task(t);
    const EpisodeResult e = run_episode(spec, derive_seed(seed, 2 * static_cast<std::uint64_t>(i) + 1),
                                        eval_method, layout, cache.get(), 0.99, controller, false, sim);
    successes += e.success ? 1 : 0;
    r.aborted += e.aborted ? 1 : 0;
    total_len += e.length;
  }
  r.success_rate = static_cast<double>(successes) / episodes;
  r.mean_episode_len = total_len / episodes;
  return r;
}

}  // namespace gcrs
