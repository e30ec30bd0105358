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

#include <gtest/gtest.h>

#include <cmath>

#include "gcrs/error.hpp"
#include "gcrs/random.hpp"
#include "gcrs/shaping.hpp"

namespace gcrs {
namespace {

constexpr double kGamma = 0.99;

// Uniform random actions held for a few steps, drawn from a private stream.
Controller random_controller(std::uint64_t seed, std::vector<ActionCommand>* log = nullptr) {
  auto rng = std::make_shared<Rng>(seed);
  auto current = std::make_shared<ActionCommand>();
  auto counter = std::make_shared<int>(0);
  return [=](const SimState&, const ShapingView&, const Eigen::VectorXd&) {
    if ((*counter)++ % 6 == 0) {
      current->force = Vec2(rng->uniform(-1, 1), rng->uniform(-1, 1));
      current->grab = rng->uniform(-1, 1);
    }
    if (log != nullptr) log->push_back(*current);
    ActionSample a;
    a.command = *current;
    return a;
  };
}

// Replays a fixed action list, then idles.
Controller replay_controller(const std::vector<ActionCommand>& actions) {
  auto i = std::make_shared<std::size_t>(0);
  return [=](const SimState&, const ShapingView&, const Eigen::VectorXd&) {
    ActionSample a;
    if (*i < actions.size()) a.command = actions[(*i)++];
    return a;
  };
}

TEST(ShapedReward, Arithmetic) {
  EXPECT_NEAR(shaped_reward(0.0, -4.0, -3.0, 0.99), 1.03, 1e-12);
  EXPECT_NEAR(shaped_reward(1.0, -1.0, 0.0, 0.99), 2.0, 1e-12);
  EXPECT_EQ(shaped_reward(0.0, -4.0, -4.0, 1.0), 0.0);
}

TEST(Method, Validation) {
  EXPECT_NO_THROW(Method::gcrs().validate());
  EXPECT_NO_THROW(Method::plan_rs().validate());
  EXPECT_NO_THROW(Method::vanilla().validate());
  try {
    Method{AbstractionChoice::None, false, true}.validate();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InvalidConfig);
  }
  EXPECT_THROW((Method{AbstractionChoice::None, true, false}.validate()), Error);
  EXPECT_EQ(parse_abstraction("room+pos"), AbstractionChoice::RoomPos);
  EXPECT_THROW(parse_abstraction("voxel"), Error);
}

TEST(Shaping, DisabledIsIdentity) {
  const WorldSpec spec = generate_task(Family::SimpleCrossing, 1, 3);
  const Method method{AbstractionChoice::Grid, true, false};
  auto cache = make_cache(method);
  const auto layout = make_layout(method, 4, 1, 4);
  const EpisodeResult ep =
      run_episode(spec, 0, method, layout, cache.get(), kGamma, random_controller(1), true);
  ASSERT_FALSE(ep.transitions.empty());
  for (const auto& t : ep.transitions) EXPECT_EQ(t.shaped_reward, t.raw_reward);
}

TEST(Shaping, PlanRsOnlyZeroesSubgoalBlock) {
  const WorldSpec spec = generate_task(Family::DoorKey, 6, 4);
  const SimState x = reset(spec, 0);
  auto cache = make_cache(Method::gcrs());
  const auto gcrs_layout = make_layout(Method::gcrs(), 4, 1, 4);
  const auto plan_layout = make_layout(Method::plan_rs(), 4, 1, 4);
  ASSERT_EQ(gcrs_layout.size(), plan_layout.size());

  const ShapingView a = shaping_view(Method::gcrs(), cache.get(), x, spec);
  const ShapingView b = shaping_view(Method::plan_rs(), cache.get(), x, spec);
  EXPECT_EQ(a.potential, b.potential);
  Eigen::VectorXd va(gcrs_layout.size()), vb(plan_layout.size());
  encode_with_view(gcrs_layout, x, a, spec, va);
  encode_with_view(plan_layout, x, b, spec, vb);
  const int lo = gcrs_layout.subgoal_offset();
  const int n = gcrs_layout.subgoal_size();
  EXPECT_TRUE(vb.segment(lo, n).isZero(0.0));
  EXPECT_FALSE(va.segment(lo, n).isZero(0.0));
  EXPECT_EQ(va.head(lo), vb.head(lo));
  EXPECT_EQ(va.tail(va.size() - lo - n), vb.tail(vb.size() - lo - n));
}

// Raw rewards and termination do not depend on whether shaping is on.
TEST(Shaping, NoSideEffectsOnEnvironment) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Family f = static_cast<Family>(seed % kFamilyCount);
    const WorldSpec spec = generate_task(f, difficulty_range(f).first, seed);
    std::vector<ActionCommand> actions;
    auto cache = make_cache(Method::gcrs());
    const auto layout = make_layout(Method::gcrs(), 4, 1, 4);
    const EpisodeResult on = run_episode(spec, seed, Method::gcrs(), layout, cache.get(), kGamma,
                                         random_controller(seed, &actions), true);
    const auto vlayout = make_layout(Method::vanilla(), 4, 1, 4);
    const EpisodeResult off = run_episode(spec, seed, Method::vanilla(), vlayout, nullptr, kGamma,
                                          replay_controller(actions), true);
    ASSERT_EQ(on.transitions.size(), off.transitions.size());
    for (std::size_t t = 0; t < on.transitions.size(); ++t) {
      EXPECT_EQ(on.transitions[t].raw_reward, off.transitions[t].raw_reward);
      EXPECT_EQ(on.transitions[t].terminated, off.transitions[t].terminated);
      EXPECT_EQ(on.transitions[t].truncated, off.transitions[t].truncated);
    }
    EXPECT_EQ(on.success, off.success);
  }
}

// The subgoal fed to the policy is a function of (x, task) alone.
TEST(Shaping, SubgoalReplayReproducesLog) {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const Family f = static_cast<Family>(seed % kFamilyCount);
    const WorldSpec spec = generate_task(f, difficulty_range(f).first, seed + 40);
    std::vector<ActionCommand> actions;
    auto cache = make_cache(Method::gcrs());
    const auto layout = make_layout(Method::gcrs(), 4, 1, 4);
    const EpisodeResult ep = run_episode(spec, seed, Method::gcrs(), layout, cache.get(), kGamma,
                                         random_controller(seed + 9, &actions), true);
    PlannerCache fresh(AbstractionKind::Grid);
    SimState x = reset(spec, seed);
    for (std::size_t t = 0; t < ep.transitions.size(); ++t) {
      ASSERT_EQ(fresh.subgoal(x, spec), ep.transitions[t].subgoal) << "t=" << t;
      x = step(x, actions[t], spec).next;
    }
  }
}

// Sum_t g^t shaped_t - Sum_t g^t raw_t = g^T Phi(x_T) - Phi(x_0).
TEST(ShapingProperties, Telescoping) {
  Rng rng(77);
  for (int ep_i = 0; ep_i < 300; ++ep_i) {
    const Family f = static_cast<Family>(ep_i % kFamilyCount);
    const WorldSpec spec = generate_task(f, difficulty_range(f).first, rng.next_u64());
    const Method method = ep_i % 3 == 0 ? Method::gcrs(AbstractionChoice::Room) : Method::gcrs();
    auto cache = make_cache(method);
    const auto layout = make_layout(method, 4, 1, 4);
    const EpisodeResult ep = run_episode(spec, rng.next_u64(), method, layout, cache.get(), kGamma,
                                         random_controller(rng.next_u64()), true);
    double shaped = 0.0, raw = 0.0, discount = 1.0;
    for (std::size_t t = 0; t < ep.transitions.size(); ++t) {
      const auto& tr = ep.transitions[t];
      ASSERT_EQ(tr.shaped_reward,
                shaped_reward(tr.raw_reward, tr.potential_prev, tr.potential_next, kGamma));
      if (t > 0) {
        ASSERT_EQ(tr.potential_prev, ep.transitions[t - 1].potential_next);
      }
      shaped += discount * tr.shaped_reward;
      raw += discount * tr.raw_reward;
      discount *= kGamma;
    }
    const double lhs = shaped - raw;
    const double rhs = discount * ep.transitions.back().potential_next -
                       ep.transitions.front().potential_prev;
    ASSERT_NEAR(lhs, rhs, 1e-9);
    ASSERT_EQ(ep.transitions.front().potential_prev, ep.potential_initial);
  }
}

TEST(Trainer, DeterministicMetricsAndParams) {
  TrainerOptions o;
  o.learner.rollout_len = 32;
  o.learner.workers = 4;
  o.learner.minibatches = 2;
  o.learner.epochs = 2;
  o.total_steps = 1024;
  o.seed = 5;
  o.record_wall_clock = false;
  auto run = [&] {
    Trainer t(single_task_distribution(Family::UMaze, 2), o);
    std::vector<std::string> lines;
    t.run([&](const MetricsRow& r) { lines.push_back(metrics_line(r)); });
    return std::make_pair(lines, t.params().flatten());
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first.size(), 8u);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Trainer, SeedsDiffer) {
  TrainerOptions o;
  o.learner.rollout_len = 32;
  o.learner.workers = 2;
  o.total_steps = 64;
  o.record_wall_clock = false;
  Trainer a(single_task_distribution(Family::UMaze, 2), o);
  o.seed = 1;
  Trainer b(single_task_distribution(Family::UMaze, 2), o);
  EXPECT_NE(a.params().flatten(), b.params().flatten());
}

TEST(Evaluate, Deterministic) {
  TrainerOptions o;
  o.learner.rollout_len = 16;
  o.learner.workers = 2;
  o.total_steps = 32;
  Trainer t(single_task_distribution(Family::UMaze, 2), o);
  t.run();
  const auto dist = single_task_distribution(Family::UMaze, 2);
  const EvalResult a = evaluate(t.params(), t.layout(), o.method, dist, 6, 3);
  const EvalResult b = evaluate(t.params(), t.layout(), o.method, dist, 6, 3);
  EXPECT_EQ(a.episodes, 6);
  EXPECT_EQ(a.success_rate, b.success_rate);
  EXPECT_EQ(a.mean_episode_len, b.mean_episode_len);
}

}  // namespace
}  // namespace gcrs
