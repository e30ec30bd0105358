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
#include <filesystem>
#include <numbers>

#include "gcrs/abstraction.hpp"
#include "gcrs/error.hpp"
#include "gcrs/learner.hpp"
#include "gradcheck.hpp"

namespace gcrs {
namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorCode::Io;
}

Eigen::VectorXd flat(const Mlp<double>& m) {
  Eigen::VectorXd out(m.size());
  Eigen::Index at = 0;
  m.flatten_into(out, at);
  return out;
}

// ---------------------------------------------------------------------------
// Observation encoding

TEST(Encode, Deterministic) {
  const WorldSpec spec = generate_task(Family::DoorKey, 6, 3);
  const SimState x = reset(spec, 0);
  const AbstractModel model(spec, AbstractionKind::Grid);
  const AbstractState cur = model.phi(x);
  const AbstractState sub = model.successors(cur).front().next;
  const ObservationLayout layout;
  EXPECT_EQ(encode_observation(layout, x, &cur, &sub, spec),
            encode_observation(layout, x, &cur, &sub, spec));
  EXPECT_EQ(encode_observation(layout, x, &cur, &sub, spec).size(), layout.size());
}

TEST(Encode, DisabledSubgoalBlockIsZero) {
  const WorldSpec spec = generate_task(Family::DoorKey, 6, 3);
  const SimState x = reset(spec, 0);
  const AbstractModel model(spec, AbstractionKind::Grid);
  const AbstractState cur = model.phi(x);
  const AbstractState sub = model.successors(cur).front().next;
  ObservationLayout layout;
  layout.subgoal_enabled = false;
  const Eigen::VectorXd v = encode_observation(layout, x, &cur, &sub, spec);
  EXPECT_TRUE(v.segment(layout.subgoal_offset(), layout.subgoal_size()).isZero(0.0));
}

TEST(Encode, GridSubgoalLocality) {
  const WorldSpec spec = parse_map("...\n.A.\n..G");
  const SimState x = reset(spec, 0);
  const AbstractModel model(spec, AbstractionKind::Grid);
  const AbstractState cur = model.phi(x);
  AbstractState right = cur;
  right.agent_cell = {2, 1};
  AbstractState down = cur;
  down.agent_cell = {1, 2};
  const ObservationLayout layout;
  const Eigen::VectorXd a = encode_observation(layout, x, &cur, &right, spec);
  const Eigen::VectorXd b = encode_observation(layout, x, &cur, &down, spec);
  const int at = layout.subgoal_offset();
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (i == at || i == at + 1) {
      EXPECT_NE(a(i), b(i));
    } else {
      EXPECT_EQ(a(i), b(i)) << "entry " << i;
    }
  }
  EXPECT_DOUBLE_EQ(a(at), 2.5 / 3.0);
  EXPECT_DOUBLE_EQ(a(at + 1), 1.5 / 3.0);
  EXPECT_EQ(a(at + 2 + static_cast<int>(Manipulation::Move)), 1.0);
}

TEST(Encode, ManipulationKinds) {
  const WorldSpec spec = parse_map("WWWWWWW\nWAKD.GW\nWWWWWWW");
  const AbstractModel model(spec, AbstractionKind::Grid);
  SimState x = reset(spec, 0);
  x.agent_pos = spec.cell_center({2, 1});
  const AbstractState on_key = model.phi(x);
  int index = -2;
  for (const auto& s : model.successors(on_key)) {
    const Manipulation m = infer_manipulation(on_key, s.next, &index);
    if (s.action.kind == MacroKind::PickUp) {
      EXPECT_EQ(m, Manipulation::PickUp);
      EXPECT_EQ(index, 0);
      for (const auto& t : model.successors(s.next)) {
        if (t.action.kind == MacroKind::UnlockDoor) {
          EXPECT_EQ(infer_manipulation(s.next, t.next, &index), Manipulation::Unlock);
        }
        if (t.action.kind == MacroKind::Drop) {
          EXPECT_EQ(infer_manipulation(s.next, t.next, &index), Manipulation::Drop);
        }
      }
    } else if (s.action.kind == MacroKind::MoveTo) {
      EXPECT_EQ(m, Manipulation::Move);
      EXPECT_EQ(index, -1);
    }
  }
  EXPECT_EQ(infer_manipulation(on_key, on_key, &index), Manipulation::None);
}

TEST(Encode, Errors) {
  const WorldSpec spec = generate_task(Family::DoorKey, 6, 3);
  const SimState x = reset(spec, 0);
  const AbstractState room = phi_room(x, spec);
  const ObservationLayout grid_layout;
  EXPECT_EQ(code_of([&] { encode_observation(grid_layout, x, &room, &room, spec); }),
            ErrorCode::VariantMismatch);
  ObservationLayout small;
  small.max_doors = 0;
  EXPECT_EQ(code_of([&] { encode_observation(small, x, nullptr, nullptr, spec); }),
            ErrorCode::InvalidConfig);
}

TEST(Encode, RoomPosAppendsTargetCell) {
  const WorldSpec spec = generate_task(Family::ObjectDelivery, 3, 2);
  const SimState x = reset(spec, 0);
  const AbstractState cur = phi_room(x, spec);
  ObservationLayout layout;
  layout.kind = AbstractionKind::Room;
  layout.room_pos = true;
  const Eigen::VectorXd v = encode_observation(layout, x, &cur, &cur, spec);
  const int at = layout.task_offset() - 2;
  const Cell c = spec.cell_of(x.item_pos(*spec.target_item()));
  EXPECT_DOUBLE_EQ(v(at), (c.col + 0.5) / spec.width);
  EXPECT_DOUBLE_EQ(v(at + 1), (c.row + 0.5) / spec.height);
}

TEST(Encode, TaskBlockCarriesTarget) {
  const WorldSpec spec = generate_task(Family::ObjectDelivery, 3, 2);
  const Eigen::VectorXd v = encode_observation(ObservationLayout{}, reset(spec, 0), nullptr,
                                               nullptr, spec);
  const int at = ObservationLayout{}.task_offset();
  EXPECT_EQ(v(at + static_cast<int>(Family::ObjectDelivery)), 1.0);
  EXPECT_GT(v(at + kFamilyCount + 1), 0.0);
}

// ---------------------------------------------------------------------------
// Sampling

PolicyParams<double> small_policy(std::uint64_t seed, int obs_dim = 6) {
  Rng rng(seed);
  auto p = PolicyParams<double>::random(obs_dim, 8, rng);
  for (Eigen::Index i = 0; i < p.actor.w3.size(); ++i) p.actor.w3(i) = rng.normal();
  return p;
}

TEST(Sample, EvalModeIsClampedMean) {
  auto p = small_policy(1);
  p.log_std.setConstant(-5.0);
  Rng rng(2);
  Eigen::VectorXd obs = Eigen::VectorXd::LinSpaced(6, -1.0, 1.0);
  const ActionSample s = sample_action(p, obs, PolicyMode::Eval, rng, 0.0);
  const Eigen::VectorXd mean = p.actor.forward(obs);
  EXPECT_EQ(s.raw, Eigen::Vector3d(mean));
  EXPECT_EQ(s.command.force.x(), std::clamp(mean(0), -1.0, 1.0));
  EXPECT_EQ(s.command.force.y(), std::clamp(mean(1), -1.0, 1.0));
  EXPECT_EQ(s.command.grab, std::clamp(mean(2), -1.0, 1.0));
  EXPECT_EQ(s.value, p.critic.forward(obs)(0));
}

TEST(Sample, LogProbBoundedByMode) {
  const auto p = small_policy(3);
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd obs(6);
    for (int k = 0; k < 6; ++k) obs(k) = rng.normal();
    const ActionSample s = sample_action(p, obs, PolicyMode::Train, rng, 0.5);
    const Eigen::VectorXd mean = p.actor.forward(obs) + Eigen::VectorXd(s.perturbation);
    EXPECT_TRUE(std::isfinite(s.log_prob));
    EXPECT_LE(s.log_prob, gaussian_log_prob(mean, mean, p.log_std));
    EXPECT_NEAR(s.log_prob, gaussian_log_prob(s.raw, mean, p.log_std), 1e-12);
    EXPECT_LE(s.perturbation.cwiseAbs().maxCoeff(), 0.5);
  }
}

// With alpha = 0 the draw is the plain Gaussian on the same random stream.
TEST(Sample, RpoReducesToGaussian) {
  const auto p = small_policy(5);
  Eigen::VectorXd obs = Eigen::VectorXd::Constant(6, 0.3);
  const Eigen::VectorXd mean = p.actor.forward(obs);
  Rng a(9), b(9);
  for (int i = 0; i < 50; ++i) {
    const ActionSample s = sample_action(p, obs, PolicyMode::Train, a, 0.0);
    Eigen::Vector3d raw;
    for (int d = 0; d < kActionDim; ++d) raw(d) = mean(d) + std::exp(p.log_std(d)) * b.normal();
    EXPECT_EQ(s.perturbation, Eigen::Vector3d::Zero());
    EXPECT_EQ(s.raw, raw);
    EXPECT_EQ(s.log_prob, gaussian_log_prob(raw, mean, p.log_std));
  }
}

// The density integrates over the clamp interval to the truncated-Gaussian
// mass, which Monte Carlo sampling reproduces.
TEST(Sample, OneDimensionalMassMatches) {
  const double cases[3][2] = {{0.0, 0.5}, {0.7, 0.6}, {-0.4, 1.5}};
  for (const auto& c : cases) {
    const double mu = c[0], sd = c[1];
    const Eigen::VectorXd m = Eigen::VectorXd::Constant(1, mu);
    const Eigen::VectorXd ls = Eigen::VectorXd::Constant(1, std::log(sd));
    const int n = 20000;
    double integral = 0.0;
    for (int i = 0; i < n; ++i) {
      const Eigen::VectorXd x = Eigen::VectorXd::Constant(1, -1.0 + (i + 0.5) * 2.0 / n);
      integral += std::exp(gaussian_log_prob(x, m, ls)) * 2.0 / n;
    }
    const double analytic = 0.5 * (std::erf((1.0 - mu) / (sd * std::numbers::sqrt2)) -
                                   std::erf((-1.0 - mu) / (sd * std::numbers::sqrt2)));
    EXPECT_LE(integral, 1.0);
    EXPECT_NEAR(integral, analytic, 1e-6);

    PolicyParams<double> p = PolicyParams<double>::zeros(1, 2);
    p.actor.b3(0) = mu;
    p.log_std(0) = std::log(sd);
    Rng rng(42);
    int inside = 0;
    const int draws = 40000;
    for (int i = 0; i < draws; ++i) {
      const ActionSample s = sample_action(p, Eigen::VectorXd::Zero(1), PolicyMode::Train, rng, 0.0);
      inside += std::abs(s.raw(0)) <= 1.0;
    }
    EXPECT_NEAR(static_cast<double>(inside) / draws, analytic, 0.02 * analytic);
  }
}

TEST(Sample, NonFiniteParams) {
  auto p = small_policy(1);
  p.critic.b3(0) = std::nan("");
  Rng rng(0);
  EXPECT_EQ(code_of([&] {
              sample_action(p, Eigen::VectorXd::Zero(6), PolicyMode::Train, rng, 0.5);
            }),
            ErrorCode::NonFiniteParams);
}

// ---------------------------------------------------------------------------
// Advantages

TEST(Gae, MonteCarloLimit) {
  const Eigen::VectorXd r = (Eigen::VectorXd(4) << 0.5, -1.0, 2.0, 0.25).finished();
  const Eigen::VectorXd v = (Eigen::VectorXd(4) << 0.1, 0.2, -0.3, 0.4).finished();
  const std::vector<char> term{0, 0, 0, 1}, trunc(4, 0);
  const Advantages a = compute_gae(r, v, term, trunc, Eigen::VectorXd::Zero(4), 9.0, 1.0, 1.0);
  for (int t = 0; t < 4; ++t) {
    EXPECT_NEAR(a.advantages(t), r.tail(4 - t).sum() - v(t), 1e-12);
    EXPECT_NEAR(a.returns(t), r.tail(4 - t).sum(), 1e-12);
  }
}

TEST(Gae, ZeroFixedPoint) {
  const std::vector<char> flags(5, 0);
  const Advantages a = compute_gae(Eigen::VectorXd::Zero(5), Eigen::VectorXd::Zero(5), flags,
                                   flags, Eigen::VectorXd::Zero(5), 0.0, 0.99, 0.95);
  EXPECT_TRUE(a.advantages.isZero(0.0));
}

TEST(Gae, SingleTerminalStep) {
  const Advantages a = compute_gae(Eigen::VectorXd::Constant(1, 1.0), Eigen::VectorXd::Constant(1, 0.5),
                                   {1}, {0}, Eigen::VectorXd::Zero(1), 7.0, 0.99, 0.95);
  EXPECT_DOUBLE_EQ(a.advantages(0), 0.5);
}

TEST(Gae, TruncationBootstrapsAndCutsTrace) {
  const Eigen::VectorXd r = Eigen::VectorXd::Zero(3);
  const Eigen::VectorXd v = (Eigen::VectorXd(3) << 1.0, 2.0, 3.0).finished();
  const Eigen::VectorXd boot = (Eigen::VectorXd(3) << 0.0, 10.0, 0.0).finished();
  const Advantages a = compute_gae(r, v, {0, 0, 0}, {0, 1, 0}, boot, 4.0, 0.5, 1.0);
  EXPECT_DOUBLE_EQ(a.advantages(2), 0.5 * 4.0 - 3.0);
  EXPECT_DOUBLE_EQ(a.advantages(1), 0.5 * 10.0 - 2.0);
  EXPECT_DOUBLE_EQ(a.advantages(0), (0.5 * 2.0 - 1.0) + 0.5 * a.advantages(1));
}

TEST(Gae, BufferMatchesPerWorkerSequences) {
  RolloutBuffer buf;
  buf.reset(5, 3, 2);
  Rng rng(8);
  for (int i = 0; i < buf.capacity(); ++i) {
    buf.rewards(i) = rng.normal();
    buf.values(i) = rng.normal();
    buf.bootstrap(i) = rng.normal();
    buf.terminated[static_cast<std::size_t>(i)] = rng.below(5) == 0;
    buf.truncated[static_cast<std::size_t>(i)] = !buf.terminated[static_cast<std::size_t>(i)] && rng.below(5) == 0;
  }
  buf.filled = 5;
  const Eigen::VectorXd last = (Eigen::VectorXd(3) << 0.3, -0.2, 1.1).finished();
  const Advantages all = compute_gae(buf, last, 0.97, 0.9);
  for (int w = 0; w < 3; ++w) {
    Eigen::VectorXd r(5), v(5), b(5);
    std::vector<char> te(5), tr(5);
    for (int t = 0; t < 5; ++t) {
      const auto i = buf.index(t, w);
      r(t) = buf.rewards(i);
      v(t) = buf.values(i);
      b(t) = buf.bootstrap(i);
      te[static_cast<std::size_t>(t)] = buf.terminated[static_cast<std::size_t>(i)];
      tr[static_cast<std::size_t>(t)] = buf.truncated[static_cast<std::size_t>(i)];
    }
    const Advantages one = compute_gae(r, v, te, tr, b, last(w), 0.97, 0.9);
    for (int t = 0; t < 5; ++t) EXPECT_DOUBLE_EQ(all.advantages(buf.index(t, w)), one.advantages(t));
  }
}

// ---------------------------------------------------------------------------
// Loss and update

TEST(Loss, ZeroAdvantagesGiveNoActorGradient) {
  Rng rng(3);
  auto g = oracle::random_instance(rng, 5, 3, 4);
  g.batch.advantages.setZero();
  g.coef.entropy_coef = 0.0;
  PolicyParams<double> grad;
  loss_and_gradient(g.params, g.batch, g.coef, &grad);
  EXPECT_TRUE(flat(grad.actor).isZero(0.0));
  EXPECT_TRUE(grad.log_std.isZero(0.0));
  EXPECT_GT(flat(grad.critic).norm(), 0.0);
}

TEST(Loss, ClippedSampleHasNoActorGradient) {
  Rng rng(4);
  auto g = oracle::random_instance(rng, 5, 3, 1);
  g.coef.entropy_coef = 0.0;
  g.batch.advantages(0) = 1.5;
  const Eigen::MatrixXd mean = g.params.actor.forward(g.batch.obs) + g.batch.perturbations;
  const double logp = gaussian_log_prob(g.batch.actions.col(0), mean.col(0), g.params.log_std);
  g.batch.old_log_probs(0) = logp - std::log(1.5);  // ratio 1.5 > 1 + eps
  PolicyParams<double> grad;
  const auto terms = loss_and_gradient(g.params, g.batch, g.coef, &grad);
  EXPECT_TRUE(flat(grad.actor).isZero(0.0));
  EXPECT_TRUE(grad.log_std.isZero(0.0));
  EXPECT_DOUBLE_EQ(terms.clip_fraction, 1.0);
  EXPECT_NEAR(terms.policy, -1.2 * 1.5, 1e-12);
}

TEST(Loss, FiniteDifferenceFourSamples) {
  Rng rng(2718);
  const auto g = oracle::random_instance(rng, 4, 3, 4);
  EXPECT_LT(oracle::gradient_relative_error(g), 1e-4);
}

TEST(LearnerProperties, GradientCorrectness) {
  Rng rng(1);
  for (int i = 0; i < 25; ++i) {
    const auto g = oracle::random_instance(rng, 2 + rng.below(5), 2 + rng.below(4), 1 + rng.below(6));
    ASSERT_LT(oracle::gradient_relative_error(g), 1e-4) << "instance " << i;
  }
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Adam adam;
  adam.eps = 0.0;
  Eigen::VectorXd x = (Eigen::VectorXd(3) << 1.0, 2.0, 3.0).finished();
  const Eigen::VectorXd g = (Eigen::VectorXd(3) << 0.5, -4.0, 1e-3).finished();
  adam.step(x, g, 0.1);
  EXPECT_NEAR(x(0), 0.9, 1e-12);
  EXPECT_NEAR(x(1), 2.1, 1e-12);
  EXPECT_NEAR(x(2), 2.9, 1e-12);
}

RolloutBuffer random_buffer(Rng& rng, int steps, int workers, int obs_dim,
                            const PolicyParams<double>& p) {
  RolloutBuffer buf;
  buf.reset(steps, workers, obs_dim);
  for (int i = 0; i < buf.capacity(); ++i) {
    for (int k = 0; k < obs_dim; ++k) buf.obs(k, i) = rng.normal();
    const ActionSample s = sample_action(p, buf.obs.col(i), PolicyMode::Train, rng, 0.5);
    buf.actions.col(i) = s.raw;
    buf.perturbations.col(i) = s.perturbation;
    buf.log_probs(i) = s.log_prob;
    buf.values(i) = s.value;
    buf.rewards(i) = rng.normal();
  }
  buf.filled = steps;
  return buf;
}

TEST(Update, DeterministicGivenSeed) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.minibatches = 4;
  auto run = [&] {
    Rng rng(6);
    PolicyParams<double> p = PolicyParams<double>::random(5, 8, rng);
    RolloutBuffer buf = random_buffer(rng, 8, 4, 5, p);
    const Advantages adv = compute_gae(buf, Eigen::VectorXd::Zero(4), 0.99, 0.95);
    Adam adam;
    update(p, adam, buf, adv, cfg, 3e-4, rng);
    return p.flatten();
  };
  EXPECT_EQ(run(), run());
}

TEST(Update, ZeroAdvantagesMoveOnlyCritic) {
  Rng rng(7);
  PolicyParams<double> p = PolicyParams<double>::random(5, 8, rng);
  const PolicyParams<double> before = p;
  RolloutBuffer buf = random_buffer(rng, 8, 2, 5, p);
  Advantages adv{Eigen::VectorXd::Zero(16), Eigen::VectorXd::Constant(16, 3.0)};
  TrainConfig cfg;
  cfg.minibatches = 2;
  Adam adam;
  update(p, adam, buf, adv, cfg, 1e-3, rng);
  EXPECT_EQ(flat(p.actor), flat(before.actor));
  EXPECT_EQ(p.log_std, before.log_std);
  EXPECT_NE(flat(p.critic), flat(before.critic));
}

TEST(Update, NonFiniteLossDumpsMinibatch) {
  Rng rng(9);
  PolicyParams<double> p = PolicyParams<double>::random(5, 8, rng);
  RolloutBuffer buf = random_buffer(rng, 4, 2, 5, p);
  const Advantages adv = compute_gae(buf, Eigen::VectorXd::Zero(2), 0.99, 0.95);
  buf.obs(0, 3) = std::nan("");
  const auto dump = std::filesystem::temp_directory_path() / "gcrs_nonfinite_dump.csv";
  std::filesystem::remove(dump);
  TrainConfig cfg;
  cfg.minibatches = 1;
  Adam adam;
  EXPECT_EQ(code_of([&] { update(p, adam, buf, adv, cfg, 1e-3, rng, dump.string()); }),
            ErrorCode::NonFiniteLoss);
  EXPECT_TRUE(std::filesystem::exists(dump));
  EXPECT_GT(std::filesystem::file_size(dump), 0u);
  std::filesystem::remove(dump);
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  const auto bad = [](auto mutate) {
    TrainConfig t;
    mutate(t);
    return code_of([&] { t.validate(); });
  };
  EXPECT_EQ(bad([](TrainConfig& t) { t.gamma = 0.0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& t) { t.gamma = 1.01; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& t) { t.clip_eps = 0.0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& t) { t.rpo_alpha = -0.1; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& t) { t.epochs = 0; }), ErrorCode::InvalidConfig);
  EXPECT_EQ(bad([](TrainConfig& t) { t.minibatches = 1 << 30; }), ErrorCode::InvalidConfig);
  TrainConfig other;
  other.rpo_alpha = 0.4;
  EXPECT_NE(c.digest(), other.digest());
  EXPECT_EQ(c.digest(), TrainConfig{}.digest());
}

}  // namespace
}  // namespace gcrs
