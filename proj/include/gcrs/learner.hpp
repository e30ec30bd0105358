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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "gcrs/abstraction.hpp"
#include "gcrs/error.hpp"
#include "gcrs/mlp.hpp"
#include "gcrs/random.hpp"
#include "gcrs/sim.hpp"
#include "gcrs/world.hpp"

namespace gcrs {

inline constexpr int kActionDim = 3;  // force x, force y, grab
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// ---------------------------------------------------------------------------
// Observation encoding

enum class Manipulation : std::uint8_t { Move, PickUp, Drop, Unlock, Open, None };
inline constexpr int kManipulationKinds = 6;

/// Which macro-action turns `from` into `to`; `index` receives the item or
/// door involved (-1 for moves and None).
Manipulation infer_manipulation(const AbstractState& from, const AbstractState& to, int* index);

/// Fixed observation layout. Blocks in order: agent (pos, vel), item slots,
/// door slots, subgoal, task.
struct ObservationLayout {
  AbstractionKind kind = AbstractionKind::Grid;
  bool subgoal_enabled = true;
  bool room_pos = false;
  int max_items = 4;
  int max_doors = 1;
  int max_rooms = 4;

  static constexpr int kAgentSize = 4;
  static constexpr int kItemSlot = 8;  // present, {ball, box, key}, color, x, y, held
  static constexpr int kDoorSlot = 5;  // x, y, color, locked, open_fraction
  static constexpr int kTaskSize = kFamilyCount + 2;

  int items_offset() const { return kAgentSize; }
  int doors_offset() const { return items_offset() + max_items * kItemSlot; }
  int subgoal_offset() const { return doors_offset() + max_doors * kDoorSlot; }
  int subgoal_size() const;
  int task_offset() const { return subgoal_offset() + subgoal_size(); }
  int size() const { return task_offset() + kTaskSize; }
  bool operator==(const ObservationLayout&) const = default;
};

/// `current` is phi(state); both pointers may be null, which zeroes the
/// subgoal block (as does a layout with subgoal_enabled off).
void encode_observation_into(const ObservationLayout& layout, const SimState& state,
                             const AbstractState* current, const AbstractState* subgoal,
                             const WorldSpec& spec, Eigen::Ref<Eigen::VectorXd> out);
Eigen::VectorXd encode_observation(const ObservationLayout& layout, const SimState& state,
                                   const AbstractState* current, const AbstractState* subgoal,
                                   const WorldSpec& spec);

// ---------------------------------------------------------------------------
// Hyperparameters

struct TrainConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  double rpo_alpha = 0.5;
  double learning_rate = 3e-4;
  int rollout_len = 2048;  // per worker
  int epochs = 4;
  int minibatches = 8;
  double entropy_coef = 0.0;
  double value_coef = 0.5;
  double grad_clip_norm = 0.5;
  int workers = 8;
  int hidden = 64;
  double log_std_init = 0.0;
  bool anneal_lr = true;
  double adam_eps = 1e-5;

  /// Throws InvalidConfig when a field is outside its documented range.
  void validate() const;
  /// Stable 64-bit digest of every field.
  std::uint64_t digest() const;
};

// ---------------------------------------------------------------------------
// Policy

template <typename Scalar>
struct PolicyParams {
  Mlp<Scalar> actor;
  VectorX<Scalar> log_std;
  Mlp<Scalar> critic;

  static PolicyParams zeros(Eigen::Index obs_dim, Eigen::Index hidden) {
    return {Mlp<Scalar>::zeros(obs_dim, hidden, kActionDim), VectorX<Scalar>::Zero(kActionDim),
            Mlp<Scalar>::zeros(obs_dim, hidden, 1)};
  }
  static PolicyParams random(Eigen::Index obs_dim, Eigen::Index hidden, Rng& rng,
                             Scalar log_std_init = Scalar(0)) {
    PolicyParams p;
    p.actor = Mlp<Scalar>::random(obs_dim, hidden, kActionDim, rng, Scalar(0.01));
    p.log_std = VectorX<Scalar>::Constant(kActionDim, log_std_init);
    p.critic = Mlp<Scalar>::random(obs_dim, hidden, 1, rng, Scalar(1));
    return p;
  }

  Eigen::Index size() const { return actor.size() + log_std.size() + critic.size(); }

  /// Flat order: actor (w1, b1, w2, b2, w3, b3), log_std, critic (same order).
  VectorX<Scalar> flatten() const {
    VectorX<Scalar> out(size());
    Eigen::Index at = 0;
    actor.flatten_into(out, at);
    out.segment(at, log_std.size()) = log_std;
    at += log_std.size();
    critic.flatten_into(out, at);
    return out;
  }
  void unflatten(const VectorX<Scalar>& flat) {
    Eigen::Index at = 0;
    actor.unflatten_from(flat, at);
    log_std = flat.segment(at, log_std.size());
    at += log_std.size();
    critic.unflatten_from(flat, at);
  }
  bool all_finite() const { return actor.all_finite() && log_std.allFinite() && critic.all_finite(); }
  void clamp_log_std() {
    log_std = log_std.cwiseMax(Scalar(kLogStdMin)).cwiseMin(Scalar(kLogStdMax));
  }
};

enum class PolicyMode : std::uint8_t { Train, Eval };

struct ActionSample {
  ActionCommand command;              // clamped to [-1, 1]
  Eigen::Vector3d raw = Eigen::Vector3d::Zero();           // pre-clamp Gaussian draw
  Eigen::Vector3d perturbation = Eigen::Vector3d::Zero();  // RPO mean shift
  double log_prob = 0.0;
  double value = 0.0;
};

ActionCommand to_command(const Eigen::Vector3d& a);

/// Diagonal Gaussian log-density.
double gaussian_log_prob(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std);

ActionSample sample_action(const PolicyParams<double>& params, const Eigen::VectorXd& obs,
                           PolicyMode mode, Rng& rng, double rpo_alpha);
/// One sample per column of `obs`, drawing from `rng` column by column.
std::vector<ActionSample> sample_actions(const PolicyParams<double>& params,
                                         const Eigen::MatrixXd& obs, PolicyMode mode, Rng& rng,
                                         double rpo_alpha);

// ---------------------------------------------------------------------------
// Rollouts and advantages

/// Storage for `steps` lockstep steps of `workers` environments; the sample
/// for step t of worker w lives at column t * workers + w.
struct RolloutBuffer {
  int steps = 0;
  int workers = 0;
  int filled = 0;  // completed lockstep steps
  Eigen::MatrixXd obs;
  Eigen::MatrixXd actions;       // raw
  Eigen::MatrixXd perturbations;
  Eigen::VectorXd log_probs;
  Eigen::VectorXd values;
  Eigen::VectorXd rewards;       // shaped
  Eigen::VectorXd bootstrap;     // critic value of the final observation on truncation
  std::vector<char> terminated;
  std::vector<char> truncated;

  void reset(int steps, int workers, int obs_dim);
  int capacity() const { return steps * workers; }
  bool full() const { return filled == steps; }
  Eigen::Index index(int t, int w) const { return static_cast<Eigen::Index>(t) * workers + w; }
};

struct Advantages {
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;
};

/// Single-sequence GAE. Terminated steps use a zero next value, truncated
/// steps use `bootstrap[t]`, and the last step continues into `last_value`.
Advantages compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                       const std::vector<char>& terminated, const std::vector<char>& truncated,
                       const Eigen::VectorXd& bootstrap, double last_value, double gamma,
                       double lambda);
Advantages compute_gae(const RolloutBuffer& buffer, const Eigen::VectorXd& last_values,
                       double gamma, double lambda);

// ---------------------------------------------------------------------------
// Loss

template <typename Scalar>
struct Minibatch {
  MatrixX<Scalar> obs;
  MatrixX<Scalar> actions;
  MatrixX<Scalar> perturbations;
  VectorX<Scalar> old_log_probs;
  VectorX<Scalar> advantages;
  VectorX<Scalar> returns;
};

struct LossCoefficients {
  double clip_eps = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.0;
};

template <typename Scalar>
struct LossTerms {
  Scalar total = 0;
  Scalar policy = 0;
  Scalar value = 0;
  Scalar entropy = 0;
  Scalar approx_kl = 0;
  Scalar clip_fraction = 0;
};

/// Clipped surrogate + value regression - entropy bonus, averaged over the
/// minibatch. Writes the gradient into `grad` when non-null.
template <typename Scalar>
LossTerms<Scalar> loss_and_gradient(const PolicyParams<Scalar>& p, const Minibatch<Scalar>& mb,
                                    const LossCoefficients& c, PolicyParams<Scalar>* grad) {
  using std::exp;
  using std::log;
  const Eigen::Index n = mb.obs.cols();
  if (n == 0) throw Error(ErrorCode::EmptyBuffer, "empty minibatch");
  const Eigen::Index d = p.log_std.size();
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(n);
  const Scalar log_2pi = log(Scalar(2) * std::numbers::pi_v<Scalar>);
  const Scalar eps = static_cast<Scalar>(c.clip_eps);

  typename Mlp<Scalar>::Cache actor_cache, critic_cache;
  const MatrixX<Scalar> mean = p.actor.forward(mb.obs, &actor_cache) + mb.perturbations;
  const MatrixX<Scalar> values = p.critic.forward(mb.obs, &critic_cache);
  const VectorX<Scalar> inv_var = (Scalar(-2) * p.log_std).array().exp().matrix();
  const Scalar log_norm = p.log_std.sum() + Scalar(0.5) * static_cast<Scalar>(d) * log_2pi;
  const MatrixX<Scalar> diff = mb.actions - mean;

  LossTerms<Scalar> out;
  MatrixX<Scalar> d_mean(d, n);
  MatrixX<Scalar> d_value(1, n);
  VectorX<Scalar> d_log_std = VectorX<Scalar>::Zero(d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const VectorX<Scalar> z2 = diff.col(i).array().square() * inv_var.array();
    const Scalar logp = Scalar(-0.5) * z2.sum() - log_norm;
    const Scalar log_ratio = logp - mb.old_log_probs(i);
    const Scalar ratio = exp(log_ratio);
    const Scalar adv = mb.advantages(i);
    const Scalar unclipped = ratio * adv;
    const Scalar clipped = std::clamp(ratio, Scalar(1) - eps, Scalar(1) + eps) * adv;
    out.policy -= std::min(unclipped, clipped);
    const Scalar d_logp = unclipped <= clipped ? -adv * ratio : Scalar(0);
    if (std::abs(ratio - Scalar(1)) > eps) out.clip_fraction += Scalar(1);
    out.approx_kl += (ratio - Scalar(1)) - log_ratio;
    d_mean.col(i) = d_logp * inv_n * diff.col(i).cwiseProduct(inv_var);
    d_log_std += d_logp * inv_n * (z2.array() - Scalar(1)).matrix();

    const Scalar err = values(0, i) - mb.returns(i);
    out.value += err * err;
    d_value(0, i) = static_cast<Scalar>(c.value_coef) * Scalar(2) * err * inv_n;
  }
  out.policy *= inv_n;
  out.value *= inv_n;
  out.approx_kl *= inv_n;
  out.clip_fraction *= inv_n;
  out.entropy = p.log_std.sum() + Scalar(0.5) * static_cast<Scalar>(d) * (Scalar(1) + log_2pi);
  out.total = out.policy + static_cast<Scalar>(c.value_coef) * out.value -
              static_cast<Scalar>(c.entropy_coef) * out.entropy;

  if (grad != nullptr) {
    grad->actor = p.actor.backward(actor_cache, d_mean);
    grad->critic = p.critic.backward(critic_cache, d_value);
    grad->log_std = d_log_std.array() - static_cast<Scalar>(c.entropy_coef);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer and update

struct Adam {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::int64_t t = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);
};

struct UpdateStats {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;  // mean pre-clip norm
  int minibatches = 0;
};

/// Normalizes advantages over the whole buffer, then runs `epochs` passes of
/// shuffled minibatch steps. On a non-finite loss the minibatch is written to
/// `dump_path` (if non-empty) and NonFiniteLoss is thrown.
UpdateStats update(PolicyParams<double>& params, Adam& adam, const RolloutBuffer& buffer,
                   const Advantages& adv, const TrainConfig& config, double lr, Rng& rng,
                   const std::string& dump_path = "");

}  // namespace gcrs
