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

#include "gcrs/learner.hpp"

#include <fstream>
#include <numeric>
#include <sstream>

namespace gcrs {

Manipulation infer_manipulation(const AbstractState& from, const AbstractState& to, int* index) {
  auto set = [index](int v) {
    if (index != nullptr) *index = v;
  };
  set(-1);
  if (from == to) return Manipulation::None;
  if (to.carried >= 0 && to.carried != from.carried) {
    set(to.carried);
    return Manipulation::PickUp;
  }
  for (std::size_t d = 0; d < std::min(from.doors.size(), to.doors.size()); ++d) {
    if (from.doors[d] == to.doors[d]) continue;
    set(static_cast<int>(d));
    return to.doors[d] == DoorStatus::Open ? Manipulation::Open : Manipulation::Unlock;
  }
  if (from.carried >= 0 && to.carried < 0) {
    set(from.carried);
    return Manipulation::Drop;
  }
  return Manipulation::Move;
}

int ObservationLayout::subgoal_size() const {
  if (kind == AbstractionKind::Grid) return 2 + kManipulationKinds + 1;
  return 1 + max_items + max_doors + 1 + kManipulationKinds + 1 + (room_pos ? 2 : 0);
}

namespace {

constexpr double kVelocityScale = 5.0;

double color_ordinal(Color c) { return (static_cast<double>(c) + 1.0) / 4.0; }

}  // namespace

void encode_observation_into(const ObservationLayout& layout, const SimState& state,
                             const AbstractState* current, const AbstractState* subgoal,
                             const WorldSpec& spec, Eigen::Ref<Eigen::VectorXd> out) {
  if (out.size() != layout.size()) {
    throw Error(ErrorCode::InvalidConfig, "observation buffer has wrong length");
  }
  if (spec.item_count() > layout.max_items || static_cast<int>(spec.doors.size()) > layout.max_doors) {
    throw Error(ErrorCode::InvalidConfig, "task has more items or doors than observation slots");
  }
  out.setZero();
  const Eigen::Array2d extent(spec.width_m(), spec.height_m());
  auto norm_pos = [&](const Vec2& p) -> Eigen::Vector2d { return (p.array() / extent).matrix(); };

  out.segment<2>(0) = norm_pos(state.agent_pos);
  out.segment<2>(2) = state.agent_vel / kVelocityScale;

  const int n_keys = static_cast<int>(state.keys.size());
  for (int i = 0; i < spec.item_count(); ++i) {
    const Eigen::Index at = layout.items_offset() + i * ObservationLayout::kItemSlot;
    bool held = false;
    Color color;
    int shape_slot;
    if (i < n_keys) {
      const auto& k = state.keys[static_cast<std::size_t>(i)];
      if (k.consumed) continue;
      held = k.held;
      color = k.color;
      shape_slot = 2;
    } else {
      const auto& o = state.objects[static_cast<std::size_t>(i - n_keys)];
      held = o.held;
      color = o.kind.color;
      shape_slot = static_cast<int>(o.kind.shape);
    }
    out(at) = 1.0;
    out(at + 1 + shape_slot) = 1.0;
    out(at + 4) = color_ordinal(color);
    out.segment<2>(at + 5) = norm_pos(state.item_pos(i));
    out(at + 7) = held ? 1.0 : 0.0;
  }

  for (std::size_t d = 0; d < state.doors.size(); ++d) {
    const auto& door = state.doors[d];
    const Eigen::Index at = layout.doors_offset() + static_cast<Eigen::Index>(d) * ObservationLayout::kDoorSlot;
    out.segment<2>(at) = norm_pos(spec.cell_center(door.cell));
    out(at + 2) = color_ordinal(door.color);
    out(at + 3) = door.locked ? 1.0 : 0.0;
    out(at + 4) = door.open_fraction;
  }

  if (layout.subgoal_enabled && subgoal != nullptr) {
    if (subgoal->kind != layout.kind || (current != nullptr && current->kind != layout.kind)) {
      throw Error(ErrorCode::VariantMismatch, "subgoal abstraction differs from the layout");
    }
    int index = -1;
    const Manipulation manip =
        current != nullptr ? infer_manipulation(*current, *subgoal, &index) : Manipulation::None;
    const double ordinal = index >= 0 ? (index + 1.0) / (layout.max_items + 1.0) : 0.0;
    Eigen::Index at = layout.subgoal_offset();
    if (layout.kind == AbstractionKind::Grid) {
      out.segment<2>(at) = norm_pos(spec.cell_center(subgoal->agent_cell));
      at += 2;
    } else {
      if (subgoal->agent_room >= layout.max_rooms) {
        throw Error(ErrorCode::InvalidConfig, "task has more rooms than observation slots");
      }
      out(at++) = (subgoal->agent_room + 1.0) / layout.max_rooms;
      for (int i = 0; i < layout.max_items; ++i) out(at++) = (subgoal->near >> i) & 1u;
      for (int d = 0; d < layout.max_doors; ++d) out(at++) = (subgoal->near >> (kNearDoorBit + d)) & 1u;
      out(at++) = (subgoal->near >> kNearGoalBit) & 1u;
    }
    out(at + static_cast<int>(manip)) = 1.0;
    at += kManipulationKinds;
    out(at++) = ordinal;
    if (layout.kind == AbstractionKind::Room && layout.room_pos) {
      if (const auto t = spec.target_item()) {
        out.segment<2>(at) = norm_pos(spec.cell_center(spec.cell_of(state.item_pos(*t))));
      }
    }
  }

  const Eigen::Index at = layout.task_offset();
  out(at + static_cast<int>(spec.task.family)) = 1.0;
  if (spec.task.target) {
    out(at + kFamilyCount) = (static_cast<double>(spec.task.target->shape) + 1.0) / 2.0;
    out(at + kFamilyCount + 1) = color_ordinal(spec.task.target->color);
  }
}

Eigen::VectorXd encode_observation(const ObservationLayout& layout, const SimState& state,
                                   const AbstractState* current, const AbstractState* subgoal,
                                   const WorldSpec& spec) {
  Eigen::VectorXd out(layout.size());
  encode_observation_into(layout, state, current, subgoal, spec, out);
  return out;
}

namespace {

void require(bool ok, const char* field, const char* range) {
  if (!ok) throw Error(ErrorCode::InvalidConfig, std::string(field) + " must be in " + range);
}

}  // namespace

void TrainConfig::validate() const {
  require(gamma > 0.0 && gamma <= 1.0, "gamma", "(0, 1]");
  require(gae_lambda >= 0.0 && gae_lambda <= 1.0, "gae_lambda", "[0, 1]");
  require(clip_eps > 0.0 && clip_eps < 1.0, "clip_eps", "(0, 1)");
  require(rpo_alpha >= 0.0 && rpo_alpha <= 2.0, "rpo_alpha", "[0, 2]");
  require(learning_rate > 0.0 && learning_rate <= 1.0, "learning_rate", "(0, 1]");
  require(rollout_len >= 1 && rollout_len <= (1 << 20), "rollout_len", "[1, 1048576]");
  require(epochs >= 1 && epochs <= 100, "epochs", "[1, 100]");
  require(workers >= 1 && workers <= 1024, "workers", "[1, 1024]");
  require(minibatches >= 1 && minibatches <= rollout_len * workers, "minibatches",
          "[1, rollout_len * workers]");
  require(entropy_coef >= 0.0 && entropy_coef <= 1.0, "entropy_coef", "[0, 1]");
  require(value_coef >= 0.0 && value_coef <= 10.0, "value_coef", "[0, 10]");
  require(grad_clip_norm > 0.0 && std::isfinite(grad_clip_norm), "grad_clip_norm", "(0, inf)");
  require(hidden >= 1 && hidden <= 4096, "hidden", "[1, 4096]");
  require(log_std_init >= kLogStdMin && log_std_init <= kLogStdMax, "log_std_init", "[-5, 2]");
  require(adam_eps > 0.0 && adam_eps < 1.0, "adam_eps", "(0, 1)");
}

std::uint64_t TrainConfig::digest() const {
  std::ostringstream os;
  for (double v : {gamma, gae_lambda, clip_eps, rpo_alpha, learning_rate, entropy_coef, value_coef,
                   grad_clip_norm, log_std_init, adam_eps}) {
    os << format_double(v) << ';';
  }
  os << rollout_len << ';' << epochs << ';' << minibatches << ';' << workers << ';' << hidden << ';'
     << anneal_lr;
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

ActionCommand to_command(const Eigen::Vector3d& a) {
  ActionCommand c;
  c.force = a.head<2>();
  c.grab = a(2);
  return c.clamped();
}

double gaussian_log_prob(const Eigen::VectorXd& x, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& log_std) {
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  const Eigen::ArrayXd z = (x - mean).array() * (-log_std).array().exp();
  return -0.5 * z.square().sum() - log_std.sum() - 0.5 * static_cast<double>(x.size()) * log_2pi;
}

std::vector<ActionSample> sample_actions(const PolicyParams<double>& params,
                                         const Eigen::MatrixXd& obs, PolicyMode mode, Rng& rng,
                                         double rpo_alpha) {
  if (!params.all_finite()) throw Error(ErrorCode::NonFiniteParams, "policy parameters not finite");
  const Eigen::MatrixXd means = params.actor.forward(obs);
  const Eigen::MatrixXd values = params.critic.forward(obs);
  const Eigen::VectorXd std_dev = params.log_std.array().exp();
  std::vector<ActionSample> out(static_cast<std::size_t>(obs.cols()));
  for (Eigen::Index j = 0; j < obs.cols(); ++j) {
    ActionSample& s = out[static_cast<std::size_t>(j)];
    Eigen::Vector3d mean = means.col(j);
    if (mode == PolicyMode::Train) {
      if (rpo_alpha > 0.0) {
        for (int d = 0; d < kActionDim; ++d) s.perturbation(d) = rng.uniform(-rpo_alpha, rpo_alpha);
      }
      mean += s.perturbation;
      for (int d = 0; d < kActionDim; ++d) s.raw(d) = mean(d) + std_dev(d) * rng.normal();
    } else {
      s.raw = mean;
    }
    s.log_prob = gaussian_log_prob(s.raw, mean, params.log_std);
    s.command = to_command(s.raw);
    s.value = values(0, j);
  }
  return out;
}

ActionSample sample_action(const PolicyParams<double>& params, const Eigen::VectorXd& obs,
                           PolicyMode mode, Rng& rng, double rpo_alpha) {
  return sample_actions(params, obs, mode, rng, rpo_alpha).front();
}

void RolloutBuffer::reset(int steps_, int workers_, int obs_dim) {
  steps = steps_;
  workers = workers_;
  filled = 0;
  const Eigen::Index n = capacity();
  obs.setZero(obs_dim, n);
  actions.setZero(kActionDim, n);
  perturbations.setZero(kActionDim, n);
  log_probs.setZero(n);
  values.setZero(n);
  rewards.setZero(n);
  bootstrap.setZero(n);
  terminated.assign(static_cast<std::size_t>(n), 0);
  truncated.assign(static_cast<std::size_t>(n), 0);
}

Advantages compute_gae(const Eigen::VectorXd& rewards, const Eigen::VectorXd& values,
                       const std::vector<char>& terminated, const std::vector<char>& truncated,
                       const Eigen::VectorXd& bootstrap, double last_value, double gamma,
                       double lambda) {
  const Eigen::Index n = rewards.size();
  if (n == 0) throw Error(ErrorCode::EmptyBuffer, "no transitions");
  Advantages out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  double gae = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const auto k = static_cast<std::size_t>(t);
    double next_value;
    bool chain = false;
    if (terminated[k]) {
      next_value = 0.0;
    } else if (truncated[k]) {
      next_value = bootstrap(t);
    } else {
      next_value = t + 1 < n ? values(t + 1) : last_value;
      chain = true;
    }
    const double delta = rewards(t) + gamma * next_value - values(t);
    gae = delta + (chain ? gamma * lambda * gae : 0.0);
    out.advantages(t) = gae;
    out.returns(t) = gae + values(t);
  }
  return out;
}

Advantages compute_gae(const RolloutBuffer& buffer, const Eigen::VectorXd& last_values,
                       double gamma, double lambda) {
  if (buffer.filled == 0) throw Error(ErrorCode::EmptyBuffer, "rollout buffer is empty");
  const int steps = buffer.filled;
  const Eigen::Index n = buffer.capacity();
  Advantages out{Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n)};
  Eigen::VectorXd r(steps), v(steps), b(steps);
  std::vector<char> term(static_cast<std::size_t>(steps)), trunc(static_cast<std::size_t>(steps));
  for (int w = 0; w < buffer.workers; ++w) {
    for (int t = 0; t < steps; ++t) {
      const Eigen::Index i = buffer.index(t, w);
      r(t) = buffer.rewards(i);
      v(t) = buffer.values(i);
      b(t) = buffer.bootstrap(i);
      term[static_cast<std::size_t>(t)] = buffer.terminated[static_cast<std::size_t>(i)];
      trunc[static_cast<std::size_t>(t)] = buffer.truncated[static_cast<std::size_t>(i)];
    }
    const Advantages one = compute_gae(r, v, term, trunc, b, last_values(w), gamma, lambda);
    for (int t = 0; t < steps; ++t) {
      out.advantages(buffer.index(t, w)) = one.advantages(t);
      out.returns(buffer.index(t, w)) = one.returns(t);
    }
  }
  return out;
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
  if (m.size() != params.size()) {
    m.setZero(params.size());
    v.setZero(params.size());
    t = 0;
  }
  ++t;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  params.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

namespace {

void dump_minibatch(const std::string& path, const Minibatch<double>& mb) {
  std::ofstream os(path);
  if (!os) return;
  os << "column,old_log_prob,advantage,return,action,perturbation,obs\n";
  for (Eigen::Index i = 0; i < mb.obs.cols(); ++i) {
    os << i << ',' << format_double(mb.old_log_probs(i)) << ',' << format_double(mb.advantages(i))
       << ',' << format_double(mb.returns(i)) << ',';
    for (Eigen::Index d = 0; d < mb.actions.rows(); ++d) os << format_double(mb.actions(d, i)) << ' ';
    os << ',';
    for (Eigen::Index d = 0; d < mb.perturbations.rows(); ++d) {
      os << format_double(mb.perturbations(d, i)) << ' ';
    }
    os << ',';
    for (Eigen::Index d = 0; d < mb.obs.rows(); ++d) os << format_double(mb.obs(d, i)) << ' ';
    os << '\n';
  }
}

}  // namespace

UpdateStats update(PolicyParams<double>& params, Adam& adam, const RolloutBuffer& buffer,
                   const Advantages& adv, const TrainConfig& config, double lr, Rng& rng,
                   const std::string& dump_path) {
  const Eigen::Index n = static_cast<Eigen::Index>(buffer.filled) * buffer.workers;
  if (n == 0) throw Error(ErrorCode::EmptyBuffer, "rollout buffer is empty");
  adam.eps = config.adam_eps;

  Eigen::VectorXd norm_adv = adv.advantages.head(n);
  const double mean = norm_adv.mean();
  const double sd = std::sqrt((norm_adv.array() - mean).square().mean());
  norm_adv = (norm_adv.array() - mean) / (sd + 1e-8);

  const LossCoefficients coef{config.clip_eps, config.value_coef, config.entropy_coef};
  const int n_mb = static_cast<int>(std::min<Eigen::Index>(config.minibatches, n));
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});

  UpdateStats stats;
  Minibatch<double> mb;
  PolicyParams<double> grad;
  Eigen::VectorXd flat = params.flatten();
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(order);
    for (int b = 0; b < n_mb; ++b) {
      const Eigen::Index lo = n * b / n_mb;
      const Eigen::Index hi = n * (b + 1) / n_mb;
      const Eigen::Index m = hi - lo;
      mb.obs.resize(buffer.obs.rows(), m);
      mb.actions.resize(kActionDim, m);
      mb.perturbations.resize(kActionDim, m);
      mb.old_log_probs.resize(m);
      mb.advantages.resize(m);
      mb.returns.resize(m);
      for (Eigen::Index j = 0; j < m; ++j) {
        const Eigen::Index i = order[static_cast<std::size_t>(lo + j)];
        mb.obs.col(j) = buffer.obs.col(i);
        mb.actions.col(j) = buffer.actions.col(i);
        mb.perturbations.col(j) = buffer.perturbations.col(i);
        mb.old_log_probs(j) = buffer.log_probs(i);
        mb.advantages(j) = norm_adv(i);
        mb.returns(j) = adv.returns(i);
      }
      const LossTerms<double> loss = loss_and_gradient(params, mb, coef, &grad);
      if (!std::isfinite(loss.total)) {
        if (!dump_path.empty()) dump_minibatch(dump_path, mb);
        throw Error(ErrorCode::NonFiniteLoss, "loss is not finite in epoch " +
                                                  std::to_string(epoch) + ", minibatch " +
                                                  std::to_string(b));
      }
      Eigen::VectorXd g = grad.flatten();
      const double norm = g.norm();
      if (norm > config.grad_clip_norm) g *= config.grad_clip_norm / (norm + 1e-12);
      adam.step(flat, g, lr);
      params.unflatten(flat);
      params.clamp_log_std();
      flat.segment(params.actor.size(), params.log_std.size()) = params.log_std;

      stats.policy_loss += loss.policy;
      stats.value_loss += loss.value;
      stats.entropy += loss.entropy;
      stats.approx_kl += loss.approx_kl;
      stats.clip_fraction += loss.clip_fraction;
      stats.grad_norm += norm;
      ++stats.minibatches;
    }
  }
  if (!params.all_finite()) throw Error(ErrorCode::NonFiniteParams, "parameters diverged");
  const double k = std::max(1, stats.minibatches);
  stats.policy_loss /= k;
  stats.value_loss /= k;
  stats.entropy /= k;
  stats.approx_kl /= k;
  stats.clip_fraction /= k;
  stats.grad_norm /= k;
  return stats;
}

}  // namespace gcrs
