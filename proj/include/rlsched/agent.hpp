#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rlsched/env.hpp"
#include "rlsched/net.hpp"

namespace rlsched {

// One training sample: the state vector, the executed (possibly noisy)
// action, and the reward it produced.
struct Transition {
  std::vector<double> state;
  std::vector<double> action;
  double reward = 0.0;

  bool operator==(const Transition&) const = default;
};

// Fixed-capacity ring; oldest entries are evicted first.
class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return entries_[i]; }

  void push(Transition t) {
    if (entries_.size() < capacity_) {
      entries_.push_back(std::move(t));
    } else {
      entries_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  // Uniform with replacement over current contents.
  std::vector<std::size_t> sample_indices(Rng& rng, std::size_t count) const {
    std::vector<std::size_t> indices(count);
    for (std::size_t& i : indices)
      i = static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(entries_.size()) - 1));
    return indices;
  }

 private:
  std::size_t capacity_ = 0;
  std::size_t head_ = 0;
  std::vector<Transition> entries_;
};

// Linear decay from initial_epsilon at episode 0 to zero at
// zero_fraction * total_episodes, constant zero afterwards. Held constant
// within an episode.
struct ExplorationSchedule {
  double initial_epsilon = 1.0;
  double zero_fraction = 0.5;
  int total_episodes = 30;

  double value(int episode) const {
    const double zero_at = zero_fraction * total_episodes;
    if (static_cast<double>(episode) >= zero_at) return 0.0;
    return initial_epsilon * (1.0 - static_cast<double>(episode) / zero_at);
  }
};

struct AgentConfig {
  int batch_size = 256;
  int buffer_capacity = 100000;
  double learning_rate_actor = 1e-4;
  double learning_rate_critic = 1e-4;

  bool operator==(const AgentConfig&) const = default;

  void validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (buffer_capacity < batch_size)
      throw ConfigError("buffer_capacity must be >= batch_size");
    if (!(learning_rate_actor > 0.0)) throw ConfigError("learning_rate_actor must be > 0");
    if (!(learning_rate_critic > 0.0)) throw ConfigError("learning_rate_critic must be > 0");
  }
};

struct Agent {
  NetSpec actor_spec;
  NetSpec critic_spec;
  ParamVector actor_params;
  ParamVector critic_params;
  AdamState actor_adam;
  AdamState critic_adam;
  ReplayBuffer buffer;
  ExplorationSchedule schedule;
  int episodes_completed = 0;
  int batch_size = 256;
  Rng rng{0};
};

// Actor: 4N -> hidden -> N softmax. Critic: 5N (state and action) -> hidden
// -> 1 linear.
inline Agent make_agent(int num_users, int hidden_layers, int hidden_width,
                        const AgentConfig& cfg, const ExplorationSchedule& schedule,
                        std::uint64_t seed) {
  cfg.validate();
  Agent agent;
  agent.actor_spec.layer_sizes.push_back(4 * num_users);
  for (int l = 0; l < hidden_layers; ++l) agent.actor_spec.layer_sizes.push_back(hidden_width);
  agent.actor_spec.layer_sizes.push_back(num_users);
  agent.actor_spec.output_activation = OutputActivation::softmax;
  agent.critic_spec.layer_sizes.push_back(5 * num_users);
  for (int l = 0; l < hidden_layers; ++l) agent.critic_spec.layer_sizes.push_back(hidden_width);
  agent.critic_spec.layer_sizes.push_back(1);
  agent.critic_spec.output_activation = OutputActivation::linear;
  agent.actor_params = init_params(agent.actor_spec, seed_mix(seed, 1));
  agent.critic_params = init_params(agent.critic_spec, seed_mix(seed, 2));
  agent.actor_adam = make_adam(agent.actor_params.size(), cfg.learning_rate_actor);
  agent.critic_adam = make_adam(agent.critic_params.size(), cfg.learning_rate_critic);
  agent.buffer = ReplayBuffer(static_cast<std::size_t>(cfg.buffer_capacity));
  agent.schedule = schedule;
  agent.batch_size = cfg.batch_size;
  agent.rng = Rng(seed_mix(seed, 3));
  return agent;
}

inline std::vector<double> act(const NetSpec& actor_spec, const ParamVector& actor_params,
                               std::span<const double> state) {
  return forward(actor_spec, actor_params, state);
}

// Blends the action with a uniform noise vector and renormalizes to the
// simplex. epsilon == 0 returns the action unchanged, bit for bit, without
// consuming random draws. An all-zero blend (possible only at epsilon == 1)
// is redrawn.
inline std::vector<double> explore_mix(std::span<const double> action, double epsilon,
                                       Rng& rng) {
  std::vector<double> mixed(action.begin(), action.end());
  if (epsilon == 0.0) return mixed;
  for (;;) {
    double sum = 0.0;
    for (std::size_t i = 0; i < mixed.size(); ++i) {
      mixed[i] = epsilon * rng.uniform01() + (1.0 - epsilon) * action[i];
      sum += mixed[i];
    }
    if (sum > 0.0) {
      for (double& v : mixed) v /= sum;
      return mixed;
    }
  }
}

namespace detail {

struct GradEval {
  double value = 0.0;  // loss for the critic, objective for the actor
  GradVector grad;
};

// Mean squared error of the critic against recorded rewards, with its exact
// parameter gradient. critic_input columns are state||action.
inline GradEval critic_grad_matrix(const NetSpec& critic_spec, const ParamVector& critic_params,
                                   const Eigen::MatrixXd& critic_input,
                                   const Eigen::VectorXd& rewards) {
  const auto batch = critic_input.cols();
  if (batch == 0) throw ContractError("critic gradient needs a non-empty batch");
  Tape tape;
  const Eigen::MatrixXd q = forward(critic_spec, critic_params, critic_input, &tape);
  const Eigen::RowVectorXd residual = q.row(0) - rewards.transpose();
  GradEval eval;
  eval.value = residual.squaredNorm() / static_cast<double>(batch);
  const Eigen::MatrixXd output_grad = residual * (2.0 / static_cast<double>(batch));
  eval.grad = backward_params(critic_spec, critic_params, tape, output_grad);
  return eval;
}

// Mean of -Q(s, actor(s)) with its exact gradient in the actor parameters;
// critic parameters are held fixed and contribute only through the action
// input gradient.
inline GradEval actor_grad_matrix(const NetSpec& actor_spec, const ParamVector& actor_params,
                                  const NetSpec& critic_spec, const ParamVector& critic_params,
                                  const Eigen::MatrixXd& states) {
  const auto batch = states.cols();
  if (batch == 0) throw ContractError("actor gradient needs a non-empty batch");
  Tape actor_tape;
  const Eigen::MatrixXd actions = forward(actor_spec, actor_params, states, &actor_tape);
  Eigen::MatrixXd critic_input(states.rows() + actions.rows(), batch);
  critic_input.topRows(states.rows()) = states;
  critic_input.bottomRows(actions.rows()) = actions;
  Tape critic_tape;
  const Eigen::MatrixXd q = forward(critic_spec, critic_params, critic_input, &critic_tape);
  GradEval eval;
  eval.value = -q.sum() / static_cast<double>(batch);
  const Eigen::MatrixXd output_grad =
      Eigen::MatrixXd::Constant(1, batch, -1.0 / static_cast<double>(batch));
  const Eigen::MatrixXd input_grad =
      backward_input(critic_spec, critic_params, critic_tape, output_grad);
  eval.grad = backward_params(actor_spec, actor_params, actor_tape,
                              input_grad.bottomRows(actions.rows()));
  return eval;
}

inline Eigen::MatrixXd states_matrix(std::span<const Transition> batch) {
  const auto rows = static_cast<Eigen::Index>(batch[0].state.size());
  Eigen::MatrixXd states(rows, static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j)
    states.col(static_cast<Eigen::Index>(j)) =
        Eigen::Map<const Eigen::VectorXd>(batch[j].state.data(), rows);
  return states;
}

inline std::pair<Eigen::MatrixXd, Eigen::VectorXd> critic_batch(
    std::span<const Transition> batch) {
  const auto sdim = static_cast<Eigen::Index>(batch[0].state.size());
  const auto adim = static_cast<Eigen::Index>(batch[0].action.size());
  Eigen::MatrixXd input(sdim + adim, static_cast<Eigen::Index>(batch.size()));
  Eigen::VectorXd rewards(static_cast<Eigen::Index>(batch.size()));
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto c = static_cast<Eigen::Index>(j);
    input.col(c).head(sdim) = Eigen::Map<const Eigen::VectorXd>(batch[j].state.data(), sdim);
    input.col(c).tail(adim) = Eigen::Map<const Eigen::VectorXd>(batch[j].action.data(), adim);
    rewards(c) = batch[j].reward;
  }
  return {std::move(input), std::move(rewards)};
}

}  // namespace detail

inline std::pair<double, GradVector> critic_grad(const NetSpec& critic_spec,
                                                 const ParamVector& critic_params,
                                                 std::span<const Transition> batch) {
  if (batch.empty()) throw ContractError("critic_grad needs a non-empty batch");
  auto [input, rewards] = detail::critic_batch(batch);
  auto eval = detail::critic_grad_matrix(critic_spec, critic_params, input, rewards);
  return {eval.value, std::move(eval.grad)};
}

inline std::pair<double, GradVector> actor_grad(const NetSpec& actor_spec,
                                                const ParamVector& actor_params,
                                                const NetSpec& critic_spec,
                                                const ParamVector& critic_params,
                                                std::span<const Transition> batch) {
  if (batch.empty()) throw ContractError("actor_grad needs a non-empty batch");
  auto eval = detail::actor_grad_matrix(actor_spec, actor_params, critic_spec, critic_params,
                                        detail::states_matrix(batch));
  return {eval.value, std::move(eval.grad)};
}

enum class NetKind { actor, critic };

// Hook applied to a gradient before the Adam update; the continual-learning
// mechanisms plug in here.
struct GradientTransform {
  virtual ~GradientTransform() = default;
  virtual void apply(NetKind kind, const Agent& agent, GradVector& grad) = 0;
};

// One training step: sample a batch, update the critic, then the actor.
// Returns false (and changes nothing) while the buffer holds fewer than
// batch_size transitions.
inline bool train_step(Agent& agent, std::span<GradientTransform* const> transforms) {
  if (agent.buffer.size() < static_cast<std::size_t>(agent.batch_size)) return false;
  const auto indices = agent.buffer.sample_indices(agent.rng,
                                                   static_cast<std::size_t>(agent.batch_size));
  const auto sdim = static_cast<Eigen::Index>(agent.actor_spec.input_size());
  const auto adim = static_cast<Eigen::Index>(agent.actor_spec.output_size());
  const auto batch = static_cast<Eigen::Index>(indices.size());
  Eigen::MatrixXd states(sdim, batch);
  Eigen::MatrixXd critic_input(sdim + adim, batch);
  Eigen::VectorXd rewards(batch);
  for (Eigen::Index c = 0; c < batch; ++c) {
    const Transition& t = agent.buffer[indices[static_cast<std::size_t>(c)]];
    states.col(c) = Eigen::Map<const Eigen::VectorXd>(t.state.data(), sdim);
    critic_input.col(c).head(sdim) = states.col(c);
    critic_input.col(c).tail(adim) = Eigen::Map<const Eigen::VectorXd>(t.action.data(), adim);
    rewards(c) = t.reward;
  }

  auto critic = detail::critic_grad_matrix(agent.critic_spec, agent.critic_params,
                                           critic_input, rewards);
  for (GradientTransform* t : transforms) t->apply(NetKind::critic, agent, critic.grad);
  adam_step(agent.critic_params, critic.grad, agent.critic_adam);

  auto actor = detail::actor_grad_matrix(agent.actor_spec, agent.actor_params,
                                         agent.critic_spec, agent.critic_params, states);
  for (GradientTransform* t : transforms) t->apply(NetKind::actor, agent, actor.grad);
  adam_step(agent.actor_params, actor.grad, agent.actor_adam);
  return true;
}

}  // namespace rlsched
