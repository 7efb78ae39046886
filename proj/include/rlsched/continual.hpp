#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "rlsched/agent.hpp"
#include "rlsched/net.hpp"

namespace rlsched {

// Elastic anchor for the actor: parameters at the end of the priority stage,
// their Fisher diagonal, and the anchoring weight.
struct EwcAnchor {
  ParamVector anchor_params;
  std::vector<double> fisher;
  double weight = 0.0;
};

// Fisher from per-batch gradients of the actor objective on priority data;
// anchor parameters are copied as-is.
inline EwcAnchor build_ewc_anchor(const NetSpec& actor_spec, const ParamVector& actor_params,
                                  const NetSpec& critic_spec, const ParamVector& critic_params,
                                  std::span<const std::vector<Transition>> prio_batches,
                                  double weight) {
  if (prio_batches.empty()) throw ContractError("build_ewc_anchor needs at least one batch");
  std::vector<GradVector> samples;
  samples.reserve(prio_batches.size());
  for (const std::vector<Transition>& batch : prio_batches)
    samples.push_back(
        actor_grad(actor_spec, actor_params, critic_spec, critic_params, batch).second);
  return EwcAnchor{actor_params, estimate_fisher(samples), weight};
}

// Adds the penalty gradient 2 * weight * fisher_k * (theta_k - anchor_k).
inline void ewc_apply(const EwcAnchor& anchor, const ParamVector& params, GradVector& grad) {
  if (params.size() != anchor.anchor_params.size() || grad.size() != params.size() ||
      anchor.fisher.size() != params.size())
    throw ContractError("ewc_apply: length mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i)
    grad[i] += 2.0 * anchor.weight * anchor.fisher[i] * (params[i] - anchor.anchor_params[i]);
}

// The anchor constrains the actor only; critic gradients pass through.
class EwcTransform final : public GradientTransform {
 public:
  explicit EwcTransform(EwcAnchor anchor) : anchor_(std::move(anchor)) {}

  const EwcAnchor& anchor() const { return anchor_; }

  void apply(NetKind kind, const Agent& agent, GradVector& grad) override {
    if (kind == NetKind::actor) ewc_apply(anchor_, agent.actor_params, grad);
  }

 private:
  EwcAnchor anchor_;
};

// Transitions retained from the priority stage; immutable afterwards.
struct GemMemory {
  std::vector<Transition> samples;
};

struct ProjectionResult {
  GradVector projected_grad;
  double v_opt = 0.0;
  bool was_projected = false;
};

// Half-space projection of the current gradient onto directions that do not
// conflict with the reference gradient. Aligned or degenerate inputs pass
// through unchanged. The single-constraint problem
//   min_v  v^2 ||g_prio||^2 / 2 + <g_curr, g_prio> v   s.t. v >= 0
// has the closed-form minimizer used here; the projected gradient is
// g_curr + v_opt * g_prio.
inline ProjectionResult gem_project(std::span<const double> g_prio,
                                    std::span<const double> g_curr) {
  if (g_prio.size() != g_curr.size()) throw ContractError("gem_project: length mismatch");
  double dot = 0.0;
  double norm2_prio = 0.0;
  double norm2_curr = 0.0;
  for (std::size_t i = 0; i < g_prio.size(); ++i) {
    dot += g_prio[i] * g_curr[i];
    norm2_prio += g_prio[i] * g_prio[i];
    norm2_curr += g_curr[i] * g_curr[i];
  }
  ProjectionResult result;
  result.projected_grad.assign(g_curr.begin(), g_curr.end());
  // The tolerance absorbs rounding, so re-projecting an already projected
  // gradient is a pass-through.
  const double tol = 1e-12 * std::max(1.0, std::sqrt(norm2_prio * norm2_curr));
  if (norm2_prio < 1e-18 || dot >= -tol) return result;
  result.v_opt = -dot / norm2_prio;
  for (std::size_t i = 0; i < g_prio.size(); ++i)
    result.projected_grad[i] += result.v_opt * g_prio[i];
  result.was_projected = true;
  return result;
}

// Gradient of the matching objective (critic loss or actor objective)
// averaged over the entire memory, at the given parameters.
inline GradVector gem_reference_grad(NetKind kind, const NetSpec& actor_spec,
                                     const ParamVector& actor_params,
                                     const NetSpec& critic_spec,
                                     const ParamVector& critic_params,
                                     const GemMemory& memory) {
  if (memory.samples.empty()) throw ContractError("gem_reference_grad: empty memory");
  if (kind == NetKind::critic)
    return critic_grad(critic_spec, critic_params, memory.samples).second;
  return actor_grad(actor_spec, actor_params, critic_spec, critic_params, memory.samples)
      .second;
}

// Recomputes the reference gradient over the full memory at the current
// parameters on every application, then projects. The memory's input
// matrices are assembled once and cached.
class GemTransform final : public GradientTransform {
 public:
  explicit GemTransform(GemMemory memory) : memory_(std::move(memory)) {
    if (memory_.samples.empty()) throw ContractError("GemTransform: empty memory");
  }

  const GemMemory& memory() const { return memory_; }

  void apply(NetKind kind, const Agent& agent, GradVector& grad) override {
    if (!built_) {
      states_ = detail::states_matrix(memory_.samples);
      std::tie(critic_input_, rewards_) = detail::critic_batch(memory_.samples);
      built_ = true;
    }
    GradVector reference =
        kind == NetKind::critic
            ? detail::critic_grad_matrix(agent.critic_spec, agent.critic_params,
                                         critic_input_, rewards_)
                  .grad
            : detail::actor_grad_matrix(agent.actor_spec, agent.actor_params,
                                        agent.critic_spec, agent.critic_params, states_)
                  .grad;
    grad = gem_project(reference, grad).projected_grad;
  }

 private:
  GemMemory memory_;
  Eigen::MatrixXd states_;
  Eigen::MatrixXd critic_input_;
  Eigen::VectorXd rewards_;
  bool built_ = false;
};

inline GradVector gem_transform(const GemMemory& memory, NetKind kind,
                                const NetSpec& actor_spec, const ParamVector& actor_params,
                                const NetSpec& critic_spec, const ParamVector& critic_params,
                                const GradVector& grad) {
  const GradVector reference =
      gem_reference_grad(kind, actor_spec, actor_params, critic_spec, critic_params, memory);
  return gem_project(reference, grad).projected_grad;
}

// Algorithm R reservoir over a transition stream; yields a uniform sample of
// everything offered.
class ReservoirSampler {
 public:
  ReservoirSampler(std::size_t target, std::uint64_t seed) : target_(target), rng_(seed) {}

  void offer(const Transition& t) {
    if (samples_.size() < target_) {
      samples_.push_back(t);
    } else {
      const std::int64_t j = rng_.uniform_int(0, seen_);
      if (static_cast<std::size_t>(j) < target_) samples_[static_cast<std::size_t>(j)] = t;
    }
    ++seen_;
  }

  std::int64_t seen() const { return seen_; }

  GemMemory take() { return GemMemory{std::move(samples_)}; }

 private:
  std::size_t target_;
  std::int64_t seen_ = 0;
  Rng rng_;
  std::vector<Transition> samples_;
};

}  // namespace rlsched
