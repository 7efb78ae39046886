#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rlsched/errors.hpp"
#include "rlsched/rng.hpp"

namespace rlsched {

struct SimConfig {
  int num_users = 5;
  int num_resources = 10;
  double p_job = 0.5;
  double p_prio = 1e-4;
  double snr_db = 10.0;
  double rayleigh_scale = 0.3;
  int max_job_size = 7;
  int max_delay = 5;
  double weight_sumrate = 1.0;
  double weight_timeout = -1.0;
  double weight_prio = -5.0;
  std::uint64_t rng_seed = 1;

  bool operator==(const SimConfig&) const = default;

  double snr_linear() const { return std::pow(10.0, snr_db / 10.0); }

  void validate() const {
    std::string problems;
    const auto bad = [&problems](const char* msg) {
      if (!problems.empty()) problems += "; ";
      problems += msg;
    };
    if (num_users < 1) bad("num_users must be >= 1");
    if (num_resources < 1) bad("num_resources must be >= 1");
    if (!(p_job >= 0.0 && p_job <= 1.0)) bad("p_job must be in [0, 1]");
    if (!(p_prio >= 0.0 && p_prio <= 1.0)) bad("p_prio must be in [0, 1]");
    if (max_job_size < 1) bad("max_job_size must be >= 1");
    if (max_delay < 1) bad("max_delay must be >= 1");
    if (!(rayleigh_scale > 0.0)) bad("rayleigh_scale must be > 0");
    if (!problems.empty()) throw ConfigError(problems);
  }
};

struct Job {
  std::int64_t job_id = 0;
  int user = 0;  // zero-based user index
  int remaining = 0;
  int delay = 0;
  bool is_priority = false;
  std::int64_t created_at = 0;

  bool operator==(const Job&) const = default;
};

// Jobs are kept in creation order, which is also oldest-first per user.
struct SimState {
  std::int64_t time = 0;
  std::vector<Job> jobs;
  std::vector<double> channel_gain_sq;
  Rng rng{0};
  std::int64_t next_job_id = 0;
};

struct StepOutcome {
  double reward = 0.0;
  double sum_rate = 0.0;
  int n_timeouts = 0;
  int n_prio_timeouts = 0;
  std::vector<int> scheduled_per_user;
  std::vector<double> next_state_vector;
};

inline bool has_priority_job(const SimState& state) {
  return std::any_of(state.jobs.begin(), state.jobs.end(),
                     [](const Job& j) { return j.is_priority; });
}

inline void redraw_channel(SimState& state, const SimConfig& cfg) {
  for (int u = 0; u < cfg.num_users; ++u) {
    const double gain = state.rng.rayleigh(cfg.rayleigh_scale);
    state.channel_gain_sq[static_cast<std::size_t>(u)] = gain * gain;
  }
}

inline SimState reset(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SimState state;
  state.rng = Rng(seed);
  state.channel_gain_sq.assign(static_cast<std::size_t>(cfg.num_users), 0.0);
  redraw_channel(state, cfg);
  return state;
}

// Starts a new time step: per-user job arrivals, priority marking, channel
// redraw, in that order. The priority coin is tossed every step so the random
// stream does not depend on the job set.
inline void begin_step(SimState& state, const SimConfig& cfg) {
  for (int u = 0; u < cfg.num_users; ++u) {
    if (state.rng.bernoulli(cfg.p_job)) {
      Job job;
      job.job_id = state.next_job_id++;
      job.user = u;
      job.remaining = static_cast<int>(state.rng.uniform_int(1, cfg.max_job_size));
      job.created_at = state.time;
      state.jobs.push_back(job);
    }
  }
  if (state.rng.bernoulli(cfg.p_prio) && !state.jobs.empty() && !has_priority_job(state)) {
    const auto pick =
        state.rng.uniform_int(0, static_cast<std::int64_t>(state.jobs.size()) - 1);
    state.jobs[static_cast<std::size_t>(pick)].is_priority = true;
  }
  redraw_channel(state, cfg);
}

// Four features per user: outstanding blocks / U, outstanding priority
// blocks / U, channel power gain, max delay / d_max. Empty job sets
// contribute zeros.
inline std::vector<double> build_state_vector(const SimState& state, const SimConfig& cfg) {
  const int n = cfg.num_users;
  std::vector<std::int64_t> total(static_cast<std::size_t>(n), 0);
  std::vector<std::int64_t> prio(static_cast<std::size_t>(n), 0);
  std::vector<int> max_delay(static_cast<std::size_t>(n), 0);
  for (const Job& job : state.jobs) {
    const auto u = static_cast<std::size_t>(job.user);
    total[u] += job.remaining;
    if (job.is_priority) prio[u] += job.remaining;
    max_delay[u] = std::max(max_delay[u], job.delay);
  }
  std::vector<double> features;
  features.reserve(static_cast<std::size_t>(4 * n));
  for (std::size_t u = 0; u < static_cast<std::size_t>(n); ++u) {
    features.push_back(static_cast<double>(total[u]) / cfg.num_resources);
    features.push_back(static_cast<double>(prio[u]) / cfg.num_resources);
    features.push_back(state.channel_gain_sq[u]);
    features.push_back(static_cast<double>(max_delay[u]) / cfg.max_delay);
  }
  return features;
}

// Applies a fractional allocation to the current step. The action must lie on
// the probability simplex within 1e-6; it is never renormalized here.
//
// Block grants use the largest-remainder rule (ties broken by ascending user
// index), are clamped to each user's outstanding request, and blocks freed by
// clamping are not redistributed. Jobs are served oldest-first per user. A
// priority job left unfinished at step end times out and is counted apart
// from regular timeouts.
inline StepOutcome apply_allocation(SimState& state, std::span<const double> action,
                                    const SimConfig& cfg) {
  const int n = cfg.num_users;
  if (static_cast<int>(action.size()) != n)
    throw ContractError("action length does not match num_users");
  double action_sum = 0.0;
  for (const double a : action) {
    if (!(a >= 0.0)) throw ContractError("action entries must be non-negative");
    action_sum += a;
  }
  if (std::abs(action_sum - 1.0) > 1e-6)
    throw ContractError("action must sum to 1 within 1e-6");

  std::vector<int> grant(static_cast<std::size_t>(n), 0);
  std::vector<double> frac(static_cast<std::size_t>(n), 0.0);
  int assigned = 0;
  for (std::size_t u = 0; u < static_cast<std::size_t>(n); ++u) {
    const double raw = action[u] * cfg.num_resources;
    grant[u] = static_cast<int>(std::floor(raw));
    frac[u] = raw - grant[u];
    assigned += grant[u];
  }
  int leftover = std::min(cfg.num_resources - assigned, n);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&frac](int a, int b) {
    return frac[static_cast<std::size_t>(a)] > frac[static_cast<std::size_t>(b)];
  });
  for (int i = 0; i < leftover; ++i) grant[static_cast<std::size_t>(order[i])] += 1;

  std::vector<int> outstanding(static_cast<std::size_t>(n), 0);
  for (const Job& job : state.jobs)
    outstanding[static_cast<std::size_t>(job.user)] += job.remaining;
  std::vector<int> scheduled(static_cast<std::size_t>(n), 0);
  for (std::size_t u = 0; u < static_cast<std::size_t>(n); ++u)
    scheduled[u] = std::min(grant[u], outstanding[u]);

  std::vector<int> left(scheduled);
  for (Job& job : state.jobs) {
    const auto u = static_cast<std::size_t>(job.user);
    if (left[u] <= 0) continue;
    const int take = std::min(job.remaining, left[u]);
    job.remaining -= take;
    left[u] -= take;
  }
  std::erase_if(state.jobs, [](const Job& j) { return j.remaining == 0; });

  const double snr = cfg.snr_linear();
  double sum_rate = 0.0;
  for (std::size_t u = 0; u < static_cast<std::size_t>(n); ++u)
    sum_rate += scheduled[u] * std::log(1.0 + state.channel_gain_sq[u] * snr);

  int n_prio_timeouts = 0;
  std::erase_if(state.jobs, [&n_prio_timeouts](const Job& j) {
    if (j.is_priority) {
      ++n_prio_timeouts;
      return true;
    }
    return false;
  });

  int n_timeouts = 0;
  for (Job& job : state.jobs) job.delay += 1;
  std::erase_if(state.jobs, [&n_timeouts, &cfg](const Job& j) {
    if (j.delay > cfg.max_delay) {
      ++n_timeouts;
      return true;
    }
    return false;
  });

  StepOutcome out;
  out.sum_rate = sum_rate;
  out.n_timeouts = n_timeouts;
  out.n_prio_timeouts = n_prio_timeouts;
  out.reward = cfg.weight_sumrate * sum_rate + cfg.weight_timeout * n_timeouts +
               cfg.weight_prio * n_prio_timeouts;
  out.scheduled_per_user = std::move(scheduled);
  state.time += 1;
  out.next_state_vector = build_state_vector(state, cfg);
  return out;
}

}  // namespace rlsched
