#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "rlsched/agent.hpp"
#include "rlsched/checkpoint.hpp"
#include "rlsched/config.hpp"
#include "rlsched/continual.hpp"
#include "rlsched/env.hpp"
#include "rlsched/metrics.hpp"

namespace rlsched {

enum class VariantKind { baseline, prio_only, gem, ewc, augmented };

// One scheduler variant of the experiment protocol. Names: "baseline",
// "prio_only", "gem<M>", "ewc<lambda>", "aug<percent>", and any of those with
// a trailing '+' for the continued-training (forgetting) runs.
struct VariantSpec {
  std::string name;
  VariantKind kind = VariantKind::baseline;
  double train_p_prio = 0.0;
  int episodes = 0;
  double ewc_lambda = 0.0;
  int gem_memory_size = 0;
  bool is_continuation = false;
  std::string init_from;  // variant whose checkpoint seeds this run
};

inline VariantSpec make_variant(const std::string& name, const RunConfig& cfg) {
  VariantSpec spec;
  spec.name = name;
  std::string base = name;
  if (!base.empty() && base.back() == '+') {
    spec.is_continuation = true;
    base.pop_back();
    if (base.empty() || base.back() == '+')
      throw ConfigError("bad variant name '" + name + "'");
  }
  if (base == "baseline") {
    spec.kind = VariantKind::baseline;
    spec.train_p_prio = cfg.sim.p_prio;
  } else if (base == "prio_only") {
    spec.kind = VariantKind::prio_only;
    spec.train_p_prio = 1.0;
  } else if (base.starts_with("gem")) {
    spec.kind = VariantKind::gem;
    spec.train_p_prio = cfg.sim.p_prio;
    char* end = nullptr;
    const long m = std::strtol(base.c_str() + 3, &end, 10);
    if (!end || *end != '\0' || m < 1)
      throw ConfigError("bad memory size in variant '" + name + "'");
    spec.gem_memory_size = static_cast<int>(m);
    spec.init_from = "prio_only";
  } else if (base.starts_with("ewc")) {
    spec.kind = VariantKind::ewc;
    spec.train_p_prio = cfg.sim.p_prio;
    char* end = nullptr;
    const double lambda = std::strtod(base.c_str() + 3, &end);
    if (!end || *end != '\0' || !(lambda > 0.0))
      throw ConfigError("bad anchoring weight in variant '" + name + "'");
    spec.ewc_lambda = lambda;
    spec.init_from = "prio_only";
  } else if (base.starts_with("aug")) {
    spec.kind = VariantKind::augmented;
    char* end = nullptr;
    const long pct = std::strtol(base.c_str() + 3, &end, 10);
    if (!end || *end != '\0' || pct < 0 || pct > 100)
      throw ConfigError("bad percentage in variant '" + name + "'");
    spec.train_p_prio = static_cast<double>(pct) / 100.0;
  } else {
    throw ConfigError("unknown variant '" + name + "'");
  }
  // Augmented schedulers compensate for the others' pre-training stage by
  // training twice as long.
  spec.episodes = spec.kind == VariantKind::augmented ? 2 * cfg.episodes : cfg.episodes;
  if (spec.is_continuation) {
    spec.init_from = base;
    spec.train_p_prio = 0.0;
    spec.episodes = cfg.episodes;
  }
  return spec;
}

// The full protocol: both naive schedulers, three memory sizes, three
// anchoring weights, the augmented benchmark, and the three continued runs.
inline std::vector<std::string> full_variant_matrix(const RunConfig& cfg) {
  std::vector<std::string> names = {"baseline", "prio_only"};
  for (const int m : cfg.gem_memory_sizes) names.push_back("gem" + std::to_string(m));
  names.insert(names.end(), {"ewc1e5", "ewc1e6", "ewc1e7", "aug20"});
  names.insert(names.end(), {"aug20+", cfg.forget_ewc + "+", cfg.forget_gem + "+"});
  return names;
}

struct EpisodeStats {
  double total_reward = 0.0;
  double total_sum_rate = 0.0;
  std::int64_t timeouts = 0;
  std::int64_t prio_timeouts = 0;
  std::int64_t prio_events = 0;
  std::int64_t steps = 0;
  double epsilon = 0.0;
};

struct RunResult {
  std::string variant;
  std::uint64_t seed = 0;
  std::vector<EpisodeStats> episodes;
  double wall_seconds = 0.0;
  // Safety telemetry over every executed action of the run.
  double max_action_sum_err = 0.0;
  double min_action_entry = std::numeric_limits<double>::infinity();
  int max_scheduled_blocks = 0;

  double reward_per_step() const {
    double reward = 0.0;
    std::int64_t steps = 0;
    for (const EpisodeStats& e : episodes) {
      reward += e.total_reward;
      steps += e.steps;
    }
    return steps > 0 ? reward / static_cast<double>(steps) : 0.0;
  }

  // Fraction of encountered priority events that timed out; zero when no
  // event occurred.
  double prio_timeout_rate() const {
    std::int64_t events = 0;
    std::int64_t misses = 0;
    for (const EpisodeStats& e : episodes) {
      events += e.prio_events;
      misses += e.prio_timeouts;
    }
    return events > 0 ? static_cast<double>(misses) / static_cast<double>(events) : 0.0;
  }
};

// Priority-stage outputs the stage-2 variants consume.
struct StageOneArtifacts {
  ParamVector anchor_params;
  std::vector<double> fisher;
  std::map<int, GemMemory> memories;
};

struct TrainInputs {
  const AgentBundle* init = nullptr;          // stage-2 and continuation variants
  const StageOneArtifacts* stage1 = nullptr;  // gem/ewc variants
};

struct TrainOutcome {
  AgentBundle bundle;
  RunResult result;
  std::optional<StageOneArtifacts> artifacts;  // produced by prio_only runs
};

namespace detail {

inline void record_action_telemetry(RunResult& result, std::span<const double> action,
                                    const StepOutcome& outcome) {
  double sum = 0.0;
  for (const double a : action) {
    sum += a;
    result.min_action_entry = std::min(result.min_action_entry, a);
  }
  result.max_action_sum_err = std::max(result.max_action_sum_err, std::abs(sum - 1.0));
  int blocks = 0;
  for (const int b : outcome.scheduled_per_user) blocks += b;
  result.max_scheduled_blocks = std::max(result.max_scheduled_blocks, blocks);
}

inline constexpr std::uint64_t kEnvStreamTag = 1000;
inline constexpr std::uint64_t kReservoirStreamTag = 2000;
inline constexpr std::uint64_t kFisherStreamTag = 3000;
inline constexpr std::uint64_t kEvalStreamTag = 5000;
inline constexpr int kFisherBatches = 64;

}  // namespace detail

// Runs one training variant for its episode count. Fresh variants start from
// a new agent; gem/ewc variants start from the initializing checkpoint with a
// fresh exploration schedule; continuations resume the loaded agent's
// schedule position (epsilon stays at zero) and keep its continual-learning
// state. prio_only runs additionally produce the stage-one artifacts.
inline TrainOutcome train_variant(const RunConfig& cfg, const VariantSpec& variant,
                                  std::uint64_t seed, const TrainInputs& inputs = {},
                                  MetricsWriter* log = nullptr) {
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t run_tag = seed_mix(seed, hash_name(variant.name));

  SimConfig sim = cfg.sim;
  sim.p_prio = variant.train_p_prio;

  TrainOutcome outcome;
  AgentBundle& bundle = outcome.bundle;
  if (variant.init_from.empty()) {
    bundle.agent = make_agent(cfg.sim.num_users, cfg.hidden_layers, cfg.hidden_width, cfg.agent,
                              ExplorationSchedule{cfg.initial_epsilon, cfg.epsilon_zero_fraction,
                                                  variant.episodes},
                              run_tag);
  } else {
    if (!inputs.init)
      throw ConfigError("variant '" + variant.name + "' needs the '" + variant.init_from +
                        "' checkpoint");
    bundle.agent = inputs.init->agent;
    bundle.agent.buffer = ReplayBuffer(static_cast<std::size_t>(cfg.agent.buffer_capacity));
    bundle.agent.rng = Rng(seed_mix(run_tag, 3));
    if (!variant.is_continuation) {
      bundle.agent.schedule = ExplorationSchedule{cfg.initial_epsilon, cfg.epsilon_zero_fraction,
                                                  variant.episodes};
      bundle.agent.episodes_completed = 0;
    }
  }

  std::vector<std::unique_ptr<GradientTransform>> transforms;
  if (variant.is_continuation) {
    if (inputs.init && inputs.init->ewc) {
      bundle.ewc = inputs.init->ewc;
      transforms.push_back(std::make_unique<EwcTransform>(*bundle.ewc));
    }
    if (inputs.init && inputs.init->gem) {
      bundle.gem = inputs.init->gem;
      transforms.push_back(std::make_unique<GemTransform>(*bundle.gem));
    }
  } else if (variant.kind == VariantKind::ewc) {
    if (!inputs.stage1)
      throw ConfigError("variant '" + variant.name + "' needs stage-one artifacts");
    bundle.ewc = EwcAnchor{inputs.stage1->anchor_params, inputs.stage1->fisher,
                           variant.ewc_lambda};
    transforms.push_back(std::make_unique<EwcTransform>(*bundle.ewc));
  } else if (variant.kind == VariantKind::gem) {
    if (!inputs.stage1)
      throw ConfigError("variant '" + variant.name + "' needs stage-one artifacts");
    const auto it = inputs.stage1->memories.find(variant.gem_memory_size);
    if (it == inputs.stage1->memories.end())
      throw ConfigError("no retained memory of size " +
                        std::to_string(variant.gem_memory_size) + " for '" + variant.name + "'");
    bundle.gem = it->second;
    transforms.push_back(std::make_unique<GemTransform>(*bundle.gem));
  }
  std::vector<GradientTransform*> transform_ptrs;
  for (const auto& t : transforms) transform_ptrs.push_back(t.get());

  const bool build_artifacts = variant.kind == VariantKind::prio_only;
  std::vector<ReservoirSampler> reservoirs;
  if (build_artifacts)
    for (std::size_t k = 0; k < cfg.gem_memory_sizes.size(); ++k)
      reservoirs.emplace_back(static_cast<std::size_t>(cfg.gem_memory_sizes[k]),
                              seed_mix(run_tag, detail::kReservoirStreamTag + k));

  RunResult& result = outcome.result;
  result.variant = variant.name;
  result.seed = seed;

  Agent& agent = bundle.agent;
  for (int ep = 0; ep < variant.episodes; ++ep) {
    const int global_episode = agent.episodes_completed;
    const double epsilon = agent.schedule.value(global_episode);
    SimState state = reset(sim, seed_mix(run_tag, detail::kEnvStreamTag +
                                                      static_cast<std::uint64_t>(global_episode)));
    EpisodeStats stats;
    stats.epsilon = epsilon;
    for (int step = 0; step < cfg.steps_per_episode; ++step) {
      begin_step(state, sim);
      if (has_priority_job(state)) stats.prio_events += 1;
      std::vector<double> state_vec = build_state_vector(state, sim);
      const std::vector<double> action = act(agent.actor_spec, agent.actor_params, state_vec);
      std::vector<double> executed = explore_mix(action, epsilon, agent.rng);
      const StepOutcome step_out = apply_allocation(state, executed, sim);
      detail::record_action_telemetry(result, executed, step_out);
      stats.total_reward += step_out.reward;
      stats.total_sum_rate += step_out.sum_rate;
      stats.timeouts += step_out.n_timeouts;
      stats.prio_timeouts += step_out.n_prio_timeouts;
      stats.steps += 1;
      Transition transition{std::move(state_vec), std::move(executed), step_out.reward};
      if (build_artifacts)
        for (ReservoirSampler& r : reservoirs) r.offer(transition);
      agent.buffer.push(std::move(transition));
      train_step(agent, transform_ptrs);
    }
    result.episodes.push_back(stats);
    if (log)
      log->append(MetricsRecord{variant.name, seed, global_episode, stats.total_reward,
                                stats.total_sum_rate, stats.timeouts, stats.prio_timeouts,
                                stats.prio_events, stats.epsilon});
    agent.episodes_completed += 1;
  }

  if (build_artifacts) {
    StageOneArtifacts artifacts;
    artifacts.anchor_params = agent.actor_params;
    Rng fisher_rng(seed_mix(run_tag, detail::kFisherStreamTag));
    std::vector<std::vector<Transition>> batches;
    for (int b = 0; b < detail::kFisherBatches; ++b) {
      std::vector<Transition> batch;
      for (const std::size_t i :
           agent.buffer.sample_indices(fisher_rng, static_cast<std::size_t>(agent.batch_size)))
        batch.push_back(agent.buffer[i]);
      batches.push_back(std::move(batch));
    }
    const EwcAnchor anchor = build_ewc_anchor(agent.actor_spec, agent.actor_params,
                                              agent.critic_spec, agent.critic_params, batches,
                                              /*weight=*/1.0);
    artifacts.fisher = anchor.fisher;
    for (std::size_t k = 0; k < reservoirs.size(); ++k)
      artifacts.memories.emplace(cfg.gem_memory_sizes[k], reservoirs[k].take());
    outcome.artifacts = std::move(artifacts);
  }

  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return outcome;
}

// Frozen evaluation on the baseline simulation: exploration off, no training,
// parameters untouched. Repeats over eval_repetitions deterministic seeds and
// pools the per-episode stats.
inline RunResult evaluate_frozen(const AgentBundle& bundle, const RunConfig& cfg,
                                 const std::string& variant_name, std::uint64_t model_seed,
                                 MetricsWriter* log = nullptr) {
  cfg.validate();
  if (bundle.agent.actor_spec.input_size() != 4 * cfg.sim.num_users)
    throw ConfigError("checkpoint was trained for a different number of users");
  const auto started = std::chrono::steady_clock::now();
  RunResult result;
  result.variant = variant_name;
  result.seed = model_seed;
  for (int rep = 0; rep < cfg.eval_repetitions; ++rep) {
    const std::uint64_t eval_seed = cfg.eval_seed_base + static_cast<std::uint64_t>(rep);
    for (int ep = 0; ep < cfg.eval_episodes; ++ep) {
      SimState state =
          reset(cfg.sim, seed_mix(eval_seed, detail::kEvalStreamTag +
                                                 static_cast<std::uint64_t>(ep)));
      EpisodeStats stats;
      for (int step = 0; step < cfg.eval_steps; ++step) {
        begin_step(state, cfg.sim);
        if (has_priority_job(state)) stats.prio_events += 1;
        const std::vector<double> state_vec = build_state_vector(state, cfg.sim);
        const std::vector<double> action =
            act(bundle.agent.actor_spec, bundle.agent.actor_params, state_vec);
        const StepOutcome step_out = apply_allocation(state, action, cfg.sim);
        detail::record_action_telemetry(result, action, step_out);
        stats.total_reward += step_out.reward;
        stats.total_sum_rate += step_out.sum_rate;
        stats.timeouts += step_out.n_timeouts;
        stats.prio_timeouts += step_out.n_prio_timeouts;
        stats.steps += 1;
      }
      result.episodes.push_back(stats);
      if (log)
        log->append(MetricsRecord{variant_name, eval_seed, ep, stats.total_reward,
                                  stats.total_sum_rate, stats.timeouts, stats.prio_timeouts,
                                  stats.prio_events, 0.0});
    }
  }
  result.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

namespace detail {

// Sort key giving the report a stable, readable order.
inline std::pair<int, double> variant_order(const std::string& name) {
  std::string base = name;
  const bool continued = !base.empty() && base.back() == '+';
  if (continued) base.pop_back();
  int group = 9;
  double param = 0.0;
  if (base == "baseline") group = 0;
  else if (base == "prio_only") group = 1;
  else if (base.starts_with("gem")) { group = 2; param = std::atof(base.c_str() + 3); }
  else if (base.starts_with("ewc")) { group = 3; param = std::atof(base.c_str() + 3); }
  else if (base.starts_with("aug")) { group = 4; param = std::atof(base.c_str() + 3); }
  return {group + (continued ? 10 : 0), param};
}

}  // namespace detail

// Per-variant mean and variance over seed-level scores, both columns divided
// by the baseline's mean. Variance is the sample variance across seeds.
inline EvalReport aggregate_and_normalize(std::span<const RunResult> results) {
  std::map<std::string, std::vector<const RunResult*>> by_variant;
  for (const RunResult& r : results) by_variant[r.variant].push_back(&r);
  const auto baseline = by_variant.find("baseline");
  if (baseline == by_variant.end())
    throw ContractError("aggregate_and_normalize: no baseline results");

  const auto mean_of = [](const std::vector<double>& v) {
    double sum = 0.0;
    for (const double x : v) sum += x;
    return v.empty() ? 0.0 : sum / static_cast<double>(v.size());
  };
  const auto var_of = [&mean_of](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double sum = 0.0;
    for (const double x : v) sum += (x - m) * (x - m);
    return sum / static_cast<double>(v.size() - 1);
  };

  std::vector<double> base_rewards;
  std::vector<double> base_rates;
  for (const RunResult* r : baseline->second) {
    base_rewards.push_back(r->reward_per_step());
    base_rates.push_back(r->prio_timeout_rate());
  }
  const double base_reward = mean_of(base_rewards);
  const double base_rate = mean_of(base_rates);

  EvalReport report;
  for (const auto& [name, runs] : by_variant) {
    std::vector<double> rewards;
    std::vector<double> rates;
    for (const RunResult* r : runs) {
      rewards.push_back(r->reward_per_step());
      rates.push_back(r->prio_timeout_rate());
    }
    EvalReportRow row;
    row.variant = name;
    row.num_seeds = static_cast<int>(runs.size());
    row.mean_reward_per_step = mean_of(rewards);
    row.mean_prio_timeout_rate = mean_of(rates);
    if (base_reward != 0.0) {
      for (double& x : rewards) x /= base_reward;
      row.reward_norm_mean = mean_of(rewards);
      row.reward_norm_var = var_of(rewards);
    }
    if (base_rate != 0.0) {
      for (double& x : rates) x /= base_rate;
      row.prio_norm_mean = mean_of(rates);
      row.prio_norm_var = var_of(rates);
    }
    report.rows.push_back(std::move(row));
  }
  std::stable_sort(report.rows.begin(), report.rows.end(),
                   [](const EvalReportRow& a, const EvalReportRow& b) {
                     return detail::variant_order(a.variant) < detail::variant_order(b.variant);
                   });
  return report;
}

// ---- Run-directory orchestration -------------------------------------------
//
// runs/<variant>_s<seed>/
//   config.cfg       resolved configuration snapshot
//   checkpoint.bin   agent bundle after training
//   metrics.log      one record per training episode
//   eval.log         one record per evaluation episode (after `eval`)
//   ewc_anchor.bin, gem_mem_<M>.bin   stage-one artifacts (prio_only only)

struct RunPaths {
  std::filesystem::path dir;

  static RunPaths in(const std::filesystem::path& runs_root, const std::string& variant,
                     std::uint64_t seed) {
    return RunPaths{runs_root / (variant + "_s" + std::to_string(seed))};
  }

  std::filesystem::path config() const { return dir / "config.cfg"; }
  std::filesystem::path checkpoint() const { return dir / "checkpoint.bin"; }
  std::filesystem::path metrics() const { return dir / "metrics.log"; }
  std::filesystem::path eval_log() const { return dir / "eval.log"; }
  std::filesystem::path ewc_artifact() const { return dir / "ewc_anchor.bin"; }
  std::filesystem::path gem_artifact(int m) const {
    return dir / ("gem_mem_" + std::to_string(m) + ".bin");
  }
};

// Splits "<variant>_s<seed>" back into its parts.
inline std::pair<std::string, std::uint64_t> parse_run_dir_name(const std::string& name) {
  const auto pos = name.rfind("_s");
  if (pos == std::string::npos || pos + 2 >= name.size())
    throw ConfigError("run directory '" + name + "' is not named <variant>_s<seed>");
  char* end = nullptr;
  const std::uint64_t seed = std::strtoull(name.c_str() + pos + 2, &end, 10);
  if (!end || *end != '\0')
    throw ConfigError("run directory '" + name + "' is not named <variant>_s<seed>");
  return {name.substr(0, pos), seed};
}

namespace detail {

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

inline StageOneArtifacts load_stage1_artifacts(const RunPaths& prio_run, const RunConfig& cfg,
                                               const VariantSpec& variant) {
  StageOneArtifacts artifacts;
  if (variant.kind == VariantKind::ewc) {
    std::tie(artifacts.anchor_params, artifacts.fisher) =
        load_ewc_artifact(prio_run.ewc_artifact());
  } else if (variant.kind == VariantKind::gem) {
    artifacts.memories.emplace(variant.gem_memory_size,
                               load_gem_artifact(prio_run.gem_artifact(variant.gem_memory_size)));
  }
  (void)cfg;
  return artifacts;
}

}  // namespace detail

// Trains one (variant, seed) into its run directory and returns that
// directory. Stage-2 variants load the prio_only run of the same seed;
// missing prerequisites surface as configuration errors.
inline std::filesystem::path run_train(const std::filesystem::path& runs_root,
                                       const RunConfig& cfg, const std::string& variant_name,
                                       std::uint64_t seed) {
  cfg.validate();
  const VariantSpec variant = make_variant(variant_name, cfg);
  if (variant.is_continuation)
    throw ConfigError("continuation runs are produced by `forget`, not `train`");

  TrainInputs inputs;
  AgentBundle init_bundle;
  StageOneArtifacts stage1;
  if (!variant.init_from.empty()) {
    const RunPaths init_run = RunPaths::in(runs_root, variant.init_from, seed);
    if (!std::filesystem::exists(init_run.checkpoint()))
      throw ConfigError("variant '" + variant_name + "' needs " +
                        init_run.checkpoint().string() + "; train '" + variant.init_from +
                        "' first");
    init_bundle = load_agent_bundle(init_run.checkpoint());
    stage1 = detail::load_stage1_artifacts(init_run, cfg, variant);
    inputs.init = &init_bundle;
    inputs.stage1 = &stage1;
  }

  const RunPaths run = RunPaths::in(runs_root, variant_name, seed);
  std::filesystem::create_directories(run.dir);
  detail::write_text_file(run.config(), emit_config(cfg));
  MetricsWriter log(run.metrics());
  TrainOutcome outcome = train_variant(cfg, variant, seed, inputs, &log);
  save_agent_bundle(run.checkpoint(), outcome.bundle);
  if (outcome.artifacts) {
    save_ewc_artifact(run.ewc_artifact(), outcome.artifacts->anchor_params,
                      outcome.artifacts->fisher);
    for (const auto& [m, memory] : outcome.artifacts->memories)
      save_gem_artifact(run.gem_artifact(m), memory);
  }
  return run.dir;
}

// Evaluates a run directory's checkpoint with the configuration snapshot
// stored next to it; writes eval.log and returns the pooled result.
inline RunResult run_eval(const std::filesystem::path& checkpoint_dir) {
  const auto [variant_name, seed] = parse_run_dir_name(checkpoint_dir.filename().string());
  const RunPaths run{checkpoint_dir};
  const RunConfig cfg = parse_config(detail::read_text_file(run.config()));
  const AgentBundle bundle = load_agent_bundle(run.checkpoint());
  MetricsWriter log(run.eval_log());
  return evaluate_frozen(bundle, cfg, variant_name, seed, &log);
}

// Continues a finished run with priority events switched off, preserving the
// variant's continual-learning state, optimizer state, and schedule position.
// Produces a new "<variant>+_s<seed>" run directory.
inline std::filesystem::path run_forget(const std::filesystem::path& checkpoint_dir) {
  const auto [variant_name, seed] = parse_run_dir_name(checkpoint_dir.filename().string());
  const RunPaths source{checkpoint_dir};
  const RunConfig cfg = parse_config(detail::read_text_file(source.config()));
  const VariantSpec variant = make_variant(variant_name + "+", cfg);
  const AgentBundle init_bundle = load_agent_bundle(source.checkpoint());
  TrainInputs inputs;
  inputs.init = &init_bundle;

  const RunPaths run = RunPaths::in(checkpoint_dir.parent_path(), variant.name, seed);
  std::filesystem::create_directories(run.dir);
  detail::write_text_file(run.config(), emit_config(cfg));
  MetricsWriter log(run.metrics());
  TrainOutcome outcome = train_variant(cfg, variant, seed, inputs, &log);
  save_agent_bundle(run.checkpoint(), outcome.bundle);
  return run.dir;
}

// Rebuilds pooled results from the eval logs under a runs directory, writes
// the summary tables there, and returns the report.
inline EvalReport run_report(const std::filesystem::path& runs_root) {
  std::vector<RunResult> results;
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(runs_root))
    if (entry.is_directory()) dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    const RunPaths run{dir};
    if (!std::filesystem::exists(run.eval_log())) continue;
    const auto [variant_name, seed] = parse_run_dir_name(dir.filename().string());
    const RunConfig cfg = parse_config(detail::read_text_file(run.config()));
    RunResult result;
    result.variant = variant_name;
    result.seed = seed;
    for (const MetricsRecord& r : read_metrics(run.eval_log())) {
      EpisodeStats stats;
      stats.total_reward = r.total_reward;
      stats.total_sum_rate = r.total_sum_rate;
      stats.timeouts = r.timeouts;
      stats.prio_timeouts = r.prio_timeouts;
      stats.prio_events = r.prio_events;
      stats.steps = cfg.eval_steps;
      result.episodes.push_back(stats);
    }
    results.push_back(std::move(result));
  }
  const EvalReport report = aggregate_and_normalize(results);
  emit_summary(report, runs_root);
  return report;
}

}  // namespace rlsched
