// Acceptance suite. Each criterion prints exactly one [PASS]/[FAIL] line;
// the process exits non-zero if any criterion fails. Criteria 5, 6 and 8
// share one desk-scale training campaign that runs the variant protocol over
// three seeds on a worker pool.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fd_check.hpp"
#include "reference_sim.hpp"
#include "rlsched/harness.hpp"

using namespace rlsched;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct CriterionOutcome {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<CriterionOutcome> g_outcomes;

void run_criterion(int id, const std::string& name,
                   const std::function<bool(std::string&)>& body) {
  CriterionOutcome outcome;
  outcome.id = id;
  outcome.name = name;
  const auto start = Clock::now();
  try {
    outcome.pass = body(outcome.detail);
  } catch (const std::exception& e) {
    outcome.pass = false;
    outcome.detail = std::string("exception: ") + e.what();
  }
  outcome.seconds = seconds_since(start);
  std::printf("# criterion %d finished in %.1fs\n", id, outcome.seconds);
  std::fflush(stdout);
  g_outcomes.push_back(std::move(outcome));
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::string format(const char* fmt, ...) {
  char buf[512];
  va_list args;
  va_start(args, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, args);
  va_end(args);
  return buf;
}

// ---- Criterion 1: analytic gradients vs central finite differences --------

bool criterion_gradients(std::string& detail) {
  const auto start = Clock::now();
  Rng rng(10001);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    NetSpec spec;
    const int depth = static_cast<int>(rng.uniform_int(1, 3));
    spec.layer_sizes.push_back(static_cast<int>(rng.uniform_int(1, 8)));
    for (int l = 0; l < depth; ++l)
      spec.layer_sizes.push_back(static_cast<int>(rng.uniform_int(1, 8)));
    spec.output_activation =
        trial % 2 == 0 ? OutputActivation::softmax : OutputActivation::linear;
    const ParamVector params = init_params(spec, static_cast<std::uint64_t>(trial) + 500);
    std::vector<double> input =
        random_vector(rng, static_cast<std::size_t>(spec.input_size()));
    while (!fdcheck::kink_free(spec, params, input))
      input = random_vector(rng, static_cast<std::size_t>(spec.input_size()));
    const std::vector<double> direction =
        random_vector(rng, static_cast<std::size_t>(spec.output_size()));

    const auto scalar_of_params = [&](const std::vector<double>& p) {
      const auto out = forward(spec, p, input);
      return dot(out, direction);
    };
    const auto scalar_of_input = [&](const std::vector<double>& x) {
      const auto out = forward(spec, params, x);
      return dot(out, direction);
    };

    Tape tape;
    forward(spec, params, input, &tape);
    const auto [param_grad, input_grad] = backward(spec, params, tape, direction);
    worst = std::max(worst, fdcheck::max_rel_error(params, scalar_of_params, param_grad));
    worst = std::max(worst, fdcheck::max_rel_error(input, scalar_of_input, input_grad));
  }
  const double elapsed = seconds_since(start);
  detail = format("max relative error %.3e over 100 nets (tolerance 1e-4), %.1fs", worst,
                  elapsed);
  return worst <= 1e-4 && elapsed < 10.0;
}

// ---- Criterion 2: GEM projection against closed form and grid search ------

bool criterion_gem_projection(std::string& detail) {
  const auto start = Clock::now();
  Rng rng(20002);
  double worst_alignment = 0.0;
  double worst_v_diff = 0.0;
  double worst_excess = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto dim = static_cast<std::size_t>(rng.uniform_int(1, 8));
    const auto g_prio = random_vector(rng, dim);
    const auto g_curr = random_vector(rng, dim);
    const ProjectionResult res = gem_project(g_prio, g_curr);

    const double alignment = dot(g_prio, res.projected_grad);
    worst_alignment = std::min(worst_alignment, alignment);

    const double overlap = dot(g_prio, g_curr);
    const double norm2 = dot(g_prio, g_prio);
    if (norm2 < 1e-18 || overlap >= 0.0) continue;

    const double v_closed = -overlap / norm2;
    worst_v_diff = std::max(
        worst_v_diff, std::abs(res.v_opt - v_closed) / std::max(1.0, std::abs(v_closed)));

    double attained = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double d = res.projected_grad[i] - g_curr[i];
      attained += d * d;
    }
    const double v_max = std::max(10.0, 2.0 * v_closed);
    const int points = 100000;
    double grid_best = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= points; ++k) {
      const double v = v_max * static_cast<double>(k) / points;
      if (overlap + v * norm2 < 0.0) continue;  // outside the half-space
      grid_best = std::min(grid_best, v * v * norm2);
    }
    worst_excess = std::max(worst_excess, attained - grid_best);
  }
  const double elapsed = seconds_since(start);
  detail = format(
      "min alignment %.2e (>= -1e-9), closed-form v gap %.2e (<= 1e-9), "
      "excess over grid %.2e (<= 1e-6), %.1fs",
      worst_alignment, worst_v_diff, worst_excess, elapsed);
  return worst_alignment >= -1e-9 && worst_v_diff <= 1e-9 && worst_excess <= 1e-6 &&
         elapsed < 10.0;
}

// ---- Criterion 3: EWC penalty gradient and anchoring strength -------------

double stage2_actor_movement(const RunConfig& cfg, const TrainOutcome& stage1, double lambda) {
  Agent agent = stage1.bundle.agent;
  agent.buffer = ReplayBuffer(static_cast<std::size_t>(cfg.agent.buffer_capacity));
  agent.rng = Rng(seed_mix(31337, 3));
  EwcTransform ewc(EwcAnchor{stage1.artifacts->anchor_params, stage1.artifacts->fisher, lambda});
  GradientTransform* transforms[] = {&ewc};

  SimConfig sim = cfg.sim;
  SimState state = reset(sim, 7101);
  int steps_trained = 0;
  while (steps_trained < 1000) {
    begin_step(state, sim);
    std::vector<double> state_vec = build_state_vector(state, sim);
    const auto action = act(agent.actor_spec, agent.actor_params, state_vec);
    std::vector<double> executed = explore_mix(action, 0.3, agent.rng);
    const StepOutcome out = apply_allocation(state, executed, sim);
    agent.buffer.push(Transition{std::move(state_vec), std::move(executed), out.reward});
    if (train_step(agent, transforms)) ++steps_trained;
  }
  double movement = 0.0;
  for (std::size_t i = 0; i < agent.actor_params.size(); ++i) {
    const double d = agent.actor_params[i] - stage1.artifacts->anchor_params[i];
    movement += d * d;
  }
  return std::sqrt(movement);
}

bool criterion_ewc(std::string& detail) {
  // Penalty gradient against finite differences.
  Rng rng(30003);
  double worst_fd = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 16;
    const ParamVector anchor_params = random_vector(rng, n);
    const std::vector<double> fisher = random_vector(rng, n, 0.0, 3.0);
    const double lambda = rng.uniform(0.5, 20.0);
    const ParamVector params = random_vector(rng, n);
    GradVector analytic(n, 0.0);
    ewc_apply(EwcAnchor{anchor_params, fisher, lambda}, params, analytic);
    const auto penalty = [&](const std::vector<double>& p) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        sum += fisher[i] * (p[i] - anchor_params[i]) * (p[i] - anchor_params[i]);
      return lambda * sum;
    };
    worst_fd = std::max(worst_fd, fdcheck::max_rel_error(params, penalty, analytic));
  }

  // Anchoring: a strong anchor must keep stage-2 training near the stage-1
  // parameters relative to unanchored training.
  RunConfig cfg = default_config("desk");
  cfg.hidden_layers = 2;
  cfg.hidden_width = 32;
  cfg.agent.batch_size = 64;
  cfg.agent.buffer_capacity = 4096;
  cfg.episodes = 3;
  cfg.steps_per_episode = 600;
  const TrainOutcome stage1 = train_variant(cfg, make_variant("prio_only", cfg), 9);

  std::size_t nonzero = 0;
  for (const double f : stage1.artifacts->fisher) nonzero += f > 0.0 ? 1 : 0;
  const double nonzero_fraction =
      static_cast<double>(nonzero) / static_cast<double>(stage1.artifacts->fisher.size());

  const double anchored = stage2_actor_movement(cfg, stage1, 1e7);
  const double free_moving = stage2_actor_movement(cfg, stage1, 0.0);
  const double ratio = free_moving > 0.0 ? anchored / free_moving : 0.0;

  detail = format(
      "penalty fd error %.2e (<= 1e-6); movement %.4f anchored vs %.4f free, ratio %.3f "
      "(<= 0.10), fisher nonzero %.1f%%",
      worst_fd, anchored, free_moving, ratio,
      nonzero_fraction * 100.0);
  return worst_fd <= 1e-6 && nonzero_fraction > 0.5 && ratio <= 0.10;
}

// ---- Criterion 4: environment against the independent reference -----------

bool criterion_env_oracle(std::string& detail) {
  SimConfig cfg;
  cfg.num_users = 2;
  cfg.num_resources = 3;
  cfg.max_job_size = 2;
  cfg.max_delay = 2;
  cfg.p_job = 0.5;
  cfg.p_prio = 0.05;

  refsim::RefConfig ref_cfg;
  ref_cfg.users = 2;
  ref_cfg.blocks = 3;
  ref_cfg.max_size = 2;
  ref_cfg.max_delay = 2;
  ref_cfg.p_job = 0.5;
  ref_cfg.p_prio = 0.05;

  const std::uint64_t seed = 40004;
  SimState state = reset(cfg, seed);
  refsim::ReferenceSim reference(ref_cfg, seed);
  Rng action_rng(777);

  int prio_events = 0;
  for (int step = 0; step < 1000; ++step) {
    begin_step(state, cfg);
    reference.begin();
    prio_events += has_priority_job(state) ? 1 : 0;

    std::vector<double> action(2);
    double sum = 0.0;
    for (double& a : action) sum += a = action_rng.uniform01();
    for (double& a : action) a /= sum;

    if (build_state_vector(state, cfg) != reference.features()) {
      detail = format("state vector mismatch at step %d", step);
      return false;
    }
    const StepOutcome out = apply_allocation(state, action, cfg);
    const refsim::RefStep expected = reference.step(action);
    if (out.scheduled_per_user != expected.served || out.sum_rate != expected.sum_rate ||
        out.n_timeouts != expected.timeouts || out.n_prio_timeouts != expected.prio_timeouts ||
        out.reward != expected.reward || out.next_state_vector != expected.features) {
      detail = format("transition mismatch at step %d", step);
      return false;
    }
    std::vector<std::tuple<std::int64_t, int, int, int, bool>> jobs;
    for (const Job& j : state.jobs)
      jobs.emplace_back(j.job_id, j.user, j.remaining, j.delay, j.is_priority);
    std::sort(jobs.begin(), jobs.end());
    if (jobs != reference.jobs()) {
      detail = format("job set mismatch at step %d", step);
      return false;
    }
  }
  detail = format("1000 steps identical (%d priority events exercised)", prio_events);
  return true;
}

// ---- Criteria 5, 6, 8: the desk-scale campaign -----------------------------

struct Campaign {
  RunConfig cfg = default_config("desk");
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::map<std::string, TrainOutcome> trained;
  std::map<std::string, RunResult> evals;
  std::vector<RunResult> telemetry;
  std::mutex mutex;

  static std::string key(const std::string& variant, std::uint64_t seed) {
    return variant + "_s" + std::to_string(seed);
  }

  void run_jobs(std::vector<std::function<void()>> jobs) {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    const auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= jobs.size()) return;
        try {
          jobs[i]();
        } catch (...) {
          const std::lock_guard<std::mutex> guard(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    };
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    workers = std::min<unsigned>(workers, static_cast<unsigned>(jobs.size()));
    std::vector<std::thread> threads;
    for (unsigned i = 0; i < workers; ++i) threads.emplace_back(worker);
    for (std::thread& t : threads) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  std::function<void()> job(const std::string& variant, std::uint64_t seed,
                            TrainInputs inputs = {}) {
    return [this, variant, seed, inputs] {
      const auto start = Clock::now();
      TrainOutcome outcome = train_variant(cfg, make_variant(variant, cfg), seed, inputs);
      RunResult eval = evaluate_frozen(outcome.bundle, cfg, variant, seed);
      const std::lock_guard<std::mutex> guard(mutex);
      telemetry.push_back(outcome.result);
      telemetry.push_back(eval);
      evals.emplace(key(variant, seed), std::move(eval));
      trained.emplace(key(variant, seed), std::move(outcome));
      std::printf("# trained+evaluated %-12s seed %llu  (%.0fs)\n", variant.c_str(),
                  static_cast<unsigned long long>(seed), seconds_since(start));
      std::fflush(stdout);
    };
  }

  void run() {
    std::vector<std::function<void()>> stage_a;
    for (const std::uint64_t seed : seeds) {
      stage_a.push_back(job("aug20", seed));  // longest first
      stage_a.push_back(job("baseline", seed));
      stage_a.push_back(job("prio_only", seed));
    }
    run_jobs(std::move(stage_a));

    std::vector<std::function<void()>> stage_b;
    for (const std::uint64_t seed : seeds) {
      const TrainOutcome& prio = trained.at(key("prio_only", seed));
      TrainInputs inputs;
      inputs.init = &prio.bundle;
      inputs.stage1 = &*prio.artifacts;
      stage_b.push_back(job("gem512", seed, inputs));
      stage_b.push_back(job("ewc1e6", seed, inputs));
    }
    run_jobs(std::move(stage_b));

    std::vector<std::function<void()>> stage_c;
    for (const std::uint64_t seed : seeds) {
      TrainInputs aug_inputs;
      aug_inputs.init = &trained.at(key("aug20", seed)).bundle;
      stage_c.push_back(job("aug20+", seed, aug_inputs));
      TrainInputs ewc_inputs;
      ewc_inputs.init = &trained.at(key(cfg.forget_ewc, seed)).bundle;
      stage_c.push_back(job(cfg.forget_ewc + "+", seed, ewc_inputs));
    }
    run_jobs(std::move(stage_c));
  }

  EvalReport report() const {
    std::vector<RunResult> results;
    for (const auto& [k, r] : evals) results.push_back(r);
    return aggregate_and_normalize(results);
  }

  double mean_prio_rate(const std::string& variant) const {
    double sum = 0.0;
    int count = 0;
    for (const std::uint64_t seed : seeds) {
      sum += evals.at(key(variant, seed)).prio_timeout_rate();
      ++count;
    }
    return sum / count;
  }
};

Campaign g_campaign;
bool g_campaign_ran = false;

void ensure_campaign() {
  if (g_campaign_ran) return;
  std::printf("# running desk-scale campaign: %zu variants x %zu seeds\n",
              static_cast<std::size_t>(7), g_campaign.seeds.size());
  std::fflush(stdout);
  g_campaign.run();
  g_campaign_ran = true;
}

const EvalReportRow& find_row(const EvalReport& report, const std::string& variant) {
  for (const EvalReportRow& row : report.rows)
    if (row.variant == variant) return row;
  throw std::runtime_error("no report row for " + variant);
}

bool criterion_qualitative_ordering(std::string& detail) {
  ensure_campaign();
  const EvalReport report = g_campaign.report();
  for (const EvalReportRow& row : report.rows)
    std::printf("# %-10s reward/baseline %.4f  prio/baseline %.4f  (raw %.4f / %.4f)\n",
                row.variant.c_str(), row.reward_norm_mean, row.prio_norm_mean,
                row.mean_reward_per_step, row.mean_prio_timeout_rate);
  std::fflush(stdout);

  const EvalReportRow& prio = find_row(report, "prio_only");
  const EvalReportRow& ewc = find_row(report, "ewc1e6");
  const EvalReportRow& gem = find_row(report, "gem512");
  const bool prio_ok = prio.prio_norm_mean <= 0.20;
  const bool ewc_ok = ewc.prio_norm_mean <= 0.50 && ewc.reward_norm_mean >= 0.85;
  const bool gem_ok = gem.prio_norm_mean <= 0.50 && gem.reward_norm_mean >= 0.85;
  detail = format(
      "prio_only prio %.3f (<= 0.20); ewc1e6 prio %.3f reward %.3f; gem512 prio %.3f "
      "reward %.3f (prio <= 0.50, reward >= 0.85)",
      prio.prio_norm_mean, ewc.prio_norm_mean, ewc.reward_norm_mean, gem.prio_norm_mean,
      gem.reward_norm_mean);
  return prio_ok && ewc_ok && gem_ok;
}

bool criterion_forgetting(std::string& detail) {
  ensure_campaign();
  const double pre_aug = g_campaign.mean_prio_rate("aug20");
  const double post_aug = g_campaign.mean_prio_rate("aug20+");
  const std::string ewc = g_campaign.cfg.forget_ewc;
  const double pre_ewc = g_campaign.mean_prio_rate(ewc);
  const double post_ewc = g_campaign.mean_prio_rate(ewc + "+");
  const bool aug_forgets = post_aug >= 3.0 * pre_aug && post_aug > 0.0;
  const bool ewc_holds = post_ewc <= 1.5 * pre_ewc;
  detail = format("aug20 prio rate %.4f -> %.4f (>= 3x); %s prio rate %.4f -> %.4f (<= 1.5x)",
                  pre_aug, post_aug, ewc.c_str(), pre_ewc, post_ewc);
  return aug_forgets && ewc_holds;
}

// ---- Criterion 7: bit-identical repetition ---------------------------------

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool criterion_determinism(std::string& detail) {
  RunConfig cfg = default_config("desk");
  cfg.episodes = 2;
  cfg.steps_per_episode = 300;
  cfg.eval_episodes = 1;
  cfg.eval_steps = 500;
  cfg.eval_repetitions = 2;

  const auto root = std::filesystem::temp_directory_path() / "rlsched_acceptance_determinism";
  std::filesystem::remove_all(root);
  const auto runs_a = root / "a";
  const auto runs_b = root / "b";
  const auto dir_a = run_train(runs_a, cfg, "baseline", 1);
  const auto dir_b = run_train(runs_b, cfg, "baseline", 1);
  run_eval(dir_a);
  run_eval(dir_b);
  const bool metrics_equal =
      slurp(RunPaths{dir_a}.metrics()) == slurp(RunPaths{dir_b}.metrics());
  const bool eval_equal =
      slurp(RunPaths{dir_a}.eval_log()) == slurp(RunPaths{dir_b}.eval_log());
  const bool checkpoint_equal =
      slurp(RunPaths{dir_a}.checkpoint()) == slurp(RunPaths{dir_b}.checkpoint());
  std::filesystem::remove_all(root);
  detail = format("metrics %s, eval %s, checkpoint %s",
                  metrics_equal ? "identical" : "DIFFER",
                  eval_equal ? "identical" : "DIFFER",
                  checkpoint_equal ? "identical" : "DIFFER");
  return metrics_equal && eval_equal && checkpoint_equal;
}

bool criterion_simplex_safety(std::string& detail) {
  ensure_campaign();
  double worst_sum_err = 0.0;
  double worst_entry = std::numeric_limits<double>::infinity();
  int worst_blocks = 0;
  for (const RunResult& r : g_campaign.telemetry) {
    worst_sum_err = std::max(worst_sum_err, r.max_action_sum_err);
    worst_entry = std::min(worst_entry, r.min_action_entry);
    worst_blocks = std::max(worst_blocks, r.max_scheduled_blocks);
  }
  detail = format(
      "max |sum-1| %.2e (<= 1e-6), min entry %.2e (>= 0), max blocks %d (<= %d) over %zu runs",
      worst_sum_err, worst_entry, worst_blocks, g_campaign.cfg.sim.num_resources,
      g_campaign.telemetry.size());
  return worst_sum_err <= 1e-6 && worst_entry >= 0.0 &&
         worst_blocks <= g_campaign.cfg.sim.num_resources;
}

}  // namespace

int main() {
  const auto start = Clock::now();
  run_criterion(1, "gradient correctness", criterion_gradients);
  run_criterion(2, "gem projection oracle", criterion_gem_projection);
  run_criterion(3, "ewc mechanics", criterion_ewc);
  run_criterion(4, "environment oracle", criterion_env_oracle);
  run_criterion(7, "determinism", criterion_determinism);
  run_criterion(5, "qualitative ordering", criterion_qualitative_ordering);
  run_criterion(6, "catastrophic forgetting", criterion_forgetting);
  run_criterion(8, "simplex safety", criterion_simplex_safety);

  std::sort(g_outcomes.begin(), g_outcomes.end(),
            [](const CriterionOutcome& a, const CriterionOutcome& b) { return a.id < b.id; });
  bool all_pass = true;
  std::printf("\n");
  for (const CriterionOutcome& o : g_outcomes) {
    std::printf("[%s] criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", o.id,
                o.name.c_str(), o.detail.c_str());
    all_pass = all_pass && o.pass;
  }
  std::printf("\nacceptance %s in %.0fs\n", all_pass ? "PASSED" : "FAILED",
              seconds_since(start));
  return all_pass ? 0 : 1;
}
