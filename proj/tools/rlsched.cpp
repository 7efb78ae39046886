// Command-line front end for the scheduler workbench. One subcommand per
// protocol phase: train, eval, forget, report.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>

#include <CLI11.hpp>

#include "rlsched/harness.hpp"

namespace {

rlsched::RunConfig load_config(const std::string& path) {
  if (path.empty()) return rlsched::default_config("paper");
  return rlsched::parse_config(rlsched::detail::read_text_file(path));
}

void print_report(const rlsched::EvalReport& report) {
  std::printf("%-18s %16s %12s %18s %12s\n", "variant", "reward/baseline", "(var)",
              "prio_rate/baseline", "(var)");
  for (const auto& row : report.rows)
    std::printf("%-18s %16.4f %12.3e %18.4f %12.3e\n", row.variant.c_str(),
                row.reward_norm_mean, row.reward_norm_var, row.prio_norm_mean,
                row.prio_norm_var);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned resource scheduler workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::string variant;
  std::uint64_t seed = 1;
  std::string runs_dir = "runs";
  std::string checkpoint_dir;

  auto* train = app.add_subcommand("train", "Train one scheduler variant");
  train->add_option("--config", config_path, "Configuration file (defaults to profile paper)");
  train->add_option("--variant", variant, "Variant name, e.g. baseline, prio_only, gem512, ewc1e6, aug20")
      ->required();
  train->add_option("--seed", seed, "Run seed")->required();
  train->add_option("--runs", runs_dir, "Runs directory (default: runs)");

  auto* eval = app.add_subcommand("eval", "Evaluate a trained checkpoint, frozen");
  eval->add_option("--checkpoint", checkpoint_dir, "Run directory holding checkpoint.bin")
      ->required();

  auto* forget = app.add_subcommand("forget", "Continue training with priority events off");
  forget->add_option("--checkpoint", checkpoint_dir, "Run directory holding checkpoint.bin")
      ->required();

  auto* report = app.add_subcommand("report", "Aggregate eval logs into summary tables");
  report->add_option("--runs", runs_dir, "Runs directory (default: runs)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      const auto dir = rlsched::run_train(runs_dir, load_config(config_path), variant, seed);
      std::printf("trained %s\n", dir.string().c_str());
    } else if (eval->parsed()) {
      const auto result = rlsched::run_eval(checkpoint_dir);
      std::printf("evaluated %s: reward/step %.6f, prio timeout rate %.6f\n",
                  checkpoint_dir.c_str(), result.reward_per_step(),
                  result.prio_timeout_rate());
    } else if (forget->parsed()) {
      const auto dir = rlsched::run_forget(checkpoint_dir);
      std::printf("continued into %s\n", dir.string().c_str());
    } else if (report->parsed()) {
      print_report(rlsched::run_report(runs_dir));
      std::printf("summary tables written under %s\n", runs_dir.c_str());
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
