#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tilt/app/commands.hpp"

int main(int argc, char** argv) {
  using namespace tilt::app;
  CLI::App app{"Joint tilted-ridge estimation under covariate shift: experiments and checks"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  RunRequest run;
  std::string run_out;
  std::uint64_t run_seed = 0;
  std::size_t run_trials = 0;
  int run_threads = 0;
  auto* run_cmd = app.add_subcommand("run", "Run the experiment described by a config file");
  run_cmd->add_option("--config", run.config_path, "Experiment config (JSON)")->required();
  auto* run_out_opt = run_cmd->add_option("--out", run_out, "Output directory");
  auto* seed_opt = run_cmd->add_option("--seed", run_seed, "Master seed (overrides config)");
  auto* trials_opt = run_cmd->add_option("--trials", run_trials, "Trials per cell (overrides config)");
  auto* threads_opt = run_cmd->add_option("--threads", run_threads, "Worker threads");
  run_cmd->add_option("--set", run.overrides, "Config override key=value (repeatable)")
      ->take_all();

  VerifyRequest verify;
  std::uint64_t verify_seed = verify.seed;
  auto* verify_cmd = app.add_subcommand("verify", "Run a randomized identity suite");
  verify_cmd->add_option("--kind", verify.kind, "decomposition, bregman or densities")
      ->required()
      ->check(CLI::IsMember({"decomposition", "bregman", "densities"}));
  verify_cmd->add_option("--tol", verify.tol, "Relative gap tolerance");
  verify_cmd->add_option("--cases", verify.cases, "Number of random instances");
  verify_cmd->add_option("--seed", verify_seed, "Seed for instance generation");

  FigureRequest figure;
  std::string fig_out;
  std::string fig_input;
  auto* fig_cmd = app.add_subcommand("figure-data", "Write CSVs for one figure panel");
  fig_cmd->add_option("--figure", figure.figure, "Figure id")
      ->required()
      ->check(CLI::IsMember(
          {"fig1_weights", "fig2a", "fig2b", "fig2c_placeholder", "fig3", "appendixE"}));
  auto* fig_out_opt = fig_cmd->add_option("--out", fig_out, "Output directory");
  auto* fig_input_opt =
      fig_cmd->add_option("--input", fig_input, "Run directory of the producing experiment");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (*run_cmd) {
    if (*run_out_opt) run.out_dir = run_out;
    if (*seed_opt) run.seed = run_seed;
    if (*trials_opt) run.trials = run_trials;
    if (*threads_opt) run.threads = run_threads;
    return cmd_run(run, std::cout, std::cerr);
  }
  if (*verify_cmd) {
    verify.seed = verify_seed;
    return cmd_verify(verify, std::cout, std::cerr);
  }
  if (*fig_out_opt) figure.out_dir = fig_out;
  if (*fig_input_opt) figure.input_dir = fig_input;
  return cmd_figure_data(figure, std::cout, std::cerr);
}
