// Command-line harness: run / compare / batch.

#include <CLI11.hpp>

#include <iostream>

#include "leamvd/harness.hpp"

namespace {

struct FlagValues {
  std::string config;
  std::string profile, trainer, budget, seed, data_dir, out, subset, lambda, n_elite, reps;
  std::string function, n_var, x_inf, x_sup;
};

void add_profile_flags(CLI::App* cmd, FlagValues& f, bool with_reps) {
  cmd->add_option("--config", f.config, "Key-value config file (flags override it)");
  cmd->add_option("--profile", f.profile, "small7x7 | full28x28 | synthetic");
  cmd->add_option("--trainer", f.trainer, "CD | LEA_MVD | LEA_MVD_seeded_by_CD");
  cmd->add_option("--budget", f.budget, "Epochs / generations per layer (default 50)");
  cmd->add_option("--seed", f.seed, "Base RNG seed (default 1)");
  cmd->add_option("--data-dir", f.data_dir, "Directory with train-images-idx3-ubyte[.gz]");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--subset", f.subset, "Number of training images (0 = all, default 2000)");
  cmd->add_option("--lambda", f.lambda, "Population size (default 24)");
  cmd->add_option("--n-elite", f.n_elite, "Elite individuals (default 4)");
  if (with_reps) cmd->add_option("--reps", f.reps, "Repetitions");
  cmd->add_option("--function", f.function, "Synthetic function: sphere | ellipsoid | rosenbrock");
  cmd->add_option("--n-var", f.n_var, "Synthetic dimension (default 1000)");
  cmd->add_option("--x-inf", f.x_inf, "Lower initialization bound");
  cmd->add_option("--x-sup", f.x_sup, "Upper initialization bound");
}

leamvd::ExperimentProfile build_profile(const FlagValues& f) {
  leamvd::ExperimentProfile profile;
  if (!f.config.empty()) leamvd::apply_config_file(profile, f.config);
  const std::pair<const char*, const std::string*> flags[] = {
      {"profile", &f.profile}, {"trainer", &f.trainer},   {"budget", &f.budget},     {"seed", &f.seed},
      {"data-dir", &f.data_dir}, {"out", &f.out},         {"subset", &f.subset},     {"lambda", &f.lambda},
      {"n-elite", &f.n_elite}, {"reps", &f.reps},         {"function", &f.function}, {"n-var", &f.n_var},
      {"x-inf", &f.x_inf},     {"x-sup", &f.x_sup},
  };
  for (const auto& [key, value] : flags)
    if (!value->empty()) leamvd::apply_setting(profile, key, *value);
  return profile;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LEA-MVD optimizer and RBM/DBN pretraining harness"};
  app.require_subcommand(1);

  FlagValues run_flags;
  auto* run_cmd = app.add_subcommand("run", "Run one experiment");
  add_profile_flags(run_cmd, run_flags, false);

  FlagValues batch_flags;
  auto* batch_cmd = app.add_subcommand("batch", "Run repeated experiments and aggregate");
  add_profile_flags(batch_cmd, batch_flags, true);

  std::string dir_a, dir_b;
  bool csv = false;
  auto* compare_cmd = app.add_subcommand("compare", "Compare two run directories layer by layer");
  compare_cmd->add_option("run_a", dir_a)->required();
  compare_cmd->add_option("run_b", dir_b)->required();
  compare_cmd->add_flag("--csv", csv, "Machine-readable CSV output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      leamvd::run_experiment(build_profile(run_flags), &std::clog);
    } else if (batch_cmd->parsed()) {
      const leamvd::ExperimentProfile profile = build_profile(batch_flags);
      leamvd::run_batch(profile, profile.reps, &std::clog);
    } else if (compare_cmd->parsed()) {
      leamvd::print_comparison(std::cout, leamvd::compare_runs(dir_a, dir_b), csv, dir_a, dir_b);
    }
  } catch (const leamvd::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
