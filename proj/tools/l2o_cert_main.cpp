#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "l2o/experiment.hpp"

namespace {

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = -1;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool config_required = true) {
  auto* config = cmd->add_option("--config", opts.config_path, "experiment config (JSON)");
  if (config_required) config->required();
  cmd->add_option("--out", opts.out_dir, "output directory (overrides config)");
  cmd->add_option("--seed", opts.seed, "master seed (overrides config)")
      ->each([&opts](const std::string&) { opts.seed_given = true; });
  cmd->add_option("--threads", opts.threads, "worker threads (0 = all cores)");
}

l2o::ExperimentConfig resolve_config(const CommonOptions& opts) {
  l2o::ExperimentConfig cfg = l2o::load_experiment_config(opts.config_path);
  if (opts.seed_given) {
    cfg.master_seed = opts.seed;
    cfg.seed_set = true;
  }
  if (!cfg.seed_set) {
    // Fallback: L2O_CERT_SEED from the environment.
    if (const char* env = std::getenv("L2O_CERT_SEED")) {
      cfg.master_seed = std::strtoull(env, nullptr, 10);
      cfg.seed_set = true;
    } else {
      throw l2o::ConfigError(
          "no master seed: set 'master_seed' in the config, pass --seed, or export L2O_CERT_SEED");
    }
  }
  if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
  if (opts.threads >= 0) cfg.threads = opts.threads;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"learned-optimizer certification pipeline"};
  app.require_subcommand(1);

  CommonOptions train_opts, certify_opts, validate_opts, compare_opts, demo_opts;
  CLI::App* train = app.add_subcommand("train", "train hyperparameters, build prior + posterior");
  add_common(train, train_opts);
  CLI::App* certify = app.add_subcommand("certify", "compute PAC bounds from saved checkpoints");
  add_common(certify, certify_opts);
  CLI::App* validate =
      app.add_subcommand("validate", "Monte-Carlo check of the certified confidence levels");
  add_common(validate, validate_opts);
  CLI::App* compare = app.add_subcommand("compare", "learned vs baseline on the test split");
  add_common(compare, compare_opts);
  CLI::App* demo = app.add_subcommand("demo", "full pipeline: train, certify, compare");
  add_common(demo, demo_opts);
  app.add_subcommand("verify-kernels", "exact finite-state kernel algebra checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return l2o::run_train(resolve_config(train_opts));
    if (certify->parsed()) return l2o::run_certify(resolve_config(certify_opts));
    if (validate->parsed()) return l2o::run_validate(resolve_config(validate_opts), std::cout);
    if (compare->parsed()) return l2o::run_compare(resolve_config(compare_opts));
    if (demo->parsed()) return l2o::run_demo(resolve_config(demo_opts), std::cout);
    return l2o::run_kernel_verification(std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
