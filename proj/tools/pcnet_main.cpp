// Command line entry point. Subcommands:
//   run       train a model per an ini config, writing metrics + checkpoint
//   evaluate  score a stored checkpoint on the config's test split
//   verify    run one of the numerical self-check suites
//   latent    decode latent traversals / posterior samples from a vae checkpoint
//
// Exit codes: 0 success, 2 bad configuration, 3 training divergence,
// 4 verification failure, 1 anything else.

#include <cmath>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pcnet/experiments.hpp"
#include "pcnet/verify.hpp"

namespace {

int exit_code_for(pcnet::ErrorKind kind) {
  switch (kind) {
    case pcnet::ErrorKind::config:
      return 2;
    case pcnet::ErrorKind::divergence:
      return 3;
    default:
      return 1;
  }
}

void print_record(const pcnet::MetricsRecord& rec) {
  auto line = [](const char* name, double v) {
    if (!std::isnan(v)) std::cout << name << " " << pcnet::format_metric(v) << "\n";
  };
  line("test_loss", rec.test_loss);
  line("accuracy", rec.accuracy);
  line("perplexity", rec.perplexity);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"predictive-coding and backprop training runner"};
  app.require_subcommand(1);

  std::string config_path, ckpt_path, out_override;
  std::uint64_t seed_override = 0;

  CLI::App* run = app.add_subcommand("run", "train per config; writes metrics.csv, summary.json "
                                            "and model.ckpt into the output directory");
  run->add_option("config", config_path, "ini run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  CLI::Option* seed_opt = run->add_option("--seed", seed_override, "override the config seed");
  CLI::Option* out_opt = run->add_option("--out", out_override, "override the output directory");

  CLI::App* eval = app.add_subcommand("evaluate", "forward-only test metrics of a checkpoint");
  eval->add_option("config", config_path, "ini run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("checkpoint", ckpt_path, "model.ckpt written by run")
      ->required()
      ->check(CLI::ExistingFile);

  std::string suite;
  std::uint64_t verify_seed = 7;
  CLI::App* verify = app.add_subcommand("verify", "numerical self-checks");
  verify->add_option("suite", suite, "gradients | equivalence | oracles | locality")->required();
  verify->add_option("--seed", verify_seed, "randomization seed for the checks");

  std::string mode = "traverse", latent_out = "latent.pgm";
  pcnet::Index d1 = 0, d2 = 1, steps = 9;
  CLI::App* latent = app.add_subcommand("latent", "latent-space imagery from a vae checkpoint");
  latent->add_option("config", config_path, "ini run configuration")
      ->required()
      ->check(CLI::ExistingFile);
  latent->add_option("checkpoint", ckpt_path, "model.ckpt written by run")
      ->required()
      ->check(CLI::ExistingFile);
  latent->add_option("--mode", mode, "traverse | sample-posterior");
  latent->add_option("--d1", d1, "first test item index");
  latent->add_option("--d2", d2, "second test item index (traverse only)");
  latent->add_option("--steps", steps, "tiles in the output strip");
  latent->add_option("--out", latent_out, "output PGM path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*run) {
      pcnet::RunConfig cfg = pcnet::read_run_config(config_path);
      if (*seed_opt) cfg.seed = seed_override;
      if (*out_opt) cfg.out = out_override;
      pcnet::validate(cfg);
      pcnet::run_experiment(cfg, std::cout);
    } else if (*eval) {
      pcnet::RunConfig cfg = pcnet::load_run_config(config_path);
      print_record(pcnet::evaluate_checkpoint(cfg, ckpt_path));
    } else if (*verify) {
      pcnet::VerifyReport rep = pcnet::run_suite(suite, verify_seed);
      pcnet::print_report(rep, std::cout);
      if (!rep.all_pass()) return 4;
    } else if (*latent) {
      pcnet::RunConfig cfg = pcnet::load_run_config(config_path);
      pcnet::latent_grid(cfg, ckpt_path, mode, d1, d2, steps, latent_out);
      std::cout << "wrote " << latent_out << "\n";
    }
  } catch (const pcnet::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
