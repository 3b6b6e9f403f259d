#pragma once

#include <map>
#include <string>

#include "pcnet/engine.hpp"

namespace pcnet {

// A parsed "[section] key = value" file. Section and key names are
// case-sensitive; '#' and ';' start comments; unknown keys are rejected
// so that typos cannot silently fall back to defaults.
using ConfigMap = std::map<std::string, std::string>;  // "section.key" -> value

ConfigMap parse_ini(const std::string& path);

struct RunConfig {
  // [run]
  std::string experiment;  // classify-m1 | classify-m2 | classify-m3 | vae | lm
  std::string trainer;     // bp | pc-f | pc-ftilde | pc-fkl
  std::uint64_t seed = 1;
  std::string out;

  // [train]
  Index epochs = 10;
  Index batch = 32;
  Index t_steps = 32;
  double beta_phi = 0.05;
  double beta_theta = 1e-4;
  std::string optimizer = "adam";
  double weight_decay = 0.01;  // adamw only
  Index weight_updates = 1;
  double energy_abort = 1e12;
  Index eval_every = 0;  // steps between evaluations; 0 = once per epoch

  // [data]
  std::string train_images, train_labels, test_images, test_labels;
  Index train_items = 0, test_items = 0;  // 0 = use everything
  std::string corpus_train, corpus_test;
  Index vocab = 2000;
  Index max_len = 34;

  // [model]
  Index hidden = 512;
  Index hidden_layers = 3;
  Index vae_hidden = 256;
  Index latent = 32;
  Index enc_layers = 2, dec_layers = 2;
  Index d_model = 128, d_ff = 512;

  bool is_classify() const { return experiment.rfind("classify-", 0) == 0; }
  Objective objective() const;        // trainer -> energy mode (bp uses kl forms)
  OptimSettings optim() const;
  PcSettings pc_settings() const;
};

// Parses without validating, so CLI overrides (--seed, --out) can be applied
// before the rules run. Every violation raised by validate() is an
// ErrorKind::config whose message names the offending key.
RunConfig read_run_config(const std::string& path);
void validate(const RunConfig& cfg);

// read + validate in one step.
RunConfig load_run_config(const std::string& path);

}  // namespace pcnet
