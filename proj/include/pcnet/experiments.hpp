#pragma once

#include <iosfwd>
#include <string>

#include "pcnet/checkpoint.hpp"
#include "pcnet/config.hpp"
#include "pcnet/data.hpp"
#include "pcnet/metrics.hpp"

namespace pcnet {

// Everything one run reads from disk.
struct LoadedData {
  Dataset train, test;                             // classify / vae
  Tokenizer tok;                                   // lm
  std::vector<std::vector<int>> train_sents, test_sents;
};

LoadedData load_experiment_data(const RunConfig& cfg);

// in_features is the dataset row width (ignored for lm, which sizes itself
// from the vocabulary).
std::unique_ptr<Model> build_model(const RunConfig& cfg, Index in_features, Rng& rng);
std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ck);

struct ClassifyEval {
  double loss = 0.0;  // cross-entropy for softmax outputs, squared error otherwise
  double accuracy = 0.0;
};
ClassifyEval eval_classifier(Model& m, const std::string& experiment, const Dataset& ds,
                             Index batch);

// Mean per-item squared reconstruction error under a noiseless decoder pass.
double eval_vae(Model& m, const Dataset& ds, Index batch);

struct LmEvalResult {
  double ce = 0.0;  // mean next-token cross-entropy over real (non-pad) positions
  double perplexity = 0.0;
};
LmEvalResult eval_lm(Model& m, const std::vector<std::vector<int>>& sents);

// Trains per config and writes metrics.csv, summary.json and model.ckpt into
// cfg.out. Progress lines go to `log`.
void run_experiment(const RunConfig& cfg, std::ostream& log);

// Forward-only metrics of a stored model on the config's test data.
MetricsRecord evaluate_checkpoint(const RunConfig& cfg, const std::string& ckpt_path);

// Latent-space tools for VAE checkpoints; writes a PGM image strip.
//   traverse:          interpolate between the posterior means of items d1, d2
//   sample-posterior:  decode `steps` draws from the posterior of item d1
void latent_grid(const RunConfig& cfg, const std::string& ckpt_path, const std::string& mode,
                 Index d1, Index d2, Index steps, const std::string& out_path);

// 8-bit grayscale PGM; one row of size x size tiles with 2px separators.
void write_pgm_strip(const std::string& path, const Tensor& images, Index size);

}  // namespace pcnet
