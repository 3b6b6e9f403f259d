// End-to-end experiment runs on synthetic data: artifacts, evaluation purity,
// checkpoint rebuilds and the latent-space tools.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "doctest.h"
#include "pcnet/experiments.hpp"
#include "pcnet/synth.hpp"
#include "pcnet/verify.hpp"

using namespace pcnet;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pcnet_exp_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

// one digit directory shared by the whole binary; generating is cheap but
// there is no reason to redo it per test
const std::string& digit_dir() {
  static TempDir dir;
  static std::string path;
  if (path.empty()) {
    path = dir.path.string();
    synth::write_digit_files(path, 400, 1000, 5);
  }
  return path;
}

RunConfig classify_cfg(const std::string& out) {
  RunConfig cfg;
  cfg.experiment = "classify-m2";
  cfg.trainer = "pc-fkl";
  cfg.seed = 5;
  cfg.out = out;
  cfg.epochs = 2;
  cfg.batch = 50;
  cfg.t_steps = 5;
  cfg.beta_phi = 0.05;
  cfg.beta_theta = 0.002;
  cfg.hidden = 32;
  cfg.hidden_layers = 1;
  cfg.train_images = digit_dir() + "/train-images-idx3-ubyte";
  cfg.train_labels = digit_dir() + "/train-labels-idx1-ubyte";
  cfg.test_images = digit_dir() + "/test-images-idx3-ubyte";
  cfg.test_labels = digit_dir() + "/test-labels-idx1-ubyte";
  return cfg;
}

RunConfig vae_cfg(const std::string& out) {
  RunConfig cfg = classify_cfg(out);
  cfg.experiment = "vae";
  cfg.epochs = 1;
  cfg.t_steps = 4;
  cfg.vae_hidden = 24;
  cfg.latent = 4;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.test_items = 50;
  return cfg;
}

}  // namespace

TEST_CASE("a run writes metrics, summary and checkpoint that agree with each other") {
  TempDir out;
  RunConfig cfg = classify_cfg(out.path.string());
  std::ostringstream log;
  run_experiment(cfg, log);

  CHECK(std::filesystem::exists(out.file("metrics.csv")));
  CHECK(std::filesystem::exists(out.file("summary.json")));
  CHECK(std::filesystem::exists(out.file("model.ckpt")));

  const std::vector<MetricsRecord> rows = read_metrics_csv(out.file("metrics.csv"));
  REQUIRE(rows.size() == 3);  // untrained row + one per epoch
  CHECK(rows[0].step == 0);
  CHECK(std::isnan(rows[0].total_energy));  // nothing trained yet
  // a fresh softmax classifier guesses near chance on 10 balanced classes
  CHECK(rows[0].accuracy > 0.02);
  CHECK(rows[0].accuracy < 0.25);
  CHECK(rows.back().accuracy > rows[0].accuracy);
  CHECK(rows.back().total_energy > 0.0);
  CHECK(rows.back().layer_energies.size() == 2);  // one per free node

  std::ifstream jf(out.file("summary.json"));
  const nlohmann::json summary = nlohmann::json::parse(jf);
  CHECK(summary.at("wall_clock_seconds").get<double>() > 0.0);
  CHECK(summary.at("final").at("test_loss").get<double>() ==
        doctest::Approx(rows.back().test_loss).epsilon(1e-12));
  CHECK(summary.at("experiment") == "classify-m2");

  SUBCASE("evaluate_checkpoint reproduces the final row exactly and is repeatable") {
    const MetricsRecord a = evaluate_checkpoint(cfg, out.file("model.ckpt"));
    const MetricsRecord b = evaluate_checkpoint(cfg, out.file("model.ckpt"));
    CHECK(a.test_loss == b.test_loss);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.test_loss == rows.back().test_loss);
    CHECK(a.accuracy == rows.back().accuracy);
    CHECK(std::isnan(a.perplexity));
  }

  SUBCASE("evaluating against the wrong experiment is a config error") {
    RunConfig wrong = cfg;
    wrong.experiment = "classify-m1";
    CHECK_THROWS_AS(evaluate_checkpoint(wrong, out.file("model.ckpt")), Error);
  }

  SUBCASE("the checkpoint rebuilds a working model") {
    const Checkpoint ck = read_checkpoint(out.file("model.ckpt"));
    CHECK(ck.trainer == "pc-fkl");
    std::unique_ptr<Model> m = model_from_checkpoint(ck);
    CHECK(m->node_count() == 2);
    CHECK(m->objective() == Objective::kl);
  }
}

TEST_CASE("a language model with a zeroed output head scores uniform perplexity == vocab") {
  LmConfig c;
  c.vocab = 30;
  c.d_model = 16;
  c.d_ff = 24;
  c.max_len = 12;
  Rng rng(3);
  std::unique_ptr<Model> m = make_lm(c, Objective::kl, rng);
  for (Index pid = 0; pid < m->store().count(); ++pid) {
    Param& p = m->store().at(pid);
    if (p.name == "head.w" || p.name == "head.b") p.value.array() = 0.0;
  }
  const std::vector<std::vector<int>> sents = {{1, 4, 5, 2}, {1, 6, 7, 8, 9, 2}};
  const LmEvalResult ev = eval_lm(*m, sents);
  CHECK(ev.perplexity == doctest::Approx(30.0).epsilon(1e-12));
  CHECK(ev.ce == doctest::Approx(std::log(30.0)).epsilon(1e-12));
}

TEST_CASE("latent traversal endpoints equal the direct posterior-mean reconstructions") {
  TempDir out;
  RunConfig cfg = vae_cfg(out.path.string());
  std::ostringstream log;
  run_experiment(cfg, log);

  const std::string pgm = out.file("trav.pgm");
  latent_grid(cfg, out.file("model.ckpt"), "traverse", 0, 5, 7, pgm);

  std::ifstream f(pgm, std::ios::binary);
  std::string magic;
  Index w = 0, h = 0;
  int maxv = 0;
  f >> magic >> w >> h >> maxv;
  f.get();  // single whitespace after the header
  CHECK(magic == "P5");
  CHECK(maxv == 255);
  CHECK(h == 28);
  CHECK(w == 7 * 28 + 6 * 2);
  std::vector<std::uint8_t> canvas(static_cast<std::size_t>(w * h));
  f.read(reinterpret_cast<char*>(canvas.data()), static_cast<std::streamsize>(canvas.size()));
  REQUIRE(f.good());

  // rebuild the model and reconstruct items 0 and 5 through the same path
  std::unique_ptr<Model> m = model_from_checkpoint(read_checkpoint(out.file("model.ckpt")));
  Dataset test = load_mnist(cfg.test_images, cfg.test_labels);
  test = head(test, cfg.test_items);
  auto recon_tile = [&](Index item) {
    Tensor x = Tensor::uninit({1, test.inputs.cols()});
    x.matrix() = test.inputs.matrix().row(item);
    const auto [u, v] = m->encode_posterior(x);
    return m->decode_latent(u);
  };
  const Tensor r0 = recon_tile(0), r5 = recon_tile(5);
  auto tile_pixel = [&](Index tile, Index i, Index j) {
    return canvas[static_cast<std::size_t>(i * w + tile * 30 + j)];
  };
  for (Index i = 0; i < 28; ++i)
    for (Index j = 0; j < 28; ++j) {
      const auto q0 = static_cast<std::uint8_t>(
          std::lround(255.0 * std::clamp(r0.at(0, i * 28 + j), 0.0, 1.0)));
      const auto q5 = static_cast<std::uint8_t>(
          std::lround(255.0 * std::clamp(r5.at(0, i * 28 + j), 0.0, 1.0)));
      REQUIRE(tile_pixel(0, i, j) == q0);
      REQUIRE(tile_pixel(6, i, j) == q5);
    }

  SUBCASE("posterior sampling writes a strip with the requested tile count") {
    const std::string spgm = out.file("samp.pgm");
    latent_grid(cfg, out.file("model.ckpt"), "sample-posterior", 2, 0, 3, spgm);
    std::ifstream sf(spgm, std::ios::binary);
    std::string smagic;
    Index sw = 0, sh = 0;
    sf >> smagic >> sw >> sh;
    CHECK(sw == 3 * 28 + 2 * 2);
    CHECK(sh == 28);
  }

  SUBCASE("latent tools reject non-vae checkpoints and unknown modes") {
    TempDir out2;
    RunConfig ccfg = classify_cfg(out2.path.string());
    std::ostringstream log2;
    run_experiment(ccfg, log2);
    CHECK_THROWS_AS(latent_grid(ccfg, out2.file("model.ckpt"), "traverse", 0, 1, 5,
                                out2.file("x.pgm")),
                    Error);
    CHECK_THROWS_AS(latent_grid(cfg, out.file("model.ckpt"), "spiral", 0, 1, 5,
                                out.file("x.pgm")),
                    Error);
  }
}

TEST_CASE("language model runs write perplexity rows and a checkpoint that re-evaluates") {
  TempDir data_dir, out;
  synth::write_corpus_files(data_dir.path.string(), 120, 30, 7);

  RunConfig cfg;
  cfg.experiment = "lm";
  cfg.trainer = "pc-fkl";
  cfg.seed = 9;
  cfg.out = out.path.string();
  cfg.epochs = 1;
  cfg.batch = 8;
  cfg.t_steps = 3;
  cfg.beta_phi = 0.5;
  cfg.beta_theta = 0.001;
  cfg.optimizer = "adamw";
  cfg.eval_every = 10;
  cfg.corpus_train = data_dir.file("train.txt");
  cfg.corpus_test = data_dir.file("test.txt");
  cfg.vocab = 80;
  cfg.max_len = 16;
  cfg.d_model = 16;
  cfg.d_ff = 24;

  std::ostringstream log;
  run_experiment(cfg, log);

  const std::vector<MetricsRecord> rows = read_metrics_csv(out.file("metrics.csv"));
  REQUIRE(rows.size() >= 3);  // untrained row, at least one mid-epoch eval, final
  CHECK(rows[0].perplexity > 0.0);
  for (const MetricsRecord& r : rows) {
    CHECK(!std::isnan(r.perplexity));
    CHECK(std::isnan(r.accuracy));  // not a classification run
  }
  CHECK(rows.back().perplexity < rows[0].perplexity);
  CHECK(!std::isnan(rows[1].total_energy));

  const MetricsRecord ev = evaluate_checkpoint(cfg, out.file("model.ckpt"));
  CHECK(ev.perplexity == rows.back().perplexity);

  SUBCASE("a mismatched corpus vocabulary is a config error") {
    RunConfig wrong = cfg;
    wrong.vocab = 60;
    CHECK_THROWS_AS(evaluate_checkpoint(wrong, out.file("model.ckpt")), Error);
  }
}

TEST_CASE("bp baseline run on the same data also trains and is deterministic") {
  TempDir out_a, out_b;
  RunConfig cfg = classify_cfg(out_a.path.string());
  cfg.trainer = "bp";
  cfg.beta_theta = 0.002;
  std::ostringstream log;
  run_experiment(cfg, log);
  cfg.out = out_b.path.string();
  run_experiment(cfg, log);

  std::ifstream fa(out_a.file("metrics.csv")), fb(out_b.file("metrics.csv"));
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(!sa.str().empty());

  const std::vector<MetricsRecord> rows = read_metrics_csv(out_a.file("metrics.csv"));
  CHECK(rows.back().accuracy > rows[0].accuracy);
  for (const MetricsRecord& r : rows) CHECK(std::isnan(r.total_energy));  // bp has no energies
}
