// Metrics CSV, checkpoint file and run-config parsing.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "doctest.h"
#include "pcnet/checkpoint.hpp"
#include "pcnet/config.hpp"
#include "pcnet/metrics.hpp"

using namespace pcnet;

namespace {

struct TempDir {
  std::filesystem::path path;
  TempDir() {
    path = std::filesystem::temp_directory_path() /
           ("pcnet_artifacts_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  f << text;
}

}  // namespace

TEST_CASE("metric formatting: NaN becomes an empty field, doubles survive round-trip") {
  CHECK(format_metric(MetricsRecord::nan_metric()) == "");
  const double v = 0.123456789012345678;
  CHECK(std::stod(format_metric(v)) == v);
  CHECK(format_metric(2.0) == "2");
}

TEST_CASE("metrics csv round-trip preserves values, NaN slots and layer energies") {
  TempDir tmp;
  const std::string path = tmp.file("metrics.csv");

  MetricsRecord a;
  a.epoch = 0;
  a.step = 0;
  a.test_loss = 2.3025850929940455;
  a.accuracy = 0.1;
  MetricsRecord b;
  b.epoch = 1;
  b.step = 12;
  b.total_energy = 1.375;
  b.layer_energies = {0.25, 1.0, 0.125};
  b.train_loss = 0.5;
  b.test_loss = 0.625;
  b.accuracy = 0.83;
  b.wall_clock = 123.0;  // must not leak into the file

  {
    MetricsWriter w(path);
    w.write(a);
    w.write(b);
  }

  std::ifstream f(path);
  std::string header;
  std::getline(f, header);
  CHECK(header == kMetricsHeader);
  std::string row1;
  std::getline(f, row1);
  CHECK(row1 == "0,0,,,,2.3025850929940455,0.10000000000000001,");

  const std::vector<MetricsRecord> rows = read_metrics_csv(path);
  REQUIRE(rows.size() == 2);
  CHECK(std::isnan(rows[0].total_energy));
  CHECK(rows[0].layer_energies.empty());
  CHECK(rows[0].test_loss == a.test_loss);
  CHECK(std::isnan(rows[0].perplexity));
  CHECK(rows[1].epoch == 1);
  CHECK(rows[1].step == 12);
  CHECK(rows[1].total_energy == 1.375);
  REQUIRE(rows[1].layer_energies.size() == 3);
  CHECK(rows[1].layer_energies[1] == 1.0);
  CHECK(rows[1].accuracy == 0.83);
  CHECK(rows[1].wall_clock == 0.0);
}

TEST_CASE("metrics csv rejects a foreign header") {
  TempDir tmp;
  write_text(tmp.file("m.csv"), "epoch,step,loss\n1,2,3\n");
  CHECK_THROWS_WITH_AS(read_metrics_csv(tmp.file("m.csv")),
                       doctest::Contains("header"), Error);
}

TEST_CASE("checkpoint round-trip preserves metadata and exact parameter bits") {
  TempDir tmp;
  Checkpoint ck;
  ck.experiment = "classify-m2";
  ck.trainer = "pc-fkl";
  ck.objective = "f-kl";
  ck.config = {{"in", 4}, {"out", 3}, {"hidden", 5}, {"hidden_layers", 1}, {"variant", 2}};
  Rng rng(11);
  ck.params.push_back({"h1.w", rng.normal_tensor({4, 5})});
  ck.params.push_back({"h1.b", rng.normal_tensor({5})});

  const std::string path = tmp.file("model.ckpt");
  write_checkpoint(path, ck);
  const Checkpoint rd = read_checkpoint(path);

  CHECK(rd.experiment == ck.experiment);
  CHECK(rd.trainer == ck.trainer);
  CHECK(rd.objective == ck.objective);
  CHECK(rd.config.at("hidden").get<int>() == 5);
  REQUIRE(rd.params.size() == 2);
  CHECK(rd.params[0].name == "h1.w");
  CHECK(rd.params[1].value.shape() == Shape{5});
  for (Index i = 0; i < ck.params[0].value.size(); ++i)
    CHECK(rd.params[0].value[i] == ck.params[0].value[i]);
}

TEST_CASE("checkpoint loader rejects foreign and truncated files") {
  TempDir tmp;
  write_text(tmp.file("junk.ckpt"), "definitely not a checkpoint");
  CHECK_THROWS_WITH_AS(read_checkpoint(tmp.file("junk.ckpt")),
                       doctest::Contains("not a checkpoint"), Error);

  Checkpoint ck;
  ck.experiment = "vae";
  ck.trainer = "bp";
  ck.objective = "f-kl";
  ck.config = {{"in", 2}};
  ck.params.push_back({"w", Tensor::full({3, 3}, 0.5)});
  write_checkpoint(tmp.file("ok.ckpt"), ck);

  std::ifstream in(tmp.file("ok.ckpt"), std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  write_text(tmp.file("cut.ckpt"), bytes.substr(0, bytes.size() - 24));
  CHECK_THROWS_AS(read_checkpoint(tmp.file("cut.ckpt")), Error);
}

TEST_CASE("apply_params matches by name, count and shape") {
  Checkpoint ck;
  ck.params.push_back({"w", Tensor::full({2, 2}, 1.5)});

  ParamStore store;
  store.add("w", Tensor::zeros({2, 2}));
  apply_params(ck, store);
  CHECK(store.at(0).value.at(1, 1) == 1.5);

  ParamStore wrong_name;
  wrong_name.add("v", Tensor::zeros({2, 2}));
  CHECK_THROWS_AS(apply_params(ck, wrong_name), Error);

  ParamStore wrong_shape;
  wrong_shape.add("w", Tensor::zeros({2, 3}));
  CHECK_THROWS_AS(apply_params(ck, wrong_shape), Error);

  ParamStore wrong_count;
  wrong_count.add("w", Tensor::zeros({2, 2}));
  wrong_count.add("extra", Tensor::zeros({1}));
  CHECK_THROWS_AS(apply_params(ck, wrong_count), Error);
}

TEST_CASE("ini parser: sections, comments, duplicate and stray keys") {
  TempDir tmp;
  write_text(tmp.file("a.ini"),
             "# comment\n[run]\nexperiment = lm  ; trailing comment\n\n[train]\nepochs=3\n");
  const ConfigMap m = parse_ini(tmp.file("a.ini"));
  CHECK(m.at("run.experiment") == "lm");
  CHECK(m.at("train.epochs") == "3");

  write_text(tmp.file("dup.ini"), "[run]\nseed = 1\nseed = 2\n");
  CHECK_THROWS_WITH_AS(parse_ini(tmp.file("dup.ini")), doctest::Contains("duplicate"), Error);

  write_text(tmp.file("stray.ini"), "seed = 1\n");
  CHECK_THROWS_AS(parse_ini(tmp.file("stray.ini")), Error);
}

namespace {

std::string minimal_classify_ini(const std::string& extra = "",
                                 const std::string& trainer = "pc-fkl") {
  return "[run]\nexperiment = classify-m2\ntrainer = " + trainer +
         "\nout = /tmp/unused\n[data]\ntrain_images = a\ntrain_labels = b\n"
         "test_images = c\ntest_labels = d\n" +
         extra;
}

}  // namespace

TEST_CASE("run config: defaults, types and unknown keys") {
  TempDir tmp;
  write_text(tmp.file("r.ini"), minimal_classify_ini("[train]\nbeta_theta = 0.0016\n"));
  const RunConfig cfg = read_run_config(tmp.file("r.ini"));
  CHECK(cfg.experiment == "classify-m2");
  CHECK(cfg.seed == 1);
  CHECK(cfg.epochs == 10);
  CHECK(cfg.beta_theta == 0.0016);
  CHECK(cfg.objective() == Objective::kl);
  CHECK(cfg.is_classify());
  validate(cfg);

  write_text(tmp.file("typo.ini"), minimal_classify_ini("[train]\nbeta_thetta = 1\n"));
  CHECK_THROWS_WITH_AS(read_run_config(tmp.file("typo.ini")),
                       doctest::Contains("unknown key"), Error);

  write_text(tmp.file("badnum.ini"), minimal_classify_ini("[train]\nepochs = three\n"));
  CHECK_THROWS_AS(read_run_config(tmp.file("badnum.ini")), Error);
}

TEST_CASE("run config validation names the offending key") {
  TempDir tmp;

  auto kind_of = [](const std::string& ini_text) {
    TempDir t2;
    write_text(t2.file("x.ini"), ini_text);
    try {
      load_run_config(t2.file("x.ini"));
    } catch (const Error& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };

  // the trainable-variance objective needs a softmax-free architecture
  CHECK(kind_of(minimal_classify_ini("", "pc-ftilde")).find("run.trainer") != std::string::npos);

  CHECK(kind_of("[run]\nexperiment = mystery\ntrainer = bp\nout = /tmp/u\n")
            .find("run.experiment") != std::string::npos);

  // lm needs corpus paths, not image paths
  CHECK(kind_of("[run]\nexperiment = lm\ntrainer = bp\nout = /tmp/u\n")
            .find("data.corpus_train") != std::string::npos);

  CHECK(kind_of(minimal_classify_ini("[train]\nepochs = 0\n")).find("train.epochs") !=
        std::string::npos);

  CHECK(kind_of(minimal_classify_ini("[train]\noptimizer = rmsprop\n"))
            .find("train.optimizer") != std::string::npos);

  // missing output directory
  CHECK(kind_of("[run]\nexperiment = classify-m2\ntrainer = bp\n[data]\ntrain_images = a\n"
                "train_labels = b\ntest_images = c\ntest_labels = d\n")
            .find("run.out") != std::string::npos);
}

TEST_CASE("trainer name maps to the right objective") {
  TempDir tmp;
  auto obj = [&](const std::string& trainer) {
    write_text(tmp.file("t.ini"), minimal_classify_ini("", trainer));
    return read_run_config(tmp.file("t.ini")).objective();
  };
  CHECK(obj("pc-f") == Objective::sum_squares);
  CHECK(obj("pc-fkl") == Objective::kl);
  CHECK(obj("bp") == Objective::kl);
  write_text(tmp.file("t.ini"),
             "[run]\nexperiment = classify-m1\ntrainer = pc-ftilde\nout = /tmp/u\n"
             "[data]\ntrain_images = a\ntrain_labels = b\ntest_images = c\ntest_labels = d\n");
  CHECK(read_run_config(tmp.file("t.ini")).objective() == Objective::trainable_variance);
}
