#include "pcnet/experiments.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <ostream>

#include "pcnet/engine.hpp"
#include "pcnet/synth.hpp"

namespace pcnet {
namespace {

nlohmann::json json_metric(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

nlohmann::json record_json(const MetricsRecord& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (double e : r.layer_energies) layers.push_back(json_metric(e));
  return {{"epoch", r.epoch},
          {"step", r.step},
          {"total_energy", json_metric(r.total_energy)},
          {"layer_energies", layers},
          {"train_loss", json_metric(r.train_loss)},
          {"test_loss", json_metric(r.test_loss)},
          {"accuracy", json_metric(r.accuracy)},
          {"perplexity", json_metric(r.perplexity)}};
}

int classifier_variant(const std::string& experiment) {
  return experiment == "classify-m1" ? 1 : experiment == "classify-m2" ? 2 : 3;
}

// Windowed training statistics between two metric rows.
struct Window {
  double energy = 0.0;
  std::vector<double> node_energy;
  double loss = 0.0;
  Index items = 0;
  Index loss_items = 0;

  void add_pc(const EnergyReport& rep, Index batch_items) {
    if (node_energy.empty()) node_energy.assign(rep.per_node.size(), 0.0);
    energy += rep.total * static_cast<double>(batch_items);
    for (std::size_t i = 0; i < rep.per_node.size(); ++i)
      node_energy[i] += rep.per_node[i] * static_cast<double>(batch_items);
    items += batch_items;
  }

  void add_bp(double mean_loss, Index batch_items) {
    loss += mean_loss * static_cast<double>(batch_items);
    loss_items += batch_items;
    items += batch_items;
  }

  void fill(MetricsRecord& r) const {
    if (items == 0) return;
    if (!node_energy.empty()) {
      r.total_energy = energy / static_cast<double>(items);
      r.layer_energies.clear();
      for (double e : node_energy) r.layer_energies.push_back(e / static_cast<double>(items));
    }
    if (loss_items > 0) r.train_loss = loss / static_cast<double>(loss_items);
  }
};

// Either trainer behind one call.
struct AnyTrainer {
  std::optional<PcTrainer> pc;
  std::optional<BpTrainer> bp;

  AnyTrainer(Model& m, const RunConfig& cfg) {
    if (cfg.trainer == "bp")
      bp.emplace(m, cfg.optim());
    else
      pc.emplace(m, cfg.pc_settings());
  }

  void step(const Batch& b, Rng& rng, Window& w) {
    if (bp)
      w.add_bp(bp->train_step(b, rng), b.items());
    else
      w.add_pc(pc->train_step(b, rng), b.items());
  }
};

void log_record(std::ostream& log, const MetricsRecord& r) {
  log << "epoch " << r.epoch << " step " << r.step;
  if (!std::isnan(r.total_energy)) log << "  energy " << r.total_energy;
  if (!std::isnan(r.train_loss)) log << "  train_loss " << r.train_loss;
  if (!std::isnan(r.test_loss)) log << "  test_loss " << r.test_loss;
  if (!std::isnan(r.accuracy)) log << "  accuracy " << r.accuracy;
  if (!std::isnan(r.perplexity)) log << "  perplexity " << r.perplexity;
  log << std::endl;
}

}  // namespace

LoadedData load_experiment_data(const RunConfig& cfg) {
  LoadedData d;
  if (cfg.experiment == "lm") {
    const std::vector<std::string> train_lines = read_lines(cfg.corpus_train);
    const std::vector<std::string> test_lines = read_lines(cfg.corpus_test);
    require(!train_lines.empty(), ErrorKind::config, "config key data.corpus_train: file is empty");
    require(!test_lines.empty(), ErrorKind::config, "config key data.corpus_test: file is empty");
    d.tok = build_vocab(train_lines, static_cast<int>(cfg.vocab));
    for (const std::string& s : train_lines) d.train_sents.push_back(d.tok.encode(s));
    std::vector<std::vector<int>> raw;
    for (const std::string& s : test_lines) raw.push_back(d.tok.encode(s));
    d.test_sents = wrap_sentences(raw, cfg.max_len);
    if (cfg.train_items > 0 && cfg.train_items < static_cast<Index>(d.train_sents.size()))
      d.train_sents.resize(static_cast<std::size_t>(cfg.train_items));
    if (cfg.test_items > 0 && cfg.test_items < static_cast<Index>(d.test_sents.size()))
      d.test_sents.resize(static_cast<std::size_t>(cfg.test_items));
    return d;
  }
  d.train = load_mnist(cfg.train_images, cfg.train_labels);
  d.test = load_mnist(cfg.test_images, cfg.test_labels);
  if (cfg.train_items > 0 && cfg.train_items < d.train.items()) d.train = head(d.train, cfg.train_items);
  if (cfg.test_items > 0 && cfg.test_items < d.test.items()) d.test = head(d.test, cfg.test_items);
  return d;
}

std::unique_ptr<Model> build_model(const RunConfig& cfg, Index in_features, Rng& rng) {
  const Objective mode = cfg.objective();
  if (cfg.is_classify()) {
    ClassifierConfig c;
    c.in = in_features;
    c.out = 10;
    c.hidden = cfg.hidden;
    c.hidden_layers = static_cast<int>(cfg.hidden_layers);
    c.variant = classifier_variant(cfg.experiment);
    return make_classifier(c, mode, rng);
  }
  if (cfg.experiment == "vae") {
    VaeConfig c;
    c.in = in_features;
    c.hidden = cfg.vae_hidden;
    c.latent = cfg.latent;
    c.enc_layers = static_cast<int>(cfg.enc_layers);
    c.dec_layers = static_cast<int>(cfg.dec_layers);
    return make_vae(c, mode, rng);
  }
  LmConfig c;
  c.vocab = cfg.vocab;
  c.d_model = cfg.d_model;
  c.d_ff = cfg.d_ff;
  c.max_len = cfg.max_len;
  return make_lm(c, mode, rng);
}

std::unique_ptr<Model> model_from_checkpoint(const Checkpoint& ck) {
  Rng rng(0);  // initial values are overwritten below
  const Objective mode = objective_from_name(ck.objective);
  std::unique_ptr<Model> m;
  try {
    if (ck.experiment.rfind("classify-", 0) == 0) {
      ClassifierConfig c;
      c.in = ck.config.at("in").get<Index>();
      c.out = ck.config.at("out").get<Index>();
      c.hidden = ck.config.at("hidden").get<Index>();
      c.hidden_layers = ck.config.at("hidden_layers").get<int>();
      c.variant = classifier_variant(ck.experiment);
      m = make_classifier(c, mode, rng);
    } else if (ck.experiment == "vae") {
      VaeConfig c;
      c.in = ck.config.at("in").get<Index>();
      c.hidden = ck.config.at("hidden").get<Index>();
      c.latent = ck.config.at("latent").get<Index>();
      c.enc_layers = ck.config.at("enc_layers").get<int>();
      c.dec_layers = ck.config.at("dec_layers").get<int>();
      m = make_vae(c, mode, rng);
    } else if (ck.experiment == "lm") {
      LmConfig c;
      c.vocab = ck.config.at("vocab").get<Index>();
      c.d_model = ck.config.at("d_model").get<Index>();
      c.d_ff = ck.config.at("d_ff").get<Index>();
      c.max_len = ck.config.at("max_len").get<Index>();
      m = make_lm(c, mode, rng);
    } else {
      fail(ErrorKind::config, "checkpoint names unknown experiment " + ck.experiment);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::config, std::string("checkpoint config is incomplete: ") + e.what());
  }
  apply_params(ck, m->store());
  return m;
}

ClassifyEval eval_classifier(Model& m, const std::string& experiment, const Dataset& ds,
                             Index batch) {
  const bool cross_entropy = classifier_variant(experiment) != 1;
  std::vector<Index> order(static_cast<std::size_t>(ds.items()));
  std::iota(order.begin(), order.end(), Index{0});

  ClassifyEval ev;
  Index hits = 0;
  for (Index start = 0; start < ds.items(); start += batch) {
    const Index take = std::min(batch, ds.items() - start);
    Batch b = take_batch(ds, order, start, take);
    const Tensor out = forward_pass(m, b).back();
    for (Index r = 0; r < take; ++r) {
      const int label = ds.labels[static_cast<std::size_t>(start + r)];
      Index best = 0;
      for (Index c = 1; c < out.cols(); ++c)
        if (out.at(r, c) > out.at(r, best)) best = c;
      if (best == label) ++hits;
      if (cross_entropy) {
        ev.loss -= std::log(std::max(out.at(r, label), kProbFloor));
      } else {
        for (Index c = 0; c < out.cols(); ++c) {
          const double d = b.y.at(r, c) - out.at(r, c);
          ev.loss += d * d;
        }
      }
    }
  }
  ev.loss /= static_cast<double>(ds.items());
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(ds.items());
  return ev;
}

double eval_vae(Model& m, const Dataset& ds, Index batch) {
  std::vector<Index> order(static_cast<std::size_t>(ds.items()));
  std::iota(order.begin(), order.end(), Index{0});
  double err = 0.0;
  for (Index start = 0; start < ds.items(); start += batch) {
    const Index take = std::min(batch, ds.items() - start);
    Batch b = take_batch(ds, order, start, take);
    const Tensor rec = forward_pass(m, b).back();
    err += (rec.array() - b.x.array()).square().sum();
  }
  return err / static_cast<double>(ds.items());
}

LmEvalResult eval_lm(Model& m, const std::vector<std::vector<int>>& sents) {
  double nll = 0.0;
  Index positions = 0;
  for (const auto& seq : sents) {
    if (seq.size() < 2) continue;
    Batch g;
    g.seqs = {seq};
    const Tensor probs = forward_pass(m, g).back();
    for (Index r = 0; r < probs.rows(); ++r) {
      nll -= std::log(std::max(probs.at(r, seq[static_cast<std::size_t>(r) + 1]), kProbFloor));
      ++positions;
    }
  }
  require(positions > 0, ErrorKind::invalid_argument, "no scoreable positions in the corpus");
  LmEvalResult ev;
  ev.ce = nll / static_cast<double>(positions);
  ev.perplexity = std::exp(ev.ce);
  return ev;
}

namespace {

MetricsRecord run_classify_like(const RunConfig& cfg, Model& m, const LoadedData& data,
                                MetricsWriter& csv, std::ostream& log, Rng& train_rng) {
  const bool vae = cfg.experiment == "vae";
  AnyTrainer trainer(m, cfg);

  auto evaluate = [&](Index epoch, Index step, const Window& w) {
    MetricsRecord r;
    r.epoch = epoch;
    r.step = step;
    w.fill(r);
    if (vae) {
      r.train_loss = eval_vae(m, data.train, cfg.batch);
      r.test_loss = eval_vae(m, data.test, cfg.batch);
    } else {
      const ClassifyEval tr = eval_classifier(m, cfg.experiment, data.train, cfg.batch);
      const ClassifyEval te = eval_classifier(m, cfg.experiment, data.test, cfg.batch);
      r.train_loss = tr.loss;
      r.test_loss = te.loss;
      r.accuracy = te.accuracy;
    }
    csv.write(r);
    log_record(log, r);
    return r;
  };

  MetricsRecord last = evaluate(0, 0, Window{});
  Rng noise_rng = train_rng.fork(1);
  Index step = 0;
  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const std::vector<Index> order = train_rng.fork(1000 + static_cast<std::uint64_t>(epoch))
                                         .permutation(data.train.items());
    Window w;
    for (Index start = 0; start < data.train.items(); start += cfg.batch) {
      const Index take = std::min(cfg.batch, data.train.items() - start);
      Batch b = take_batch(data.train, order, start, take);
      trainer.step(b, noise_rng, w);
      ++step;
    }
    last = evaluate(epoch, step, w);
  }
  return last;
}

MetricsRecord run_lm(const RunConfig& cfg, Model& m, const LoadedData& data, MetricsWriter& csv,
                     std::ostream& log, Rng& train_rng) {
  AnyTrainer trainer(m, cfg);
  LmBatcher batcher(data.train_sents, cfg.batch, cfg.max_len, train_rng.next_u64());

  Index step = 0;
  Index last_eval_step = -1;
  MetricsRecord last;
  auto evaluate = [&](Index epoch, Window& w) {
    MetricsRecord r;
    r.epoch = epoch;
    r.step = step;
    w.fill(r);
    const LmEvalResult ev = eval_lm(m, data.test_sents);
    r.test_loss = ev.ce;
    r.perplexity = ev.perplexity;
    csv.write(r);
    log_record(log, r);
    last_eval_step = step;
    last = r;
    w = Window{};
  };

  Window w;
  evaluate(0, w);
  Rng noise_rng = train_rng.fork(2);
  for (Index epoch = 1; epoch <= cfg.epochs; ++epoch) {
    batcher.reset(train_rng.next_u64());
    TokenBatch tb;
    while (batcher.next(tb)) {
      trainer.step(to_engine_batch(tb), noise_rng, w);
      ++step;
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) evaluate(epoch, w);
    }
    if (cfg.eval_every == 0 && last_eval_step != step) evaluate(epoch, w);
  }
  if (last_eval_step != step) evaluate(cfg.epochs, w);
  return last;
}

nlohmann::json model_config_json(const RunConfig& cfg, Index in_features) {
  if (cfg.is_classify())
    return {{"in", in_features},
            {"out", 10},
            {"hidden", cfg.hidden},
            {"hidden_layers", cfg.hidden_layers}};
  if (cfg.experiment == "vae")
    return {{"in", in_features},
            {"hidden", cfg.vae_hidden},
            {"latent", cfg.latent},
            {"enc_layers", cfg.enc_layers},
            {"dec_layers", cfg.dec_layers}};
  return {{"vocab", cfg.vocab},
          {"d_model", cfg.d_model},
          {"d_ff", cfg.d_ff},
          {"max_len", cfg.max_len}};
}

}  // namespace

void run_experiment(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  const LoadedData data = load_experiment_data(cfg);
  const Index in_features = cfg.experiment == "lm" ? 0 : data.train.inputs.cols();

  Rng root(cfg.seed);
  Rng init_rng = root.fork(1);
  Rng train_rng = root.fork(2);
  std::unique_ptr<Model> m = build_model(cfg, in_features, init_rng);

  std::filesystem::create_directories(cfg.out);
  MetricsWriter csv(cfg.out + "/metrics.csv");

  log << cfg.experiment << " / " << cfg.trainer << " seed " << cfg.seed << " -> " << cfg.out
      << std::endl;
  const MetricsRecord final_rec =
      cfg.experiment == "lm" ? run_lm(cfg, *m, data, csv, log, train_rng)
                             : run_classify_like(cfg, *m, data, csv, log, train_rng);

  Checkpoint ck;
  ck.experiment = cfg.experiment;
  ck.trainer = cfg.trainer;
  ck.objective = objective_name(m->objective());
  ck.config = model_config_json(cfg, in_features);
  for (Index pid = 0; pid < m->store().count(); ++pid) ck.params.push_back(m->store().at(pid));
  write_checkpoint(cfg.out + "/model.ckpt", ck);

  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json node_names = nlohmann::json::array();
  for (const NodeSpec& spec : m->nodes()) node_names.push_back(spec.name);
  const nlohmann::json summary = {{"experiment", cfg.experiment},
                                  {"trainer", cfg.trainer},
                                  {"objective", ck.objective},
                                  {"seed", cfg.seed},
                                  {"epochs", cfg.epochs},
                                  {"wall_clock_seconds", seconds},
                                  {"node_names", node_names},
                                  {"final", record_json(final_rec)},
                                  {"metrics_csv", "metrics.csv"},
                                  {"checkpoint", "model.ckpt"}};
  std::ofstream sf(cfg.out + "/summary.json");
  require(sf.good(), ErrorKind::io, "cannot write " + cfg.out + "/summary.json");
  sf << summary.dump(2) << '\n';
  log << "done in " << seconds << "s" << std::endl;
}

MetricsRecord evaluate_checkpoint(const RunConfig& cfg, const std::string& ckpt_path) {
  const Checkpoint ck = read_checkpoint(ckpt_path);
  require(ck.experiment == cfg.experiment, ErrorKind::config,
          "checkpoint was trained for " + ck.experiment + ", the config asks for " +
              cfg.experiment);
  std::unique_ptr<Model> m = model_from_checkpoint(ck);
  const LoadedData data = load_experiment_data(cfg);

  MetricsRecord r;
  if (cfg.experiment == "lm") {
    require(static_cast<Index>(data.tok.size()) == ck.config.at("vocab").get<Index>(),
            ErrorKind::config, "corpus vocabulary does not match the checkpoint");
    const LmEvalResult ev = eval_lm(*m, data.test_sents);
    r.test_loss = ev.ce;
    r.perplexity = ev.perplexity;
  } else if (cfg.experiment == "vae") {
    require(data.test.inputs.cols() == ck.config.at("in").get<Index>(), ErrorKind::config,
            "dataset width does not match the checkpoint");
    r.test_loss = eval_vae(*m, data.test, cfg.batch);
  } else {
    require(data.test.inputs.cols() == ck.config.at("in").get<Index>(), ErrorKind::config,
            "dataset width does not match the checkpoint");
    const ClassifyEval ev = eval_classifier(*m, cfg.experiment, data.test, cfg.batch);
    r.test_loss = ev.loss;
    r.accuracy = ev.accuracy;
  }
  return r;
}

void write_pgm_strip(const std::string& path, const Tensor& images, Index size) {
  require(images.rank() == 2 && images.cols() == size * size, ErrorKind::invalid_argument,
          "images must be rows of size*size pixels");
  const Index n = images.rows();
  const Index gap = 2;
  const Index width = n * size + (n - 1) * gap;
  std::vector<std::uint8_t> canvas(static_cast<std::size_t>(width) * static_cast<std::size_t>(size),
                                   32);
  for (Index k = 0; k < n; ++k) {
    const Index x0 = k * (size + gap);
    for (Index i = 0; i < size; ++i)
      for (Index j = 0; j < size; ++j) {
        const double v = std::clamp(images.at(k, i * size + j), 0.0, 1.0);
        canvas[static_cast<std::size_t>(i * width + x0 + j)] =
            static_cast<std::uint8_t>(std::lround(255.0 * v));
      }
  }
  std::ofstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::io, "cannot write " + path);
  f << "P5\n" << width << ' ' << size << "\n255\n";
  f.write(reinterpret_cast<const char*>(canvas.data()), static_cast<std::streamsize>(canvas.size()));
  require(f.good(), ErrorKind::io, "write to " + path + " failed");
}

void latent_grid(const RunConfig& cfg, const std::string& ckpt_path, const std::string& mode,
                 Index d1, Index d2, Index steps, const std::string& out_path) {
  const Checkpoint ck = read_checkpoint(ckpt_path);
  require(ck.experiment == "vae", ErrorKind::config,
          ckpt_path + " is a " + ck.experiment + " checkpoint, not a vae");
  std::unique_ptr<Model> m = model_from_checkpoint(ck);

  Dataset test = load_mnist(cfg.test_images, cfg.test_labels);
  if (cfg.test_items > 0 && cfg.test_items < test.items()) test = head(test, cfg.test_items);
  require(d1 >= 0 && d1 < test.items(), ErrorKind::config,
          "item index " + std::to_string(d1) + " is outside the test set");

  Tensor x1 = Tensor::uninit({1, test.inputs.cols()});
  x1.matrix() = test.inputs.matrix().row(d1);
  const auto [u1, v1] = m->encode_posterior(x1);
  const Index z_width = u1.cols();

  Tensor z;
  if (mode == "traverse") {
    require(steps >= 2, ErrorKind::config, "traverse needs at least 2 steps");
    require(d2 >= 0 && d2 < test.items(), ErrorKind::config,
            "item index " + std::to_string(d2) + " is outside the test set");
    Tensor x2 = Tensor::uninit({1, test.inputs.cols()});
    x2.matrix() = test.inputs.matrix().row(d2);
    const auto [u2, v2] = m->encode_posterior(x2);
    z = Tensor::uninit({steps, z_width});
    for (Index k = 0; k < steps; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(steps - 1);
      for (Index j = 0; j < z_width; ++j) z.at(k, j) = (1.0 - t) * u1[j] + t * u2[j];
    }
  } else if (mode == "sample-posterior") {
    require(steps >= 1, ErrorKind::config, "sample-posterior needs at least 1 step");
    Rng rng(cfg.seed);
    z = Tensor::uninit({steps, z_width});
    for (Index k = 0; k < steps; ++k)
      for (Index j = 0; j < z_width; ++j) z.at(k, j) = u1[j] + std::sqrt(v1[j]) * rng.normal();
  } else {
    fail(ErrorKind::config, "latent mode must be traverse or sample-posterior, not " + mode);
  }

  const Tensor imgs = m->decode_latent(z);
  const Index side = static_cast<Index>(std::lround(std::sqrt(static_cast<double>(imgs.cols()))));
  require(side * side == imgs.cols(), ErrorKind::invalid_argument,
          "decoded images are not square");
  write_pgm_strip(out_path, imgs, side);
}

}  // namespace pcnet
