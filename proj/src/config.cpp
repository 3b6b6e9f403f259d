#include "pcnet/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace pcnet {
namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  fail(ErrorKind::config, "config key " + key + ": " + why);
}

class KeyReader {
 public:
  explicit KeyReader(const ConfigMap& map) : map_(map) {}

  bool has(const std::string& key) const { return map_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    seen_.insert(key);
    auto it = map_.find(key);
    return it == map_.end() ? fallback : it->second;
  }

  Index integer(const std::string& key, Index fallback) {
    seen_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    try {
      std::size_t used = 0;
      const long long v = std::stoll(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return static_cast<Index>(v);
    } catch (const std::exception&) {
      bad_key(key, "'" + it->second + "' is not an integer");
    }
  }

  double real(const std::string& key, double fallback) {
    seen_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      bad_key(key, "'" + it->second + "' is not a number");
    }
  }

  std::uint64_t unsigned64(const std::string& key, std::uint64_t fallback) {
    seen_.insert(key);
    auto it = map_.find(key);
    if (it == map_.end()) return fallback;
    try {
      std::size_t used = 0;
      const std::uint64_t v = std::stoull(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(it->second);
      return v;
    } catch (const std::exception&) {
      bad_key(key, "'" + it->second + "' is not a non-negative integer");
    }
  }

  void reject_unknown() const {
    for (const auto& [key, value] : map_)
      if (!seen_.count(key)) bad_key(key, "unknown key");
  }

 private:
  const ConfigMap& map_;
  std::set<std::string> seen_;
};

}  // namespace

ConfigMap parse_ini(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), ErrorKind::config, "cannot open config file " + path);
  ConfigMap map;
  std::string line, section;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']' && line.size() > 2, ErrorKind::config,
              path + ":" + std::to_string(lineno) + ": malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::config,
            path + ":" + std::to_string(lineno) + ": expected key = value");
    require(!section.empty(), ErrorKind::config,
            path + ":" + std::to_string(lineno) + ": key outside any [section]");
    const std::string key = section + "." + trim(line.substr(0, eq));
    require(!map.count(key), ErrorKind::config,
            path + ":" + std::to_string(lineno) + ": duplicate key " + key);
    map[key] = trim(line.substr(eq + 1));
  }
  return map;
}

Objective RunConfig::objective() const {
  if (trainer == "pc-f") return Objective::sum_squares;
  if (trainer == "pc-ftilde") return Objective::trainable_variance;
  return Objective::kl;  // pc-fkl, and the canonical architecture for bp
}

OptimSettings RunConfig::optim() const {
  OptimSettings s;
  s.kind = optim_from_name(optimizer);
  s.lr = beta_theta;
  s.weight_decay = weight_decay;
  return s;
}

PcSettings RunConfig::pc_settings() const {
  PcSettings s;
  s.t_steps = t_steps;
  s.beta_phi = beta_phi;
  s.weight_updates = weight_updates;
  s.optim = optim();
  s.energy_abort = energy_abort;
  return s;
}

void validate(const RunConfig& cfg) {
  static const std::set<std::string> kExperiments = {"classify-m1", "classify-m2", "classify-m3",
                                                     "vae", "lm"};
  static const std::set<std::string> kTrainers = {"bp", "pc-f", "pc-ftilde", "pc-fkl"};
  if (!kExperiments.count(cfg.experiment))
    bad_key("run.experiment", "'" + cfg.experiment + "' is not one of classify-m1, classify-m2, classify-m3, vae, lm");
  if (!kTrainers.count(cfg.trainer))
    bad_key("run.trainer", "'" + cfg.trainer + "' is not one of bp, pc-f, pc-ftilde, pc-fkl");
  if (cfg.out.empty()) bad_key("run.out", "an output directory is required");

  if (cfg.trainer == "pc-ftilde" && cfg.experiment != "classify-m1" && cfg.experiment != "vae")
    bad_key("run.trainer",
            "pc-ftilde needs trainable variances, which softmax layers exclude; "
            "valid experiments are classify-m1 and vae");

  if (cfg.epochs < 1) bad_key("train.epochs", "must be at least 1");
  if (cfg.batch < 1) bad_key("train.batch", "must be at least 1");
  if (cfg.t_steps < 1) bad_key("train.t_steps", "must be at least 1");
  if (!(cfg.beta_phi > 0.0)) bad_key("train.beta_phi", "must be positive");
  if (!(cfg.beta_theta > 0.0)) bad_key("train.beta_theta", "must be positive");
  if (cfg.weight_updates < 1) bad_key("train.weight_updates", "must be at least 1");
  if (!(cfg.energy_abort > 0.0)) bad_key("train.energy_abort", "must be positive");
  if (cfg.eval_every < 0) bad_key("train.eval_every", "must be non-negative");
  if (cfg.weight_decay < 0.0) bad_key("train.weight_decay", "must be non-negative");
  try {
    optim_from_name(cfg.optimizer);
  } catch (const Error&) {
    bad_key("train.optimizer", "'" + cfg.optimizer + "' is not one of sgd, adam, adamw");
  }

  if (cfg.is_classify() || cfg.experiment == "vae") {
    if (cfg.train_images.empty()) bad_key("data.train_images", "required for " + cfg.experiment);
    if (cfg.train_labels.empty()) bad_key("data.train_labels", "required for " + cfg.experiment);
    if (cfg.test_images.empty()) bad_key("data.test_images", "required for " + cfg.experiment);
    if (cfg.test_labels.empty()) bad_key("data.test_labels", "required for " + cfg.experiment);
  } else {
    if (cfg.corpus_train.empty()) bad_key("data.corpus_train", "required for lm");
    if (cfg.corpus_test.empty()) bad_key("data.corpus_test", "required for lm");
    if (cfg.vocab < 4) bad_key("data.vocab", "must be at least 4");
    if (cfg.max_len < 3) bad_key("data.max_len", "must be at least 3");
  }
  if (cfg.train_items < 0) bad_key("data.train_items", "must be non-negative");
  if (cfg.test_items < 0) bad_key("data.test_items", "must be non-negative");

  if (cfg.hidden < 1) bad_key("model.hidden", "must be positive");
  if (cfg.hidden_layers < 1) bad_key("model.hidden_layers", "must be positive");
  if (cfg.vae_hidden < 1) bad_key("model.vae_hidden", "must be positive");
  if (cfg.latent < 1) bad_key("model.latent", "must be positive");
  if (cfg.enc_layers < 1) bad_key("model.enc_layers", "must be positive");
  if (cfg.dec_layers < 1) bad_key("model.dec_layers", "must be positive");
  if (cfg.d_model < 1) bad_key("model.d_model", "must be positive");
  if (cfg.d_ff < 1) bad_key("model.d_ff", "must be positive");
}

RunConfig read_run_config(const std::string& path) {
  const ConfigMap map = parse_ini(path);
  KeyReader r(map);
  RunConfig cfg;

  cfg.experiment = r.str("run.experiment", "");
  cfg.trainer = r.str("run.trainer", "");
  cfg.seed = r.unsigned64("run.seed", cfg.seed);
  cfg.out = r.str("run.out", "");

  cfg.epochs = r.integer("train.epochs", cfg.epochs);
  cfg.batch = r.integer("train.batch", cfg.batch);
  cfg.t_steps = r.integer("train.t_steps", cfg.t_steps);
  cfg.beta_phi = r.real("train.beta_phi", cfg.beta_phi);
  cfg.beta_theta = r.real("train.beta_theta", cfg.beta_theta);
  cfg.optimizer = r.str("train.optimizer", cfg.optimizer);
  cfg.weight_decay = r.real("train.weight_decay", cfg.weight_decay);
  cfg.weight_updates = r.integer("train.weight_updates", cfg.weight_updates);
  cfg.energy_abort = r.real("train.energy_abort", cfg.energy_abort);
  cfg.eval_every = r.integer("train.eval_every", cfg.eval_every);

  cfg.train_images = r.str("data.train_images", "");
  cfg.train_labels = r.str("data.train_labels", "");
  cfg.test_images = r.str("data.test_images", "");
  cfg.test_labels = r.str("data.test_labels", "");
  cfg.train_items = r.integer("data.train_items", cfg.train_items);
  cfg.test_items = r.integer("data.test_items", cfg.test_items);
  cfg.corpus_train = r.str("data.corpus_train", "");
  cfg.corpus_test = r.str("data.corpus_test", "");
  cfg.vocab = r.integer("data.vocab", cfg.vocab);
  cfg.max_len = r.integer("data.max_len", cfg.max_len);

  cfg.hidden = r.integer("model.hidden", cfg.hidden);
  cfg.hidden_layers = r.integer("model.hidden_layers", cfg.hidden_layers);
  cfg.vae_hidden = r.integer("model.vae_hidden", cfg.vae_hidden);
  cfg.latent = r.integer("model.latent", cfg.latent);
  cfg.enc_layers = r.integer("model.enc_layers", cfg.enc_layers);
  cfg.dec_layers = r.integer("model.dec_layers", cfg.dec_layers);
  cfg.d_model = r.integer("model.d_model", cfg.d_model);
  cfg.d_ff = r.integer("model.d_ff", cfg.d_ff);

  r.reject_unknown();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  RunConfig cfg = read_run_config(path);
  validate(cfg);
  return cfg;
}

}  // namespace pcnet
