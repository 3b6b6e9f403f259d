#include <cmath>

#include "pcnet/model.hpp"

namespace pcnet {
namespace {

struct Linear {
  Index w = -1;
  Index b = -1;
};

Linear add_linear(ParamStore& store, const std::string& name, Index in, Index out, Rng& rng) {
  const double std = std::sqrt(2.0 / static_cast<double>(in));
  Tensor w = Tensor::uninit({in, out});
  for (Index i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, std);
  Linear l;
  l.w = store.add(name + ".w", std::move(w));
  l.b = store.add(name + ".b", Tensor::zeros({out}));
  return l;
}

Value apply_linear(Bind& bind, const Linear& l, Value x) {
  return affine(x, bind(l.w), bind(l.b));
}

// ---- feed-forward classifier -----------------------------------------------

class MlpClassifier final : public Model {
 public:
  MlpClassifier(const ClassifierConfig& c, Objective mode, Rng& rng) : Model(mode), cfg_(c) {
    require(c.hidden_layers >= 1, ErrorKind::config, "classifier needs at least one hidden layer");
    require(c.variant >= 1 && c.variant <= 3, ErrorKind::config, "classifier variant must be 1-3");
    require(mode != Objective::trainable_variance || c.variant == 1, ErrorKind::config,
            "the trainable-variance objective requires a softmax-free architecture (variant 1)");

    Index prev = c.in;
    for (int l = 0; l < c.hidden_layers; ++l) {
      lin_.push_back(add_linear(store_, "h" + std::to_string(l + 1), prev, c.hidden, rng));
      prev = c.hidden;
    }
    lin_.push_back(add_linear(store_, "out", prev, c.out, rng));

    for (int l = 0; l < c.hidden_layers; ++l) {
      const bool soft = (c.variant == 3 && l == 1);
      softmax_.push_back(soft);
      NodeSpec spec;
      spec.name = "h" + std::to_string(l + 1);
      if (mode == Objective::kl && soft) {
        spec.family = Family::categorical;
        spec.projection = NodeProjection::simplex;
      }
      maybe_add_sigma(spec, c.hidden);
      add_node(std::move(spec));
    }
    const bool soft_out = c.variant != 1;
    softmax_.push_back(soft_out);
    NodeSpec out;
    out.name = "out";
    out.clamp_to_target = true;
    if (mode == Objective::kl && soft_out) {
      out.family = Family::categorical;
      out.projection = NodeProjection::simplex;
    }
    maybe_add_sigma(out, c.out);
    add_node(std::move(out));
  }

  Value build_mu(Index node, Graph& g, Bind& bind, const Batch& group,
                 const std::vector<Value>& phis) override {
    Value in = node == 0 ? g.constant(group.x) : phis[static_cast<std::size_t>(node - 1)];
    Value a = apply_linear(bind, lin_[static_cast<std::size_t>(node)], in);
    return softmax_[static_cast<std::size_t>(node)] ? softmax(a, 1) : tanh(a);
  }

  Tensor output_target(const Batch& group) const override { return group.y; }

  Value build_bp_loss(Graph& g, Bind& bind, const Batch& group) override {
    std::vector<Value> mus;
    for (Index n = 0; n < node_count(); ++n) mus.push_back(build_mu(n, g, bind, group, mus));
    Value target = g.constant(group.y);
    if (cfg_.variant == 1) return energy_gaussian_sse(target, mus.back());
    return energy_categorical(target, mus.back());  // one-hot rows: KL == cross entropy
  }

 private:
  ClassifierConfig cfg_;
  std::vector<Linear> lin_;
  std::vector<bool> softmax_;
};

// ---- variational autoencoder -------------------------------------------------

class Vae final : public Model {
 public:
  Vae(const VaeConfig& c, Objective mode, Rng& rng) : Model(mode), cfg_(c) {
    require(c.enc_layers >= 1 && c.dec_layers >= 1, ErrorKind::config,
            "vae needs at least one layer on each side");
    Index prev = c.in;
    for (int l = 0; l < c.enc_layers; ++l) {
      enc_.push_back(add_linear(store_, "enc" + std::to_string(l + 1), prev, c.hidden, rng));
      prev = c.hidden;
    }
    head_ = add_linear(store_, "latent", prev, 2 * c.latent, rng);
    prev = c.latent;
    for (int l = 0; l < c.dec_layers; ++l) {
      dec_.push_back(add_linear(store_, "dec" + std::to_string(l + 1), prev, c.hidden, rng));
      prev = c.hidden;
    }
    out_ = add_linear(store_, "recon", prev, c.in, rng);

    for (int l = 0; l < c.enc_layers; ++l) {
      NodeSpec s;
      s.name = "enc" + std::to_string(l + 1);
      maybe_add_sigma(s, c.hidden);
      add_node(std::move(s));
    }
    bottleneck_ = node_count();
    NodeSpec b;
    b.name = "latent";
    if (mode == Objective::kl) {
      b.family = Family::full_gaussian;
      b.projection = NodeProjection::variance_half;
    } else {
      maybe_add_sigma(b, c.latent);
    }
    add_node(std::move(b));
    for (int l = 0; l < c.dec_layers; ++l) {
      NodeSpec s;
      s.name = "dec" + std::to_string(l + 1);
      maybe_add_sigma(s, c.hidden);
      add_node(std::move(s));
    }
    NodeSpec o;
    o.name = "recon";
    o.clamp_to_target = true;
    maybe_add_sigma(o, c.in);
    add_node(std::move(o));
  }

  Value build_mu(Index node, Graph& g, Bind& bind, const Batch& group,
                 const std::vector<Value>& phis) override {
    const Index enc_n = static_cast<Index>(enc_.size());
    const Index dec_start = bottleneck_ + 1;
    const Index out_node = node_count() - 1;
    if (node < enc_n) {
      Value in = node == 0 ? g.constant(group.x) : phis[static_cast<std::size_t>(node - 1)];
      return hardtanh(apply_linear(bind, enc_[static_cast<std::size_t>(node)], in));
    }
    if (node == bottleneck_) {
      Value r = apply_linear(bind, head_, phis[static_cast<std::size_t>(node - 1)]);
      Value u = slice_cols(r, 0, cfg_.latent);
      if (mode_ != Objective::kl) return u;
      Value v = add_scalar(softplus(slice_cols(r, cfg_.latent, cfg_.latent)), kVarFloor);
      return concat_cols(u, v);
    }
    if (node < out_node) {
      const Index l = node - dec_start;
      Value in = (l == 0) ? latent_draw(g, bind, group, phis)
                          : phis[static_cast<std::size_t>(node - 1)];
      return hardtanh(apply_linear(bind, dec_[static_cast<std::size_t>(l)], in));
    }
    return sigmoid(apply_linear(bind, out_, phis[static_cast<std::size_t>(node - 1)]));
  }

  Tensor output_target(const Batch& group) const override { return group.x; }

  Value build_bp_loss(Graph& g, Bind& bind, const Batch& group) override {
    // canonical evidence bound: squared reconstruction error plus the KL of
    // the recognition Gaussian from the standard normal prior
    Value h = g.constant(group.x);
    for (const Linear& l : enc_) h = hardtanh(apply_linear(bind, l, h));
    Value r = apply_linear(bind, head_, h);
    Value u = slice_cols(r, 0, cfg_.latent);
    Value v = add_scalar(softplus(slice_cols(r, cfg_.latent, cfg_.latent)), kVarFloor);
    Value z = add(u, mul(g.constant(noise_for(group)), sqrt(v)));
    for (const Linear& l : dec_) z = hardtanh(apply_linear(bind, l, z));
    Value recon = sigmoid(apply_linear(bind, out_, z));
    Value rec_err = energy_gaussian_sse(g.constant(group.x), recon);
    const double numel = static_cast<double>(group.x.rows() * cfg_.latent);
    Value prior_kl =
        mul_scalar(add_scalar(sum(sub(add(v, square(u)), ln(v))), -numel), 0.5);
    return add(rec_err, prior_kl);
  }

  Tensor decode_latent(const Tensor& z) override {
    Graph g;
    Bind bind(g, store_, false);
    Value h = g.constant(z);
    for (const Linear& l : dec_) h = hardtanh(apply_linear(bind, l, h));
    return sigmoid(apply_linear(bind, out_, h)).tensor();
  }

  std::pair<Tensor, Tensor> encode_posterior(const Tensor& x) override {
    Graph g;
    Bind bind(g, store_, false);
    Value h = g.constant(x);
    for (const Linear& l : enc_) h = hardtanh(apply_linear(bind, l, h));
    Value r = apply_linear(bind, head_, h);
    Tensor u = slice_cols(r, 0, cfg_.latent).tensor();
    Tensor v = add_scalar(softplus(slice_cols(r, cfg_.latent, cfg_.latent)), kVarFloor).tensor();
    return {std::move(u), std::move(v)};
  }

  Index noise_width() const override { return cfg_.latent; }

 private:
  Tensor noise_for(const Batch& group) const {
    if (!group.noise.empty()) return group.noise;
    return Tensor::zeros({group.x.rows(), cfg_.latent});
  }

  /// Reparameterized decoder input. Under the KL objective both mean and
  /// variance live in the bottleneck activity; otherwise the activity is the
  /// mean and the variance comes straight from the encoder head.
  Value latent_draw(Graph& g, Bind& bind, const Batch& group, const std::vector<Value>& phis) {
    Value noise = g.constant(noise_for(group));
    Value phi_b = phis[static_cast<std::size_t>(bottleneck_)];
    if (mode_ == Objective::kl) {
      Value u = slice_cols(phi_b, 0, cfg_.latent);
      Value s = clamp_min(slice_cols(phi_b, cfg_.latent, cfg_.latent), kVarFloor);
      return add(u, mul(noise, sqrt(s)));
    }
    Value r = apply_linear(bind, head_, phis[static_cast<std::size_t>(bottleneck_ - 1)]);
    Value v = add_scalar(softplus(slice_cols(r, cfg_.latent, cfg_.latent)), kVarFloor);
    return add(phi_b, mul(noise, sqrt(v)));
  }

  VaeConfig cfg_;
  std::vector<Linear> enc_, dec_;
  Linear head_, out_;
  Index bottleneck_ = -1;
};

// ---- single-block causal language model --------------------------------------

class CausalLm final : public Model {
 public:
  CausalLm(const LmConfig& c, Objective mode, Rng& rng) : Model(mode), cfg_(c) {
    require(mode != Objective::trainable_variance, ErrorKind::config,
            "the trainable-variance objective requires a softmax-free architecture");
    require(c.vocab >= 5 && c.d_model > 0 && c.max_len >= 2, ErrorKind::config,
            "bad language model dimensions");

    emb_ = store_.add("emb", gauss_init(rng, {c.vocab, c.d_model}, 0.02));
    pos_ = store_.add("pos", gauss_init(rng, {c.max_len, c.d_model}, 0.02));
    wq_ = add_linear_nobias("attn.q", c.d_model, c.d_model, rng);
    wk_ = add_linear_nobias("attn.k", c.d_model, c.d_model, rng);
    wv_ = add_linear_nobias("attn.v", c.d_model, c.d_model, rng);
    wo_ = add_linear_nobias("attn.o", c.d_model, c.d_model, rng);
    ln1_gain_ = store_.add("ln1.gain", Tensor::full({c.d_model}, 1.0));
    ln1_bias_ = store_.add("ln1.bias", Tensor::zeros({c.d_model}));
    ff1_ = add_linear(store_, "ff1", c.d_model, c.d_ff, rng);
    ff2_ = add_linear(store_, "ff2", c.d_ff, c.d_model, rng);
    ln2_gain_ = store_.add("ln2.gain", Tensor::full({c.d_model}, 1.0));
    ln2_bias_ = store_.add("ln2.bias", Tensor::zeros({c.d_model}));
    head_ = add_linear(store_, "head", c.d_model, c.vocab, rng);

    const bool kl = mode == Objective::kl;
    add_node(NodeSpec{"emb", Family::gaussian_unit, NodeProjection::none, -1, false});
    add_node(NodeSpec{"attn.p", kl ? Family::categorical : Family::gaussian_unit,
                      kl ? NodeProjection::simplex : NodeProjection::zero_masked, -1, false});
    add_node(NodeSpec{"attn.out", Family::gaussian_unit, NodeProjection::none, -1, false});
    add_node(NodeSpec{"ff", Family::gaussian_unit, NodeProjection::none, -1, false});
    add_node(NodeSpec{"next", kl ? Family::categorical : Family::gaussian_unit,
                      kl ? NodeProjection::simplex : NodeProjection::none, -1, true});
  }

  std::vector<Batch> groups(const Batch& b) const override {
    require(!b.seqs.empty(), ErrorKind::invalid_argument, "language model batch has no sequences");
    std::vector<Batch> out;
    out.reserve(b.seqs.size());
    for (const auto& s : b.seqs) {
      require(static_cast<Index>(s.size()) >= 2, ErrorKind::invalid_argument,
              "sequence too short to predict from");
      require(static_cast<Index>(s.size()) - 1 <= cfg_.max_len, ErrorKind::invalid_argument,
              "sequence exceeds the model's maximum length");
      Batch g;
      g.seqs = {s};
      out.push_back(std::move(g));
    }
    return out;
  }

  Value build_mu(Index node, Graph& g, Bind& bind, const Batch& group,
                 const std::vector<Value>& phis) override {
    const std::vector<int>& seq = group.seqs.at(0);
    const Index n = static_cast<Index>(seq.size()) - 1;
    switch (node) {
      case 0: {
        std::vector<int> in(seq.begin(), seq.end() - 1);
        Value e = embed_rows(bind(emb_), in);
        return add(e, slice_rows(bind(pos_), 0, n));
      }
      case 1: {
        Value q = matmul(phis[0], bind(wq_));
        Value k = matmul(phis[0], bind(wk_));
        Value logits =
            mul_scalar(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(cfg_.d_model)));
        return masked_softmax_rows(logits, causal_mask(n));
      }
      case 2: {
        Value v = matmul(phis[0], bind(wv_));
        Value ctx = matmul(phis[1], v);
        Value res = add(matmul(ctx, bind(wo_)), phis[0]);
        return layer_norm_rows(res, bind(ln1_gain_), bind(ln1_bias_));
      }
      case 3: {
        Value h = tanh(apply_linear(bind, ff1_, phis[2]));
        Value res = add(apply_linear(bind, ff2_, h), phis[2]);
        return layer_norm_rows(res, bind(ln2_gain_), bind(ln2_bias_));
      }
      case 4:
        return softmax(apply_linear(bind, head_, phis[3]), 1);
    }
    fail(ErrorKind::invalid_argument, "node index out of range");
  }

  Tensor output_target(const Batch& group) const override {
    const std::vector<int>& seq = group.seqs.at(0);
    return one_hot(std::vector<int>(seq.begin() + 1, seq.end()), cfg_.vocab);
  }

  void project_node(Index node, Tensor& phi, const Batch& group) const override {
    if (node == 1) {
      Tensor mask = causal_mask(phi.rows());
      if (mode_ == Objective::kl) {
        project_rows_to_simplex(phi, &mask);
      } else {
        for (Index i = 0; i < phi.rows(); ++i)
          for (Index j = i + 1; j < phi.cols(); ++j) phi.at(i, j) = 0.0;
      }
      return;
    }
    Model::project_node(node, phi, group);
  }

  Value build_bp_loss(Graph& g, Bind& bind, const Batch& group) override {
    std::vector<Value> mus;
    for (Index n = 0; n < node_count(); ++n) mus.push_back(build_mu(n, g, bind, group, mus));
    return energy_categorical(g.constant(output_target(group)), mus.back());
  }

 private:
  static Tensor gauss_init(Rng& rng, Shape shape, double std) {
    Tensor t = Tensor::uninit(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = rng.normal(0.0, std);
    return t;
  }

  Index add_linear_nobias(const std::string& name, Index in, Index out, Rng& rng) {
    return store_.add(name, gauss_init(rng, {in, out}, std::sqrt(2.0 / static_cast<double>(in))));
  }

  LmConfig cfg_;
  Index emb_ = -1, pos_ = -1;
  Index wq_ = -1, wk_ = -1, wv_ = -1, wo_ = -1;
  Index ln1_gain_ = -1, ln1_bias_ = -1, ln2_gain_ = -1, ln2_bias_ = -1;
  Linear ff1_, ff2_, head_;
};

}  // namespace

std::unique_ptr<Model> make_classifier(const ClassifierConfig& c, Objective mode, Rng& rng) {
  return std::make_unique<MlpClassifier>(c, mode, rng);
}

std::unique_ptr<Model> make_vae(const VaeConfig& c, Objective mode, Rng& rng) {
  return std::make_unique<Vae>(c, mode, rng);
}

std::unique_ptr<Model> make_lm(const LmConfig& c, Objective mode, Rng& rng) {
  return std::make_unique<CausalLm>(c, mode, rng);
}

}  // namespace pcnet
