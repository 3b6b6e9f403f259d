#pragma once

#include "pcnet/distributions.hpp"
#include "pcnet/graph.hpp"
#include "pcnet/rng.hpp"

#include <memory>
#include <string>
#include <vector>

namespace pcnet {

/// The three training objectives. sum_squares counts each squared residual
/// once; trainable_variance scales residuals by a learnable per-unit variance;
/// kl replaces every layer energy with the KL divergence between the layer's
/// activity distribution and its prediction.
enum class Objective { sum_squares, trainable_variance, kl };

Objective objective_from_name(const std::string& name);
const char* objective_name(Objective o);

/// One unit of training data handed to a model. Dense tasks fill x/y; token
/// tasks fill seqs. noise carries reparameterization draws when the model
/// samples inside its forward pass (zeros at evaluation time).
struct Batch {
  Tensor x;
  Tensor y;
  std::vector<std::vector<int>> seqs;
  Tensor noise;

  Index items() const {
    return seqs.empty() ? x.rows() : static_cast<Index>(seqs.size());
  }
};

struct Param {
  std::string name;
  Tensor value;
};

class ParamStore {
 public:
  Index add(std::string name, Tensor init);
  Param& at(Index id);
  const Param& at(Index id) const;
  Index count() const { return static_cast<Index>(params_.size()); }
  Index find(const std::string& name) const;  // -1 when absent

 private:
  std::vector<Param> params_;
};

/// Binds parameters into a graph once each, as differentiable leaves during
/// weight learning and constants during inference.
class Bind {
 public:
  Bind(Graph& g, ParamStore& store, bool differentiable)
      : g_(&g), store_(&store), diff_(differentiable),
        ids_(static_cast<std::size_t>(store.count()), -1) {}

  Value operator()(Index pid);
  bool differentiable() const { return diff_; }
  /// Graph node id for a bound parameter, -1 if it never entered the graph.
  std::int32_t bound_id(Index pid) const { return ids_[static_cast<std::size_t>(pid)]; }

 private:
  Graph* g_;
  ParamStore* store_;
  bool diff_;
  std::vector<std::int32_t> ids_;
};

/// How an activity is pulled back into its family's domain after a gradient
/// step. simplex renormalizes rows; variance_half floors the variance columns
/// of a (mean, variance) block; zero_masked only re-zeroes structurally
/// excluded entries.
enum class NodeProjection { none, simplex, variance_half, zero_masked };

struct NodeSpec {
  std::string name;
  Family family = Family::gaussian_unit;
  NodeProjection projection = NodeProjection::none;
  Index sigma_param = -1;
  bool clamp_to_target = false;
};

/// An architecture: a chain (or shallow DAG) of activity nodes, parameterized
/// prediction maps between them, and a task loss for the backprop baseline.
class Model {
 public:
  explicit Model(Objective mode) : mode_(mode) {}
  virtual ~Model() = default;

  Objective objective() const { return mode_; }
  ParamStore& store() { return store_; }
  const ParamStore& store() const { return store_; }
  const std::vector<NodeSpec>& nodes() const { return nodes_; }
  Index node_count() const { return static_cast<Index>(nodes_.size()); }

  /// Splits a batch into groups with independent activity sets. Dense models
  /// keep the batch whole; sequence models return one group per sequence
  /// because activity row counts follow sequence length.
  virtual std::vector<Batch> groups(const Batch& b) const { return {b}; }

  /// Prediction for one node given the activities of earlier nodes.
  virtual Value build_mu(Index node, Graph& g, Bind& bind, const Batch& group,
                         const std::vector<Value>& phis) = 0;

  /// Target the top node is clamped to while learning.
  virtual Tensor output_target(const Batch& group) const = 0;

  /// Applies the node's domain projection in place.
  virtual void project_node(Index node, Tensor& phi, const Batch& group) const;

  /// Task loss for the backprop baseline, summed over items in the group.
  virtual Value build_bp_loss(Graph& g, Bind& bind, const Batch& group) = 0;

  /// Maps latent draws through the generative half, for models that have one.
  virtual Tensor decode_latent(const Tensor& z);

  /// Recognition posterior (mean, diagonal variance) rows for inputs x, for
  /// models that define one.
  virtual std::pair<Tensor, Tensor> encode_posterior(const Tensor& x);

  /// Columns of reparameterization noise the model consumes per item
  /// (0 for deterministic forward passes).
  virtual Index noise_width() const { return 0; }

  /// Layer energy given bound activity and prediction values.
  Value build_energy(Index node, Graph& g, Bind& bind, Value phi, Value mu) const;

 protected:
  Index add_node(NodeSpec spec) {
    nodes_.push_back(std::move(spec));
    return static_cast<Index>(nodes_.size()) - 1;
  }
  /// Registers a per-unit variance parameter when the objective trains one.
  void maybe_add_sigma(NodeSpec& spec, Index width);

  Objective mode_;
  ParamStore store_;
  std::vector<NodeSpec> nodes_;
};

// ---- architectures ---------------------------------------------------------

struct ClassifierConfig {
  Index in = 784;
  Index out = 10;
  Index hidden = 512;
  int hidden_layers = 3;
  int variant = 2;  // 1: tanh output; 2: softmax output; 3: softmax mid + output
};

struct VaeConfig {
  Index in = 784;
  Index hidden = 256;
  Index latent = 32;
  int enc_layers = 2;
  int dec_layers = 2;
};

struct LmConfig {
  Index vocab = 2000;
  Index d_model = 128;
  Index d_ff = 512;
  Index max_len = 34;
};

std::unique_ptr<Model> make_classifier(const ClassifierConfig& c, Objective mode, Rng& rng);
std::unique_ptr<Model> make_vae(const VaeConfig& c, Objective mode, Rng& rng);
std::unique_ptr<Model> make_lm(const LmConfig& c, Objective mode, Rng& rng);

/// Causal attention mask for n positions: ones on and below the diagonal.
Tensor causal_mask(Index n);
/// One-hot rows from integer labels.
Tensor one_hot(const std::vector<int>& labels, Index width);

}  // namespace pcnet
