#include "pcnet/model.hpp"

namespace pcnet {

Objective objective_from_name(const std::string& name) {
  if (name == "f" || name == "sse") return Objective::sum_squares;
  if (name == "f-tilde" || name == "ftilde") return Objective::trainable_variance;
  if (name == "f-kl" || name == "fkl" || name == "kl") return Objective::kl;
  fail(ErrorKind::config, "unknown objective '" + name + "' (expected f, f-tilde, or f-kl)");
}

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::sum_squares: return "f";
    case Objective::trainable_variance: return "f-tilde";
    case Objective::kl: return "f-kl";
  }
  return "?";
}

Index ParamStore::add(std::string name, Tensor init) {
  require(find(name) < 0, ErrorKind::invalid_argument, "duplicate parameter name '" + name + "'");
  params_.push_back(Param{std::move(name), std::move(init)});
  return static_cast<Index>(params_.size()) - 1;
}

Param& ParamStore::at(Index id) {
  require(id >= 0 && id < count(), ErrorKind::invalid_argument, "parameter id out of range");
  return params_[static_cast<std::size_t>(id)];
}

const Param& ParamStore::at(Index id) const {
  require(id >= 0 && id < count(), ErrorKind::invalid_argument, "parameter id out of range");
  return params_[static_cast<std::size_t>(id)];
}

Index ParamStore::find(const std::string& name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return static_cast<Index>(i);
  return -1;
}

Value Bind::operator()(Index pid) {
  require(pid >= 0 && pid < store_->count(), ErrorKind::invalid_argument,
          "parameter id out of range");
  std::int32_t& slot = ids_[static_cast<std::size_t>(pid)];
  if (slot < 0) slot = g_->leaf(store_->at(pid).value, diff_).id;
  return Value{g_, slot};
}

void Model::maybe_add_sigma(NodeSpec& spec, Index width) {
  if (mode_ != Objective::trainable_variance) return;
  spec.family = Family::gaussian_trainable;
  spec.sigma_param = store_.add(spec.name + ".sigma", Tensor::full({width}, 1.0));
}

Value Model::build_energy(Index node, Graph& g, Bind& bind, Value phi, Value mu) const {
  const NodeSpec& spec = nodes_[static_cast<std::size_t>(node)];
  switch (spec.family) {
    case Family::gaussian_unit:
      return mode_ == Objective::sum_squares ? energy_gaussian_sse(phi, mu)
                                             : energy_gaussian_kl(phi, mu);
    case Family::gaussian_trainable:
      return energy_gaussian_trainable(phi, mu, bind(spec.sigma_param));
    case Family::categorical:
      return energy_categorical(phi, mu);
    case Family::full_gaussian: {
      const Index w = phi.tensor().cols() / 2;
      return energy_full_gaussian(slice_cols(phi, 0, w), slice_cols(phi, w, w),
                                  slice_cols(mu, 0, w), slice_cols(mu, w, w));
    }
  }
  fail(ErrorKind::invalid_argument, "unhandled family in build_energy");
}

void Model::project_node(Index node, Tensor& phi, const Batch&) const {
  switch (nodes_[static_cast<std::size_t>(node)].projection) {
    case NodeProjection::none:
      return;
    case NodeProjection::simplex:
      project_rows_to_simplex(phi);
      return;
    case NodeProjection::variance_half:
      floor_columns(phi, phi.cols() / 2, phi.cols() / 2);
      return;
    case NodeProjection::zero_masked:
      return;  // meaningful only for models that know their mask; they override
  }
}

Tensor Model::decode_latent(const Tensor&) {
  fail(ErrorKind::invalid_argument, "this model has no latent decoder");
}

std::pair<Tensor, Tensor> Model::encode_posterior(const Tensor&) {
  fail(ErrorKind::invalid_argument, "this model has no recognition posterior");
}

Tensor causal_mask(Index n) {
  Tensor m = Tensor::zeros({n, n});
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j <= i; ++j) m.at(i, j) = 1.0;
  return m;
}

Tensor one_hot(const std::vector<int>& labels, Index width) {
  Tensor t = Tensor::zeros({static_cast<Index>(labels.size()), width});
  for (std::size_t i = 0; i < labels.size(); ++i) {
    require(labels[i] >= 0 && labels[i] < width, ErrorKind::invalid_argument,
            "label out of range in one_hot");
    t.at(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return t;
}

}  // namespace pcnet
