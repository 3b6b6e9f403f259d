#include "pcnet/engine.hpp"

namespace pcnet {
namespace {

struct EnergyGraph {
  Graph g;
  Bind bind;
  std::vector<Value> phiv;
  std::vector<Value> terms;
  Value total;

  EnergyGraph(Model& m, const std::vector<Tensor>& phis, const Batch& group, bool theta_diff,
              bool phi_diff, bool clamp_top)
      : bind(g, m.store(), theta_diff) {
    const Index n = m.node_count();
    require(static_cast<Index>(phis.size()) == n, ErrorKind::invalid_argument,
            "activity count does not match the model");
    for (Index i = 0; i < n; ++i) {
      const bool clamped = clamp_top && m.nodes()[static_cast<std::size_t>(i)].clamp_to_target;
      phiv.push_back(g.leaf(phis[static_cast<std::size_t>(i)], phi_diff && !clamped));
    }
    std::vector<Value> mus;
    for (Index i = 0; i < n; ++i) mus.push_back(m.build_mu(i, g, bind, group, phiv));
    for (Index i = 0; i < n; ++i)
      terms.push_back(m.build_energy(i, g, bind, phiv[static_cast<std::size_t>(i)], mus[static_cast<std::size_t>(i)]));
    total = terms[0];
    for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  }
};

void check_divergence(double total, Index items, double abort_at) {
  require(items > 0, ErrorKind::invalid_argument, "empty group");
  if (total / static_cast<double>(items) > abort_at)
    fail(ErrorKind::divergence, "energy exceeded the divergence threshold");
}

Batch with_noise(Model& m, const Batch& group, Rng& rng) {
  if (m.noise_width() <= 0) return group;
  Batch out = group;
  out.noise = rng.normal_tensor({group.items(), m.noise_width()});
  return out;
}

}  // namespace

std::vector<Tensor> forward_pass(Model& m, const Batch& group) {
  Graph g;
  Bind bind(g, m.store(), false);
  std::vector<Value> mus;
  for (Index i = 0; i < m.node_count(); ++i) mus.push_back(m.build_mu(i, g, bind, group, mus));
  std::vector<Tensor> out;
  out.reserve(mus.size());
  for (Value v : mus) out.push_back(v.tensor());
  return out;
}

// Activities on a probability simplex take multiplicative steps (mirror
// descent in the simplex geometry): the state stays strictly interior, and
// any uniform component of the gradient cancels in the row normalizer. An
// additive step at the configured rates would shift whole rows below zero
// and leave the clip-and-project result nearly stateless.
void step_simplex_rows(Tensor& phi, const Tensor& grad, double beta) {
  std::vector<double> scaled(static_cast<std::size_t>(phi.cols()));
  for (Index r = 0; r < phi.rows(); ++r) {
    double shift = std::numeric_limits<double>::infinity();
    for (Index c = 0; c < phi.cols(); ++c)
      if (phi.at(r, c) > 0.0) shift = std::min(shift, beta * grad.at(r, c));
    double sum = 0.0;
    for (Index c = 0; c < phi.cols(); ++c) {
      const double v = phi.at(r, c) > 0.0
                           ? phi.at(r, c) * std::exp(-(beta * grad.at(r, c) - shift))
                           : 0.0;
      scaled[static_cast<std::size_t>(c)] = v;
      sum += v;
    }
    for (Index c = 0; c < phi.cols(); ++c) {
      const double v = scaled[static_cast<std::size_t>(c)];
      phi.at(r, c) = v > 0.0 ? std::max(v / sum, kProbFloor) : 0.0;
    }
  }
}

double infer_step(Model& m, std::vector<Tensor>& phis, const Batch& group, double beta_phi,
                  bool clamp_top) {
  EnergyGraph eg(m, phis, group, /*theta_diff=*/false, /*phi_diff=*/true, clamp_top);
  const double total = eg.total.item();
  check_divergence(total, group.items(), 1e12);
  eg.g.backward(eg.total);
  for (Index i = 0; i < m.node_count(); ++i) {
    const NodeSpec& spec = m.nodes()[static_cast<std::size_t>(i)];
    if (clamp_top && spec.clamp_to_target) continue;
    Tensor& phi = phis[static_cast<std::size_t>(i)];
    const Tensor grad = eg.g.grad(eg.phiv[static_cast<std::size_t>(i)]);
    if (spec.projection == NodeProjection::simplex)
      step_simplex_rows(phi, grad, beta_phi);
    else
      phi.array() -= beta_phi * grad.array();
    m.project_node(i, phi, group);
  }
  return total;
}

std::vector<double> weight_grads(Model& m, const std::vector<Tensor>& phis, const Batch& group,
                                 std::vector<Tensor>& grads) {
  require(static_cast<Index>(grads.size()) == m.store().count(), ErrorKind::invalid_argument,
          "gradient accumulator size mismatch");
  EnergyGraph eg(m, phis, group, /*theta_diff=*/true, /*phi_diff=*/false, /*clamp_top=*/true);
  eg.g.backward(eg.total);
  for (Index pid = 0; pid < m.store().count(); ++pid) {
    const std::int32_t id = eg.bind.bound_id(pid);
    if (id < 0) continue;
    Value v{&eg.g, id};
    if (!eg.g.grad_touched(v)) continue;
    Tensor& slot = grads[static_cast<std::size_t>(pid)];
    if (slot.empty()) slot = Tensor::zeros(m.store().at(pid).value.shape());
    slot.array() += eg.g.grad(v).array();
  }
  std::vector<double> per_node;
  per_node.reserve(eg.terms.size());
  for (Value t : eg.terms) per_node.push_back(t.item());
  return per_node;
}

PcTrainer::PcTrainer(Model& m, PcSettings s)
    : m_(m), s_(s), opt_(s.optim, static_cast<std::size_t>(m.store().count())) {
  require(s_.t_steps >= 1, ErrorKind::config, "inference step count must be at least 1");
  require(s_.beta_phi > 0.0, ErrorKind::config, "activity step size must be positive");
  require(s_.weight_updates >= 1, ErrorKind::config, "weight update count must be at least 1");
}

EnergyReport PcTrainer::train_step(const Batch& batch, Rng& rng) {
  std::vector<Tensor> grads(static_cast<std::size_t>(m_.store().count()));
  EnergyReport rep;
  rep.per_node.assign(static_cast<std::size_t>(m_.node_count()), 0.0);
  Index items = 0;

  for (const Batch& raw : m_.groups(batch)) {
    Batch group = with_noise(m_, raw, rng);
    std::vector<Tensor> phis = forward_pass(m_, group);
    phis.back() = m_.output_target(group);
    for (int t = 0; t < s_.t_steps; ++t)
      infer_step(m_, phis, group, s_.beta_phi, /*clamp_top=*/true);
    const std::vector<double> per_node = weight_grads(m_, phis, group, grads);
    for (std::size_t i = 0; i < per_node.size(); ++i) rep.per_node[i] += per_node[i];
    items += group.items();
  }

  double total = 0.0;
  for (std::size_t i = 0; i < rep.per_node.size(); ++i) {
    rep.per_node[i] /= static_cast<double>(items);
    total += rep.per_node[i];
  }
  rep.total = total;
  check_divergence(rep.total, 1, s_.energy_abort);

  for (Index pid = 0; pid < m_.store().count(); ++pid) {
    Tensor& gslot = grads[static_cast<std::size_t>(pid)];
    if (gslot.empty()) continue;
    gslot.array() /= static_cast<double>(items);
    for (int k = 0; k < s_.weight_updates; ++k)
      opt_.step(static_cast<std::size_t>(pid), m_.store().at(pid).value, gslot);
  }
  for (const NodeSpec& spec : m_.nodes()) {
    if (spec.sigma_param < 0) continue;
    Tensor& sigma = m_.store().at(spec.sigma_param).value;
    floor_columns(sigma, 0, sigma.cols());
  }
  return rep;
}

BpTrainer::BpTrainer(Model& m, OptimSettings s)
    : m_(m), opt_(s, static_cast<std::size_t>(m.store().count())) {}

double BpTrainer::train_step(const Batch& batch, Rng& rng) {
  std::vector<Tensor> grads(static_cast<std::size_t>(m_.store().count()));
  double loss_sum = 0.0;
  Index items = 0;

  for (const Batch& raw : m_.groups(batch)) {
    Batch group = with_noise(m_, raw, rng);
    Graph g;
    Bind bind(g, m_.store(), true);
    Value loss = m_.build_bp_loss(g, bind, group);
    loss_sum += loss.item();
    items += group.items();
    g.backward(loss);
    for (Index pid = 0; pid < m_.store().count(); ++pid) {
      const std::int32_t id = bind.bound_id(pid);
      if (id < 0) continue;
      Value v{&g, id};
      if (!g.grad_touched(v)) continue;
      Tensor& slot = grads[static_cast<std::size_t>(pid)];
      if (slot.empty()) slot = Tensor::zeros(m_.store().at(pid).value.shape());
      slot.array() += g.grad(v).array();
    }
  }

  check_divergence(loss_sum, items, 1e12);
  for (Index pid = 0; pid < m_.store().count(); ++pid) {
    Tensor& gslot = grads[static_cast<std::size_t>(pid)];
    if (gslot.empty()) continue;
    gslot.array() /= static_cast<double>(items);
    opt_.step(static_cast<std::size_t>(pid), m_.store().at(pid).value, gslot);
  }
  return loss_sum / static_cast<double>(items);
}

}  // namespace pcnet
