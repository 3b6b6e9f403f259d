#pragma once

#include "pcnet/model.hpp"
#include "pcnet/optim.hpp"

namespace pcnet {

/// Settings for expectation-maximization training: T inference steps on the
/// activities (plain gradient descent at rate beta_phi), then weight updates
/// from the converged activities.
struct PcSettings {
  int t_steps = 32;
  double beta_phi = 0.05;
  int weight_updates = 1;
  OptimSettings optim;
  double energy_abort = 1e12;  // per-item mean above this counts as divergence
};

struct EnergyReport {
  double total = 0.0;            // per-item mean
  std::vector<double> per_node;  // per-item mean, node order
};

/// Pure forward pass: every activity takes its predicted value, in node order.
std::vector<Tensor> forward_pass(Model& m, const Batch& group);

/// One activity update in place: build the energy at the current activities,
/// descend each unclamped activity by beta_phi times its gradient, project
/// back into the family domain. Returns the pre-update energy summed over
/// group items.
double infer_step(Model& m, std::vector<Tensor>& phis, const Batch& group, double beta_phi,
                  bool clamp_top);

/// Energy at fixed activities, accumulating d(energy)/d(theta) into grads,
/// indexed like the parameter store (empty slots were never touched). Returns
/// per-node energy sums over group items.
std::vector<double> weight_grads(Model& m, const std::vector<Tensor>& phis, const Batch& group,
                                 std::vector<Tensor>& grads);

class PcTrainer {
 public:
  PcTrainer(Model& m, PcSettings s);

  /// One EM step over a batch. Returns post-inference energies (per-item mean).
  EnergyReport train_step(const Batch& batch, Rng& rng);

 private:
  Model& m_;
  PcSettings s_;
  Optimizer opt_;
};

class BpTrainer {
 public:
  BpTrainer(Model& m, OptimSettings s);

  /// One gradient step over a batch. Returns the per-item mean loss.
  double train_step(const Batch& batch, Rng& rng);

 private:
  Model& m_;
  Optimizer opt_;
};

}  // namespace pcnet
