#pragma once

#include "pcnet/tensor.hpp"

#include <string>
#include <vector>

namespace pcnet {

enum class OptimKind { sgd, adam, adamw };

OptimKind optim_from_name(const std::string& name);
const char* optim_name(OptimKind k);

struct OptimSettings {
  OptimKind kind = OptimKind::adam;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;  // adamw only, decoupled
};

/// First-order optimizer over an indexed parameter set. Keeps one moment pair
/// per slot; slots are addressed by the caller's parameter ids.
class Optimizer {
 public:
  Optimizer(OptimSettings s, std::size_t slots);

  void step(std::size_t slot, Tensor& param, const Tensor& grad);
  const OptimSettings& settings() const { return s_; }

 private:
  struct State {
    Tensor m, v;
    long t = 0;
  };
  OptimSettings s_;
  std::vector<State> states_;
};

}  // namespace pcnet
