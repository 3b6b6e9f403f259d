#include "pcnet/optim.hpp"

#include <cmath>

namespace pcnet {

OptimKind optim_from_name(const std::string& name) {
  if (name == "sgd") return OptimKind::sgd;
  if (name == "adam") return OptimKind::adam;
  if (name == "adamw") return OptimKind::adamw;
  fail(ErrorKind::config, "unknown optimizer '" + name + "' (expected sgd, adam, or adamw)");
}

const char* optim_name(OptimKind k) {
  switch (k) {
    case OptimKind::sgd: return "sgd";
    case OptimKind::adam: return "adam";
    case OptimKind::adamw: return "adamw";
  }
  return "?";
}

Optimizer::Optimizer(OptimSettings s, std::size_t slots) : s_(s), states_(slots) {
  require(s_.lr > 0.0, ErrorKind::config, "learning rate must be positive");
}

void Optimizer::step(std::size_t slot, Tensor& param, const Tensor& grad) {
  require(slot < states_.size(), ErrorKind::invalid_argument, "optimizer slot out of range");
  require(param.same_shape(grad), ErrorKind::shape, "gradient shape mismatch in optimizer step");
  State& st = states_[slot];
  switch (s_.kind) {
    case OptimKind::sgd:
      param.array() -= s_.lr * grad.array();
      return;
    case OptimKind::adamw:
      param.array() -= s_.lr * s_.weight_decay * param.array();
      [[fallthrough]];
    case OptimKind::adam: {
      if (st.t == 0) {
        st.m = Tensor::zeros(param.shape());
        st.v = Tensor::zeros(param.shape());
      }
      ++st.t;
      st.m.array() = s_.beta1 * st.m.array() + (1.0 - s_.beta1) * grad.array();
      st.v.array() = s_.beta2 * st.v.array() + (1.0 - s_.beta2) * grad.array().square();
      const double bc1 = 1.0 - std::pow(s_.beta1, static_cast<double>(st.t));
      const double bc2 = 1.0 - std::pow(s_.beta2, static_cast<double>(st.t));
      param.array() -=
          s_.lr * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + s_.eps);
      return;
    }
  }
}

}  // namespace pcnet
