#include "pcnet/graph.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace pcnet {
namespace {

Graph* shared_graph(std::initializer_list<Value> vs) {
  Graph* g = nullptr;
  for (const Value& v : vs) {
    require(v.valid(), ErrorKind::invalid_argument, "operation on an invalid Value handle");
    if (g == nullptr) g = v.g;
    require(v.g == g, ErrorKind::invalid_argument, "operands belong to different graphs");
  }
  return g;
}

void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  require(a.same_shape(b), ErrorKind::shape,
          std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

}  // namespace

const Graph::Node& Graph::node(std::int32_t id) const {
  require(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), ErrorKind::invalid_argument,
          "node id out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

Graph::Node& Graph::node(std::int32_t id) {
  require(id >= 0 && static_cast<std::size_t>(id) < nodes_.size(), ErrorKind::invalid_argument,
          "node id out of range");
  return nodes_[static_cast<std::size_t>(id)];
}

Value Graph::leaf(Tensor t, bool differentiable) {
  Node n;
  n.value = std::move(t);
  n.diff = differentiable;
  n.needs_grad = differentiable;
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Value Graph::make(const char* op, Tensor out, std::initializer_list<Value> ins, BackwardFn back) {
  require(out.all_finite(), ErrorKind::numeric,
          std::string(op) + " produced a non-finite value");
  bool needs = false;
  for (const Value& v : ins) {
    require(v.g == this, ErrorKind::invalid_argument, "operand from a different graph");
    needs = needs || node(v.id).needs_grad;
  }
  Node n;
  n.value = std::move(out);
  n.needs_grad = needs;
  if (needs) n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return Value{this, static_cast<std::int32_t>(nodes_.size() - 1)};
}

Tensor& Graph::grad_buffer(std::int32_t id) {
  Node& n = node(id);
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Graph::backward(Value root) {
  require(root.valid() && root.g == this, ErrorKind::invalid_argument,
          "backward root is not on this graph");
  require(node(root.id).value.size() == 1, ErrorKind::invalid_argument,
          "backward requires a scalar root");
  for (Node& n : nodes_) n.grad = Tensor();
  grad_buffer(root.id).array() = 1.0;
  for (std::int32_t id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad.empty() && n.back) n.back(*this, id);
  }
}

const Tensor& Graph::grad(Value v) {
  require(v.valid() && v.g == this, ErrorKind::invalid_argument, "grad of a foreign Value");
  Node& n = node(v.id);
  require(n.needs_grad, ErrorKind::invalid_argument,
          "gradient requested for a non-differentiable node");
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

// ---- linear algebra ---------------------------------------------------------

Value matmul(Value a, Value b) {
  Graph* g = shared_graph({a, b});
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  require(ta.rank() <= 2 && tb.rank() <= 2, ErrorKind::shape, "matmul expects rank <= 2");
  require(ta.cols() == tb.rows(), ErrorKind::shape,
          "matmul inner dimensions disagree: " + ta.shape_str() + " * " + tb.shape_str());
  Shape out_shape = (ta.rank() == 1) ? Shape{tb.cols()} : Shape{ta.rows(), tb.cols()};
  Tensor out = Tensor::uninit(out_shape);
  out.matrix().noalias() = ta.matrix() * tb.matrix();
  return g->make("matmul", std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& gr, std::int32_t self) {
    const Tensor& go = gr.grad_buffer(self);
    if (gr.wants_grad(ia)) gr.add_grad_mat(ia, go.matrix() * gr.val(ib).matrix().transpose());
    if (gr.wants_grad(ib)) gr.add_grad_mat(ib, gr.val(ia).matrix().transpose() * go.matrix());
  });
}

Value transpose(Value a) {
  Graph* g = shared_graph({a});
  const Tensor& ta = a.tensor();
  require(ta.rank() == 2, ErrorKind::shape, "transpose expects rank 2");
  Tensor out = Tensor::uninit({ta.cols(), ta.rows()});
  out.matrix() = ta.matrix().transpose();
  return g->make("transpose", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    gr.add_grad_mat(ia, gr.grad_buffer(self).matrix().transpose());
  });
}

Value affine(Value x, Value w, Value b) {
  Graph* g = shared_graph({x, w, b});
  const Tensor& tx = x.tensor();
  const Tensor& tw = w.tensor();
  const Tensor& tb = b.tensor();
  require(tx.rank() <= 2 && tw.rank() == 2, ErrorKind::shape, "affine expects x rank <= 2, w rank 2");
  require(tx.cols() == tw.rows(), ErrorKind::shape,
          "affine inner dimensions disagree: " + tx.shape_str() + " * " + tw.shape_str());
  require(tb.size() == tw.cols(), ErrorKind::shape, "affine bias length must equal output width");
  Shape out_shape = (tx.rank() == 1) ? Shape{tw.cols()} : Shape{tx.rows(), tw.cols()};
  Tensor out = Tensor::uninit(out_shape);
  out.matrix().noalias() = tx.matrix() * tw.matrix();
  out.matrix().rowwise() += tb.matrix().row(0);
  return g->make("affine", std::move(out), {x, w, b},
                 [ix = x.id, iw = w.id, ib = b.id](Graph& gr, std::int32_t self) {
                   const Tensor& go = gr.grad_buffer(self);
                   if (gr.wants_grad(ix)) gr.add_grad_mat(ix, go.matrix() * gr.val(iw).matrix().transpose());
                   if (gr.wants_grad(iw)) gr.add_grad_mat(iw, gr.val(ix).matrix().transpose() * go.matrix());
                   if (gr.wants_grad(ib)) gr.add_grad_mat(ib, go.matrix().colwise().sum());
                 });
}

// ---- elementwise ------------------------------------------------------------

Value add(Value a, Value b) {
  Graph* g = shared_graph({a, b});
  check_same_shape("add", a.tensor(), b.tensor());
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array() + b.tensor().array();
  return g->make("add", std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& gr, std::int32_t self) {
    const Tensor& go = gr.grad_buffer(self);
    gr.add_grad(ia, go.array());
    gr.add_grad(ib, go.array());
  });
}

Value sub(Value a, Value b) {
  Graph* g = shared_graph({a, b});
  check_same_shape("sub", a.tensor(), b.tensor());
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array() - b.tensor().array();
  return g->make("sub", std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& gr, std::int32_t self) {
    const Tensor& go = gr.grad_buffer(self);
    gr.add_grad(ia, go.array());
    gr.add_grad(ib, -go.array());
  });
}

Value mul(Value a, Value b) {
  Graph* g = shared_graph({a, b});
  check_same_shape("mul", a.tensor(), b.tensor());
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array() * b.tensor().array();
  return g->make("mul", std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& gr, std::int32_t self) {
    const Tensor& go = gr.grad_buffer(self);
    if (gr.wants_grad(ia)) gr.add_grad(ia, go.array() * gr.val(ib).array());
    if (gr.wants_grad(ib)) gr.add_grad(ib, go.array() * gr.val(ia).array());
  });
}

Value div(Value a, Value b) {
  Graph* g = shared_graph({a, b});
  check_same_shape("div", a.tensor(), b.tensor());
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array() / b.tensor().array();
  return g->make("div", std::move(out), {a, b}, [ia = a.id, ib = b.id](Graph& gr, std::int32_t self) {
    const Tensor& go = gr.grad_buffer(self);
    const auto bv = gr.val(ib).array();
    if (gr.wants_grad(ia)) gr.add_grad(ia, go.array() / bv);
    if (gr.wants_grad(ib)) gr.add_grad(ib, -go.array() * gr.val(self).array() / bv);
  });
}

Value neg(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = -a.tensor().array();
  return g->make("neg", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    gr.add_grad(ia, -gr.grad_buffer(self).array());
  });
}

Value add_scalar(Value a, double s) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array() + s;
  return g->make("add_scalar", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    gr.add_grad(ia, gr.grad_buffer(self).array());
  });
}

Value mul_scalar(Value a, double s) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array() * s;
  return g->make("mul_scalar", std::move(out), {a}, [ia = a.id, s](Graph& gr, std::int32_t self) {
    gr.add_grad(ia, gr.grad_buffer(self).array() * s);
  });
}

// ---- nonlinearities ---------------------------------------------------------

Value tanh(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array().tanh();
  return g->make("tanh", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    const auto y = gr.val(self).array();
    gr.add_grad(ia, gr.grad_buffer(self).array() * (1.0 - y.square()));
  });
}

Value hardtanh(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array().min(1.0).max(-1.0);
  return g->make("hardtanh", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    const auto x = gr.val(ia).array();
    const auto pass = (x.abs() < 1.0).cast<double>();
    gr.add_grad(ia, gr.grad_buffer(self).array() * pass);
  });
}

Value sigmoid(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = 0.5 * (1.0 + (0.5 * a.tensor().array()).tanh());
  return g->make("sigmoid", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    const auto y = gr.val(self).array();
    gr.add_grad(ia, gr.grad_buffer(self).array() * y * (1.0 - y));
  });
}

Value relu(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array().max(0.0);
  return g->make("relu", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    const auto pass = (gr.val(ia).array() > 0.0).cast<double>();
    gr.add_grad(ia, gr.grad_buffer(self).array() * pass);
  });
}

Value ln(Value a) {
  Graph* g = shared_graph({a});
  require(a.tensor().size() == 0 || a.tensor().array().minCoeff() > 0.0, ErrorKind::numeric,
          "ln requires strictly positive input");
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array().log();
  return g->make("ln", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    gr.add_grad(ia, gr.grad_buffer(self).array() / gr.val(ia).array());
  });
}

Value exp(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array().exp();
  return g->make("exp", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    gr.add_grad(ia, gr.grad_buffer(self).array() * gr.val(self).array());
  });
}

Value square(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array().square();
  return g->make("square", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    gr.add_grad(ia, 2.0 * gr.grad_buffer(self).array() * gr.val(ia).array());
  });
}

Value sqrt(Value a) {
  Graph* g = shared_graph({a});
  require(a.tensor().size() == 0 || a.tensor().array().minCoeff() > 0.0, ErrorKind::numeric,
          "sqrt requires strictly positive input (gradient is unbounded at zero)");
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array().sqrt();
  return g->make("sqrt", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    gr.add_grad(ia, 0.5 * gr.grad_buffer(self).array() / gr.val(self).array());
  });
}

Value softplus(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  const auto x = a.tensor().array();
  out.array() = x.max(0.0) + (-x.abs()).exp().log1p();
  return g->make("softplus", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    const auto x = gr.val(ia).array();
    gr.add_grad(ia, gr.grad_buffer(self).array() * 0.5 * (1.0 + (0.5 * x).tanh()));
  });
}

Value clamp_min(Value a, double lo) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::uninit(a.shape());
  out.array() = a.tensor().array().max(lo);
  return g->make("clamp_min", std::move(out), {a}, [ia = a.id, lo](Graph& gr, std::int32_t self) {
    const auto pass = (gr.val(ia).array() > lo).cast<double>();
    gr.add_grad(ia, gr.grad_buffer(self).array() * pass);
  });
}

// ---- reductions -------------------------------------------------------------

Value sum(Value a) {
  Graph* g = shared_graph({a});
  Tensor out = Tensor::scalar(a.tensor().size() == 0 ? 0.0 : a.tensor().array().sum());
  return g->make("sum", std::move(out), {a}, [ia = a.id](Graph& gr, std::int32_t self) {
    const double go = gr.grad_buffer(self).item();
    gr.add_grad(ia, Eigen::ArrayXd::Constant(gr.val(ia).size(), go));
  });
}

Value mean(Value a) {
  Graph* g = shared_graph({a});
  require(a.tensor().size() > 0, ErrorKind::invalid_argument, "mean of an empty tensor");
  const double inv_n = 1.0 / static_cast<double>(a.tensor().size());
  Tensor out = Tensor::scalar(a.tensor().array().mean());
  return g->make("mean", std::move(out), {a}, [ia = a.id, inv_n](Graph& gr, std::int32_t self) {
    const double go = gr.grad_buffer(self).item();
    gr.add_grad(ia, Eigen::ArrayXd::Constant(gr.val(ia).size(), go * inv_n));
  });
}

// ---- structured ops ---------------------------------------------------------

Value softmax(Value a, int axis) {
  Graph* g = shared_graph({a});
  const Tensor& ta = a.tensor();
  require(ta.rank() <= 2, ErrorKind::shape, "softmax expects rank <= 2");
  require(axis == 0 || axis == 1, ErrorKind::invalid_argument, "softmax axis must be 0 or 1");
  if (ta.rank() <= 1) axis = 1;  // a lone vector normalizes over its entries
  Tensor out = Tensor::uninit(ta.shape());
  if (axis == 1) {
    auto m = ta.matrix();
    auto o = out.matrix();
    for (Index r = 0; r < m.rows(); ++r) {
      Eigen::ArrayXd e = (m.row(r).array() - m.row(r).maxCoeff()).exp();
      o.row(r) = (e / e.sum()).matrix();
    }
  } else {
    auto m = ta.matrix();
    auto o = out.matrix();
    for (Index c = 0; c < m.cols(); ++c) {
      Eigen::ArrayXd e = (m.col(c).array() - m.col(c).maxCoeff()).exp();
      o.col(c) = (e / e.sum()).matrix();
    }
  }
  return g->make("softmax", std::move(out), {a}, [ia = a.id, axis](Graph& gr, std::int32_t self) {
    const Tensor& go = gr.grad_buffer(self);
    const Tensor& y = gr.val(self);
    Tensor gx = Tensor::zeros(y.shape());
    if (axis == 1) {
      for (Index r = 0; r < y.rows(); ++r) {
        const auto yr = y.matrix().row(r).array();
        const auto gr_ = go.matrix().row(r).array();
        const double dot = (yr * gr_).sum();
        gx.matrix().row(r) = (yr * (gr_ - dot)).matrix();
      }
    } else {
      for (Index c = 0; c < y.cols(); ++c) {
        const auto yc = y.matrix().col(c).array();
        const auto gc = go.matrix().col(c).array();
        const double dot = (yc * gc).sum();
        gx.matrix().col(c) = (yc * (gc - dot)).matrix();
      }
    }
    gr.add_grad(ia, gx.array());
  });
}

Value masked_softmax_rows(Value logits, const Tensor& mask) {
  Graph* g = shared_graph({logits});
  const Tensor& ta = logits.tensor();
  require(ta.rank() == 2, ErrorKind::shape, "masked_softmax_rows expects rank 2");
  require(ta.same_shape(mask), ErrorKind::shape, "mask shape must match logits");
  Tensor out = Tensor::zeros(ta.shape());
  for (Index r = 0; r < ta.rows(); ++r) {
    double hi = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < ta.cols(); ++c)
      if (mask.at(r, c) != 0.0) hi = std::max(hi, ta.at(r, c));
    require(std::isfinite(hi), ErrorKind::invalid_argument,
            "masked_softmax_rows: a row has no unmasked entries");
    double total = 0.0;
    for (Index c = 0; c < ta.cols(); ++c) {
      const double e = mask.at(r, c) != 0.0 ? std::exp(ta.at(r, c) - hi) : 0.0;
      out.at(r, c) = e;
      total += e;
    }
    for (Index c = 0; c < ta.cols(); ++c) out.at(r, c) /= total;
  }
  return g->make("masked_softmax_rows", std::move(out), {logits},
                 [ia = logits.id](Graph& gr, std::int32_t self) {
                   const Tensor& go = gr.grad_buffer(self);
                   const Tensor& y = gr.val(self);
                   Tensor gx = Tensor::zeros(y.shape());
                   for (Index r = 0; r < y.rows(); ++r) {
                     const auto yr = y.matrix().row(r).array();
                     const auto gr_ = go.matrix().row(r).array();
                     const double dot = (yr * gr_).sum();
                     gx.matrix().row(r) = (yr * (gr_ - dot)).matrix();
                   }
                   gr.add_grad(ia, gx.array());
                 });
}

Value layer_norm_rows(Value x, Value gain, Value bias, double eps) {
  Graph* g = shared_graph({x, gain, bias});
  const Tensor& tx = x.tensor();
  require(tx.rank() <= 2, ErrorKind::shape, "layer_norm_rows expects rank <= 2");
  const Index n = tx.cols();
  require(gain.tensor().size() == n && bias.tensor().size() == n, ErrorKind::shape,
          "layer_norm gain/bias must match row width");
  Tensor xhat = Tensor::uninit(tx.shape());
  Tensor inv = Tensor::uninit({tx.rows()});
  for (Index r = 0; r < tx.rows(); ++r) {
    const auto row = tx.matrix().row(r).array();
    const double mu = row.mean();
    const double var = (row - mu).square().mean();
    const double iv = 1.0 / std::sqrt(var + eps);
    inv[r] = iv;
    xhat.matrix().row(r) = ((row - mu) * iv).matrix();
  }
  Tensor out = Tensor::uninit(tx.shape());
  for (Index r = 0; r < tx.rows(); ++r)
    out.matrix().row(r) = (xhat.matrix().row(r).array() * gain.tensor().matrix().row(0).array() +
                           bias.tensor().matrix().row(0).array())
                              .matrix();
  return g->make(
      "layer_norm_rows", std::move(out), {x, gain, bias},
      [ix = x.id, ig = gain.id, ib = bias.id, xhat = std::move(xhat),
       inv = std::move(inv)](Graph& gr, std::int32_t self) {
        const Tensor& go = gr.grad_buffer(self);
        const Index rows = xhat.rows();
        if (gr.wants_grad(ig)) {
          Tensor gxh = Tensor::uninit(xhat.shape());
          gxh.array() = go.array() * xhat.array();
          gr.add_grad_mat(ig, gxh.matrix().colwise().sum());
        }
        if (gr.wants_grad(ib)) gr.add_grad_mat(ib, go.matrix().colwise().sum());
        if (gr.wants_grad(ix)) {
          Tensor gx = Tensor::uninit(xhat.shape());
          const Tensor& gv = gr.val(ig);
          const Index n = xhat.cols();
          for (Index r = 0; r < rows; ++r) {
            double m1 = 0.0, m2 = 0.0;
            for (Index c = 0; c < n; ++c) {
              const double dxh = go.at(r, c) * gv[c];
              m1 += dxh;
              m2 += dxh * xhat.at(r, c);
            }
            m1 /= static_cast<double>(n);
            m2 /= static_cast<double>(n);
            for (Index c = 0; c < n; ++c) {
              const double dxh = go.at(r, c) * gv[c];
              gx.at(r, c) = inv[r] * (dxh - m1 - xhat.at(r, c) * m2);
            }
          }
          gr.add_grad(ix, gx.array());
        }
      });
}

Value embed_rows(Value table, const std::vector<int>& ids) {
  Graph* g = shared_graph({table});
  const Tensor& tt = table.tensor();
  require(tt.rank() == 2, ErrorKind::shape, "embed_rows expects a rank-2 table");
  Tensor out = Tensor::uninit({static_cast<Index>(ids.size()), tt.cols()});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    require(ids[i] >= 0 && ids[i] < tt.rows(), ErrorKind::invalid_argument,
            "embed_rows: index out of range");
    out.matrix().row(static_cast<Index>(i)) = tt.matrix().row(ids[i]);
  }
  return g->make("embed_rows", std::move(out), {table},
                 [it = table.id, ids](Graph& gr, std::int32_t self) {
                   if (!gr.wants_grad(it)) return;
                   const Tensor& go = gr.grad_buffer(self);
                   Tensor& gt = gr.grad_buffer(it);
                   for (std::size_t i = 0; i < ids.size(); ++i)
                     gt.matrix().row(ids[i]) += go.matrix().row(static_cast<Index>(i));
                 });
}

Value slice_rows(Value a, Index start, Index count) {
  Graph* g = shared_graph({a});
  const Tensor& ta = a.tensor();
  require(ta.rank() == 2, ErrorKind::shape, "slice_rows expects rank 2");
  require(start >= 0 && count >= 0 && start + count <= ta.rows(), ErrorKind::invalid_argument,
          "slice_rows out of range");
  Tensor out = Tensor::uninit({count, ta.cols()});
  out.matrix() = ta.matrix().middleRows(start, count);
  return g->make("slice_rows", std::move(out), {a},
                 [ia = a.id, start, count](Graph& gr, std::int32_t self) {
                   if (!gr.wants_grad(ia)) return;
                   gr.grad_buffer(ia).matrix().middleRows(start, count) +=
                       gr.grad_buffer(self).matrix();
                 });
}

Value slice_cols(Value a, Index start, Index count) {
  Graph* g = shared_graph({a});
  const Tensor& ta = a.tensor();
  require(ta.rank() <= 2, ErrorKind::shape, "slice_cols expects rank <= 2");
  require(start >= 0 && count >= 0 && start + count <= ta.cols(), ErrorKind::invalid_argument,
          "slice_cols out of range");
  Shape out_shape = (ta.rank() == 1) ? Shape{count} : Shape{ta.rows(), count};
  Tensor out = Tensor::uninit(out_shape);
  out.matrix() = ta.matrix().middleCols(start, count);
  return g->make("slice_cols", std::move(out), {a},
                 [ia = a.id, start, count](Graph& gr, std::int32_t self) {
                   if (!gr.wants_grad(ia)) return;
                   gr.grad_buffer(ia).matrix().middleCols(start, count) +=
                       gr.grad_buffer(self).matrix();
                 });
}

Value concat_cols(Value a, Value b) {
  Graph* g = shared_graph({a, b});
  const Tensor& ta = a.tensor();
  const Tensor& tb = b.tensor();
  require(ta.rank() <= 2 && tb.rank() <= 2, ErrorKind::shape, "concat_cols expects rank <= 2");
  require(ta.rows() == tb.rows(), ErrorKind::shape,
          "concat_cols row mismatch: " + ta.shape_str() + " vs " + tb.shape_str());
  const Index na = ta.cols();
  const Index nb = tb.cols();
  Shape out_shape = (ta.rank() <= 1 && tb.rank() <= 1) ? Shape{na + nb} : Shape{ta.rows(), na + nb};
  Tensor out = Tensor::uninit(out_shape);
  out.matrix().leftCols(na) = ta.matrix();
  out.matrix().rightCols(nb) = tb.matrix();
  return g->make("concat_cols", std::move(out), {a, b},
                 [ia = a.id, ib = b.id, na, nb](Graph& gr, std::int32_t self) {
                   const Tensor& go = gr.grad_buffer(self);
                   if (gr.wants_grad(ia)) gr.add_grad_mat(ia, go.matrix().leftCols(na));
                   if (gr.wants_grad(ib)) gr.add_grad_mat(ib, go.matrix().rightCols(nb));
                 });
}

// ---- energy primitives ------------------------------------------------------

namespace {

void check_probability_rows(const char* op, const Tensor& t) {
  require(t.size() == 0 || t.array().minCoeff() >= -1e-12, ErrorKind::invalid_argument,
          std::string(op) + ": negative probability entry");
  for (Index r = 0; r < t.rows(); ++r) {
    const double s = t.matrix().row(r).sum();
    require(std::abs(s - 1.0) <= 1e-3, ErrorKind::invalid_argument,
            std::string(op) + ": a row does not sum to 1");
  }
}

}  // namespace

Value categorical_kl(Value p, Value q) {
  Graph* g = shared_graph({p, q});
  const Tensor& tp = p.tensor();
  const Tensor& tq = q.tensor();
  check_same_shape("categorical_kl", tp, tq);
  check_probability_rows("categorical_kl", tp);
  check_probability_rows("categorical_kl", tq);
  const auto pa = tp.array();
  const auto qa = tq.array();
  const double e = (pa * (pa.max(kProbFloor).log() - qa.max(kProbFloor).log())).sum();
  return g->make("categorical_kl", Tensor::scalar(e), {p, q},
                 [ip = p.id, iq = q.id](Graph& gr, std::int32_t self) {
                   const double go = gr.grad_buffer(self).item();
                   const auto pa = gr.val(ip).array();
                   const auto qa = gr.val(iq).array();
                   if (gr.wants_grad(ip))
                     gr.add_grad(ip, go * ((pa.max(kProbFloor).log() - qa.max(kProbFloor).log()) +
                                           (pa > kProbFloor).cast<double>()));
                   if (gr.wants_grad(iq))
                     gr.add_grad(iq, -go * (pa / qa.max(kProbFloor)) *
                                         (qa > kProbFloor).cast<double>());
                 });
}

Value gauss_trainable_energy(Value phi, Value mu, Value sigma) {
  Graph* g = shared_graph({phi, mu, sigma});
  const Tensor& tp = phi.tensor();
  const Tensor& tm = mu.tensor();
  const Tensor& ts = sigma.tensor();
  check_same_shape("gauss_trainable_energy", tp, tm);
  require(ts.size() == tp.cols(), ErrorKind::shape,
          "gauss_trainable_energy: sigma length must equal layer width");
  require(ts.array().minCoeff() > 0.0, ErrorKind::numeric,
          "gauss_trainable_energy: non-positive variance");
  const Index rows = tp.rows();
  const auto sv = ts.matrix().row(0).array();
  double e = static_cast<double>(rows) * 0.5 * sv.log().sum();
  for (Index r = 0; r < rows; ++r) {
    const auto eps = tp.matrix().row(r).array() - tm.matrix().row(r).array();
    e += 0.5 * (eps.square() / sv).sum();
  }
  return g->make(
      "gauss_trainable_energy", Tensor::scalar(e), {phi, mu, sigma},
      [ip = phi.id, im = mu.id, is = sigma.id](Graph& gr, std::int32_t self) {
        const double go = gr.grad_buffer(self).item();
        const Tensor& tp = gr.val(ip);
        const Tensor& tm = gr.val(im);
        const auto sv = gr.val(is).matrix().row(0).array();
        const Index rows = tp.rows();
        Tensor geps = Tensor::uninit(tp.shape());
        for (Index r = 0; r < rows; ++r)
          geps.matrix().row(r) =
              (go * (tp.matrix().row(r).array() - tm.matrix().row(r).array()) / sv).matrix();
        if (gr.wants_grad(ip)) gr.add_grad(ip, geps.array());
        if (gr.wants_grad(im)) gr.add_grad(im, -geps.array());
        if (gr.wants_grad(is)) {
          Eigen::ArrayXd gs = Eigen::ArrayXd::Zero(sv.size());
          for (Index r = 0; r < rows; ++r) {
            const auto eps = tp.matrix().row(r).array() - tm.matrix().row(r).array();
            gs += 0.5 * (1.0 / sv.transpose() - eps.square().transpose() / sv.square().transpose());
          }
          gr.add_grad(is, go * gs);
        }
      });
}

}  // namespace pcnet
