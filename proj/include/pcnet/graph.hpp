#pragma once

#include "pcnet/tensor.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace pcnet {

// Floors shared by the energy primitives.
inline constexpr double kProbFloor = 1e-12;
inline constexpr double kVarFloor = 1e-6;

class Graph;

/// Handle to a node on a Graph tape. Cheap to copy; invalidated by clear().
struct Value {
  Graph* g = nullptr;
  std::int32_t id = -1;

  bool valid() const { return g != nullptr && id >= 0; }
  const Tensor& tensor() const;
  const Shape& shape() const;
  double item() const { return tensor().item(); }
};

/// Reverse-mode tape. Records primitive operations as they execute; backward()
/// walks the tape once and accumulates gradients into differentiable leaves.
/// A Graph lives for one evaluation (one inference step or one weight step)
/// and is cleared or discarded afterwards. Single-threaded by design;
/// concurrent lanes each own a Graph.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, std::int32_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Value leaf(Tensor t, bool differentiable = false);
  Value constant(Tensor t) { return leaf(std::move(t), false); }
  Value scalar(double v) { return leaf(Tensor::scalar(v), false); }

  /// Record a computed node. `ins` are same-graph inputs; `back` may be empty
  /// for nodes that never propagate (e.g. all inputs constant).
  Value make(const char* op, Tensor out, std::initializer_list<Value> ins, BackwardFn back);

  /// Accumulates d(root)/d(leaf) for every differentiable leaf reachable from
  /// `root`, which must hold a scalar.
  void backward(Value root);

  const Tensor& value(Value v) const { return node(v.id).value; }
  /// Gradient of the last backward() root w.r.t. `v`. For a differentiable
  /// node the tape never reached, returns zeros of the node's shape.
  const Tensor& grad(Value v);
  bool grad_touched(Value v) const { return !node(v.id).grad.empty(); }

  bool wants_grad(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }
  const Tensor& val(std::int32_t id) const { return nodes_[static_cast<std::size_t>(id)].value; }

  /// Adds a flat-array expression into a node's gradient buffer.
  template <class E>
  void add_grad(std::int32_t id, const E& expr) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    n.grad.array() += expr;
  }

  /// Same, for 2-d matrix expressions.
  template <class E>
  void add_grad_mat(std::int32_t id, const E& expr) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.needs_grad) return;
    if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
    n.grad.matrix().noalias() += expr;
  }

  Tensor& grad_buffer(std::int32_t id);

  std::size_t node_count() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;  // empty until touched by backward
    bool diff = false;
    bool needs_grad = false;
    BackwardFn back;
  };

  const Node& node(std::int32_t id) const;
  Node& node(std::int32_t id);

  std::vector<Node> nodes_;
};

inline const Tensor& Value::tensor() const { return g->value(*this); }
inline const Shape& Value::shape() const { return tensor().shape(); }

// ---- primitive operations -------------------------------------------------
// All free functions record onto the inputs' graph and check output finiteness.

Value matmul(Value a, Value b);
Value transpose(Value a);
/// x[m,k] * w[k,n] + row-broadcast bias[n].
Value affine(Value x, Value w, Value b);

Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value div(Value a, Value b);
Value neg(Value a);
Value add_scalar(Value a, double s);
Value mul_scalar(Value a, double s);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator*(Value a, Value b) { return mul(a, b); }
inline Value operator/(Value a, Value b) { return div(a, b); }
inline Value operator+(Value a, double s) { return add_scalar(a, s); }
inline Value operator-(Value a, double s) { return add_scalar(a, -s); }
inline Value operator*(Value a, double s) { return mul_scalar(a, s); }
inline Value operator*(double s, Value a) { return mul_scalar(a, s); }
inline Value operator-(Value a) { return neg(a); }

Value tanh(Value a);
Value hardtanh(Value a);
Value sigmoid(Value a);
Value relu(Value a);
Value ln(Value a);
Value exp(Value a);
Value square(Value a);
Value sqrt(Value a);
Value softplus(Value a);
Value clamp_min(Value a, double lo);

Value sum(Value a);
Value mean(Value a);

/// Numerically stable softmax along `axis` (rank-1: axis 0; rank-2: 0 or 1).
Value softmax(Value a, int axis);
/// Row-wise softmax over entries where mask != 0; masked outputs are exactly 0.
Value masked_softmax_rows(Value logits, const Tensor& mask);
/// Per-row normalization: gain * (x - mean) / sqrt(var + eps) + bias.
Value layer_norm_rows(Value x, Value gain, Value bias, double eps = 1e-5);
/// Gathers table rows by index: out.row(i) = table.row(ids[i]).
Value embed_rows(Value table, const std::vector<int>& ids);
Value slice_rows(Value a, Index start, Index count);
Value slice_cols(Value a, Index start, Index count);
Value concat_cols(Value a, Value b);

/// Sum over rows of KL(p_row || q_row) for discrete distributions.
/// Probabilities are floored at kProbFloor inside the logarithms; entries with
/// p == q == 0 (masked positions) contribute zero value and zero gradient.
Value categorical_kl(Value p, Value q);
/// 0.5 * sum over rows of ((phi-mu)^2 / sigma + ln sigma), sigma a positive
/// per-column vector (learnable diagonal variance).
Value gauss_trainable_energy(Value phi, Value mu, Value sigma);

}  // namespace pcnet
