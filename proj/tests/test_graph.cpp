#include "pcnet/graph.hpp"

#include <cmath>
#include <functional>
#include <vector>

#include "doctest.h"
#include "pcnet/rng.hpp"

using namespace pcnet;

namespace {

// Independent matmul oracle: plain triple loop, no Eigen involved.
Tensor matmul_oracle(const Tensor& a, const Tensor& b) {
  Tensor out = Tensor::zeros({a.rows(), b.cols()});
  for (Index i = 0; i < a.rows(); ++i)
    for (Index k = 0; k < a.cols(); ++k)
      for (Index j = 0; j < b.cols(); ++j) out.at(i, j) += a.at(i, k) * b.at(k, j);
  return out;
}

using BuildFn = std::function<Value(Graph&, const std::vector<Value>&)>;

double eval_scalar(const BuildFn& build, const std::vector<Tensor>& xs) {
  Graph g;
  std::vector<Value> vs;
  vs.reserve(xs.size());
  for (const Tensor& t : xs) vs.push_back(g.leaf(t, true));
  return build(g, vs).item();
}

// Checks every component of every leaf gradient against a central finite
// difference. Returns the worst relative error seen.
double check_grads(const BuildFn& build, const std::vector<Tensor>& xs, double tol = 2e-6,
                   double h = 1e-5) {
  Graph g;
  std::vector<Value> vs;
  for (const Tensor& t : xs) vs.push_back(g.leaf(t, true));
  Value root = build(g, vs);
  g.backward(root);

  double worst = 0.0;
  for (std::size_t which = 0; which < xs.size(); ++which) {
    const Tensor& ad = g.grad(vs[which]);
    for (Index i = 0; i < xs[which].size(); ++i) {
      std::vector<Tensor> plus = xs;
      std::vector<Tensor> minus = xs;
      plus[which][i] += h;
      minus[which][i] -= h;
      const double fd = (eval_scalar(build, plus) - eval_scalar(build, minus)) / (2.0 * h);
      const double err = std::abs(ad[i] - fd) / std::max({1.0, std::abs(ad[i]), std::abs(fd)});
      CHECK_MESSAGE(err <= tol, "leaf ", which, " component ", i, ": autodiff ", ad[i],
                    " vs finite difference ", fd);
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("matmul matches triple-loop oracle") {
  Rng r(11);
  Tensor a = r.normal_tensor({7, 5});
  Tensor b = r.normal_tensor({5, 6});
  Graph g;
  Value va = g.constant(a);
  Value vb = g.constant(b);
  Tensor got = matmul(va, vb).tensor();
  Tensor want = matmul_oracle(a, b);
  for (Index i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("matmul by identity is exact") {
  Rng r(3);
  Tensor a = r.normal_tensor({4, 4});
  Tensor eye = Tensor::zeros({4, 4});
  for (Index i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
  Graph g;
  Tensor got = matmul(g.constant(a), g.constant(eye)).tensor();
  for (Index i = 0; i < 16; ++i) CHECK(got[i] == a[i]);
}

TEST_CASE("pointwise op fixed values") {
  Graph g;
  CHECK(tanh(g.scalar(0.0)).item() == 0.0);
  CHECK(hardtanh(g.scalar(2.5)).item() == 1.0);
  CHECK(hardtanh(g.scalar(-2.5)).item() == -1.0);
  CHECK(hardtanh(g.scalar(0.3)).item() == 0.3);
  CHECK(ln(exp(g.scalar(1.3))).item() == doctest::Approx(1.3).epsilon(1e-12));
  CHECK(sigmoid(g.scalar(0.0)).item() == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(relu(g.scalar(-2.0)).item() == 0.0);
  CHECK(softplus(g.scalar(0.0)).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(clamp_min(g.scalar(0.4), 1.0).item() == 1.0);
  CHECK(sqrt(g.scalar(2.25)).item() == 1.5);
}

TEST_CASE("sum of squares gradient is 2x") {
  Graph g;
  Value x = g.leaf(Tensor::from({1.0, 2.0, 3.0}), true);
  Value e = sum(square(x));
  CHECK(e.item() == 14.0);
  g.backward(e);
  const Tensor& gx = g.grad(x);
  CHECK(gx[0] == 2.0);
  CHECK(gx[1] == 4.0);
  CHECK(gx[2] == 6.0);
}

TEST_CASE("backward with constant-only root leaves leaf grads zero") {
  Graph g;
  Value x = g.leaf(Tensor::from({1.0, 2.0}), true);
  Value c = sum(square(g.constant(Tensor::from({3.0, 4.0}))));
  g.backward(c);
  CHECK_FALSE(g.grad_touched(x));
  const Tensor& gx = g.grad(x);
  CHECK(gx[0] == 0.0);
  CHECK(gx[1] == 0.0);
}

TEST_CASE("backward touches reachable leaves and only those") {
  Graph g;
  Value a = g.leaf(Tensor::from({1.0, 2.0}), true);
  Value b = g.leaf(Tensor::from({3.0, 4.0}), true);
  Value root = sum(square(a));
  g.backward(root);
  CHECK(g.grad_touched(a));
  CHECK_FALSE(g.grad_touched(b));
}

TEST_CASE("gradients: linear algebra compositions") {
  Rng r(21);
  check_grads(
      [](Graph&, const std::vector<Value>& v) { return sum(square(matmul(v[0], v[1]))); },
      {r.normal_tensor({3, 4}), r.normal_tensor({4, 2})});
  check_grads(
      [](Graph&, const std::vector<Value>& v) { return sum(mul(transpose(v[0]), v[1])); },
      {r.normal_tensor({3, 4}), r.normal_tensor({4, 3})});
  check_grads(
      [](Graph&, const std::vector<Value>& v) { return sum(tanh(affine(v[0], v[1], v[2]))); },
      {r.normal_tensor({5, 3}), r.normal_tensor({3, 4}), r.normal_tensor({4})});
}

TEST_CASE("gradients: pointwise compositions") {
  Rng r(22);
  check_grads(
      [](Graph&, const std::vector<Value>& v) {
        return mean(mul(sigmoid(v[0]), add(v[1], exp(mul_scalar(v[0], 0.3)))));
      },
      {r.normal_tensor({4, 3}), r.normal_tensor({4, 3})});
  check_grads(
      [](Graph&, const std::vector<Value>& v) {
        return sum(div(sub(v[0], neg(v[1])), add_scalar(square(v[1]), 1.5)));
      },
      {r.normal_tensor({6}), r.normal_tensor({6})});
  check_grads(
      [](Graph&, const std::vector<Value>& v) {
        return sum(mul(sqrt(add_scalar(square(v[0]), 0.5)), softplus(v[1])));
      },
      {r.normal_tensor({3, 3}), r.normal_tensor({3, 3})});
  check_grads(
      [](Graph&, const std::vector<Value>& v) { return sum(ln(add_scalar(softplus(v[0]), 0.1))); },
      {r.normal_tensor({5})});
}

TEST_CASE("gradients: kinked ops away from their kinks") {
  Tensor a = Tensor::from({-1.7, -0.6, 0.4, 1.9, 0.8, -0.2});
  Tensor b = Tensor::from({0.5, -1.2, 2.0, 0.1, -0.7, 1.1});
  check_grads([](Graph&, const std::vector<Value>& v) { return sum(square(relu(v[0]))); }, {a});
  check_grads([](Graph&, const std::vector<Value>& v) { return sum(mul(hardtanh(v[0]), v[1])); },
              {a, b});
  check_grads([](Graph&, const std::vector<Value>& v) { return sum(square(clamp_min(v[0], 0.0))); },
              {a});
}

TEST_CASE("gradients: softmax both axes") {
  Rng r(23);
  Tensor c = r.normal_tensor({4, 5});
  check_grads(
      [&](Graph& g, const std::vector<Value>& v) {
        return sum(mul(softmax(v[0], 1), g.constant(c)));
      },
      {r.normal_tensor({4, 5})});
  check_grads(
      [&](Graph& g, const std::vector<Value>& v) {
        return sum(mul(softmax(v[0], 0), g.constant(c)));
      },
      {r.normal_tensor({4, 5})});
  // softmax rows sum to one
  Graph g;
  Tensor y = softmax(g.constant(r.normal_tensor({6, 9})), 1).tensor();
  for (Index i = 0; i < y.rows(); ++i)
    CHECK(y.matrix().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("masked softmax zeroes masked entries and their gradients") {
  Rng r(24);
  Tensor logits = r.normal_tensor({4, 4});
  Tensor mask = Tensor::zeros({4, 4});
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j <= i; ++j) mask.at(i, j) = 1.0;  // causal pattern
  Tensor c = r.normal_tensor({4, 4});

  Graph g;
  Value x = g.leaf(logits, true);
  Value y = masked_softmax_rows(x, mask);
  const Tensor& ty = y.tensor();
  for (Index i = 0; i < 4; ++i) {
    double total = 0.0;
    for (Index j = 0; j < 4; ++j) {
      if (j > i) CHECK(ty.at(i, j) == 0.0);
      total += ty.at(i, j);
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
  g.backward(sum(mul(y, g.constant(c))));
  const Tensor& gx = g.grad(x);
  for (Index i = 0; i < 4; ++i)
    for (Index j = i + 1; j < 4; ++j) CHECK(gx.at(i, j) == 0.0);

  check_grads(
      [&](Graph& gg, const std::vector<Value>& v) {
        return sum(mul(masked_softmax_rows(v[0], mask), gg.constant(c)));
      },
      {logits});
}

TEST_CASE("masked softmax rejects a fully masked row") {
  Graph g;
  Tensor mask = Tensor::zeros({2, 3});
  mask.at(0, 0) = 1.0;
  CHECK_THROWS_AS(masked_softmax_rows(g.constant(Tensor::zeros({2, 3})), mask), Error);
}

TEST_CASE("gradients: layer norm") {
  Rng r(25);
  check_grads(
      [](Graph&, const std::vector<Value>& v) {
        return sum(square(layer_norm_rows(v[0], v[1], v[2])));
      },
      {r.normal_tensor({4, 6}), r.normal_tensor({6}), r.normal_tensor({6})}, 5e-6);

  // normalized rows have mean ~0 and unit variance before gain/bias
  Graph g;
  Tensor ones = Tensor::full({6}, 1.0);
  Tensor zeros = Tensor::zeros({6});
  Tensor y =
      layer_norm_rows(g.constant(r.normal_tensor({3, 6})), g.constant(ones), g.constant(zeros))
          .tensor();
  for (Index i = 0; i < y.rows(); ++i) {
    CHECK(y.matrix().row(i).mean() == doctest::Approx(0.0).epsilon(1e-10));
    const double var = (y.matrix().row(i).array() - y.matrix().row(i).mean()).square().mean();
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));  // eps shifts it slightly
  }
}

TEST_CASE("gradients: embedding gather with repeated rows") {
  Rng r(26);
  std::vector<int> ids{2, 0, 1, 2};
  check_grads(
      [&](Graph&, const std::vector<Value>& v) { return sum(square(embed_rows(v[0], ids))); },
      {r.normal_tensor({5, 3})});

  Graph g;
  CHECK_THROWS_AS(embed_rows(g.constant(Tensor::zeros({5, 3})), {7}), Error);
}

TEST_CASE("gradients: row and column slices") {
  Rng r(27);
  check_grads(
      [](Graph&, const std::vector<Value>& v) {
        Value top = slice_rows(v[0], 0, 2);
        Value bottom = slice_rows(v[0], 2, 2);
        return sum(mul(top, bottom)) + sum(square(slice_cols(v[0], 1, 2)));
      },
      {r.normal_tensor({4, 4})});
}

TEST_CASE("gradients: categorical KL on interior simplex points") {
  Rng r(28);
  Tensor p = r.simplex_tensor({3, 5});
  Tensor q = r.simplex_tensor({3, 5});
  // keep probes interior so finite differences stay inside the valid domain
  p.array() = (p.array() + 0.05) / (1.0 + 0.25);
  q.array() = (q.array() + 0.05) / (1.0 + 0.25);
  check_grads([](Graph&, const std::vector<Value>& v) { return categorical_kl(v[0], v[1]); },
              {p, q}, 5e-6, 1e-6);

  // KL(p || p) == 0
  Graph g;
  CHECK(categorical_kl(g.constant(p), g.constant(p)).item() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("categorical KL treats jointly masked entries as absent") {
  Tensor p = Tensor::from({2, 4}, {0.3, 0.7, 0.0, 0.0, 0.5, 0.5, 0.0, 0.0});
  Tensor q = Tensor::from({2, 4}, {0.4, 0.6, 0.0, 0.0, 0.25, 0.75, 0.0, 0.0});
  Graph g;
  Value vp = g.leaf(p, true);
  Value vq = g.leaf(q, true);
  Value e = categorical_kl(vp, vq);

  double want = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) want += p[i] * std::log(p[i] / q[i]);
  CHECK(e.item() == doctest::Approx(want).epsilon(1e-14));

  g.backward(e);
  const Tensor& gp = g.grad(vp);
  const Tensor& gq = g.grad(vq);
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0 && q[i] == 0.0) {
      CHECK(gp[i] == 0.0);
      CHECK(gq[i] == 0.0);
    }
  }
}

TEST_CASE("categorical KL rejects non-probability input") {
  Graph g;
  Tensor bad = Tensor::from({2, 2}, {0.3, 0.3, 0.5, 0.5});
  Tensor ok = Tensor::from({2, 2}, {0.5, 0.5, 0.5, 0.5});
  CHECK_THROWS_AS(categorical_kl(g.constant(bad), g.constant(ok)), Error);
  Tensor neg = Tensor::from({2, 2}, {1.2, -0.2, 0.5, 0.5});
  CHECK_THROWS_AS(categorical_kl(g.constant(neg), g.constant(ok)), Error);
}

TEST_CASE("gradients: diagonal Gaussian energy with trainable variance") {
  Rng r(29);
  Tensor phi = r.normal_tensor({4, 3});
  Tensor mu = r.normal_tensor({4, 3});
  Tensor sigma = Tensor::from({0.5, 1.2, 2.0});
  check_grads(
      [](Graph&, const std::vector<Value>& v) {
        return gauss_trainable_energy(v[0], v[1], v[2]);
      },
      {phi, mu, sigma});

  // value matches a direct loop
  double want = 0.0;
  for (Index i = 0; i < 4; ++i)
    for (Index j = 0; j < 3; ++j) {
      const double eps = phi.at(i, j) - mu.at(i, j);
      want += 0.5 * (eps * eps / sigma[j] + std::log(sigma[j]));
    }
  Graph g;
  CHECK(gauss_trainable_energy(g.constant(phi), g.constant(mu), g.constant(sigma)).item() ==
        doctest::Approx(want).epsilon(1e-12));

  Tensor bad = Tensor::from({0.5, -1.0, 2.0});
  CHECK_THROWS_AS(
      gauss_trainable_energy(g.constant(phi), g.constant(mu), g.constant(bad)), Error);
}

TEST_CASE("graph error paths") {
  Graph g1, g2;
  Value a = g1.constant(Tensor::from({1.0, 2.0}));
  Value b = g2.constant(Tensor::from({1.0, 2.0}));
  CHECK_THROWS_AS(add(a, b), Error);

  Value c = g1.constant(Tensor::from({1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(add(a, c), Error);

  CHECK_THROWS_AS(div(a, g1.constant(Tensor::from({1.0, 0.0}))), Error);
  CHECK_THROWS_AS(ln(g1.constant(Tensor::from({1.0, -1.0}))), Error);
  CHECK_THROWS_AS(g1.backward(a), Error);  // non-scalar root

  Value d = g1.leaf(Tensor::from({4.0, 5.0}), true);
  Value root = sum(square(d));
  g1.backward(root);
  CHECK_THROWS_AS((void)g1.grad(a), Error);  // non-differentiable node
}

TEST_CASE("gradients: deep composite expression") {
  Rng r(30);
  check_grads(
      [](Graph&, const std::vector<Value>& v) {
        Value h = tanh(affine(v[0], v[1], v[2]));
        Value o = affine(h, v[3], v[4]);
        return mul_scalar(sum(square(sub(o, v[5]))), 0.5);
      },
      {r.normal_tensor({4, 5}), r.normal_tensor({5, 6}), r.normal_tensor({6}),
       r.normal_tensor({6, 2}), r.normal_tensor({2}), r.normal_tensor({4, 2})},
      5e-6);
}
