#include "pcnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <set>

#include "pcnet/engine.hpp"

namespace pcnet {
namespace {

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

std::string fmt3(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

VerifyCheck make_check(std::string name, double tol, double observed, std::string note = "") {
  VerifyCheck c;
  c.name = std::move(name);
  c.tolerance = tol;
  c.observed = observed;
  c.pass = observed <= tol;
  c.note = std::move(note);
  return c;
}

// ---- equivalence -------------------------------------------------------------

void equivalence_energies(Rng& rng, VerifyReport& rep) {
  double worst_e = 0.0, worst_g = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Index rows = 1 + static_cast<Index>(rng.below(3));
    const Index cols = 1 + static_cast<Index>(rng.below(8));
    const Tensor phi = rng.normal_tensor({rows, cols}, 0.0, 2.0);
    const Tensor mu = rng.normal_tensor({rows, cols}, 0.0, 2.0);
    const Tensor ones = Tensor::full({rows, cols}, 1.0);

    Graph gf;
    Value pf = gf.leaf(phi, true), mf = gf.leaf(mu, true);
    Value ef = energy_gaussian_sse(pf, mf);
    gf.backward(ef);

    Graph gk;
    Value pk = gk.leaf(phi, true), mk = gk.leaf(mu, true);
    Value ek = energy_full_gaussian(pk, gk.constant(ones), mk, gk.constant(ones));
    gk.backward(ek);

    worst_e = std::max(worst_e, rel_err(2.0 * ek.item(), ef.item()));
    const Tensor gpf = gf.grad(pf), gmf = gf.grad(mf);
    const Tensor gpk = gk.grad(pk), gmk = gk.grad(mk);
    for (Index i = 0; i < gpf.size(); ++i) {
      worst_g = std::max(worst_g, rel_err(gpf[i], 2.0 * gpk[i]));
      worst_g = std::max(worst_g, rel_err(gmf[i], 2.0 * gmk[i]));
    }
  }
  rep.checks.push_back(make_check(
      "identity-covariance energies: 2 * KL == squared error, 1000 layers", 1e-10, worst_e));
  rep.checks.push_back(make_check(
      "identity-covariance gradients: squared-error grads are twice the KL grads", 1e-9, worst_g,
      "the KL energy carries the 1/2; squared error counts each residual once"));
}

void equivalence_network(Rng& rng, VerifyReport& rep) {
  ClassifierConfig cfg;
  cfg.in = 6;
  cfg.out = 4;
  cfg.hidden = 8;
  cfg.hidden_layers = 2;
  cfg.variant = 1;
  const std::uint64_t s = rng.next_u64();
  Rng r1(s), r2(s);
  auto mf = make_classifier(cfg, Objective::sum_squares, r1);
  auto mkl = make_classifier(cfg, Objective::kl, r2);

  Batch b;
  b.x = rng.uniform_tensor({5, 6}, 0.0, 1.0);
  std::vector<int> labels;
  for (int i = 0; i < 5; ++i) labels.push_back(static_cast<int>(rng.below(4)));
  b.y = one_hot(labels, 4);

  std::vector<Tensor> phis = forward_pass(*mf, b);
  phis.back() = mf->output_target(b);
  for (int t = 0; t < 3; ++t) infer_step(*mkl, phis, b, 0.05, true);

  std::vector<Tensor> gf(static_cast<std::size_t>(mf->store().count()));
  std::vector<Tensor> gk(static_cast<std::size_t>(mkl->store().count()));
  weight_grads(*mf, phis, b, gf);
  weight_grads(*mkl, phis, b, gk);

  double worst = 0.0;
  for (std::size_t pid = 0; pid < gf.size(); ++pid)
    for (Index i = 0; i < gf[pid].size(); ++i)
      worst = std::max(worst, rel_err(gf[pid][i], 2.0 * gk[pid][i]));
  rep.checks.push_back(make_check(
      "full-network weight gradients on a softmax-free chain: factor two, entry-wise", 1e-9,
      worst));
}

void equivalence_trainable(Rng& rng, VerifyReport& rep) {
  double worst_e = 0.0, worst_g = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Index rows = 1 + static_cast<Index>(rng.below(3));
    const Index cols = 1 + static_cast<Index>(rng.below(6));
    const Tensor phi = rng.normal_tensor({rows, cols});
    const Tensor mu0 = rng.normal_tensor({rows, cols});
    const Tensor sig0 = rng.uniform_tensor({1, cols}, 0.4, 2.5);
    const double w = static_cast<double>(rows * cols);

    // KL of a unit-variance activity from a trainable-variance prediction:
    // 0.5 sum((1 + eps^2)/sigma + ln sigma - 1)
    Graph ga;
    Value mua = ga.leaf(mu0, true);
    Value siga = ga.leaf(sig0, true);
    Value sig_rows = matmul(ga.constant(Tensor::full({rows, 1}, 1.0)), siga);
    Value ekl = energy_full_gaussian(ga.constant(phi), ga.constant(Tensor::full({rows, cols}, 1.0)),
                                     mua, sig_rows);
    ga.backward(ekl);

    // trainable-variance energy 0.5 sum(eps'^2 / sigma + ln sigma) evaluated at
    // the shifted residual eps'^2 = eps^2 + 1
    Graph gb;
    Value mub = gb.leaf(mu0, true);
    Value sigb = gb.leaf(sig0, true);
    Value epsb = sub(gb.constant(phi), mub);
    Value shifted = add(mub, sqrt(add_scalar(square(epsb), 1.0)));
    Value etr = energy_gaussian_trainable(shifted, mub, sigb);
    gb.backward(etr);

    worst_e = std::max(worst_e, rel_err(ekl.item(), etr.item() - 0.5 * w));
    const Tensor gm_a = ga.grad(mua), gs_a = ga.grad(siga);
    const Tensor gm_b = gb.grad(mub), gs_b = gb.grad(sigb);
    for (Index i = 0; i < gm_a.size(); ++i) worst_g = std::max(worst_g, rel_err(gm_a[i], gm_b[i]));
    for (Index i = 0; i < gs_a.size(); ++i) worst_g = std::max(worst_g, rel_err(gs_a[i], gs_b[i]));
  }
  rep.checks.push_back(make_check(
      "trainable-variance energy equals unit-source KL plus width/2, 200 layers", 1e-10, worst_e));
  rep.checks.push_back(make_check(
      "trainable-variance mean and variance gradients match the KL form", 1e-9, worst_g));
}

// ---- gradients ----------------------------------------------------------------

using BuildFn = std::function<Value(Graph&, const std::vector<Value>&)>;

double fd_worst(const BuildFn& build, std::vector<Tensor> inputs, double h) {
  Graph g;
  std::vector<Value> leaves;
  for (const Tensor& t : inputs) leaves.push_back(g.leaf(t, true));
  Value e = build(g, leaves);
  g.backward(e);

  auto eval_at = [&](const std::vector<Tensor>& xs) {
    Graph g2;
    std::vector<Value> ls;
    for (const Tensor& t : xs) ls.push_back(g2.leaf(t, false));
    return build(g2, ls).item();
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor ad = g.grad(leaves[k]);
    for (Index i = 0; i < inputs[k].size(); ++i) {
      std::vector<Tensor> xs = inputs;
      const double orig = xs[k][i];
      xs[k][i] = orig + h;
      const double up = eval_at(xs);
      xs[k][i] = orig - h;
      const double dn = eval_at(xs);
      worst = std::max(worst, rel_err(ad[i], (up - dn) / (2.0 * h)));
    }
  }
  return worst;
}

void gradients_suite(Rng& rng, VerifyReport& rep) {
  const double h = 1e-5;
  const Index rows = 2, in = 3, cols = 4;

  double w_sse = 0.0, w_kl = 0.0, w_tr = 0.0, w_cat = 0.0, w_full = 0.0;
  for (int k = 0; k < 100; ++k) {
    const Tensor x = rng.normal_tensor({rows, in});
    const Tensor w = rng.normal_tensor({in, cols}, 0.0, 0.5);
    const Tensor bias = rng.normal_tensor({1, cols}, 0.0, 0.2);
    const Tensor phi = rng.normal_tensor({rows, cols});
    const Tensor sigma = rng.uniform_tensor({cols}, 0.5, 2.0);

    auto lin = [&x](Graph& g, Value wv, Value bv) { return affine(g.constant(x), wv, bv); };

    w_sse = std::max(w_sse, fd_worst(
        [&](Graph& g, const std::vector<Value>& v) {
          return energy_gaussian_sse(v[0], tanh(lin(g, v[1], v[2])));
        },
        {phi, w, bias}, h));
    w_kl = std::max(w_kl, fd_worst(
        [&](Graph& g, const std::vector<Value>& v) {
          return energy_gaussian_kl(v[0], tanh(lin(g, v[1], v[2])));
        },
        {phi, w, bias}, h));
    w_tr = std::max(w_tr, fd_worst(
        [&](Graph& g, const std::vector<Value>& v) {
          return energy_gaussian_trainable(v[0], tanh(lin(g, v[1], v[2])), v[3]);
        },
        {phi, w, bias, sigma}, h));

    Tensor pcat = rng.simplex_tensor({rows, cols});
    for (Index i = 0; i < pcat.size(); ++i)
      pcat[i] = 0.7 * pcat[i] + 0.3 / static_cast<double>(cols);
    w_cat = std::max(w_cat, fd_worst(
        [&](Graph& g, const std::vector<Value>& v) {
          return energy_categorical(v[0], softmax(lin(g, v[1], v[2]), 1));
        },
        {pcat, w, bias}, h));

    const Tensor u = rng.normal_tensor({rows, cols});
    const Tensor s = rng.uniform_tensor({rows, cols}, 0.5, 2.0);
    const Tensor w2 = rng.normal_tensor({in, cols}, 0.0, 0.5);
    w_full = std::max(w_full, fd_worst(
        [&](Graph& g, const std::vector<Value>& v) {
          Value uh = lin(g, v[2], g.constant(Tensor::zeros({1, cols})));
          Value sh = add_scalar(softplus(lin(g, v[3], g.constant(Tensor::zeros({1, cols})))), 0.05);
          return energy_full_gaussian(v[0], v[1], uh, sh);
        },
        {u, s, w, w2}, h));
  }
  rep.checks.push_back(
      make_check("unit-Gaussian squared error vs central differences", 1e-5, w_sse));
  rep.checks.push_back(make_check("unit-Gaussian KL vs central differences", 1e-5, w_kl));
  rep.checks.push_back(make_check("trainable-variance energy vs central differences", 1e-5, w_tr));
  rep.checks.push_back(make_check("categorical KL vs central differences", 1e-5, w_cat));
  rep.checks.push_back(make_check("diagonal-Gaussian KL vs central differences", 1e-5, w_full));
}

// ---- oracles ------------------------------------------------------------------

double kl_gaussian_quadrature(double u, double s, double uh, double sh) {
  // Simpson's rule on p(x) ln(p(x)/q(x)) over +-12 standard deviations
  const double lo = u - 12.0 * std::sqrt(s), hi = u + 12.0 * std::sqrt(s);
  const int n = 40000;
  const double dx = (hi - lo) / n;
  auto f = [&](double x) {
    const double lp = -0.5 * ((x - u) * (x - u) / s) - 0.5 * std::log(2.0 * M_PI * s);
    const double lq = -0.5 * ((x - uh) * (x - uh) / sh) - 0.5 * std::log(2.0 * M_PI * sh);
    return std::exp(lp) * (lp - lq);
  };
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(lo + i * dx) * (i % 2 ? 4.0 : 2.0);
  return acc * dx / 3.0;
}

void oracle_quadrature(VerifyReport& rep) {
  const double cases[5][4] = {{0.0, 1.0, 0.0, 1.0},
                              {1.2, 0.5, -0.4, 2.0},
                              {-2.0, 3.0, 1.0, 0.3},
                              {0.3, 0.05, 0.1, 0.04},
                              {5.0, 1.5, 4.0, 1.0}};
  double worst = 0.0;
  for (const auto& c : cases) {
    const double closed = kl_gaussian_diag(Tensor::scalar(c[0]), Tensor::scalar(c[1]),
                                           Tensor::scalar(c[2]), Tensor::scalar(c[3]));
    worst = std::max(worst, std::abs(closed - kl_gaussian_quadrature(c[0], c[1], c[2], c[3])));
  }
  rep.checks.push_back(
      make_check("closed-form Gaussian KL vs Simpson quadrature, 5 cases", 1e-8, worst));
}

void oracle_mc(Rng& rng, VerifyReport& rep) {
  const int sizes[4] = {1000, 10000, 100000, 1000000};

  auto run = [&](bool gaussian) {
    Rng local = rng.fork(gaussian ? 11 : 12);
    const Tensor u = local.normal_tensor({1, 3});
    const Tensor s = local.uniform_tensor({1, 3}, 0.5, 2.0);
    const Tensor uh = local.normal_tensor({1, 3});
    const Tensor sh = local.uniform_tensor({1, 3}, 0.5, 2.0);
    const Tensor p = local.simplex_tensor({1, 5});
    const Tensor q = local.simplex_tensor({1, 5});
    const double truth = gaussian ? kl_gaussian_diag(u, s, uh, sh) : kl_categorical(p, q);
    const double entropy = gaussian ? entropy_gaussian_diag(s) : entropy_categorical(p);

    std::vector<double> medians;
    for (int n : sizes) {
      std::vector<double> errs;
      for (int seed = 0; seed < 20; ++seed) {
        Rng draw = local.fork(static_cast<std::uint64_t>(100 + seed));
        const double ce = gaussian ? mc_cross_entropy_gaussian(draw, u, s, uh, sh, n)
                                   : mc_cross_entropy_categorical(draw, p, q, n);
        errs.push_back(std::abs(ce - entropy - truth));
      }
      std::nth_element(errs.begin(), errs.begin() + 10, errs.end());
      medians.push_back(errs[10]);
    }
    double worst_ratio = 0.0;
    for (std::size_t i = 1; i < medians.size(); ++i)
      worst_ratio = std::max(worst_ratio, medians[i] / medians[i - 1]);
    return std::pair<double, double>(worst_ratio, medians.back());
  };

  const auto [gr, gfinal] = run(true);
  rep.checks.push_back(make_check(
      "Monte-Carlo Gaussian KL error falls monotonically over N in {1e3..1e6}", 1.0, gr,
      "median of 20 seeds; final median error " + fmt3(gfinal)));
  const auto [cr, cfinal] = run(false);
  rep.checks.push_back(make_check(
      "Monte-Carlo categorical KL error falls monotonically over N in {1e3..1e6}", 1.0, cr,
      "median of 20 seeds; final median error " + fmt3(cfinal)));
}

void oracle_analytic_updates(Rng& rng, VerifyReport& rep) {
  double worst_phi = 0.0, worst_theta = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Index rows = 2, in = 3, cols = 5;
    Tensor p = rng.simplex_tensor({rows, cols});
    for (Index i = 0; i < p.size(); ++i) p[i] = 0.8 * p[i] + 0.2 / static_cast<double>(cols);
    const Tensor x = rng.normal_tensor({rows, in});
    const Tensor w = rng.normal_tensor({in, cols}, 0.0, 0.5);

    Graph g;
    Value pv = g.leaf(p, true);
    Value wv = g.leaf(w, true);
    Value mu = softmax(matmul(g.constant(x), wv), 1);
    Value e = energy_categorical(pv, mu);
    g.backward(e);

    const Tensor mu_t = mu.tensor();
    const Tensor gp = g.grad(pv);
    for (Index r = 0; r < rows; ++r)
      for (Index c = 0; c < cols; ++c) {
        const double analytic = std::log(p.at(r, c) / mu_t.at(r, c)) + 1.0;
        worst_phi = std::max(worst_phi, rel_err(gp.at(r, c), analytic));
      }

    // d e / d w = x^T (mu - p), the softmax-Jacobian form
    const Tensor gw = g.grad(wv);
    for (Index i = 0; i < in; ++i)
      for (Index c = 0; c < cols; ++c) {
        double analytic = 0.0;
        for (Index r = 0; r < rows; ++r) analytic += x.at(r, i) * (mu_t.at(r, c) - p.at(r, c));
        worst_theta = std::max(worst_theta, rel_err(gw.at(i, c), analytic));
      }
  }
  rep.checks.push_back(make_check(
      "categorical activity gradient equals ln(phi/mu) + 1", 1e-8, worst_phi,
      "no constant-term discrepancy: reverse mode reproduces the analytic form exactly"));
  rep.checks.push_back(
      make_check("categorical weight gradient equals x^T (mu - phi)", 1e-8, worst_theta));

  double worst_full = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Index rows = 2, cols = 4;
    const Tensor u = rng.normal_tensor({rows, cols});
    const Tensor s = rng.uniform_tensor({rows, cols}, 0.4, 2.5);
    const Tensor uh = rng.normal_tensor({rows, cols});
    const Tensor sh = rng.uniform_tensor({rows, cols}, 0.4, 2.5);

    Graph g;
    Value uv = g.leaf(u, true), sv = g.leaf(s, true);
    Value uhv = g.leaf(uh, true), shv = g.leaf(sh, true);
    g.backward(energy_full_gaussian(uv, sv, uhv, shv));

    const Tensor gu = g.grad(uv), gs = g.grad(sv), guh = g.grad(uhv), gsh = g.grad(shv);
    for (Index i = 0; i < u.size(); ++i) {
      const double du = (u[i] - uh[i]) / sh[i];
      const double ds = 0.5 * (1.0 / sh[i] - 1.0 / s[i]);
      const double duh = (uh[i] - u[i]) / sh[i];
      const double dsh =
          0.5 * (1.0 / sh[i] - (s[i] + (u[i] - uh[i]) * (u[i] - uh[i])) / (sh[i] * sh[i]));
      worst_full = std::max(worst_full, rel_err(gu[i], du));
      worst_full = std::max(worst_full, rel_err(gs[i], ds));
      worst_full = std::max(worst_full, rel_err(guh[i], duh));
      worst_full = std::max(worst_full, rel_err(gsh[i], dsh));
    }
  }
  rep.checks.push_back(make_check(
      "diagonal-Gaussian mean/variance gradients match the analytic update forms", 1e-8,
      worst_full));
}

// ---- locality -------------------------------------------------------------------

struct NodeGrads {
  std::vector<Tensor> phi;    // empty when the backward pass never reached it
  std::vector<Tensor> theta;  // likewise, indexed like the parameter store
};

NodeGrads grads_of(Model& m, const std::vector<Tensor>& phis, const Batch& group,
                   const std::set<Index>& roots) {
  Graph g;
  Bind bind(g, m.store(), true);
  std::vector<Value> phiv;
  for (const Tensor& t : phis) phiv.push_back(g.leaf(t, true));
  std::vector<Value> mus, terms;
  for (Index i = 0; i < m.node_count(); ++i) mus.push_back(m.build_mu(i, g, bind, group, phiv));
  for (Index i = 0; i < m.node_count(); ++i)
    terms.push_back(m.build_energy(i, g, bind, phiv[static_cast<std::size_t>(i)],
                                   mus[static_cast<std::size_t>(i)]));
  Value total;
  for (Index i : roots) {
    Value t = terms[static_cast<std::size_t>(i)];
    total = total.valid() ? add(total, t) : t;
  }
  g.backward(total);

  NodeGrads out;
  for (Index l = 0; l < m.node_count(); ++l) {
    Value v = phiv[static_cast<std::size_t>(l)];
    out.phi.push_back(g.grad_touched(v) ? g.grad(v) : Tensor{});
  }
  for (Index pid = 0; pid < m.store().count(); ++pid) {
    const std::int32_t id = bind.bound_id(pid);
    Value v{&g, id};
    out.theta.push_back(id >= 0 && g.grad_touched(v) ? g.grad(v) : Tensor{});
  }
  return out;
}

// Energies allowed to read phi_l. Chains: the node's own energy and the next
// prediction. The language model adds the attention output's residual and
// value reads of the embedding activity. The reparameterized vae under non-KL
// modes adds the first decoder's variance read of the last encoder activity.
std::set<Index> expected_phi_readers(const std::string& arch, Objective mode, Index l, Index n,
                                     Index bottleneck) {
  std::set<Index> readers{l};
  if (l + 1 < n) readers.insert(l + 1);
  if (arch == "lm" && l == 0) readers.insert(2);
  if (arch == "vae" && mode != Objective::kl && l == bottleneck - 1 && bottleneck + 1 < n)
    readers.insert(bottleneck + 1);
  return readers;
}

void locality_case(VerifyReport& rep, const std::string& arch, Objective mode, Model& m,
                   Batch batch, Rng& rng, Index bottleneck) {
  if (m.noise_width() > 0) batch.noise = rng.normal_tensor({batch.items(), m.noise_width()});
  const Batch group = m.groups(batch).front();

  std::vector<Tensor> phis = forward_pass(m, group);
  phis.back() = m.output_target(group);
  for (int t = 0; t < 2; ++t) infer_step(m, phis, group, 0.01, true);

  const Index n = m.node_count();
  std::vector<NodeGrads> single;
  for (Index i = 0; i < n; ++i) single.push_back(grads_of(m, phis, group, {i}));
  std::set<Index> all;
  for (Index i = 0; i < n; ++i) all.insert(i);
  const NodeGrads full = grads_of(m, phis, group, all);

  double worst = 0.0;
  std::string violation;

  // activity locality: the set of energies whose backward pass reaches phi_l
  // must be exactly the expected readers, and the full gradient must equal the
  // sum over those energies alone
  for (Index l = 0; l + 1 < n; ++l) {
    std::set<Index> touched;
    for (Index i = 0; i < n; ++i)
      if (!single[static_cast<std::size_t>(i)].phi[static_cast<std::size_t>(l)].empty())
        touched.insert(i);
    const std::set<Index> expected = expected_phi_readers(arch, mode, l, n, bottleneck);
    if (touched != expected && violation.empty())
      violation = "activity " + std::to_string(l) + " is read by an unexpected energy";
    Tensor acc = Tensor::zeros(phis[static_cast<std::size_t>(l)].shape());
    for (Index i : touched)
      acc.array() += single[static_cast<std::size_t>(i)].phi[static_cast<std::size_t>(l)].array();
    const Tensor& gfull = full.phi[static_cast<std::size_t>(l)];
    for (Index i = 0; i < acc.size(); ++i) worst = std::max(worst, rel_err(acc[i], gfull[i]));
  }

  // weight locality: every parameter belongs to exactly one energy, except the
  // reparameterization head that the non-KL vae reads from two places
  for (Index pid = 0; pid < m.store().count(); ++pid) {
    std::set<Index> touched;
    for (Index i = 0; i < n; ++i)
      if (!single[static_cast<std::size_t>(i)].theta[static_cast<std::size_t>(pid)].empty())
        touched.insert(i);
    if (touched.empty()) continue;
    const std::string& name = m.store().at(pid).name;
    const bool reparam_head = arch == "vae" && mode != Objective::kl &&
                              (name == "latent.w" || name == "latent.b");
    const std::size_t allowed = reparam_head ? 2 : 1;
    if (touched.size() != allowed && violation.empty())
      violation =
          "parameter " + name + " is read by " + std::to_string(touched.size()) + " energies";
    Tensor acc = Tensor::zeros(m.store().at(pid).value.shape());
    for (Index i : touched)
      acc.array() +=
          single[static_cast<std::size_t>(i)].theta[static_cast<std::size_t>(pid)].array();
    const Tensor& gfull = full.theta[static_cast<std::size_t>(pid)];
    for (Index i = 0; i < acc.size(); ++i) worst = std::max(worst, rel_err(acc[i], gfull[i]));
  }

  VerifyCheck c = make_check(arch + " / " + std::string(objective_name(mode)) + " locality",
                             1e-12, worst, violation);
  if (!violation.empty()) c.pass = false;
  rep.checks.push_back(std::move(c));
}

void locality_suite(Rng& rng, VerifyReport& rep) {
  auto classify_batch = [&](Index in, Index out) {
    Batch b;
    b.x = rng.uniform_tensor({3, in}, 0.0, 1.0);
    std::vector<int> labels;
    for (int i = 0; i < 3; ++i) labels.push_back(static_cast<int>(rng.below(out)));
    b.y = one_hot(labels, out);
    return b;
  };

  const std::vector<std::pair<int, Objective>> classifier_cases = {
      {1, Objective::sum_squares}, {1, Objective::trainable_variance}, {1, Objective::kl},
      {2, Objective::sum_squares}, {2, Objective::kl},                 {3, Objective::kl}};
  for (const auto& [variant, mode] : classifier_cases) {
    ClassifierConfig c;
    c.in = 6;
    c.out = 4;
    c.hidden = 7;
    c.hidden_layers = 2;
    c.variant = variant;
    Rng init =
        rng.fork(static_cast<std::uint64_t>(variant * 10) + static_cast<std::uint64_t>(mode));
    auto m = make_classifier(c, mode, init);
    locality_case(rep, "classifier-m" + std::to_string(variant), mode, *m, classify_batch(6, 4),
                  rng, -1);
  }

  for (Objective mode : {Objective::sum_squares, Objective::trainable_variance, Objective::kl}) {
    VaeConfig c;
    c.in = 8;
    c.hidden = 6;
    c.latent = 2;
    c.enc_layers = 2;
    c.dec_layers = 2;
    Rng init = rng.fork(40 + static_cast<std::uint64_t>(mode));
    auto m = make_vae(c, mode, init);
    Batch b;
    b.x = rng.uniform_tensor({3, 8}, 0.0, 1.0);
    locality_case(rep, "vae", mode, *m, b, rng, c.enc_layers);
  }

  for (Objective mode : {Objective::sum_squares, Objective::kl}) {
    LmConfig c;
    c.vocab = 7;
    c.d_model = 8;
    c.d_ff = 10;
    c.max_len = 6;
    Rng init = rng.fork(60 + static_cast<std::uint64_t>(mode));
    auto m = make_lm(c, mode, init);
    Batch b;
    b.seqs = {{1, 4, 5, 6, 2}};
    locality_case(rep, "lm", mode, *m, b, rng, -1);
  }
}

}  // namespace

bool VerifyReport::all_pass() const {
  for (const VerifyCheck& c : checks)
    if (!c.pass) return false;
  return true;
}

VerifyReport verify_equivalence(std::uint64_t seed) {
  VerifyReport rep;
  rep.suite = "equivalence";
  Rng rng(seed);
  equivalence_energies(rng, rep);
  equivalence_network(rng, rep);
  equivalence_trainable(rng, rep);
  return rep;
}

VerifyReport verify_gradients(std::uint64_t seed) {
  VerifyReport rep;
  rep.suite = "gradients";
  Rng rng(seed);
  gradients_suite(rng, rep);
  return rep;
}

VerifyReport verify_oracles(std::uint64_t seed) {
  VerifyReport rep;
  rep.suite = "oracles";
  Rng rng(seed);
  oracle_quadrature(rep);
  oracle_analytic_updates(rng, rep);
  oracle_mc(rng, rep);
  return rep;
}

VerifyReport verify_locality(std::uint64_t seed) {
  VerifyReport rep;
  rep.suite = "locality";
  Rng rng(seed);
  locality_suite(rng, rep);
  return rep;
}

VerifyReport run_suite(const std::string& name, std::uint64_t seed) {
  if (name == "equivalence") return verify_equivalence(seed);
  if (name == "gradients") return verify_gradients(seed);
  if (name == "oracles") return verify_oracles(seed);
  if (name == "locality") return verify_locality(seed);
  fail(ErrorKind::config,
       "unknown suite " + name + "; valid: gradients, equivalence, oracles, locality");
}

void print_report(const VerifyReport& r, std::ostream& os) {
  for (const VerifyCheck& c : r.checks) {
    os << (c.pass ? "  pass  " : "  FAIL  ") << c.name << "  observed " << c.observed
       << "  tolerance " << c.tolerance;
    if (!c.note.empty()) os << "  [" << c.note << "]";
    os << '\n';
  }
  os << "suite " << r.suite << ": " << (r.all_pass() ? "PASS" : "FAIL") << " (" << r.checks.size()
     << " checks)" << std::endl;
}

}  // namespace pcnet
