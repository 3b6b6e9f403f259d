#include "pcnet/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace pcnet {

const char* family_name(Family f) {
  switch (f) {
    case Family::gaussian_unit: return "gaussian";
    case Family::gaussian_trainable: return "gaussian-trainable";
    case Family::categorical: return "categorical";
    case Family::full_gaussian: return "full-gaussian";
  }
  return "?";
}

Value energy_gaussian_sse(Value phi, Value mu) { return sum(square(sub(phi, mu))); }

Value energy_gaussian_kl(Value phi, Value mu) {
  return mul_scalar(sum(square(sub(phi, mu))), 0.5);
}

Value energy_gaussian_trainable(Value phi, Value mu, Value sigma) {
  return gauss_trainable_energy(phi, mu, sigma);
}

Value energy_categorical(Value phi, Value mu) { return categorical_kl(phi, mu); }

Value energy_full_gaussian(Value u, Value s, Value uh, Value sh) {
  require(s.tensor().array().minCoeff() > 0.0, ErrorKind::numeric,
          "full-gaussian energy: non-positive source variance");
  require(sh.tensor().array().minCoeff() > 0.0, ErrorKind::numeric,
          "full-gaussian energy: non-positive predicted variance");
  Value ratio = div(add(s, square(sub(u, uh))), sh);
  Value logs = ln(div(sh, s));
  Value tot = sum(add(ratio, logs));
  const double numel = static_cast<double>(u.tensor().size());
  return mul_scalar(add_scalar(tot, -numel), 0.5);
}

double kl_gaussian_diag(const Tensor& u, const Tensor& s, const Tensor& uh, const Tensor& sh) {
  require(u.same_shape(uh) && s.same_shape(sh) && u.same_shape(s), ErrorKind::shape,
          "kl_gaussian_diag: mismatched shapes");
  double kl = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    require(s[i] > 0.0 && sh[i] > 0.0, ErrorKind::numeric, "kl_gaussian_diag: variance <= 0");
    const double d = u[i] - uh[i];
    kl += 0.5 * ((s[i] + d * d) / sh[i] + std::log(sh[i] / s[i]) - 1.0);
  }
  return kl;
}

double kl_categorical(const Tensor& p, const Tensor& q) {
  require(p.same_shape(q), ErrorKind::shape, "kl_categorical: mismatched shapes");
  double kl = 0.0;
  for (Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    kl += p[i] * std::log(std::max(p[i], kProbFloor) / std::max(q[i], kProbFloor));
  }
  return kl;
}

double entropy_gaussian_diag(const Tensor& s) {
  double h = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    require(s[i] > 0.0, ErrorKind::numeric, "entropy_gaussian_diag: variance <= 0");
    h += 0.5 * std::log(2.0 * M_PI * M_E * s[i]);
  }
  return h;
}

double entropy_categorical(const Tensor& p) {
  double h = 0.0;
  for (Index i = 0; i < p.size(); ++i)
    if (p[i] > 0.0) h -= p[i] * std::log(p[i]);
  return h;
}

Tensor sample_gaussian_diag(Rng& rng, const Tensor& u, const Tensor& s) {
  require(u.same_shape(s), ErrorKind::shape, "sample_gaussian_diag: mismatched shapes");
  Tensor out = Tensor::uninit(u.shape());
  for (Index i = 0; i < u.size(); ++i) {
    require(s[i] > 0.0, ErrorKind::numeric, "sample_gaussian_diag: variance <= 0");
    out[i] = u[i] + std::sqrt(s[i]) * rng.normal();
  }
  return out;
}

Index sample_categorical(Rng& rng, const Tensor& p) { return rng.categorical(p.array()); }

double mc_cross_entropy_gaussian(Rng& rng, const Tensor& u, const Tensor& s, const Tensor& uh,
                                 const Tensor& sh, int n) {
  require(n > 0, ErrorKind::invalid_argument, "mc_cross_entropy_gaussian: n must be positive");
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const Tensor z = sample_gaussian_diag(rng, u, s);
    double logq = 0.0;
    for (Index i = 0; i < z.size(); ++i) {
      const double d = z[i] - uh[i];
      logq += -0.5 * std::log(2.0 * M_PI * sh[i]) - d * d / (2.0 * sh[i]);
    }
    acc += logq;
  }
  return -acc / n;
}

double mc_cross_entropy_categorical(Rng& rng, const Tensor& p, const Tensor& q, int n) {
  require(n > 0, ErrorKind::invalid_argument, "mc_cross_entropy_categorical: n must be positive");
  double acc = 0.0;
  for (int k = 0; k < n; ++k) {
    const Index i = sample_categorical(rng, p);
    require(q[i] > 0.0, ErrorKind::numeric,
            "mc_cross_entropy_categorical: sampled outcome has zero density under q");
    acc += std::log(q[i]);
  }
  return -acc / n;
}

void project_rows_to_simplex(Tensor& t, const Tensor* mask) {
  if (mask != nullptr)
    require(t.same_shape(*mask), ErrorKind::shape, "simplex projection: mask shape mismatch");
  const Index rows = t.rows();
  const Index cols = t.cols();
  std::vector<double> sorted;
  for (Index r = 0; r < rows; ++r) {
    sorted.clear();
    for (Index c = 0; c < cols; ++c) {
      if (mask != nullptr && mask->at(r, c) == 0.0)
        t.at(r, c) = 0.0;
      else
        sorted.push_back(t.at(r, c));
    }
    require(!sorted.empty(), ErrorKind::invalid_argument, "simplex projection: fully masked row");
    // Water-filling: shift the live entries by the largest uniform offset tau
    // that keeps the positive part summing to one, then clip. A uniform
    // component in an update is absorbed entirely by tau, so gradient steps
    // only move the projected point through their coordinate differences.
    std::sort(sorted.begin(), sorted.end(), std::greater<double>());
    double cum = 0.0, tau = sorted.front() - 1.0;
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      cum += sorted[j];
      const double cand = (cum - 1.0) / static_cast<double>(j + 1);
      if (sorted[j] > cand) tau = cand;
    }
    for (Index c = 0; c < cols; ++c) {
      if (mask != nullptr && mask->at(r, c) == 0.0) continue;
      t.at(r, c) = std::max(t.at(r, c) - tau, 0.0);
    }
  }
}

void floor_columns(Tensor& t, Index start_col, Index count, double floor) {
  for (Index r = 0; r < t.rows(); ++r)
    for (Index c = start_col; c < start_col + count; ++c)
      t.at(r, c) = std::max(t.at(r, c), floor);
}

}  // namespace pcnet
