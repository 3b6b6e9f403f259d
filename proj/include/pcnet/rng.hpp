#pragma once

#include "pcnet/tensor.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace pcnet {

/// Seeded random source. All sampling in the project goes through this type so
/// that runs are reproducible bit-for-bit; never use a shared global generator.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (no libstdc++ distribution, which is
  /// implementation-defined and would tie reproducibility to the runtime).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t v = gen_();
    while (v >= limit) v = gen_();
    return v % n;
  }

  /// Index drawn from an unnormalized nonnegative weight vector.
  Index categorical(ConstArrMap weights) {
    double total = weights.sum();
    double r = uniform() * total;
    double acc = 0.0;
    for (Index i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (r < acc) return i;
    }
    return weights.size() - 1;  // r == total under rounding
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<Index> permutation(Index n) {
    std::vector<Index> p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), Index{0});
    shuffle(p);
    return p;
  }

  Tensor normal_tensor(Shape shape, double mean = 0.0, double stddev = 1.0) {
    Tensor t = Tensor::uninit(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = normal(mean, stddev);
    return t;
  }

  Tensor uniform_tensor(Shape shape, double lo, double hi) {
    Tensor t = Tensor::uninit(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = uniform(lo, hi);
    return t;
  }

  /// Random point on the probability simplex (normalized exponentials).
  Tensor simplex_tensor(Shape shape) {
    Tensor t = Tensor::uninit(std::move(shape));
    for (Index i = 0; i < t.size(); ++i) t[i] = -std::log(1.0 - uniform());
    Index w = t.cols();
    for (Index r = 0; r < t.rows(); ++r) {
      double s = 0.0;
      for (Index c = 0; c < w; ++c) s += t.at(r, c);
      for (Index c = 0; c < w; ++c) t.at(r, c) /= s;
    }
    return t;
  }

  /// Derive an independent stream (e.g. one per lane or per epoch).
  Rng fork(std::uint64_t salt) {
    return Rng(gen_() ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pcnet
