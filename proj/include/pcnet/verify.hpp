#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace pcnet {

// One property check: an observed worst-case error against a pinned bound.
struct VerifyCheck {
  std::string name;
  double tolerance = 0.0;
  double observed = 0.0;
  bool pass = false;
  std::string note;
};

struct VerifyReport {
  std::string suite;
  std::vector<VerifyCheck> checks;
  bool all_pass() const;
};

// Squared-error vs KL energies on identity-covariance Gaussians: the energies
// and every gradient differ by exactly a factor of two; the trainable-variance
// energy reduces to the KL one up to a constant shift.
VerifyReport verify_equivalence(std::uint64_t seed);

// Central finite differences against reverse-mode gradients for every layer
// energy family, through both the activity and a weight matrix behind the
// prediction.
VerifyReport verify_gradients(std::uint64_t seed);

// Closed-form KL against numeric quadrature, Monte-Carlo cross-entropy
// convergence, and the analytic softmax/Gaussian update forms.
VerifyReport verify_oracles(std::uint64_t seed);

// Activity gradients touch only a node's own and its readers' energies, and
// weight gradients only the owning node's energy, across all architectures
// and their legal objectives.
VerifyReport verify_locality(std::uint64_t seed);

VerifyReport run_suite(const std::string& name, std::uint64_t seed);

void print_report(const VerifyReport& r, std::ostream& os);

}  // namespace pcnet
