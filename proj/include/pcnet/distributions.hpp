#pragma once

#include "pcnet/graph.hpp"
#include "pcnet/rng.hpp"

namespace pcnet {

/// Layer activity distribution families. Which family a layer gets depends on
/// the objective: the squared-error objective treats every layer as a unit
/// Gaussian; the KL objective matches each layer's natural family (probability
/// rows after a softmax, mean/variance pairs at a stochastic bottleneck,
/// Gaussians elsewhere).
enum class Family {
  gaussian_unit,
  gaussian_trainable,
  categorical,
  full_gaussian,
};

const char* family_name(Family f);

// ---- graph energy builders ----------------------------------------------
// Each returns a scalar Value: the layer energy summed over batch rows.

/// Squared residual sum: |phi - mu|^2 (no half; the squared-error objective
/// counts each residual once).
Value energy_gaussian_sse(Value phi, Value mu);
/// KL between unit Gaussians with the given means: 0.5 |phi - mu|^2.
Value energy_gaussian_kl(Value phi, Value mu);
/// 0.5 (eps^2 / sigma + ln sigma) with a learnable per-column variance.
Value energy_gaussian_trainable(Value phi, Value mu, Value sigma);
/// Row-wise KL between discrete distributions.
Value energy_categorical(Value phi, Value mu);
/// Row-wise KL between diagonal Gaussians given as (mean, variance) pairs:
/// 0.5 sum((s + (u - uh)^2) / sh + ln(sh / s) - 1).
Value energy_full_gaussian(Value u, Value s, Value uh, Value sh);

// ---- closed forms ----------------------------------------------------------

double kl_gaussian_diag(const Tensor& u, const Tensor& s, const Tensor& uh, const Tensor& sh);
double kl_categorical(const Tensor& p, const Tensor& q);
/// Differential entropy of a diagonal Gaussian: 0.5 sum ln(2 pi e s).
double entropy_gaussian_diag(const Tensor& s);
/// Shannon entropy -sum p ln p (natural log).
double entropy_categorical(const Tensor& p);

// ---- sampling and Monte Carlo ----------------------------------------------

Tensor sample_gaussian_diag(Rng& rng, const Tensor& u, const Tensor& s);
Index sample_categorical(Rng& rng, const Tensor& p);

/// Estimates the cross entropy -E_p[ln q] by drawing n samples from p and
/// averaging exact log densities of q. Subtracting the entropy of p recovers
/// KL(p || q), which is how the self-check suite cross-validates the closed
/// forms.
double mc_cross_entropy_gaussian(Rng& rng, const Tensor& u, const Tensor& s, const Tensor& uh,
                                 const Tensor& sh, int n);
double mc_cross_entropy_categorical(Rng& rng, const Tensor& p, const Tensor& q, int n);

// ---- constraint projections -------------------------------------------------
// Inference moves activities by unconstrained gradient steps; these pull the
// result back into the family's domain afterwards.

/// Euclidean projection of each row onto the probability simplex (shift by a
/// uniform offset, clip at zero). Uniform components of a gradient step are
/// absorbed by the shift, so only coordinate differences move the result.
/// When a mask is given, masked entries are forced to zero and the remaining
/// entries are projected onto the simplex of the unmasked coordinates.
void project_rows_to_simplex(Tensor& t, const Tensor* mask = nullptr);
/// Clamp the given column range to at least kVarFloor.
void floor_columns(Tensor& t, Index start_col, Index count, double floor = kVarFloor);

}  // namespace pcnet
