#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace probekit {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  bool operator==(const AdamConfig&) const = default;
};

// Moment estimates for plain Adam (no weight decay, no AMSGrad).
struct AdamState {
  AdamConfig config;
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  AdamState(std::size_t n, AdamConfig cfg) : config(cfg), m(n, 0.0), v(n, 0.0) {}
};

// One Adam update of params in place:
//   t += 1; m = b1 m + (1 - b1) g; v = b2 v + (1 - b2) g^2
//   params -= lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
// Throws ArgumentError on size mismatch, NumericError on non-finite grads.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

// Rescales grads in place so their L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<double> grads, double max_norm);

struct FiniteDiffOptions {
  // 0 checks every coordinate; otherwise a seed-deterministic sample.
  std::size_t max_coords = 0;
  std::uint64_t seed = 0;
};

// Central-difference gradient check. Returns the max over checked
// coordinates of |fd - g| / max(1, |fd|, |g|).
double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> x, std::span<const double> analytic_grad,
                         double h, FiniteDiffOptions options = {});

}  // namespace probekit
