#include "probekit/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "probekit/errors.hpp"
#include "probekit/rng.hpp"

namespace probekit {

void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ArgumentError("adam_step: params, grads and state sizes differ");
  }
  for (double g : grads) {
    if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
  }
  const auto& cfg = state.config;
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.eps);
  }
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  const double norm =
      std::sqrt(std::inner_product(grads.begin(), grads.end(), grads.begin(), 0.0));
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (double& g : grads) g *= scale;
  }
  return norm;
}

double finite_diff_check(const std::function<double(std::span<const double>)>& f,
                         std::span<const double> x, std::span<const double> analytic_grad,
                         double h, FiniteDiffOptions options) {
  if (x.size() != analytic_grad.size()) {
    throw ArgumentError("finite_diff_check: x and gradient sizes differ");
  }
  if (!(h > 0.0)) throw ArgumentError("finite_diff_check: h must be positive");

  std::vector<std::size_t> coords(x.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coords > 0 && options.max_coords < coords.size()) {
    // Partial Fisher-Yates: the first max_coords entries form the sample.
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.max_coords; ++i) {
      const auto j = i + static_cast<std::size_t>(rng.below(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(options.max_coords);
  }

  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double orig = probe[i];
    probe[i] = orig + h;
    const double up = f(probe);
    probe[i] = orig - h;
    const double down = f(probe);
    probe[i] = orig;
    const double fd = (up - down) / (2.0 * h);
    const double g = analytic_grad[i];
    const double err = std::abs(fd - g) / std::max({1.0, std::abs(fd), std::abs(g)});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace probekit
