#pragma once

#include "probekit/tensor.hpp"

namespace probekit {

// Probabilities are clamped to this value before taking the log.
inline constexpr double kProbEpsilon = 1e-12;

struct LossResult {
  double loss = 0.0;
  RealTensor grad;
};

// Softmax over the channel axis, per pixel.
RealTensor softmax_channels(const RealTensor& logits);

// Mean over pixels of -sum_k q_k log p_k, where q is the one-hot target of a
// saliency_mask or the soft distribution of a saliency_logits label.
// grad is taken w.r.t. the pre-softmax logits: (p - q) / num_pixels.
LossResult cross_entropy_loss(const RealTensor& probs, const LabelMap& target);
LossResult cross_entropy_loss(const LabelMap& probs, const LabelMap& target);

// Mean over pixels of 0.5 r^2 (|r| <= delta) or delta (|r| - delta / 2),
// r = pred - target; grad w.r.t. pred.
LossResult huber_loss(const RealTensor& pred, const LabelMap& target, double delta);
LossResult huber_loss(const LabelMap& pred, const LabelMap& target, double delta);

// mean|forward x-difference| + mean|forward y-difference| of a single-channel
// map. Subgradient 0 at exact zero differences.
LossResult smoothness_loss(const RealTensor& pred);
LossResult smoothness_loss(const LabelMap& pred);

}  // namespace probekit
