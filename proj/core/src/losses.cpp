#include "probekit/losses.hpp"

#include <algorithm>
#include <cmath>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

void require_same_pixels(const RealTensor& pred, const LabelMap& target, const char* op) {
  if (pred.height != target.height() || pred.width != target.width()) {
    throw ArgumentError(std::string(op) + ": prediction is " + std::to_string(pred.height) + "x" +
                        std::to_string(pred.width) + ", target is " +
                        std::to_string(target.height()) + "x" + std::to_string(target.width()));
  }
}

double sign(double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); }

}  // namespace

RealTensor softmax_channels(const RealTensor& logits) {
  RealTensor out(logits.height, logits.width, logits.channels);
  const std::size_t k = logits.channels;
  const std::size_t n = logits.height * logits.width;
  for (std::size_t p = 0; p < n; ++p) {
    const double* l = &logits.data[p * k];
    double* o = &out.data[p * k];
    const double mx = *std::max_element(l, l + k);
    double z = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      o[c] = std::exp(l[c] - mx);
      z += o[c];
    }
    for (std::size_t c = 0; c < k; ++c) o[c] /= z;
  }
  return out;
}

LossResult cross_entropy_loss(const RealTensor& probs, const LabelMap& target) {
  require_same_pixels(probs, target, "cross_entropy_loss");
  if (probs.channels != 2) throw ArgumentError("cross_entropy_loss: expected 2 channels");
  if (target.kind() == LabelKind::depth_map) {
    throw ArgumentError("cross_entropy_loss: target must be a saliency label");
  }
  const bool soft = target.kind() == LabelKind::saliency_logits;
  const std::size_t n = probs.height * probs.width;
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto t = target.data();

  LossResult out{0.0, RealTensor(probs.height, probs.width, 2)};
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    double q0;
    double q1;
    if (soft) {
      q0 = t[2 * p];
      q1 = t[2 * p + 1];
    } else {
      q1 = t[p];
      q0 = 1.0 - q1;
    }
    const double p0 = probs.data[2 * p];
    const double p1 = probs.data[2 * p + 1];
    if (q0 != 0.0) total -= q0 * std::log(std::max(p0, kProbEpsilon));
    if (q1 != 0.0) total -= q1 * std::log(std::max(p1, kProbEpsilon));
    out.grad.data[2 * p] = (p0 - q0) * inv_n;
    out.grad.data[2 * p + 1] = (p1 - q1) * inv_n;
  }
  out.loss = total * inv_n;
  return out;
}

LossResult cross_entropy_loss(const LabelMap& probs, const LabelMap& target) {
  if (probs.kind() != LabelKind::saliency_logits) {
    throw ArgumentError("cross_entropy_loss: probs must be a saliency_logits label");
  }
  return cross_entropy_loss(probs.to_real(), target);
}

LossResult huber_loss(const RealTensor& pred, const LabelMap& target, double delta) {
  require_same_pixels(pred, target, "huber_loss");
  if (pred.channels != 1 || target.channels() != 1) {
    throw ArgumentError("huber_loss: expected single-channel maps");
  }
  if (!(delta > 0.0)) throw ArgumentError("huber_loss: delta must be positive");
  const std::size_t n = pred.data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const auto t = target.data();
  LossResult out{0.0, RealTensor(pred.height, pred.width, 1)};
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double r = pred.data[p] - static_cast<double>(t[p]);
    const double a = std::abs(r);
    if (a <= delta) {
      total += 0.5 * r * r;
      out.grad.data[p] = r * inv_n;
    } else {
      total += delta * (a - 0.5 * delta);
      out.grad.data[p] = delta * sign(r) * inv_n;
    }
  }
  out.loss = total * inv_n;
  return out;
}

LossResult huber_loss(const LabelMap& pred, const LabelMap& target, double delta) {
  return huber_loss(pred.to_real(), target, delta);
}

LossResult smoothness_loss(const RealTensor& pred) {
  if (pred.channels != 1) throw ArgumentError("smoothness_loss: expected a single-channel map");
  const std::size_t h = pred.height;
  const std::size_t w = pred.width;
  LossResult out{0.0, RealTensor(h, w, 1)};
  auto& g = out.grad.data;
  const auto& d = pred.data;

  if (w > 1) {
    const double inv = 1.0 / static_cast<double>(h * (w - 1));
    double sum = 0.0;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c + 1 < w; ++c) {
        const double diff = d[r * w + c + 1] - d[r * w + c];
        sum += std::abs(diff);
        const double s = sign(diff) * inv;
        g[r * w + c + 1] += s;
        g[r * w + c] -= s;
      }
    }
    out.loss += sum * inv;
  }
  if (h > 1) {
    const double inv = 1.0 / static_cast<double>((h - 1) * w);
    double sum = 0.0;
    for (std::size_t r = 0; r + 1 < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double diff = d[(r + 1) * w + c] - d[r * w + c];
        sum += std::abs(diff);
        const double s = sign(diff) * inv;
        g[(r + 1) * w + c] += s;
        g[r * w + c] -= s;
      }
    }
    out.loss += sum * inv;
  }
  return out;
}

LossResult smoothness_loss(const LabelMap& pred) {
  if (pred.kind() != LabelKind::depth_map) {
    throw ArgumentError("smoothness_loss: expected a depth_map");
  }
  return smoothness_loss(pred.to_real());
}

}  // namespace probekit
