#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/metrics.hpp"
#include "probekit/tensor.hpp"

namespace probekit {

// classifier: 2 outputs (background, salient) followed by softmax.
// regressor: 1 output (relative depth).
enum class ProbeTask { classifier, regressor };

std::string_view to_string(ProbeTask task);
// "saliency" for classifiers, "depth" for regressors.
std::string_view task_name(ProbeTask task);
// Accepts classifier/regressor and saliency/depth.
ProbeTask probe_task_from_string(std::string_view s);
// Label kind a probe of this task is trained against.
LabelKind target_kind(ProbeTask task);

// Per-pixel linear map from c activation channels to k outputs, bound to a
// single (layer, step) cell. weights is c x k row-major.
struct LinearProbe {
  ProbeTask task = ProbeTask::classifier;
  std::string layer_id;
  int step = 1;
  std::size_t channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t outputs() const { return task == ProbeTask::classifier ? 2 : 1; }
  double weight(std::size_t c, std::size_t k) const { return weights[c * outputs() + k]; }

  static LinearProbe zeros(ProbeTask task, std::string layer_id, int step, std::size_t channels);
  // Throws ValidationError if sizes disagree with task/channels or values are non-finite.
  void validate() const;

  bool operator==(const LinearProbe&) const = default;
};

struct TrainConfig {
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double huber_delta = 1.0;
  double smoothness_weight = 0.0;
  std::uint64_t seed = 0;
  // false trains W only, exactly as in y = W x.
  bool use_bias = true;
  // Only full-image steps are supported.
  std::string batch = "full_image";

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

std::string train_config_to_json(const TrainConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(std::string_view text);

// Native-resolution projection x W + b, h x w x k.
RealTensor project(const LinearProbe& probe, const RealTensor& act);

struct ClassifierOutput {
  LabelMap probabilities;  // saliency_logits: post-softmax (background, salient)
  LabelMap mask;           // argmax, ties go to background
};

ClassifierOutput probe_forward_classifier(const LinearProbe& probe, const ActivationTensor& act,
                                          std::size_t out_h = kLabelSize,
                                          std::size_t out_w = kLabelSize);
LabelMap probe_forward_regressor(const LinearProbe& probe, const ActivationTensor& act,
                                 std::size_t out_h = kLabelSize, std::size_t out_w = kLabelSize);

// Hard mask from a 2-channel probability tensor; ties go to background.
LabelMap mask_from_probabilities(const RealTensor& probs, std::string sample_id);

struct ObjectiveOptions {
  double huber_delta = 1.0;
  double smoothness_weight = 0.0;
  bool param_grad = true;
  bool act_grad = false;
};

struct ObjectiveResult {
  double loss = 0.0;
  std::vector<double> weight_grad;  // c x k
  std::vector<double> bias_grad;    // k
  RealTensor act_grad;              // h x w x c, only if requested
};

// Task loss of the probe at the target's resolution: cross-entropy after
// upsample + softmax (classifier) or Huber + weighted smoothness after upsample
// (regressor). Gradients flow back through upsample_adjoint.
ObjectiveResult probe_objective(const LinearProbe& probe, const RealTensor& act,
                                const LabelMap& target, const ObjectiveOptions& options);

struct TrainResult {
  LinearProbe probe;
  std::vector<double> loss_history;  // mean loss per epoch
};

// Trains one probe on one (layer, step) cell. Labels are matched to
// activations by sample_id. Deterministic given cfg.seed.
TrainResult train_probe(const std::vector<ActivationTensor>& acts,
                        const std::vector<LabelMap>& labels, ProbeTask task,
                        const TrainConfig& cfg);

// Dice (classifier) or RMSE (regressor) per sample at each label's resolution.
MetricResult evaluate_probe(const LinearProbe& probe, const std::vector<ActivationTensor>& acts,
                            const std::vector<LabelMap>& labels);

// Prediction in label space: hard mask (classifier) or depth map (regressor).
LabelMap predict_label(const LinearProbe& probe, const ActivationTensor& act, std::size_t out_h,
                       std::size_t out_w);

// Checkpoint: dump container of kind "probe", dims (c + 1, k, 1), payload W
// then bias. Weights are stored as real32.
void save_probe(const LinearProbe& probe, const TrainConfig& cfg,
                const std::filesystem::path& path);

struct LoadedProbe {
  LinearProbe probe;
  TrainConfig config;
};
LoadedProbe load_probe(const std::filesystem::path& path);

}  // namespace probekit
