#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/optim.hpp"
#include "probekit/probe.hpp"
#include "probekit/tensor.hpp"

namespace probekit {

// Pixel shift; +dx moves content right, +dy moves it down.
struct TranslationSample {
  int dx = 0;
  int dy = 0;
  bool operator==(const TranslationSample&) const = default;
};

// Each component is drawn from U(-120, -90) ∪ U(90, 120) (each interval with
// probability 1/2) and rounded to the nearest pixel. Deterministic per seed.
TranslationSample sample_translation(std::uint64_t seed);

struct MaskTranslation {
  LabelMap mask;
  // True when no salient pixel remains in frame.
  bool empty = false;
};

// Salient pixels shift by t; pixels leaving the frame are dropped and
// vacated pixels become background.
MaskTranslation translate_mask(const LabelMap& mask, TranslationSample t);

// Shifts a depth map by t and fills exposed regions by clamp-to-edge
// replication of the shifted map's border.
LabelMap translate_depth(const LabelMap& depth, TranslationSample t);

struct MaskTarget {
  LabelMap mask;
  TranslationSample translation;
  int attempts = 0;
  // Set when every attempt kept less than kMinRetainedFraction of the salient area.
  bool degenerate = false;
};

inline constexpr double kMinRetainedFraction = 0.05;
inline constexpr int kMaxTranslationAttempts = 10;

// Draws a translated mask, redrawing (up to kMaxTranslationAttempts) while
// less than 5% of the original salient area stays in frame.
MaskTarget draw_mask_target(const LabelMap& mask, std::uint64_t seed);

// Copies the object's depth (pixels where object_mask is salient) from
// source, rescaled by `scale` about the object centroid (nearest neighbour
// for the footprint, bilinear for values), shifted by t, and pastes it over
// scene; depth_offset is then added inside the pasted footprint.
LabelMap insert_object_depth(const LabelMap& scene, const LabelMap& object_mask,
                             const LabelMap& source, TranslationSample t, double depth_offset,
                             double scale);

struct InterventionOptions {
  AdamConfig adam{1e-2, 0.9, 0.999, 1e-8};
  std::size_t iterations = 128;
  double huber_delta = 1.0;
  // Optional L2 clip on the activation gradient; off by default.
  std::optional<double> max_grad_norm;

  bool operator==(const InterventionOptions&) const = default;
};

struct InterventionResult {
  ActivationTensor activation;
  // Target loss before the first update, then after each update.
  std::vector<double> loss_trace;
  bool aborted = false;
};

// Optimizes a copy of act with Adam so the frozen probe's prediction matches
// target: cross-entropy for classifiers (hard or soft target), Huber for
// regressors. The returned tensor carries meta.intervened = true.
InterventionResult intervene_activation(const ActivationTensor& act, const LinearProbe& probe,
                                        const LabelMap& target,
                                        const InterventionOptions& options = {});

struct InterventionEffect {
  double effect = 0.0;
  double null_baseline = 0.0;
};

// effect = metric(modified, output); null_baseline = metric(modified, original).
// The metric is Dice for masks and RMSE for depth maps.
InterventionEffect evaluate_intervention(const LabelMap& modified_label,
                                         const LabelMap& output_label,
                                         const LabelMap& original_label);

struct InterventionSpec {
  ProbeTask task = ProbeTask::classifier;
  std::vector<std::string> layer_policy;
  std::vector<int> step_policy;
  InterventionOptions options;
  std::uint64_t seed = 0;
  // Per-intervention provenance, filled in by the study runner.
  std::string target_sample_id;
  std::optional<TranslationSample> translation;
  int variant = -1;

  bool operator==(const InterventionSpec&) const = default;
};

std::string intervention_spec_to_json(const InterventionSpec& spec);
InterventionSpec intervention_spec_from_json(std::string_view text);

// Saliency: decoder-side self-attention layers, steps 1-5.
// Depth: every available layer, steps 1-3.
// Steps are capped at total_steps; layers are taken from `available`.
InterventionSpec default_intervention_spec(ProbeTask task, const std::vector<std::string>& available,
                                           int total_steps);

}  // namespace probekit
