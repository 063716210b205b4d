#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "probekit/tensor.hpp"

namespace probekit {

// 2 |pred ∩ truth| / (|pred| + |truth|) over the salient class.
// Both masks empty gives 1.0; exactly one empty gives 0.0.
double dice_coefficient(const LabelMap& pred, const LabelMap& truth);

// sqrt(mean((pred - truth)^2)) for one depth map.
double rmse(const LabelMap& pred, const LabelMap& truth);

// Per-image standardization to mean 0 and (population) std 1.
// Constant maps become all zeros.
LabelMap normalize_depth(const LabelMap& raw);

struct SampleMetric {
  std::string sample_id;
  double value = 0.0;
  // Set for saliency samples whose ground truth has no salient pixel; such
  // samples are reported but kept out of the aggregate.
  bool excluded = false;

  bool operator==(const SampleMetric&) const = default;
};

struct MetricResult {
  std::optional<double> dice;
  std::optional<double> rmse;
  std::vector<SampleMetric> per_sample;
  std::size_t n_excluded = 0;
};

// Aggregate = mean of non-excluded per-sample values (nullopt if none).
MetricResult aggregate_dice(std::vector<SampleMetric> per_sample);
MetricResult aggregate_rmse(std::vector<SampleMetric> per_sample);

// Median of a non-empty list (mean of the middle pair for even sizes).
double median(std::vector<double> values);

}  // namespace probekit
