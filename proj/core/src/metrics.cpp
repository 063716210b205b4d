#include "probekit/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

void require_same_dims(const LabelMap& a, const LabelMap& b, const char* op) {
  if (a.height() != b.height() || a.width() != b.width() || a.channels() != b.channels()) {
    throw ArgumentError(std::string(op) + ": label dimensions differ");
  }
}

std::optional<double> mean_of_included(const std::vector<SampleMetric>& v, std::size_t& excluded) {
  double sum = 0.0;
  std::size_t n = 0;
  excluded = 0;
  for (const auto& s : v) {
    if (s.excluded) {
      ++excluded;
      continue;
    }
    sum += s.value;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

}  // namespace

double dice_coefficient(const LabelMap& pred, const LabelMap& truth) {
  if (pred.kind() != LabelKind::saliency_mask || truth.kind() != LabelKind::saliency_mask) {
    throw ArgumentError("dice_coefficient: both inputs must be binary saliency masks");
  }
  require_same_dims(pred, truth, "dice_coefficient");
  const auto a = pred.data();
  const auto b = truth.data();
  std::size_t inter = 0;
  std::size_t na = 0;
  std::size_t nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] == 1.0f;
    const bool y = b[i] == 1.0f;
    na += x;
    nb += y;
    inter += x && y;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

double rmse(const LabelMap& pred, const LabelMap& truth) {
  require_same_dims(pred, truth, "rmse");
  const auto a = pred.data();
  const auto b = truth.data();
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(a.size()));
}

LabelMap normalize_depth(const LabelMap& raw) {
  if (raw.kind() != LabelKind::depth_map) throw ArgumentError("normalize_depth: expected depth_map");
  const auto d = raw.data();
  const double n = static_cast<double>(d.size());
  double mean = 0.0;
  for (float v : d) mean += v;
  mean /= n;
  double var = 0.0;
  for (float v : d) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);

  std::vector<float> out(d.size(), 0.0f);
  if (sd > 0.0) {
    for (std::size_t i = 0; i < d.size(); ++i) {
      out[i] = static_cast<float>((static_cast<double>(d[i]) - mean) / sd);
    }
  }
  return LabelMap(LabelKind::depth_map, raw.height(), raw.width(), std::move(out), raw.sample_id());
}

MetricResult aggregate_dice(std::vector<SampleMetric> per_sample) {
  MetricResult r;
  r.dice = mean_of_included(per_sample, r.n_excluded);
  r.per_sample = std::move(per_sample);
  return r;
}

MetricResult aggregate_rmse(std::vector<SampleMetric> per_sample) {
  MetricResult r;
  r.rmse = mean_of_included(per_sample, r.n_excluded);
  r.per_sample = std::move(per_sample);
  return r;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ArgumentError("median of empty list");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid), values.end());
  const double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  const double lo = *std::max_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

}  // namespace probekit
