#include "probekit/tensor.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "probekit/errors.hpp"

namespace probekit {

namespace {

constexpr std::array<std::pair<ModelTag, std::string_view>, 5> kModelTags{{
    {ModelTag::trained, "trained"},
    {ModelTag::randomized, "randomized"},
    {ModelTag::vae, "vae"},
    {ModelTag::conv, "conv"},
    {ModelTag::synthetic, "synthetic"},
}};

constexpr std::array<std::pair<LabelKind, std::string_view>, 3> kLabelKinds{{
    {LabelKind::saliency_mask, "saliency_mask"},
    {LabelKind::depth_map, "depth_map"},
    {LabelKind::saliency_logits, "saliency_logits"},
}};

bool all_finite(std::span<const float> v) {
  for (float x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

}  // namespace

std::string_view to_string(ModelTag tag) {
  for (const auto& [t, name] : kModelTags) {
    if (t == tag) return name;
  }
  return "unknown";
}

std::string_view to_string(LabelKind kind) {
  for (const auto& [k, name] : kLabelKinds) {
    if (k == kind) return name;
  }
  return "unknown";
}

ModelTag model_tag_from_string(std::string_view s) {
  for (const auto& [t, name] : kModelTags) {
    if (name == s) return t;
  }
  throw ValidationError("unknown model_tag '" + std::string(s) + "'");
}

LabelKind label_kind_from_string(std::string_view s) {
  for (const auto& [k, name] : kLabelKinds) {
    if (name == s) return k;
  }
  throw ValidationError("unknown label kind '" + std::string(s) + "'");
}

ActivationTensor::ActivationTensor(Shape shape, std::vector<float> data, DumpMeta meta)
    : shape_(shape), data_(std::move(data)), meta_(std::move(meta)) {
  if (shape_.height < 1 || shape_.width < 1 || shape_.channels < 1) {
    throw ValidationError("activation dims must be >= 1");
  }
  if (data_.size() != shape_.size()) {
    throw ValidationError("activation payload has " + std::to_string(data_.size()) +
                          " values, expected " + std::to_string(shape_.size()));
  }
  if (meta_.total_steps < 1 || meta_.step < 1 || meta_.step > meta_.total_steps) {
    throw ValidationError("step " + std::to_string(meta_.step) + " outside 1.." +
                          std::to_string(meta_.total_steps));
  }
  if (!all_finite(data_)) throw ValidationError("activation contains non-finite values");
}

RealTensor ActivationTensor::to_real() const {
  RealTensor out(shape_.height, shape_.width, shape_.channels);
  for (std::size_t i = 0; i < data_.size(); ++i) out.data[i] = data_[i];
  return out;
}

LabelMap::LabelMap(LabelKind kind, std::size_t height, std::size_t width,
                   std::vector<float> data, std::string sample_id)
    : kind_(kind), height_(height), width_(width), data_(std::move(data)),
      sample_id_(std::move(sample_id)) {
  if (height_ < 1 || width_ < 1) throw ValidationError("label dims must be >= 1");
  if (data_.size() != height_ * width_ * channels()) {
    throw ValidationError("label payload has " + std::to_string(data_.size()) +
                          " values, expected " + std::to_string(height_ * width_ * channels()));
  }
  if (!all_finite(data_)) throw ValidationError("label contains non-finite values");
  if (kind_ == LabelKind::saliency_mask) {
    for (float v : data_) {
      if (v != 0.0f && v != 1.0f) throw ValidationError("saliency mask values must be 0 or 1");
    }
  }
}

std::size_t LabelMap::count_salient() const {
  std::size_t n = 0;
  for (float v : data_) n += v == 1.0f ? 1 : 0;
  return n;
}

RealTensor LabelMap::to_real() const {
  RealTensor out(height_, width_, channels());
  for (std::size_t i = 0; i < data_.size(); ++i) out.data[i] = data_[i];
  return out;
}

LabelMap label_from_real(LabelKind kind, const RealTensor& t, std::string sample_id) {
  std::vector<float> data(t.data.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(t.data[i]);
  return LabelMap(kind, t.height, t.width, std::move(data), std::move(sample_id));
}

}  // namespace probekit
