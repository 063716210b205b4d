#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace probekit {

// Default spatial resolution of labels and probe outputs.
inline constexpr std::size_t kLabelSize = 512;

enum class ModelTag { trained, randomized, vae, conv, synthetic };

enum class LabelKind { saliency_mask, depth_map, saliency_logits };

std::string_view to_string(ModelTag tag);
std::string_view to_string(LabelKind kind);
ModelTag model_tag_from_string(std::string_view s);
LabelKind label_kind_from_string(std::string_view s);

struct Shape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const { return height * width * channels; }
  std::size_t pixels() const { return height * width; }
  bool operator==(const Shape&) const = default;
};

// Dense h x w x k real64 working buffer, row-major with channel innermost.
// Used for intermediate results where accumulation precision matters.
struct RealTensor {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> data;

  RealTensor() = default;
  RealTensor(std::size_t h, std::size_t w, std::size_t k, double fill = 0.0)
      : height(h), width(w), channels(k), data(h * w * k, fill) {}

  Shape shape() const { return {height, width, channels}; }
  std::size_t size() const { return data.size(); }

  double& at(std::size_t r, std::size_t c, std::size_t k) {
    return data[(r * width + c) * channels + k];
  }
  double at(std::size_t r, std::size_t c, std::size_t k) const {
    return data[(r * width + c) * channels + k];
  }
};

struct DumpMeta {
  std::string sample_id;
  std::string layer_id;
  int step = 1;
  ModelTag model_tag = ModelTag::trained;
  int total_steps = 1;
  bool intervened = false;
  // Serialized InterventionSpec; empty unless intervened.
  std::string intervention_json;

  bool operator==(const DumpMeta&) const = default;
};

// One layer output at one denoising step. Immutable; the constructor
// enforces shape, finiteness and step-range invariants.
class ActivationTensor {
 public:
  ActivationTensor(Shape shape, std::vector<float> data, DumpMeta meta);

  const Shape& shape() const { return shape_; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t channels() const { return shape_.channels; }
  std::span<const float> data() const { return data_; }
  const DumpMeta& meta() const { return meta_; }

  float at(std::size_t r, std::size_t c, std::size_t k) const {
    return data_[(r * shape_.width + c) * shape_.channels + k];
  }

  RealTensor to_real() const;

  bool operator==(const ActivationTensor&) const = default;

 private:
  Shape shape_;
  std::vector<float> data_;
  DumpMeta meta_;
};

// Per-pixel label: binary saliency mask, continuous depth, or 2-channel
// saliency probabilities (background, salient).
class LabelMap {
 public:
  LabelMap(LabelKind kind, std::size_t height, std::size_t width, std::vector<float> data,
           std::string sample_id);

  LabelKind kind() const { return kind_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  std::size_t channels() const { return kind_ == LabelKind::saliency_logits ? 2 : 1; }
  std::size_t pixels() const { return height_ * width_; }
  Shape shape() const { return {height_, width_, channels()}; }
  std::span<const float> data() const { return data_; }
  const std::string& sample_id() const { return sample_id_; }

  float at(std::size_t r, std::size_t c, std::size_t k = 0) const {
    return data_[(r * width_ + c) * channels() + k];
  }

  // Number of salient pixels; only meaningful for saliency_mask.
  std::size_t count_salient() const;

  RealTensor to_real() const;

  bool operator==(const LabelMap&) const = default;

 private:
  LabelKind kind_;
  std::size_t height_;
  std::size_t width_;
  std::vector<float> data_;
  std::string sample_id_;
};

LabelMap label_from_real(LabelKind kind, const RealTensor& t, std::string sample_id);

}  // namespace probekit
