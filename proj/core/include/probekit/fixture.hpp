#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "probekit/dataset.hpp"
#include "probekit/tensor.hpp"

namespace probekit {

enum class ObjectKind { disk, rectangle };
// classifier/regressor plant a linear signal; none is the random control.
enum class PlantedTask { classifier, regressor, none };

std::string_view to_string(ObjectKind k);
ObjectKind object_kind_from_string(std::string_view s);
std::string_view to_string(PlantedTask t);
PlantedTask planted_task_from_string(std::string_view s);

// Synthetic stand-in for real activation dumps.
struct FixtureConfig {
  std::size_t n_samples = 200;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 16;
  double noise_sigma = 0.1;
  // Per-step noise sigma; empty means a single step at noise_sigma.
  std::vector<double> step_noise;
  std::vector<std::string> layer_ids{"decoder2.sa1"};
  ObjectKind object = ObjectKind::disk;
  std::uint64_t seed = 0;
  PlantedTask planted = PlantedTask::classifier;
  std::size_t label_size = kLabelSize;
  double train_fraction = 0.4;
  // Std of i.i.d. per-pixel noise added to the depth field before
  // standardization; > 0 makes the field non-smooth.
  double depth_roughness = 0.0;
  // Tag stamped on every dump; synthetic for planted, randomized for none
  // unless set explicitly.
  std::optional<ModelTag> model_tag;

  int total_steps() const { return step_noise.empty() ? 1 : static_cast<int>(step_noise.size()); }
  ModelTag effective_tag() const;
  // Throws ValidationError.
  void validate() const;
  bool operator==(const FixtureConfig&) const = default;
};

std::string fixture_config_to_json(const FixtureConfig& cfg);
// Missing keys keep their defaults; unknown keys are rejected.
FixtureConfig fixture_config_from_json(std::string_view text);

// Fixture sample ids are "s0000", "s0001", ...; the first
// round(train_fraction * n) are train, the rest test. Planted fixtures carry
// the label kind of their task; random-control fixtures carry both a
// saliency mask and a depth map, drawn independently of the activations.
InMemoryDataset generate_fixture(const FixtureConfig& cfg);

// generate_fixture written as dumps under dir, plus dir/manifest.json and
// dir/fixture.json.
DatasetManifest synthesize_fixture(const FixtureConfig& cfg, const std::filesystem::path& dir);

// Native-resolution object mask (1 inside) and standardized depth field
// used by the generator, exposed for tests.
std::vector<double> fixture_object_mask(std::size_t h, std::size_t w, ObjectKind kind,
                                        std::uint64_t seed);
std::vector<double> fixture_depth_field(std::size_t h, std::size_t w, double roughness,
                                        std::uint64_t seed);
// Unit vector W* along which a layer's signal is planted.
std::vector<double> planted_direction(const FixtureConfig& cfg, const std::string& layer_id);

}  // namespace probekit
