#include "probekit/fixture.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>

#include <nlohmann/json.hpp>

#include "probekit/errors.hpp"
#include "probekit/metrics.hpp"
#include "probekit/resample.hpp"
#include "probekit/rng.hpp"

namespace probekit {

namespace {

using json = nlohmann::json;

RealTensor single_channel(std::size_t h, std::size_t w, const std::vector<double>& v) {
  RealTensor t(h, w, 1);
  t.data = v;
  return t;
}

void standardize(std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / static_cast<double>(v.size()));
  for (double& x : v) x = sd > 0.0 ? (x - mean) / sd : 0.0;
}

std::vector<double> unit_direction(std::size_t c, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(c);
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& x : w) {
      x = rng.normal();
      norm += x * x;
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (double& x : w) x /= norm;
  return w;
}

std::string sample_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%04zu", i);
  return buf;
}

LabelMap upsampled_mask(const std::vector<double>& m, std::size_t h, std::size_t w,
                        std::size_t size, const std::string& id) {
  RealTensor up = bilinear_upsample(single_channel(h, w, m), size, size);
  std::vector<float> out(up.data.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = up.data[i] > 0.5 ? 1.0f : 0.0f;
  return LabelMap(LabelKind::saliency_mask, size, size, std::move(out), id);
}

LabelMap upsampled_depth(const std::vector<double>& f, std::size_t h, std::size_t w,
                         std::size_t size, const std::string& id) {
  RealTensor up = bilinear_upsample(single_channel(h, w, f), size, size);
  return normalize_depth(label_from_real(LabelKind::depth_map, up, id));
}

}  // namespace

std::string_view to_string(ObjectKind k) { return k == ObjectKind::disk ? "disk" : "rectangle"; }

ObjectKind object_kind_from_string(std::string_view s) {
  if (s == "disk") return ObjectKind::disk;
  if (s == "rectangle") return ObjectKind::rectangle;
  throw ValidationError("unknown object kind '" + std::string(s) + "'");
}

std::string_view to_string(PlantedTask t) {
  switch (t) {
    case PlantedTask::classifier: return "classifier";
    case PlantedTask::regressor: return "regressor";
    case PlantedTask::none: return "none";
  }
  return "none";
}

PlantedTask planted_task_from_string(std::string_view s) {
  if (s == "classifier" || s == "saliency") return PlantedTask::classifier;
  if (s == "regressor" || s == "depth") return PlantedTask::regressor;
  if (s == "none") return PlantedTask::none;
  throw ValidationError("unknown planted task '" + std::string(s) + "'");
}

ModelTag FixtureConfig::effective_tag() const {
  if (model_tag) return *model_tag;
  return planted == PlantedTask::none ? ModelTag::randomized : ModelTag::synthetic;
}

void FixtureConfig::validate() const {
  if (n_samples < 2) throw ValidationError("fixture n_samples must be >= 2");
  if (channels < 2) throw ValidationError("fixture channels must be >= 2");
  if (height < 1 || width < 1) throw ValidationError("fixture height and width must be >= 1");
  if (!std::isfinite(noise_sigma) || noise_sigma < 0.0) {
    throw ValidationError("fixture noise_sigma must be finite and >= 0");
  }
  for (double s : step_noise) {
    if (!std::isfinite(s) || s < 0.0) throw ValidationError("fixture step_noise must be finite and >= 0");
  }
  if (layer_ids.empty()) throw ValidationError("fixture needs at least one layer id");
  std::set<std::string> seen;
  for (const auto& id : layer_ids) {
    if (id.empty()) throw ValidationError("fixture layer id must not be empty");
    if (!seen.insert(id).second) throw ValidationError("fixture layer id '" + id + "' repeated");
  }
  if (label_size < std::max(height, width)) {
    throw ValidationError("fixture label_size must be >= the native resolution");
  }
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("fixture train_fraction must lie in (0, 1)");
  }
  const auto n_train = std::lround(train_fraction * static_cast<double>(n_samples));
  if (n_train < 1 || n_train >= static_cast<long>(n_samples)) {
    throw ValidationError("fixture split leaves train or test empty");
  }
  if (!std::isfinite(depth_roughness) || depth_roughness < 0.0) {
    throw ValidationError("fixture depth_roughness must be finite and >= 0");
  }
}

std::string fixture_config_to_json(const FixtureConfig& cfg) {
  json j = {{"n_samples", cfg.n_samples},
            {"height", cfg.height},
            {"width", cfg.width},
            {"channels", cfg.channels},
            {"noise_sigma", cfg.noise_sigma},
            {"step_noise", cfg.step_noise},
            {"layer_ids", cfg.layer_ids},
            {"object", to_string(cfg.object)},
            {"seed", cfg.seed},
            {"planted", to_string(cfg.planted)},
            {"label_size", cfg.label_size},
            {"train_fraction", cfg.train_fraction},
            {"depth_roughness", cfg.depth_roughness},
            {"model_tag", cfg.model_tag ? json(to_string(*cfg.model_tag)) : json(nullptr)}};
  return j.dump(2);
}

FixtureConfig fixture_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("fixture config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("fixture config must be a JSON object");
  FixtureConfig cfg;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "n_samples") cfg.n_samples = v.get<std::size_t>();
      else if (key == "height") cfg.height = v.get<std::size_t>();
      else if (key == "width") cfg.width = v.get<std::size_t>();
      else if (key == "channels") cfg.channels = v.get<std::size_t>();
      else if (key == "noise_sigma") cfg.noise_sigma = v.get<double>();
      else if (key == "step_noise") cfg.step_noise = v.get<std::vector<double>>();
      else if (key == "layer_ids") cfg.layer_ids = v.get<std::vector<std::string>>();
      else if (key == "object") cfg.object = object_kind_from_string(v.get<std::string>());
      else if (key == "seed") cfg.seed = v.get<std::uint64_t>();
      else if (key == "planted") cfg.planted = planted_task_from_string(v.get<std::string>());
      else if (key == "label_size") cfg.label_size = v.get<std::size_t>();
      else if (key == "train_fraction") cfg.train_fraction = v.get<double>();
      else if (key == "depth_roughness") cfg.depth_roughness = v.get<double>();
      else if (key == "model_tag") {
        if (v.is_null()) cfg.model_tag.reset();
        else cfg.model_tag = model_tag_from_string(v.get<std::string>());
      } else {
        throw ValidationError("unknown fixture config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("fixture config has a bad value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

std::vector<double> fixture_object_mask(std::size_t h, std::size_t w, ObjectKind kind,
                                        std::uint64_t seed) {
  Rng rng(seed);
  const double fh = static_cast<double>(h);
  const double fw = static_cast<double>(w);
  const double cy = rng.uniform(0.25, 0.75) * fh;
  const double cx = rng.uniform(0.25, 0.75) * fw;
  const double a = rng.uniform(0.12, 0.28);
  const double b = rng.uniform(0.12, 0.28);
  std::vector<double> m(h * w, 0.0);
  bool any = false;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double y = static_cast<double>(r) + 0.5 - cy;
      const double x = static_cast<double>(c) + 0.5 - cx;
      bool inside;
      if (kind == ObjectKind::disk) {
        const double rad = a * std::min(fh, fw);
        inside = x * x + y * y <= rad * rad;
      } else {
        inside = std::abs(y) <= a * fh && std::abs(x) <= b * fw;
      }
      if (inside) {
        m[r * w + c] = 1.0;
        any = true;
      }
    }
  }
  if (!any) {
    const auto r = std::min(h - 1, static_cast<std::size_t>(cy));
    const auto c = std::min(w - 1, static_cast<std::size_t>(cx));
    m[r * w + c] = 1.0;
  }
  return m;
}

std::vector<double> fixture_depth_field(std::size_t h, std::size_t w, double roughness,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> f(h * w, 0.0);
  const double fh = static_cast<double>(h);
  const double fw = static_cast<double>(w);
  // Sum of three clamped ramps at random orientation, offset and width.
  for (int k = 0; k < 3; ++k) {
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const double nx = std::cos(theta);
    const double ny = std::sin(theta);
    double umin = INFINITY, umax = -INFINITY;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double u = nx * (static_cast<double>(c) + 0.5) / fw + ny * (static_cast<double>(r) + 0.5) / fh;
        umin = std::min(umin, u);
        umax = std::max(umax, u);
      }
    }
    const double offset = rng.uniform(umin, umax);
    const double width = rng.uniform(0.1, 0.3);
    const double amp = rng.uniform(0.5, 1.5);
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < w; ++c) {
        const double u = nx * (static_cast<double>(c) + 0.5) / fw + ny * (static_cast<double>(r) + 0.5) / fh;
        f[r * w + c] += amp * std::clamp((u - offset) / width, 0.0, 1.0);
      }
    }
  }
  if (roughness > 0.0) {
    for (double& x : f) x += roughness * rng.normal();
  }
  standardize(f);
  return f;
}

std::vector<double> planted_direction(const FixtureConfig& cfg, const std::string& layer_id) {
  return unit_direction(cfg.channels, derive_seed(cfg.seed, "layer:" + layer_id));
}

InMemoryDataset generate_fixture(const FixtureConfig& cfg) {
  cfg.validate();
  const int total_steps = cfg.total_steps();
  const ModelTag tag = cfg.effective_tag();
  const std::size_t h = cfg.height, w = cfg.width, c = cfg.channels;
  const auto n_train = static_cast<std::size_t>(
      std::lround(cfg.train_fraction * static_cast<double>(cfg.n_samples)));

  std::vector<std::vector<double>> directions;
  for (const auto& id : cfg.layer_ids) directions.push_back(planted_direction(cfg, id));

  InMemoryDataset data(total_steps);
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    const std::string id = sample_name(i);
    const std::uint64_t sseed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    data.add_sample(id, i < n_train ? Split::train : Split::test);

    const auto mask = fixture_object_mask(h, w, cfg.object, derive_seed(sseed, "mask"));
    const auto depth = fixture_depth_field(h, w, cfg.depth_roughness, derive_seed(sseed, "depth"));
    if (cfg.planted != PlantedTask::regressor) {
      data.add_label(upsampled_mask(mask, h, w, cfg.label_size, id));
    }
    if (cfg.planted != PlantedTask::classifier) {
      data.add_label(upsampled_depth(depth, h, w, cfg.label_size, id));
    }

    std::vector<double> signal(h * w, 0.0);
    if (cfg.planted == PlantedTask::classifier) {
      for (std::size_t p = 0; p < h * w; ++p) signal[p] = 2.0 * mask[p] - 1.0;
    } else if (cfg.planted == PlantedTask::regressor) {
      signal = depth;
    }

    for (std::size_t l = 0; l < cfg.layer_ids.size(); ++l) {
      for (int t = 1; t <= total_steps; ++t) {
        const double sigma = cfg.step_noise.empty() ? cfg.noise_sigma : cfg.step_noise[t - 1];
        Rng noise(derive_seed(sseed, "noise:" + cfg.layer_ids[l] + ":t" + std::to_string(t)));
        std::vector<float> x(h * w * c);
        for (std::size_t p = 0; p < h * w; ++p) {
          for (std::size_t k = 0; k < c; ++k) {
            const double v = cfg.planted == PlantedTask::none
                                 ? noise.normal()
                                 : directions[l][k] * signal[p] + sigma * noise.normal();
            x[p * c + k] = static_cast<float>(v);
          }
        }
        DumpMeta meta;
        meta.sample_id = id;
        meta.layer_id = cfg.layer_ids[l];
        meta.step = t;
        meta.model_tag = tag;
        meta.total_steps = total_steps;
        data.add_activation(ActivationTensor({h, w, c}, std::move(x), std::move(meta)));
      }
    }
  }
  return data;
}

DatasetManifest synthesize_fixture(const FixtureConfig& cfg, const std::filesystem::path& dir) {
  InMemoryDataset data = generate_fixture(cfg);
  DatasetManifest m = write_dataset(data, dir);
  std::ofstream f(dir / "fixture.json", std::ios::trunc);
  if (!f) throw IoError("cannot write " + (dir / "fixture.json").string());
  f << fixture_config_to_json(cfg) << '\n';
  if (!f) throw IoError("write failed for " + (dir / "fixture.json").string());
  return m;
}

}  // namespace probekit
