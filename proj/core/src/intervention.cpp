#include "probekit/intervention.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "probekit/errors.hpp"
#include "probekit/layers.hpp"
#include "probekit/metrics.hpp"
#include "probekit/rng.hpp"

namespace probekit {

namespace {

using json = nlohmann::json;

int draw_component(Rng& rng) {
  const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double magnitude = rng.uniform(90.0, 120.0);
  return static_cast<int>(std::lround(sign * magnitude));
}

void require_same_dims(const LabelMap& a, const LabelMap& b, const char* op) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw ArgumentError(std::string(op) + ": label dimensions differ");
  }
}

double bilinear_at(const LabelMap& map, double r, double c) {
  const double max_r = static_cast<double>(map.height() - 1);
  const double max_c = static_cast<double>(map.width() - 1);
  r = std::clamp(r, 0.0, max_r);
  c = std::clamp(c, 0.0, max_c);
  const auto r0 = static_cast<std::size_t>(std::floor(r));
  const auto c0 = static_cast<std::size_t>(std::floor(c));
  const std::size_t r1 = std::min(r0 + 1, map.height() - 1);
  const std::size_t c1 = std::min(c0 + 1, map.width() - 1);
  const double fr = r - static_cast<double>(r0);
  const double fc = c - static_cast<double>(c0);
  const double top = (1.0 - fc) * map.at(r0, c0) + fc * map.at(r0, c1);
  const double bottom = (1.0 - fc) * map.at(r1, c0) + fc * map.at(r1, c1);
  return (1.0 - fr) * top + fr * bottom;
}

json options_json(const InterventionOptions& o) {
  json j = {{"learning_rate", o.adam.learning_rate},
            {"beta1", o.adam.beta1},
            {"beta2", o.adam.beta2},
            {"eps", o.adam.eps},
            {"iterations", o.iterations},
            {"huber_delta", o.huber_delta}};
  j["max_grad_norm"] = o.max_grad_norm ? json(*o.max_grad_norm) : json(nullptr);
  return j;
}

InterventionOptions options_from(const json& j) {
  InterventionOptions o;
  o.adam.learning_rate = j.value("learning_rate", o.adam.learning_rate);
  o.adam.beta1 = j.value("beta1", o.adam.beta1);
  o.adam.beta2 = j.value("beta2", o.adam.beta2);
  o.adam.eps = j.value("eps", o.adam.eps);
  o.iterations = j.value("iterations", o.iterations);
  o.huber_delta = j.value("huber_delta", o.huber_delta);
  if (j.contains("max_grad_norm") && !j["max_grad_norm"].is_null()) {
    o.max_grad_norm = j["max_grad_norm"].get<double>();
  }
  return o;
}

}  // namespace

TranslationSample sample_translation(std::uint64_t seed) {
  Rng rng(seed);
  TranslationSample t;
  t.dx = draw_component(rng);
  t.dy = draw_component(rng);
  return t;
}

MaskTranslation translate_mask(const LabelMap& mask, TranslationSample t) {
  if (mask.kind() != LabelKind::saliency_mask) {
    throw ArgumentError("translate_mask: expected a saliency_mask");
  }
  const auto h = static_cast<long>(mask.height());
  const auto w = static_cast<long>(mask.width());
  std::vector<float> out(mask.pixels(), 0.0f);
  std::size_t count = 0;
  for (long r = 0; r < h; ++r) {
    const long sr = r - t.dy;
    if (sr < 0 || sr >= h) continue;
    for (long c = 0; c < w; ++c) {
      const long sc = c - t.dx;
      if (sc < 0 || sc >= w) continue;
      const float v = mask.at(static_cast<std::size_t>(sr), static_cast<std::size_t>(sc));
      out[static_cast<std::size_t>(r * w + c)] = v;
      count += v == 1.0f;
    }
  }
  return {LabelMap(LabelKind::saliency_mask, mask.height(), mask.width(), std::move(out),
                   mask.sample_id()),
          count == 0};
}

LabelMap translate_depth(const LabelMap& depth, TranslationSample t) {
  if (depth.kind() != LabelKind::depth_map) {
    throw ArgumentError("translate_depth: expected a depth_map");
  }
  const auto h = static_cast<long>(depth.height());
  const auto w = static_cast<long>(depth.width());
  std::vector<float> out(depth.pixels());
  for (long r = 0; r < h; ++r) {
    const auto sr = static_cast<std::size_t>(std::clamp(r - t.dy, 0L, h - 1));
    for (long c = 0; c < w; ++c) {
      const auto sc = static_cast<std::size_t>(std::clamp(c - t.dx, 0L, w - 1));
      out[static_cast<std::size_t>(r * w + c)] = depth.at(sr, sc);
    }
  }
  return LabelMap(LabelKind::depth_map, depth.height(), depth.width(), std::move(out),
                  depth.sample_id());
}

MaskTarget draw_mask_target(const LabelMap& mask, std::uint64_t seed) {
  const std::size_t original = mask.count_salient();
  const double needed = kMinRetainedFraction * static_cast<double>(original);
  std::optional<MaskTarget> last;
  for (int attempt = 0; attempt < kMaxTranslationAttempts; ++attempt) {
    const TranslationSample t = sample_translation(derive_seed(seed, static_cast<std::uint64_t>(attempt)));
    MaskTranslation moved = translate_mask(mask, t);
    const auto kept = static_cast<double>(moved.mask.count_salient());
    const bool ok = original > 0 && !moved.empty && kept >= needed;
    last = MaskTarget{std::move(moved.mask), t, attempt + 1, !ok};
    if (ok || original == 0) break;
  }
  return std::move(*last);
}

LabelMap insert_object_depth(const LabelMap& scene, const LabelMap& object_mask,
                             const LabelMap& source, TranslationSample t, double depth_offset,
                             double scale) {
  if (scene.kind() != LabelKind::depth_map || source.kind() != LabelKind::depth_map ||
      object_mask.kind() != LabelKind::saliency_mask) {
    throw ArgumentError("insert_object_depth: expected depth scene/source and a saliency mask");
  }
  require_same_dims(scene, object_mask, "insert_object_depth");
  require_same_dims(scene, source, "insert_object_depth");
  if (!(scale > 0.0 && scale <= 1.0)) {
    throw ArgumentError("insert_object_depth: scale must lie in (0, 1]");
  }
  const std::size_t h = scene.height();
  const std::size_t w = scene.width();

  double cr = 0.0;
  double cc = 0.0;
  std::size_t n = 0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      if (object_mask.at(r, c) == 1.0f) {
        cr += static_cast<double>(r);
        cc += static_cast<double>(c);
        ++n;
      }
    }
  }
  if (n == 0) throw ArgumentError("insert_object_depth: object mask is empty");
  cr /= static_cast<double>(n);
  cc /= static_cast<double>(n);

  std::vector<float> out(scene.data().begin(), scene.data().end());
  std::size_t footprint = 0;
  for (std::size_t r = 0; r < h; ++r) {
    // Inverse map: output pixel -> location in the unscaled, untranslated object.
    const double qr = cr + (static_cast<double>(r) - t.dy - cr) / scale;
    const double nr = std::floor(qr + 0.5);
    if (nr < 0.0 || nr >= static_cast<double>(h)) continue;
    for (std::size_t c = 0; c < w; ++c) {
      const double qc = cc + (static_cast<double>(c) - t.dx - cc) / scale;
      const double nc = std::floor(qc + 0.5);
      if (nc < 0.0 || nc >= static_cast<double>(w)) continue;
      if (object_mask.at(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)) != 1.0f) {
        continue;
      }
      out[r * w + c] = static_cast<float>(bilinear_at(source, qr, qc) + depth_offset);
      ++footprint;
    }
  }
  if (footprint == 0) {
    throw ArgumentError("insert_object_depth: inserted object lies entirely outside the frame");
  }
  return LabelMap(LabelKind::depth_map, h, w, std::move(out), scene.sample_id());
}

InterventionResult intervene_activation(const ActivationTensor& act, const LinearProbe& probe,
                                        const LabelMap& target,
                                        const InterventionOptions& options) {
  if (probe.channels != act.channels()) {
    throw ArgumentError("intervene_activation: probe expects " + std::to_string(probe.channels) +
                        " channels, activation has " + std::to_string(act.channels()));
  }
  const bool target_ok = probe.task == ProbeTask::classifier
                             ? target.kind() != LabelKind::depth_map
                             : target.kind() == LabelKind::depth_map;
  if (!target_ok) throw ArgumentError("intervene_activation: target kind does not match probe task");

  RealTensor x = act.to_real();
  AdamState state(x.data.size(), options.adam);

  InterventionResult result{act, {}, false};
  result.loss_trace.reserve(options.iterations + 1);
  for (std::size_t it = 0; it <= options.iterations; ++it) {
    const bool last = it == options.iterations;
    ObjectiveResult r = probe_objective(probe, x, target, {options.huber_delta, 0.0, false, !last});
    result.loss_trace.push_back(r.loss);
    if (!std::isfinite(r.loss)) {
      result.aborted = true;
      break;
    }
    if (last) break;
    if (options.max_grad_norm) clip_grad_norm(r.act_grad.data, *options.max_grad_norm);
    try {
      adam_step(state, x.data, r.act_grad.data);
    } catch (const NumericError&) {
      result.aborted = true;
      break;
    }
  }

  std::vector<float> data(x.data.size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(x.data[i]);
  DumpMeta meta = act.meta();
  meta.intervened = true;
  result.activation = ActivationTensor(act.shape(), std::move(data), std::move(meta));
  return result;
}

InterventionEffect evaluate_intervention(const LabelMap& modified_label,
                                         const LabelMap& output_label,
                                         const LabelMap& original_label) {
  if (modified_label.kind() != output_label.kind() ||
      modified_label.kind() != original_label.kind()) {
    throw ArgumentError("evaluate_intervention: label kinds differ");
  }
  require_same_dims(modified_label, output_label, "evaluate_intervention");
  require_same_dims(modified_label, original_label, "evaluate_intervention");
  switch (modified_label.kind()) {
    case LabelKind::saliency_mask:
      return {dice_coefficient(modified_label, output_label),
              dice_coefficient(modified_label, original_label)};
    case LabelKind::depth_map:
      return {rmse(modified_label, output_label), rmse(modified_label, original_label)};
    default:
      throw ArgumentError("evaluate_intervention: expected masks or depth maps");
  }
}

std::string intervention_spec_to_json(const InterventionSpec& spec) {
  json j = {{"task", task_name(spec.task)},
            {"layer_policy", spec.layer_policy},
            {"step_policy", spec.step_policy},
            {"optimizer", options_json(spec.options)},
            {"seed", spec.seed},
            {"target_sample_id", spec.target_sample_id},
            {"variant", spec.variant}};
  j["translation"] = spec.translation
                         ? json{{"dx", spec.translation->dx}, {"dy", spec.translation->dy}}
                         : json(nullptr);
  return j.dump();
}

InterventionSpec intervention_spec_from_json(std::string_view text) {
  try {
    const json j = json::parse(text);
    InterventionSpec s;
    s.task = probe_task_from_string(j.at("task").get<std::string>());
    s.layer_policy = j.value("layer_policy", std::vector<std::string>{});
    s.step_policy = j.value("step_policy", std::vector<int>{});
    if (j.contains("optimizer")) s.options = options_from(j.at("optimizer"));
    s.seed = j.value("seed", std::uint64_t{0});
    s.target_sample_id = j.value("target_sample_id", std::string{});
    s.variant = j.value("variant", -1);
    if (j.contains("translation") && !j["translation"].is_null()) {
      s.translation = TranslationSample{j["translation"].at("dx").get<int>(),
                                        j["translation"].at("dy").get<int>()};
    }
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed intervention spec: ") + e.what());
  }
}

InterventionSpec default_intervention_spec(ProbeTask task, const std::vector<std::string>& available,
                                           int total_steps) {
  InterventionSpec spec;
  spec.task = task;
  const int steps = task == ProbeTask::classifier ? 5 : 3;
  for (int s = 1; s <= std::min(steps, total_steps); ++s) spec.step_policy.push_back(s);
  for (const auto& id : available) {
    if (task == ProbeTask::regressor || is_decoder_side(id)) spec.layer_policy.push_back(id);
  }
  return spec;
}

}  // namespace probekit
