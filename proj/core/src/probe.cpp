#include "probekit/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "probekit/dump_io.hpp"
#include "probekit/errors.hpp"
#include "probekit/losses.hpp"
#include "probekit/optim.hpp"
#include "probekit/resample.hpp"
#include "probekit/rng.hpp"

namespace probekit {

namespace {

using json = nlohmann::json;

constexpr double kInitScale = 0.01;

void round_to_f32(std::vector<double>& v) {
  for (double& x : v) x = static_cast<double>(static_cast<float>(x));
}

void require_channels(const LinearProbe& probe, std::size_t channels) {
  if (probe.channels != channels) {
    throw ArgumentError("probe expects " + std::to_string(probe.channels) +
                        " channels, activation has " + std::to_string(channels));
  }
}

json config_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"adam_eps", c.adam_eps},
          {"huber_delta", c.huber_delta},
          {"smoothness_weight", c.smoothness_weight},
          {"seed", c.seed},
          {"use_bias", c.use_bias},
          {"batch", c.batch}};
}

TrainConfig config_from(const json& j) {
  if (!j.is_object()) throw ValidationError("train config must be a JSON object");
  TrainConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "epochs") c.epochs = value.get<std::size_t>();
      else if (key == "learning_rate") c.learning_rate = value.get<double>();
      else if (key == "adam_beta1") c.adam_beta1 = value.get<double>();
      else if (key == "adam_beta2") c.adam_beta2 = value.get<double>();
      else if (key == "adam_eps") c.adam_eps = value.get<double>();
      else if (key == "huber_delta") c.huber_delta = value.get<double>();
      else if (key == "smoothness_weight") c.smoothness_weight = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "use_bias") c.use_bias = value.get<bool>();
      else if (key == "batch") c.batch = value.get<std::string>();
      else throw ValidationError("unknown train config key '" + key + "'");
    } catch (const json::exception&) {
      throw ValidationError("train config key '" + key + "' has the wrong type");
    }
  }
  c.validate();
  return c;
}

}  // namespace

std::string_view to_string(ProbeTask task) {
  return task == ProbeTask::classifier ? "classifier" : "regressor";
}

std::string_view task_name(ProbeTask task) {
  return task == ProbeTask::classifier ? "saliency" : "depth";
}

ProbeTask probe_task_from_string(std::string_view s) {
  if (s == "classifier" || s == "saliency") return ProbeTask::classifier;
  if (s == "regressor" || s == "depth") return ProbeTask::regressor;
  throw ValidationError("unknown task '" + std::string(s) + "'");
}

LabelKind target_kind(ProbeTask task) {
  return task == ProbeTask::classifier ? LabelKind::saliency_mask : LabelKind::depth_map;
}

LinearProbe LinearProbe::zeros(ProbeTask task, std::string layer_id, int step,
                               std::size_t channels) {
  LinearProbe p;
  p.task = task;
  p.layer_id = std::move(layer_id);
  p.step = step;
  p.channels = channels;
  p.weights.assign(channels * p.outputs(), 0.0);
  p.bias.assign(p.outputs(), 0.0);
  return p;
}

void LinearProbe::validate() const {
  if (channels == 0) throw ValidationError("probe has zero channels");
  if (weights.size() != channels * outputs() || bias.size() != outputs()) {
    throw ValidationError("probe weight shape does not match task");
  }
  auto finite = [](double x) { return std::isfinite(x); };
  if (!std::all_of(weights.begin(), weights.end(), finite) ||
      !std::all_of(bias.begin(), bias.end(), finite)) {
    throw ValidationError("probe weights are not finite");
  }
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ValidationError("adam_eps must be positive");
  if (!(huber_delta > 0.0)) throw ValidationError("huber_delta must be positive");
  if (!(smoothness_weight >= 0.0)) throw ValidationError("smoothness_weight must be >= 0");
  if (batch != "full_image") throw ValidationError("only batch=full_image is supported");
}

std::string train_config_to_json(const TrainConfig& cfg) { return config_json(cfg).dump(); }

TrainConfig train_config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train config is not valid JSON: ") + e.what());
  }
  return config_from(j);
}

RealTensor project(const LinearProbe& probe, const RealTensor& act) {
  require_channels(probe, act.channels);
  const std::size_t k = probe.outputs();
  const std::size_t c = probe.channels;
  const std::size_t n = act.height * act.width;
  RealTensor out(act.height, act.width, k);
  for (std::size_t p = 0; p < n; ++p) {
    const double* x = &act.data[p * c];
    double* y = &out.data[p * k];
    for (std::size_t o = 0; o < k; ++o) y[o] = probe.bias[o];
    for (std::size_t ch = 0; ch < c; ++ch) {
      const double* w = &probe.weights[ch * k];
      for (std::size_t o = 0; o < k; ++o) y[o] += x[ch] * w[o];
    }
  }
  return out;
}

LabelMap mask_from_probabilities(const RealTensor& probs, std::string sample_id) {
  if (probs.channels != 2) throw ArgumentError("mask_from_probabilities: expected 2 channels");
  const std::size_t n = probs.height * probs.width;
  std::vector<float> mask(n);
  for (std::size_t p = 0; p < n; ++p) {
    mask[p] = probs.data[2 * p + 1] > probs.data[2 * p] ? 1.0f : 0.0f;
  }
  return LabelMap(LabelKind::saliency_mask, probs.height, probs.width, std::move(mask),
                  std::move(sample_id));
}

ClassifierOutput probe_forward_classifier(const LinearProbe& probe, const ActivationTensor& act,
                                          std::size_t out_h, std::size_t out_w) {
  if (probe.task != ProbeTask::classifier) {
    throw ArgumentError("probe_forward_classifier: probe is a regressor");
  }
  require_channels(probe, act.channels());
  const RealTensor probs = softmax_channels(bilinear_upsample(project(probe, act.to_real()), out_h, out_w));
  const auto& id = act.meta().sample_id;
  return {label_from_real(LabelKind::saliency_logits, probs, id), mask_from_probabilities(probs, id)};
}

LabelMap probe_forward_regressor(const LinearProbe& probe, const ActivationTensor& act,
                                 std::size_t out_h, std::size_t out_w) {
  if (probe.task != ProbeTask::regressor) {
    throw ArgumentError("probe_forward_regressor: probe is a classifier");
  }
  require_channels(probe, act.channels());
  return label_from_real(LabelKind::depth_map,
                         bilinear_upsample(project(probe, act.to_real()), out_h, out_w),
                         act.meta().sample_id);
}

LabelMap predict_label(const LinearProbe& probe, const ActivationTensor& act, std::size_t out_h,
                       std::size_t out_w) {
  if (probe.task == ProbeTask::classifier) {
    return probe_forward_classifier(probe, act, out_h, out_w).mask;
  }
  return probe_forward_regressor(probe, act, out_h, out_w);
}

namespace {

// Two-class cross-entropy evaluated on the upsampled logit difference
// d = l_salient - l_background, which is all softmax depends on. Writes
// dL/dd into grad and returns the mean loss. Matches cross_entropy_loss,
// including the probability clamp.
double binary_ce_on_diff(const RealTensor& diff, const LabelMap& target, RealTensor& grad) {
  if (diff.height != target.height() || diff.width != target.width()) {
    throw ArgumentError("cross_entropy_loss: prediction and target dims differ");
  }
  const bool soft = target.kind() == LabelKind::saliency_logits;
  const auto t = target.data();
  const std::size_t n = diff.data.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  grad = RealTensor(diff.height, diff.width, 1);
  double total = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const double d = diff.data[p];
    // Stable sigmoid.
    const double e = std::exp(-std::abs(d));
    const double p1 = d >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    const double p0 = d >= 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
    const double q1 = soft ? static_cast<double>(t[2 * p + 1]) : static_cast<double>(t[p]);
    const double q0 = soft ? static_cast<double>(t[2 * p]) : 1.0 - q1;
    if (q1 != 0.0) total -= q1 * std::log(std::max(p1, kProbEpsilon));
    if (q0 != 0.0) total -= q0 * std::log(std::max(p0, kProbEpsilon));
    grad.data[p] = (p1 - q1) * inv_n;
  }
  return total * inv_n;
}

}  // namespace

ObjectiveResult probe_objective(const LinearProbe& probe, const RealTensor& act,
                                const LabelMap& target, const ObjectiveOptions& options) {
  require_channels(probe, act.channels);
  const std::size_t k = probe.outputs();
  const std::size_t c = probe.channels;
  const std::size_t n = act.height * act.width;
  const RealTensor y = project(probe, act);

  ObjectiveResult result;
  // Gradient of the loss w.r.t. the native-resolution outputs y (h x w x k).
  RealTensor g(act.height, act.width, k);
  if (probe.task == ProbeTask::classifier) {
    if (target.kind() == LabelKind::depth_map) {
      throw ArgumentError("classifier probe needs a saliency target");
    }
    // Upsampling is linear, so the difference channel can be upsampled alone.
    RealTensor diff(act.height, act.width, 1);
    for (std::size_t p = 0; p < n; ++p) diff.data[p] = y.data[2 * p + 1] - y.data[2 * p];
    RealTensor grad_up;
    result.loss = binary_ce_on_diff(
        bilinear_upsample(diff, target.height(), target.width()), target, grad_up);
    const RealTensor gd = upsample_adjoint(grad_up, act.height, act.width);
    for (std::size_t p = 0; p < n; ++p) {
      g.data[2 * p] = -gd.data[p];
      g.data[2 * p + 1] = gd.data[p];
    }
  } else {
    if (target.kind() != LabelKind::depth_map) {
      throw ArgumentError("regressor probe needs a depth target");
    }
    const RealTensor up = bilinear_upsample(y, target.height(), target.width());
    LossResult hub = huber_loss(up, target, options.huber_delta);
    result.loss = hub.loss;
    RealTensor grad_up = std::move(hub.grad);
    if (options.smoothness_weight > 0.0) {
      LossResult sm = smoothness_loss(up);
      result.loss += options.smoothness_weight * sm.loss;
      for (std::size_t i = 0; i < grad_up.data.size(); ++i) {
        grad_up.data[i] += options.smoothness_weight * sm.grad.data[i];
      }
    }
    g = upsample_adjoint(grad_up, act.height, act.width);
  }

  if (options.param_grad) {
    result.weight_grad.assign(c * k, 0.0);
    result.bias_grad.assign(k, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      const double* x = &act.data[p * c];
      const double* gp = &g.data[p * k];
      for (std::size_t ch = 0; ch < c; ++ch) {
        double* wg = &result.weight_grad[ch * k];
        for (std::size_t o = 0; o < k; ++o) wg[o] += x[ch] * gp[o];
      }
      for (std::size_t o = 0; o < k; ++o) result.bias_grad[o] += gp[o];
    }
  }
  if (options.act_grad) {
    result.act_grad = RealTensor(act.height, act.width, c);
    for (std::size_t p = 0; p < n; ++p) {
      const double* gp = &g.data[p * k];
      double* ag = &result.act_grad.data[p * c];
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* w = &probe.weights[ch * k];
        double s = 0.0;
        for (std::size_t o = 0; o < k; ++o) s += w[o] * gp[o];
        ag[ch] = s;
      }
    }
  }
  return result;
}

TrainResult train_probe(const std::vector<ActivationTensor>& acts,
                        const std::vector<LabelMap>& labels, ProbeTask task,
                        const TrainConfig& cfg) {
  cfg.validate();
  if (acts.empty()) throw ValidationError("train_probe: empty dataset");
  if (labels.size() != acts.size()) {
    throw ValidationError("train_probe: " + std::to_string(acts.size()) + " activations but " +
                          std::to_string(labels.size()) + " labels");
  }
  const auto& first = acts.front();
  for (const auto& a : acts) {
    if (a.meta().layer_id != first.meta().layer_id || a.meta().step != first.meta().step) {
      throw ValidationError("train_probe: activations mix (layer, step) cells");
    }
    if (a.shape() != first.shape()) {
      throw ValidationError("train_probe: activations have different shapes");
    }
  }

  std::map<std::string, const LabelMap*> by_id;
  for (const auto& l : labels) {
    if (l.kind() != target_kind(task)) {
      throw ValidationError("train_probe: label kind '" + std::string(to_string(l.kind())) +
                            "' does not match task " + std::string(to_string(task)));
    }
    by_id[l.sample_id()] = &l;
  }
  std::vector<const LabelMap*> matched;
  matched.reserve(acts.size());
  for (const auto& a : acts) {
    auto it = by_id.find(a.meta().sample_id);
    if (it == by_id.end()) {
      throw ValidationError("train_probe: no label for sample '" + a.meta().sample_id + "'");
    }
    matched.push_back(it->second);
  }

  LinearProbe probe =
      LinearProbe::zeros(task, first.meta().layer_id, first.meta().step, first.channels());
  Rng init_rng(derive_seed(cfg.seed, "init"));
  for (double& w : probe.weights) w = kInitScale * init_rng.normal();

  const AdamConfig adam{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps};
  AdamState w_state(probe.weights.size(), adam);
  AdamState b_state(probe.bias.size(), adam);
  const ObjectiveOptions obj{cfg.huber_delta,
                             task == ProbeTask::regressor ? cfg.smoothness_weight : 0.0, true,
                             false};

  Rng order_rng(derive_seed(cfg.seed, "order"));
  std::vector<std::size_t> order(acts.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  result.loss_history.reserve(cfg.epochs);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[order_rng.below(i)]);
    }
    double total = 0.0;
    for (std::size_t idx : order) {
      ObjectiveResult r = probe_objective(probe, acts[idx].to_real(), *matched[idx], obj);
      if (!std::isfinite(r.loss)) throw NumericError("train_probe: non-finite loss");
      total += r.loss;
      adam_step(w_state, probe.weights, r.weight_grad);
      if (cfg.use_bias) adam_step(b_state, probe.bias, r.bias_grad);
    }
    const double mean = total / static_cast<double>(order.size());
    if (!std::isfinite(mean)) throw NumericError("train_probe: non-finite epoch loss");
    result.loss_history.push_back(mean);
  }
  round_to_f32(probe.weights);
  round_to_f32(probe.bias);
  result.probe = std::move(probe);
  return result;
}

MetricResult evaluate_probe(const LinearProbe& probe, const std::vector<ActivationTensor>& acts,
                            const std::vector<LabelMap>& labels) {
  if (acts.size() != labels.size()) {
    throw ValidationError("evaluate_probe: activation and label counts differ");
  }
  std::map<std::string, const LabelMap*> by_id;
  for (const auto& l : labels) by_id[l.sample_id()] = &l;

  std::vector<SampleMetric> per_sample;
  per_sample.reserve(acts.size());
  for (const auto& a : acts) {
    auto it = by_id.find(a.meta().sample_id);
    if (it == by_id.end()) {
      throw ValidationError("evaluate_probe: no label for sample '" + a.meta().sample_id + "'");
    }
    const LabelMap& truth = *it->second;
    const LabelMap pred = predict_label(probe, a, truth.height(), truth.width());
    SampleMetric m{a.meta().sample_id, 0.0, false};
    if (probe.task == ProbeTask::classifier) {
      m.value = dice_coefficient(pred, truth);
      m.excluded = truth.count_salient() == 0;
    } else {
      m.value = rmse(pred, truth);
    }
    per_sample.push_back(std::move(m));
  }
  return probe.task == ProbeTask::classifier ? aggregate_dice(std::move(per_sample))
                                             : aggregate_rmse(std::move(per_sample));
}

void save_probe(const LinearProbe& probe, const TrainConfig& cfg,
                const std::filesystem::path& path) {
  probe.validate();
  json meta = {{"kind", "probe"},
               {"task", to_string(probe.task)},
               {"layer_id", probe.layer_id},
               {"step", probe.step},
               {"train_config", config_json(cfg)}};
  RawDump raw;
  raw.meta_json = meta.dump();
  raw.dims = {probe.channels + 1, probe.outputs(), 1};
  raw.payload.reserve(raw.dims.size());
  for (double w : probe.weights) raw.payload.push_back(static_cast<float>(w));
  for (double b : probe.bias) raw.payload.push_back(static_cast<float>(b));
  write_raw_dump(raw, path);
}

LoadedProbe load_probe(const std::filesystem::path& path) {
  RawDump raw = read_raw_dump(path);
  json meta;
  try {
    meta = json::parse(raw.meta_json);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": meta_json is not valid JSON", 12);
  }
  if (meta.value("kind", "") != "probe") {
    throw FormatError(path.string() + ": not a probe checkpoint", 12);
  }
  LoadedProbe out;
  try {
    out.probe.task = probe_task_from_string(meta.at("task").get<std::string>());
    out.probe.layer_id = meta.at("layer_id").get<std::string>();
    out.probe.step = meta.at("step").get<int>();
    out.config = config_from(meta.at("train_config"));
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed probe meta: " + e.what(), 12);
  }
  const std::size_t k = out.probe.outputs();
  if (raw.dims.width != k || raw.dims.channels != 1 || raw.dims.height < 2) {
    throw FormatError(path.string() + ": probe dims do not match task", 12 + raw.meta_json.size());
  }
  out.probe.channels = raw.dims.height - 1;
  const std::size_t nw = out.probe.channels * k;
  out.probe.weights.assign(raw.payload.begin(), raw.payload.begin() + static_cast<std::ptrdiff_t>(nw));
  out.probe.bias.assign(raw.payload.begin() + static_cast<std::ptrdiff_t>(nw), raw.payload.end());
  out.probe.validate();
  return out;
}

}  // namespace probekit
