#include "probekit/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "parallel.hpp"
#include "probekit/errors.hpp"
#include "probekit/layers.hpp"

namespace probekit {

namespace {

struct SplitLabels {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
  std::vector<LabelMap> train;
  std::vector<LabelMap> test;
};

SplitLabels load_labels(const Dataset& data, ProbeTask task) {
  SplitLabels out;
  out.train_ids = data.sample_ids(Split::train);
  out.test_ids = data.sample_ids(Split::test);
  if (out.train_ids.empty()) throw ValidationError("dataset has no train samples");
  if (out.test_ids.empty()) throw ValidationError("dataset has no test samples");
  const LabelKind kind = target_kind(task);
  auto load = [&](const std::vector<std::string>& ids, std::vector<LabelMap>& dst) {
    for (const auto& id : ids) {
      if (!data.has_label(id, kind)) {
        throw ValidationError("sample '" + id + "' has no " + std::string(to_string(kind)) +
                              " label");
      }
      dst.push_back(data.label(id, kind));
    }
  };
  load(out.train_ids, out.train);
  load(out.test_ids, out.test);
  return out;
}

std::vector<CellKey> requested_cells(const Dataset& data, const std::optional<std::vector<std::string>>& layers,
                                     const std::optional<std::vector<int>>& steps,
                                     const std::optional<ModelTag>& tag) {
  const std::vector<std::string> ls = layers ? *layers : data.layer_ids();
  std::vector<int> ss;
  if (steps) {
    ss = *steps;
  } else {
    std::set<int> present;
    for (const auto& c : data.cells()) present.insert(c.step);
    ss.assign(present.begin(), present.end());
  }
  for (int s : ss) {
    if (s < 1 || s > data.total_steps()) {
      throw ValidationError("step " + std::to_string(s) + " outside 1.." +
                            std::to_string(data.total_steps()));
    }
  }
  const std::vector<ModelTag> tags = tag ? std::vector<ModelTag>{*tag} : data.model_tags();
  std::set<CellKey> cells;
  for (const auto& l : ls) {
    for (int s : ss) {
      for (ModelTag t : tags) cells.insert({l, s, t});
    }
  }
  return {cells.begin(), cells.end()};
}

bool cell_complete(const Dataset& data, const CellKey& cell) {
  for (const auto& s : data.samples()) {
    if (!data.has_activation(s.sample_id, cell)) return false;
  }
  return true;
}

std::vector<ActivationTensor> load_acts(const Dataset& data, const std::vector<std::string>& ids,
                                        const CellKey& cell) {
  std::vector<ActivationTensor> acts;
  acts.reserve(ids.size());
  for (const auto& id : ids) acts.push_back(data.activation(id, cell));
  return acts;
}

ModelTag single_tag(const Dataset& data, const char* which) {
  const auto tags = data.model_tags();
  if (tags.size() != 1) {
    throw ValidationError(std::string(which) + " dataset must carry exactly one model tag, found " +
                          std::to_string(tags.size()));
  }
  return tags.front();
}

}  // namespace

std::optional<double> SweepReport::decoder_side_mean() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& c : cells) {
    if (c.value && is_decoder_side(c.layer_id)) {
      sum += *c.value;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / static_cast<double>(n);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, const CellKey& cell,
                                      ProbeTask task) {
  return dir / (cell.layer_id + "__t" + std::to_string(cell.step) + "__" +
                std::string(to_string(cell.model_tag)) + "__" + std::string(task_name(task)) +
                ".apkd");
}

SweepResult run_probe_sweep(const Dataset& data, ProbeTask task, const TrainConfig& cfg,
                            const SweepOptions& options) {
  cfg.validate();
  SweepResult result;
  result.report.config = cfg;
  const auto cells = requested_cells(data, options.layers, options.steps, options.model_tag);
  if (cells.empty()) return result;

  const SplitLabels labels = load_labels(data, task);
  if (options.checkpoint_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*options.checkpoint_dir, ec);
    if (ec) throw IoError("cannot create checkpoint directory: " + ec.message());
  }

  std::vector<SweepCell> rows(cells.size());
  std::vector<std::optional<LinearProbe>> probes(cells.size());
  detail::parallel_for(cells.size(), options.workers, [&](std::size_t i) {
    const CellKey& key = cells[i];
    SweepCell& row = rows[i];
    row.layer_id = key.layer_id;
    row.step = key.step;
    row.model_tag = key.model_tag;
    row.task = task;
    if (!cell_complete(data, key)) {
      row.status = "missing";
      return;
    }
    const auto train_acts = load_acts(data, labels.train_ids, key);
    TrainResult trained = train_probe(train_acts, labels.train, task, cfg);
    const auto test_acts = load_acts(data, labels.test_ids, key);
    const MetricResult m = evaluate_probe(trained.probe, test_acts, labels.test);
    row.n_train = train_acts.size();
    row.n_test = test_acts.size();
    row.n_excluded = m.n_excluded;
    row.value = task == ProbeTask::classifier ? m.dice : m.rmse;
    if (!row.value) row.status = "no_valid_samples";
    if (options.checkpoint_dir) save_probe(trained.probe, cfg, checkpoint_path(*options.checkpoint_dir, key, task));
    probes[i] = std::move(trained.probe);
  });

  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (rows[i].status == "missing") {
      result.warnings.push_back("cell " + cells[i].layer_id + " step " + std::to_string(cells[i].step) +
                                " (" + std::string(to_string(cells[i].model_tag)) +
                                ") skipped: dumps missing for some samples");
    } else if (rows[i].status == "no_valid_samples") {
      result.warnings.push_back("cell " + cells[i].layer_id + " step " + std::to_string(cells[i].step) +
                                " has no valid test samples");
    }
    if (probes[i]) result.probes.emplace(cells[i], std::move(*probes[i]));
  }
  result.report.cells = std::move(rows);
  return result;
}

ControlReport run_control(const Dataset& trained, const Dataset& random, ProbeTask task,
                          const TrainConfig& cfg, const ControlOptions& options) {
  const auto& a = trained.samples();
  const auto& b = random.samples();
  auto ordered = [](const std::vector<SampleRef>& v) {
    std::vector<std::pair<std::string, Split>> out;
    for (const auto& s : v) out.emplace_back(s.sample_id, s.split);
    std::sort(out.begin(), out.end());
    return out;
  };
  if (ordered(a) != ordered(b)) {
    throw ValidationError("control datasets differ in sample ids or splits");
  }
  auto layer_steps = [](const Dataset& d) {
    std::set<std::pair<std::string, int>> out;
    for (const auto& c : d.cells()) out.emplace(c.layer_id, c.step);
    return out;
  };
  if (layer_steps(trained) != layer_steps(random)) {
    throw ValidationError("control datasets differ in (layer, step) cells");
  }

  ControlReport report;
  report.config = cfg;
  report.trained_tag = options.trained_tag ? *options.trained_tag : single_tag(trained, "trained");
  report.random_tag = options.random_tag ? *options.random_tag : single_tag(random, "random");

  SweepOptions so;
  so.layers = options.layers;
  so.steps = options.steps;
  so.workers = options.workers;
  so.model_tag = report.trained_tag;
  const SweepReport ra = run_probe_sweep(trained, task, cfg, so).report;
  so.model_tag = report.random_tag;
  const SweepReport rb = run_probe_sweep(random, task, cfg, so).report;

  for (std::size_t i = 0; i < ra.cells.size(); ++i) {
    const auto& x = ra.cells[i];
    const auto& y = rb.cells[i];
    ControlCell c;
    c.layer_id = x.layer_id;
    c.step = x.step;
    c.task = task;
    c.trained = x.value;
    c.random = y.value;
    if (x.value && y.value) {
      c.gap = task == ProbeTask::classifier ? *x.value - *y.value : *y.value - *x.value;
    }
    report.cells.push_back(std::move(c));
  }
  return report;
}

EmergenceCurve emergence_curve(const Dataset& data, const std::string& layer_id, ProbeTask task,
                               const TrainConfig& cfg, const EmergenceOptions& options) {
  EmergenceCurve curve;
  curve.layer_id = layer_id;
  curve.task = task;
  curve.config = cfg;
  curve.model_tag = options.model_tag ? *options.model_tag : single_tag(data, "emergence");

  const int final_step = data.total_steps();
  const CellKey final_cell{layer_id, final_step, curve.model_tag};
  if (!cell_complete(data, final_cell)) {
    throw ValidationError("layer " + layer_id + " has no complete final-step dumps");
  }

  std::vector<int> steps(static_cast<std::size_t>(final_step));
  for (int t = 1; t <= final_step; ++t) steps[static_cast<std::size_t>(t - 1)] = t;
  SweepOptions so;
  so.layers = std::vector<std::string>{layer_id};
  so.steps = steps;
  so.model_tag = curve.model_tag;
  so.workers = options.workers;
  const SweepReport r = run_probe_sweep(data, task, cfg, so).report;
  for (const auto& c : r.cells) curve.points.push_back({c.step, c.value, c.n_excluded});
  return curve;
}

std::optional<int> convergence_step(const EmergenceCurve& curve, double tolerance) {
  if (curve.points.empty() || !curve.points.back().value) return std::nullopt;
  const double final_value = *curve.points.back().value;
  int step = curve.points.back().step;
  for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
    if (!it->value || std::abs(*it->value - final_value) > tolerance) break;
    step = it->step;
  }
  return step;
}

}  // namespace probekit
