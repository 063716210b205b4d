// One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "helpers.hpp"
#include "oracles.hpp"
#include "probekit/fixture.hpp"
#include "probekit/losses.hpp"
#include "probekit/metrics.hpp"
#include "probekit/probe.hpp"
#include "probekit/report.hpp"
#include "probekit/study.hpp"
#include "probekit/sweep.hpp"

using namespace probekit;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(const char* name, bool ok, const std::string& detail, double seconds) {
  std::printf("%s %s (%s; %.1f s)\n", ok ? "PASS" : "FAIL", name, detail.c_str(), seconds);
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

RealTensor with_data(std::size_t h, std::size_t w, std::size_t k, const std::vector<double>& v) {
  RealTensor t(h, w, k);
  t.data = v;
  return t;
}

LabelMap random_label(LabelKind kind, std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> d(h * w);
  for (float& x : d)
    x = kind == LabelKind::saliency_mask ? (rng.uniform() < 0.5 ? 1.0f : 0.0f) : static_cast<float>(rng.normal());
  return LabelMap(kind, h, w, std::move(d), "x");
}

LinearProbe random_probe(ProbeTask task, std::size_t c, std::uint64_t seed) {
  LinearProbe p = LinearProbe::zeros(task, "decoder2.sa1", 1, c);
  Rng rng(seed);
  for (double& w : p.weights) w = 0.5 * rng.normal();
  for (double& b : p.bias) b = 0.2 * rng.normal();
  return p;
}

void metric_oracles() {
  const Timer t;
  std::vector<int> top(16, 0);
  for (int i = 0; i < 8; ++i) top[static_cast<std::size_t>(i)] = 1;
  const double dice = dice_coefficient(testing::mask_from(4, 4, top), testing::mask_from(4, 4, std::vector<int>(16, 1)));
  const auto target = testing::depth_from(2, 2, {0.25f, -0.5f, 1.0f, 2.0f});
  const auto offset = testing::depth_from(2, 2, {0.75f, 0.0f, 1.5f, 2.5f});
  const double r = rmse(offset, target);
  const double h1 = huber_loss(testing::depth_from(1, 1, {0.5f}), testing::depth_from(1, 1, {0.0f}), 1.0).loss;
  const double h2 = huber_loss(testing::depth_from(1, 1, {2.0f}), testing::depth_from(1, 1, {0.0f}), 1.0).loss;
  const bool ok = std::abs(dice - 2.0 / 3.0) <= 1e-9 && std::abs(r - 0.5) <= 1e-9 && h1 == 0.125 && h2 == 1.5;
  verdict("metric oracles", ok, fmt("dice %.12f, rmse %.12f, huber %.6g / %.6g", dice, r, h1, h2), t.seconds());
}

void gradient_suite() {
  const Timer t;
  const int n = 20;
  double worst_ce = 0.0, worst_huber = 0.0, worst_smooth = 0.0, worst_e2e = 0.0;
  for (std::uint64_t s = 0; s < n; ++s) {
    const RealTensor logits = testing::random_tensor(4, 4, 2, s, 2.0);
    const LabelMap mask = random_label(LabelKind::saliency_mask, 4, 4, s + 100);
    const auto fce = [&](const std::vector<double>& x) {
      return cross_entropy_loss(softmax_channels(with_data(4, 4, 2, x)), mask).loss;
    };
    worst_ce = std::max(worst_ce, oracle::strict_fd_error(fce, logits.data,
                                                          cross_entropy_loss(softmax_channels(logits), mask).grad.data, 1e-5));

    const RealTensor pred = testing::random_tensor(5, 4, 1, s + 200, 1.5);
    const LabelMap depth = random_label(LabelKind::depth_map, 5, 4, s + 300);
    const auto fh = [&](const std::vector<double>& x) { return huber_loss(with_data(5, 4, 1, x), depth, 1.0).loss; };
    worst_huber = std::max(worst_huber, oracle::strict_fd_error(fh, pred.data, huber_loss(pred, depth, 1.0).grad.data, 1e-6));
  }
  int smooth = 0;
  for (std::uint64_t s = 0; smooth < n; ++s) {
    const RealTensor pred = testing::random_tensor(4, 5, 1, s + 400);
    bool kink = false;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 5; ++c) {
        if (c + 1 < 5 && std::abs(pred.at(r, c + 1, 0) - pred.at(r, c, 0)) < 1e-3) kink = true;
        if (r + 1 < 4 && std::abs(pred.at(r + 1, c, 0) - pred.at(r, c, 0)) < 1e-3) kink = true;
      }
    if (kink) continue;
    ++smooth;
    const auto fs_ = [&](const std::vector<double>& x) { return smoothness_loss(with_data(4, 5, 1, x)).loss; };
    worst_smooth = std::max(worst_smooth, oracle::strict_fd_error(fs_, pred.data, smoothness_loss(pred).grad.data, 1e-4));
  }
  // End to end through the probe: projection, upsample, loss, then the adjoint.
  for (std::uint64_t s = 0; s < n; ++s) {
    const ProbeTask task = s % 2 ? ProbeTask::regressor : ProbeTask::classifier;
    const RealTensor x = testing::random_tensor(3, 2 + s % 3, 3, s + 500);
    const LabelMap target = task == ProbeTask::classifier
                                ? random_label(LabelKind::saliency_mask, 11, 9, s + 600)
                                : random_label(LabelKind::depth_map, 11, 9, s + 600);
    const LinearProbe p = random_probe(task, 3, s + 700);
    ObjectiveOptions opt;
    opt.act_grad = true;
    opt.smoothness_weight = task == ProbeTask::regressor ? 0.2 : 0.0;
    const ObjectiveResult r = probe_objective(p, x, target, opt);
    const ObjectiveOptions plain{opt.huber_delta, opt.smoothness_weight, false, false};
    const auto fw = [&](const std::vector<double>& v) {
      LinearProbe q = p;
      q.weights = v;
      return probe_objective(q, x, target, plain).loss;
    };
    const auto fx = [&](const std::vector<double>& v) {
      RealTensor y = x;
      y.data = v;
      return probe_objective(p, y, target, plain).loss;
    };
    worst_e2e = std::max(worst_e2e, oracle::strict_fd_error(fw, p.weights, r.weight_grad, 1e-6));
    worst_e2e = std::max(worst_e2e, oracle::strict_fd_error(fx, x.data, r.act_grad.data, 1e-6));
  }
  const bool ok = worst_ce < 1e-4 && worst_huber < 1e-4 && worst_smooth < 1e-4 && worst_e2e < 1e-4;
  verdict("gradient suite", ok,
          fmt("worst relative error: ce %.2e, huber %.2e, smoothness %.2e, through upsample %.2e", worst_ce,
              worst_huber, worst_smooth, worst_e2e) +
              ", 20 instances each",
          t.seconds());
}

double cell_value(const Dataset& ds, ProbeTask task, const TrainConfig& cfg) {
  const SweepResult r = run_probe_sweep(ds, task, cfg);
  return r.report.cells.front().value.value_or(std::nan(""));
}

struct RecoveryNumbers {
  double dice = 0.0, rmse = 0.0;
};

RecoveryNumbers planted_recovery() {
  const Timer t;
  FixtureConfig fc;
  RecoveryNumbers n;
  n.dice = cell_value(generate_fixture(fc), ProbeTask::classifier, {});
  fc.planted = PlantedTask::regressor;
  n.rmse = cell_value(generate_fixture(fc), ProbeTask::regressor, {});
  verdict("planted recovery", n.dice >= 0.95 && n.rmse <= 0.15,
          fmt("held-out dice %.4f (>= 0.95), rmse %.4f (<= 0.15)", n.dice, n.rmse), t.seconds());
  return n;
}

void control_gap(const RecoveryNumbers& planted) {
  const Timer t;
  FixtureConfig fc;
  fc.planted = PlantedTask::none;
  const auto ds = generate_fixture(fc);
  const double dice = cell_value(ds, ProbeTask::classifier, {});
  const double r = cell_value(ds, ProbeTask::regressor, {});
  const double dice_gap = planted.dice - dice;
  const double rmse_gap = r - planted.rmse;
  const bool ok = dice <= 0.55 && r >= 0.9 && dice_gap >= 0.4 && rmse_gap >= 0.4;
  verdict("control gap", ok,
          fmt("random dice %.4f (<= 0.55), rmse %.4f (>= 0.9), gaps %.4f / %.4f (>= 0.4)", dice, r, dice_gap, rmse_gap),
          t.seconds());
}

void emergence() {
  const Timer t;
  FixtureConfig fc;
  fc.n_samples = 100;
  fc.step_noise = {2.0, 1.0, 0.5, 0.25, 0.1};
  const EmergenceCurve c = emergence_curve(generate_fixture(fc), "decoder2.sa1", ProbeTask::classifier, {});
  bool monotone = true;
  std::string series;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    if (!c.points[i].value) {
      monotone = false;
      continue;
    }
    series += (i ? " " : "") + fmt("%.3f", *c.points[i].value);
    if (i > 0 && c.points[i - 1].value && *c.points[i].value < *c.points[i - 1].value - 0.02) monotone = false;
  }
  const auto conv = convergence_step(c, 0.02);
  const bool ok = monotone && conv && *conv < c.points.back().step;
  verdict("emergence monotonicity", ok,
          "dice by step " + series + ", converged at step " + (conv ? std::to_string(*conv) : "none"),
          t.seconds());
}

void intervention_efficacy() {
  const Timer t;
  double eff[2] = {0, 0}, null[2] = {0, 0};
  std::size_t count[2] = {0, 0};
  for (int i = 0; i < 2; ++i) {
    const ProbeTask task = i == 0 ? ProbeTask::classifier : ProbeTask::regressor;
    FixtureConfig fc;
    fc.n_samples = 84;
    fc.train_fraction = 34.0 / 84.0;
    fc.planted = i == 0 ? PlantedTask::classifier : PlantedTask::regressor;
    const auto ds = generate_fixture(fc);
    const SweepResult sw = run_probe_sweep(ds, task, {});
    StudyOptions so;
    so.spec = default_intervention_spec(task, ds.layer_ids(), ds.total_steps());
    so.n_variants = 5;
    const StudyReport r = run_intervention_study(ds, sw.probes, so);
    count[i] = r.records.size();
    eff[i] = r.median_effect.value_or(std::nan(""));
    null[i] = r.median_null.value_or(std::nan(""));
  }
  const bool ok = count[0] == 250 && count[1] == 250 && eff[0] >= 0.9 && null[0] <= 0.5 && eff[1] <= 0.2 &&
                  null[1] >= 0.8;
  verdict("intervention efficacy", ok,
          fmt("saliency median dice %.4f (>= 0.9) vs null %.4f (<= 0.5); depth median rmse %.4f (<= 0.2) vs null "
              "%.4f (>= 0.8)",
              eff[0], null[0], eff[1], null[1]) +
              ", 50 samples x 5 variants",
          t.seconds());
}

// One-sided sign test: P(X >= wins) for X ~ Binomial(n, 1/2).
double sign_test_p(int wins, int n) {
  double p = 0.0;
  for (int k = wins; k <= n; ++k) p += std::exp(std::lgamma(n + 1) - std::lgamma(k + 1) - std::lgamma(n - k + 1) - n * std::log(2.0));
  return p;
}

void smoothness_ablation() {
  const Timer t;
  const int seeds = 10;
  const double weight = 0.5;
  std::string detail;
  bool ok = true;
  for (std::size_t native : {8u, 16u}) {
    int worse = 0;
    for (int s = 0; s < seeds; ++s) {
      FixtureConfig fc;
      fc.n_samples = 50;
      fc.height = native;
      fc.width = native;
      fc.label_size = 128;
      fc.depth_roughness = 1.0;
      fc.planted = PlantedTask::regressor;
      fc.seed = static_cast<std::uint64_t>(1000 + s);
      const auto ds = generate_fixture(fc);
      TrainConfig plain;
      plain.seed = static_cast<std::uint64_t>(s);
      TrainConfig smooth = plain;
      smooth.smoothness_weight = weight;
      const double r0 = cell_value(ds, ProbeTask::regressor, plain);
      const double r1 = cell_value(ds, ProbeTask::regressor, smooth);
      worse += r1 > r0;
    }
    const double p = sign_test_p(worse, seeds);
    ok = ok && p < 0.05;
    detail += fmt("%.0fx%.0f: smoothed worse in %.0f/10, p=%.4f; ", static_cast<double>(native),
                  static_cast<double>(native), worse, p);
  }
  detail += fmt("weight %.2f vs 0", weight);
  verdict("smoothness ablation", ok, detail, t.seconds());
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a));
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b));
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb || fa.empty()) return false;
  for (const auto& f : fa)
    if (testing::slurp(a / f) != testing::slurp(b / f)) return false;
  return true;
}

void determinism() {
  const Timer t;
  testing::TempDir dir("determinism");
  FixtureConfig fc;
  fc.n_samples = 20;
  fc.step_noise = {0.5, 0.1};
  fc.layer_ids = {"decoder2.sa1", "encoder3.sa1"};
  fc.label_size = 64;
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.seed = 11;
  for (const char* run : {"a", "b"}) {
    const fs::path root = dir / run;
    synthesize_fixture(fc, root / "fixture");
    const ManifestDataset ds(load_manifest(root / "fixture" / "manifest.json"));
    SweepOptions so;
    so.checkpoint_dir = root / "probes";
    const SweepResult r = run_probe_sweep(ds, ProbeTask::classifier, cfg, so);
    fs::create_directories(root / "reports");
    export_report(r.report, ReportFormat::json, root / "reports" / "sweep.json");
    export_report(r.report, ReportFormat::csv, root / "reports" / "sweep.csv");
    StudyOptions st;
    st.spec = default_intervention_spec(ProbeTask::classifier, ds.layer_ids(), ds.total_steps());
    st.spec.options.iterations = 8;
    st.n_variants = 2;
    st.output_dir = root / "intervened";
    export_report(run_intervention_study(ds, r.probes, st), ReportFormat::json, root / "reports" / "study.json");
  }
  const bool fixtures = same_tree(dir / "a" / "fixture", dir / "b" / "fixture");
  const bool probes = same_tree(dir / "a" / "probes", dir / "b" / "probes");
  const bool reports = same_tree(dir / "a" / "reports", dir / "b" / "reports");
  const bool dumps = same_tree(dir / "a" / "intervened", dir / "b" / "intervened");
  verdict("determinism", fixtures && probes && reports && dumps,
          std::string("byte-identical fixtures ") + (fixtures ? "yes" : "no") + ", checkpoints " +
              (probes ? "yes" : "no") + ", reports " + (reports ? "yes" : "no") + ", intervened dumps " +
              (dumps ? "yes" : "no"),
          t.seconds());
}

}  // namespace

int main() {
  metric_oracles();
  gradient_suite();
  const RecoveryNumbers planted = planted_recovery();
  control_gap(planted);
  emergence();
  intervention_efficacy();
  smoothness_ablation();
  determinism();
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
