#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "probekit/errors.hpp"
#include "probekit/intervention.hpp"

using namespace probekit;
using testing::activation_from;

namespace {

LabelMap square_mask(std::size_t n, std::size_t r0, std::size_t c0, std::size_t side) {
  std::vector<float> d(n * n, 0.0f);
  for (std::size_t r = r0; r < r0 + side; ++r)
    for (std::size_t c = c0; c < c0 + side; ++c) d[r * n + c] = 1.0f;
  return LabelMap(LabelKind::saliency_mask, n, n, std::move(d), "sq");
}

LinearProbe random_probe(ProbeTask task, std::size_t c, std::uint64_t seed) {
  LinearProbe p = LinearProbe::zeros(task, "decoder2.sa1", 1, c);
  Rng rng(seed);
  for (double& w : p.weights) w = rng.normal();
  for (double& b : p.bias) b = 0.1 * rng.normal();
  return p;
}

double relative_drift(const ActivationTensor& a, const ActivationTensor& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - b.data()[i];
    num += d * d;
    den += static_cast<double>(a.data()[i]) * a.data()[i];
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("translation magnitudes and signs") {
  int negative = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const TranslationSample t = sample_translation(derive_seed(11, static_cast<std::uint64_t>(i)));
    for (int v : {t.dx, t.dy}) {
      CHECK(std::abs(v) >= 90);
      CHECK(std::abs(v) <= 120);
      negative += v < 0;
    }
  }
  CHECK(std::abs(static_cast<double>(negative) / (2.0 * n) - 0.5) <= 0.02);
  CHECK(sample_translation(3) == sample_translation(3));
}

TEST_CASE("translate_mask") {
  const LabelMap sq = square_mask(512, 200, 100, 100);
  CHECK(translate_mask(sq, {0, 0}).mask == sq);

  const MaskTranslation right = translate_mask(sq, {100, 0});
  CHECK(right.mask.count_salient() == 10000);
  CHECK(right.mask.at(200, 200) == 1.0f);
  CHECK(right.mask.at(200, 199) == 0.0f);
  CHECK_FALSE(right.empty);

  const MaskTranslation clipped = translate_mask(sq, {0, 262});
  CHECK(clipped.mask.count_salient() == 50 * 100);

  const MaskTranslation gone = translate_mask(sq, {-300, 0});
  CHECK(gone.empty);
  CHECK(gone.mask.count_salient() == 0);

  CHECK_THROWS_AS(translate_mask(testing::depth_from(1, 1, {0.0f}), {1, 1}), ArgumentError);
}

TEST_CASE("translate_depth replicates the border") {
  std::vector<float> ramp(8 * 8);
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) ramp[r * 8 + c] = static_cast<float>(c);
  const LabelMap moved = translate_depth(testing::depth_from(8, 8, ramp), {3, 0});
  for (std::size_t r = 0; r < 8; ++r) {
    for (std::size_t c = 0; c < 3; ++c) CHECK(moved.at(r, c) == 0.0f);
    for (std::size_t c = 3; c < 8; ++c) CHECK(moved.at(r, c) == static_cast<float>(c - 3));
  }
  const LabelMap flat = testing::depth_from(4, 4, std::vector<float>(16, 0.3f));
  CHECK(translate_depth(flat, {50, -50}) == flat);
}

TEST_CASE("draw_mask_target keeps enough of the object") {
  const LabelMap sq = square_mask(512, 206, 206, 100);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const MaskTarget t = draw_mask_target(sq, seed);
    CHECK_FALSE(t.degenerate);
    CHECK(t.attempts >= 1);
    CHECK(t.mask.count_salient() >= 500);
    CHECK(t.mask == translate_mask(sq, t.translation).mask);
  }
  // Every shift of 90 pixels or more leaves a small map empty.
  const LabelMap small = square_mask(16, 4, 4, 8);
  const MaskTarget bad = draw_mask_target(small, 1);
  CHECK(bad.degenerate);
  CHECK(bad.attempts == kMaxTranslationAttempts);
}

TEST_CASE("insert_object_depth") {
  const std::size_t n = 64;
  const LabelMap scene = testing::depth_from(n, n, std::vector<float>(n * n, 2.0f));
  std::vector<float> src(n * n);
  for (std::size_t i = 0; i < src.size(); ++i) src[i] = 0.01f * static_cast<float>(i % n);
  const LabelMap source = testing::depth_from(n, n, src);
  const LabelMap obj = square_mask(n, 20, 20, 20);

  const LabelMap same = insert_object_depth(scene, obj, source, {0, 0}, 0.0, 1.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      CHECK(same.at(r, c) == doctest::Approx(obj.at(r, c) == 1.0f ? source.at(r, c) : 2.0f));

  const LabelMap raised = insert_object_depth(scene, obj, source, {5, -3}, 1.0, 1.0);
  CHECK(raised.at(17 + 5, 25 + 5) == doctest::Approx(source.at(20, 25) + 1.0f));
  CHECK(raised.at(20, 20) == 2.0f);

  const LabelMap half = insert_object_depth(scene, obj, source, {0, 0}, 0.0, 0.5);
  std::size_t area = 0;
  for (std::size_t i = 0; i < half.pixels(); ++i) area += half.data()[i] != 2.0f;
  CHECK(std::abs(static_cast<double>(area) - 100.0) <= 25.0);

  CHECK_THROWS_AS(insert_object_depth(scene, obj, source, {100, 0}, 0.0, 1.0), ArgumentError);
  CHECK_THROWS_AS(insert_object_depth(scene, obj, source, {0, 0}, 0.0, 1.5), ArgumentError);
}

TEST_CASE("intervening toward the probe's own output is a fixed point") {
  const auto act = activation_from(testing::random_tensor(4, 4, 3, 1));
  const LinearProbe p = random_probe(ProbeTask::classifier, 3, 2);
  const auto own = probe_forward_classifier(p, act, 32, 32).probabilities;
  const InterventionResult r = intervene_activation(act, p, own);
  CHECK_FALSE(r.aborted);
  CHECK(r.loss_trace.size() == 129);
  CHECK(relative_drift(act, r.activation) <= 1e-3);
}

TEST_CASE("zero iterations return the input unchanged but flagged") {
  const auto act = activation_from(testing::random_tensor(3, 3, 2, 5));
  const LinearProbe p = random_probe(ProbeTask::regressor, 2, 6);
  InterventionOptions opt;
  opt.iterations = 0;
  const InterventionResult r =
      intervene_activation(act, p, testing::depth_from(6, 6, std::vector<float>(36, 1.0f)), opt);
  CHECK(r.loss_trace.size() == 1);
  CHECK(std::equal(act.data().begin(), act.data().end(), r.activation.data().begin()));
  CHECK(r.activation.meta().intervened);
  CHECK_FALSE(act.meta().intervened);
}

TEST_CASE("intervention moves the prediction toward the target") {
  const auto act = activation_from(testing::random_tensor(4, 4, 4, 7));
  const LinearProbe p = random_probe(ProbeTask::classifier, 4, 8);
  const LabelMap target = square_mask(32, 8, 8, 16);
  const double before = dice_coefficient(target, probe_forward_classifier(p, act, 32, 32).mask);
  InterventionOptions opt;
  opt.iterations = 512;
  const InterventionResult r = intervene_activation(act, p, target, opt);
  CHECK(r.loss_trace.back() < 0.5 * r.loss_trace.front());
  const double after = dice_coefficient(target, probe_forward_classifier(p, r.activation, 32, 32).mask);
  CHECK(after > before);
  CHECK(after > 0.9);
  CHECK_THROWS_AS(intervene_activation(act, p, testing::depth_from(32, 32, std::vector<float>(1024, 0.0f))),
                  ArgumentError);
}

TEST_CASE("evaluate_intervention") {
  const LabelMap a = square_mask(8, 0, 0, 4);
  const LabelMap b = square_mask(8, 4, 4, 4);
  const InterventionEffect e = evaluate_intervention(a, a, b);
  CHECK(e.effect == 1.0);
  CHECK(e.null_baseline == 0.0);
  const auto d0 = testing::depth_from(1, 2, {0.0f, 0.0f});
  const auto d1 = testing::depth_from(1, 2, {1.0f, 1.0f});
  const InterventionEffect f = evaluate_intervention(d0, d0, d1);
  CHECK(f.effect == 0.0);
  CHECK(f.null_baseline == doctest::Approx(1.0));
  CHECK_THROWS_AS(evaluate_intervention(a, d0, b), ArgumentError);
}

TEST_CASE("intervention specs round-trip through JSON") {
  InterventionSpec s = default_intervention_spec(ProbeTask::regressor, {"decoder2.sa1", "encoder1.sa1"}, 10);
  s.seed = 77;
  s.options.iterations = 12;
  s.options.max_grad_norm = 2.5;
  s.target_sample_id = "s0003";
  s.translation = TranslationSample{-95, 110};
  s.variant = 4;
  CHECK(intervention_spec_from_json(intervention_spec_to_json(s)) == s);
  CHECK_THROWS_AS(intervention_spec_from_json("{"), ValidationError);
  CHECK_THROWS_AS(intervention_spec_from_json(R"({"task": "blur"})"), ValidationError);
}

TEST_CASE("default policies") {
  const std::vector<std::string> layers{"encoder1.sa1", "bottleneck.sa1", "decoder2.sa1", "decoder3.sa2"};
  const InterventionSpec sal = default_intervention_spec(ProbeTask::classifier, layers, 10);
  CHECK(sal.step_policy == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(sal.layer_policy == std::vector<std::string>{"decoder2.sa1", "decoder3.sa2"});
  const InterventionSpec dep = default_intervention_spec(ProbeTask::regressor, layers, 2);
  CHECK(dep.step_policy == std::vector<int>{1, 2});
  CHECK(dep.layer_policy == layers);
}
