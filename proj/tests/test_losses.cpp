#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "oracles.hpp"
#include "probekit/losses.hpp"

using namespace probekit;

namespace {

RealTensor with_data(std::size_t h, std::size_t w, std::size_t k, const std::vector<double>& v) {
  RealTensor t(h, w, k);
  t.data = v;
  return t;
}

LabelMap random_mask(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> d(h * w);
  for (float& x : d) x = rng.uniform() < 0.5 ? 1.0f : 0.0f;
  return LabelMap(LabelKind::saliency_mask, h, w, std::move(d), "m");
}

LabelMap random_depth(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> d(h * w);
  for (float& x : d) x = static_cast<float>(1.5 * rng.normal());
  return LabelMap(LabelKind::depth_map, h, w, std::move(d), "d");
}

}  // namespace

TEST_CASE("softmax(0, 10) matches the closed form") {
  const RealTensor p = softmax_channels(with_data(1, 1, 2, {0.0, 10.0}));
  CHECK(p.data[1] == doctest::Approx(0.9999546021312976).epsilon(1e-14));
  CHECK(p.data[0] == doctest::Approx(4.5397868702434395e-05).epsilon(1e-12));
  const RealTensor big = softmax_channels(with_data(1, 1, 2, {1000.0, -1000.0}));
  CHECK(std::isfinite(big.data[0]));
  CHECK(big.data[0] == doctest::Approx(1.0));
}

TEST_CASE("cross-entropy reference values") {
  const auto target = testing::mask_from(2, 2, {0, 1, 1, 0});
  SUBCASE("uniform probabilities give ln 2") {
    const RealTensor p(2, 2, 2, 0.5);
    CHECK(cross_entropy_loss(p, target).loss == doctest::Approx(std::log(2.0)).epsilon(1e-14));
  }
  SUBCASE("perfect prediction gives 0") {
    const RealTensor p = with_data(2, 2, 2, {1, 0, 0, 1, 0, 1, 1, 0});
    CHECK(cross_entropy_loss(p, target).loss == doctest::Approx(0.0));
  }
  SUBCASE("zero probability at the target is clamped") {
    const RealTensor p = with_data(1, 1, 2, {1.0, 0.0});
    const auto t = testing::mask_from(1, 1, {1});
    CHECK(cross_entropy_loss(p, t).loss == doctest::Approx(-std::log(kProbEpsilon)).epsilon(1e-12));
  }
  SUBCASE("soft targets") {
    const std::vector<double> p1{0.2, 0.7, 0.9, 0.5};
    RealTensor p(2, 2, 2);
    std::vector<float> q;
    const double q1[] = {0.0, 1.0, 0.3, 0.5};
    for (int i = 0; i < 4; ++i) {
      p.data[2 * i] = 1.0 - p1[i];
      p.data[2 * i + 1] = p1[i];
      q.push_back(static_cast<float>(1.0 - q1[i]));
      q.push_back(static_cast<float>(q1[i]));
    }
    const LabelMap soft(LabelKind::saliency_logits, 2, 2, q, "q");
    CHECK(cross_entropy_loss(p, soft).loss == doctest::Approx(0.7290958489015169).epsilon(1e-7));
  }
}

TEST_CASE("cross-entropy gradient matches finite differences on random 4x4 logits") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RealTensor logits = testing::random_tensor(4, 4, 2, seed, 2.0);
    const LabelMap target = random_mask(4, 4, seed + 100);
    const LossResult r = cross_entropy_loss(softmax_channels(logits), target);
    const auto f = [&](const std::vector<double>& x) {
      return cross_entropy_loss(softmax_channels(with_data(4, 4, 2, x)), target).loss;
    };
    CHECK(oracle::strict_fd_error(f, logits.data, r.grad.data, 1e-5) < 1e-4);
  }
}

TEST_CASE("Huber reference values") {
  CHECK(huber_loss(testing::depth_from(1, 1, {0.5f}), testing::depth_from(1, 1, {0.0f}), 1.0).loss == 0.125);
  CHECK(huber_loss(testing::depth_from(1, 1, {2.0f}), testing::depth_from(1, 1, {0.0f}), 1.0).loss == 1.5);
  const auto t = testing::depth_from(2, 2, {0.3f, -1.0f, 2.0f, 0.0f});
  CHECK(huber_loss(t, t, 1.0).loss == 0.0);
  RealTensor pred = with_data(2, 2, 1, {0.5, -2.0, 0.1, 3.0});
  CHECK(huber_loss(pred, testing::depth_from(2, 2, {0, 0, 0, 0}), 1.0).loss ==
        doctest::Approx(1.0325).epsilon(1e-14));
}

TEST_CASE("Huber gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const RealTensor pred = testing::random_tensor(5, 4, 1, seed, 1.5);
    const LabelMap target = random_depth(5, 4, seed + 50);
    const double delta = 0.5 + 0.1 * static_cast<double>(seed % 5);
    const LossResult r = huber_loss(pred, target, delta);
    const auto f = [&](const std::vector<double>& x) { return huber_loss(with_data(5, 4, 1, x), target, delta).loss; };
    CHECK(oracle::strict_fd_error(f, pred.data, r.grad.data, 1e-6) < 1e-4);
  }
}

TEST_CASE("smoothness reference values") {
  CHECK(smoothness_loss(RealTensor(3, 4, 1, 2.0)).loss == 0.0);
  // Horizontal ramp with slope s: every horizontal difference is s.
  RealTensor ramp(4, 5, 1);
  for (std::size_t r = 0; r < 4; ++r)
    for (std::size_t c = 0; c < 5; ++c) ramp.at(r, c, 0) = -0.7 * static_cast<double>(c);
  CHECK(smoothness_loss(ramp).loss == doctest::Approx(0.7).epsilon(1e-14));
  CHECK(smoothness_loss(with_data(2, 2, 1, {0, 1, 3, 2})).loss == doctest::Approx(3.0));
}

TEST_CASE("smoothness gradient matches finite differences away from kinks") {
  int checked = 0;
  for (std::uint64_t seed = 0; checked < 20; ++seed) {
    const RealTensor pred = testing::random_tensor(4, 5, 1, seed);
    bool near_kink = false;
    for (std::size_t r = 0; r < 4; ++r)
      for (std::size_t c = 0; c < 5; ++c) {
        if (c + 1 < 5 && std::abs(pred.at(r, c + 1, 0) - pred.at(r, c, 0)) < 1e-3) near_kink = true;
        if (r + 1 < 4 && std::abs(pred.at(r + 1, c, 0) - pred.at(r, c, 0)) < 1e-3) near_kink = true;
      }
    if (near_kink) continue;
    ++checked;
    const LossResult res = smoothness_loss(pred);
    const auto f = [&](const std::vector<double>& x) { return smoothness_loss(with_data(4, 5, 1, x)).loss; };
    // Piecewise linear: a step well inside the kink margin is exact up to roundoff.
    CHECK(oracle::strict_fd_error(f, pred.data, res.grad.data, 1e-4) < 1e-4);
  }
}

TEST_CASE("label-map overloads agree with the real-tensor forms") {
  const LabelMap pred = random_depth(3, 3, 1);
  const LabelMap target = random_depth(3, 3, 2);
  CHECK(huber_loss(pred, target, 1.0).loss == huber_loss(pred.to_real(), target, 1.0).loss);
  CHECK(smoothness_loss(pred).loss == smoothness_loss(pred.to_real()).loss);
}
