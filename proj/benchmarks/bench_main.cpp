#include <benchmark/benchmark.h>

#include "probekit/dump_io.hpp"
#include "probekit/optim.hpp"
#include "probekit/probe.hpp"
#include "probekit/resample.hpp"
#include "probekit/rng.hpp"

using namespace probekit;

namespace {

RealTensor random_tensor(std::size_t h, std::size_t w, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  RealTensor t(h, w, k);
  for (double& v : t.data) v = rng.normal();
  return t;
}

ActivationTensor random_activation(std::size_t n, std::size_t c) {
  const RealTensor t = random_tensor(n, n, c, 1);
  DumpMeta meta;
  meta.sample_id = "s0000";
  meta.layer_id = "decoder2.sa1";
  meta.model_tag = ModelTag::synthetic;
  return ActivationTensor({n, n, c}, std::vector<float>(t.data.begin(), t.data.end()), meta);
}

void BM_Upsample(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const RealTensor src = random_tensor(n, n, 2, 1);
  for (auto _ : state) benchmark::DoNotOptimize(bilinear_upsample(src, kLabelSize, kLabelSize));
}
BENCHMARK(BM_Upsample)->Arg(8)->Arg(16)->Arg(64);

void BM_UpsampleAdjoint(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const RealTensor g = random_tensor(kLabelSize, kLabelSize, 2, 2);
  for (auto _ : state) benchmark::DoNotOptimize(upsample_adjoint(g, n, n));
}
BENCHMARK(BM_UpsampleAdjoint)->Arg(8)->Arg(16)->Arg(64);

void BM_ProbeObjective(benchmark::State& state) {
  const auto task = state.range(0) == 0 ? ProbeTask::classifier : ProbeTask::regressor;
  const RealTensor act = random_tensor(16, 16, 16, 3);
  std::vector<float> d(kLabelSize * kLabelSize);
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = (i % kLabelSize) < 200 ? 1.0f : 0.0f;
  const LabelMap target(task == ProbeTask::classifier ? LabelKind::saliency_mask : LabelKind::depth_map,
                        kLabelSize, kLabelSize, d, "s0000");
  const LinearProbe p = LinearProbe::zeros(task, "decoder2.sa1", 1, 16);
  ObjectiveOptions opt;
  opt.act_grad = true;
  opt.smoothness_weight = static_cast<double>(state.range(1)) / 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(probe_objective(p, act, target, opt).loss);
}
BENCHMARK(BM_ProbeObjective)->Args({0, 0})->Args({1, 0})->Args({1, 5})->Unit(benchmark::kMillisecond);

void BM_AdamStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  AdamState st(n, AdamConfig{});
  std::vector<double> x(n, 1.0), g(n, 0.5);
  for (auto _ : state) {
    adam_step(st, x, g);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_AdamStep)->Arg(32)->Arg(16 * 16 * 1280);

void BM_DumpEncodeDecode(benchmark::State& state) {
  const ActivationTensor act = random_activation(static_cast<std::size_t>(state.range(0)), 1280);
  for (auto _ : state) {
    const auto bytes = encode_raw_dump(to_raw(act));
    benchmark::DoNotOptimize(decode_raw_dump(bytes));
  }
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(act.data().size() * sizeof(float)));
}
BENCHMARK(BM_DumpEncodeDecode)->Arg(8)->Arg(16);

}  // namespace
BENCHMARK_MAIN();
