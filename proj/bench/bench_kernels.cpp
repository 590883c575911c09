// Serial vs OpenMP kernels, plus the per-pair reference path the batched
// objective replaced.
#include <benchmark/benchmark.h>

#include "mscl/data.hpp"
#include "mscl/encoding.hpp"
#include "mscl/layers.hpp"
#include "mscl/objective.hpp"
#include "mscl/scoring.hpp"

namespace {

using namespace mscl;

struct Fixture {
  ModelConfig config;
  ModelParams params;
  std::vector<FeatureSample> data;
  Batch batch;
  std::vector<EncodedPair> encoded;

  Fixture() {
    SyntheticSpec spec;
    spec.num_samples = 16;
    data = generate_synthetic(spec);
    config.video_dim = spec.video_dim;
    config.query_dim = spec.query_dim;
    params = init_params(config);
    batch = batchify(data, 16).front();
    for (int k = 0; k < batch.size(); ++k) encoded.push_back(encode_sample(batch, k, params, config));
  }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

ObjectiveOptions mining_options(Execution exec) {
  ObjectiveOptions o;
  o.weights = {1.0, 10.0, 5.0};
  o.mining = true;
  o.lower_bound = 0.05;
  o.exec = exec;
  return o;
}

void BM_EvaluateBatch(benchmark::State& state) {
  auto& f = fixture();
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) {
    ModelParams grad = zeros_like(f.params);
    auto ev = evaluate_batch(f.params, f.config, f.batch, mining_options(exec), &grad);
    benchmark::DoNotOptimize(ev.total);
  }
}
BENCHMARK(BM_EvaluateBatch)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ForwardOnly(benchmark::State& state) {
  auto& f = fixture();
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) {
    auto ev = evaluate_batch(f.params, f.config, f.batch, mining_options(exec));
    benchmark::DoNotOptimize(ev.total);
  }
}
BENCHMARK(BM_ForwardOnly)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_CrossPairScores(benchmark::State& state) {
  auto& f = fixture();
  const auto exec = state.range(0) ? Execution::parallel : Execution::serial;
  for (auto _ : state) benchmark::DoNotOptimize(cross_pair_scores(f.encoded, f.params, f.config, exec).s_hat(0, 0));
}
BENCHMARK(BM_CrossPairScores)->ArgName("parallel")->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

// One pair at a time through interact + predict_scores, forward and backward.
void BM_PairwiseReference(benchmark::State& state) {
  auto& f = fixture();
  const int K = static_cast<int>(f.encoded.size());
  for (auto _ : state) {
    ModelParams grad = zeros_like(f.params);
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < K; ++j) {
        InteractionCache ic;
        ScoreCache sc;
        const auto vq = interact({f.encoded[k].video, f.encoded[j].query}, f.params, f.config, &ic);
        const auto [s, w] = predict_scores(vq, f.params, f.config, &sc);
        const Mat dvq = predict_scores_backward(f.params, sc, w.w, s.s, grad);
        benchmark::DoNotOptimize(interact_backward(f.params, f.config, ic, dvq, grad).video(0, 0));
      }
    }
  }
}
BENCHMARK(BM_PairwiseReference)->Unit(benchmark::kMillisecond);

void BM_EncodeSample(benchmark::State& state) {
  auto& f = fixture();
  for (auto _ : state) benchmark::DoNotOptimize(encode_sample(f.batch, 0, f.params, f.config).video(0, 0));
}
BENCHMARK(BM_EncodeSample)->Unit(benchmark::kMicrosecond);

void BM_Activation(benchmark::State& state) {
  const Mat z = Mat::Random(1024, 32);
  for (auto _ : state) benchmark::DoNotOptimize(activate(z, Activation::silu)(0, 0));
}
BENCHMARK(BM_Activation)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
