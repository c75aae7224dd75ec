#include <random>

#include <benchmark/benchmark.h>

#include "topeval/autoeval.hpp"
#include "topeval/coherence.hpp"
#include "topeval/synthetic.hpp"

using namespace topeval;

namespace {

const synth::World& world() {
  static const synth::World w = [] {
    synth::WorldSpec spec;
    spec.n_docs = 1000;
    return synth::make_world(spec);
  }();
  return w;
}

void BM_CountWindowCooccurrence(benchmark::State& state) {
  const auto& w = world();
  for (auto _ : state)
    benchmark::DoNotOptimize(count_cooccurrence(w.docs, w.vocab.size(), CountMode::window,
                                                static_cast<int>(state.range(0))));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.docs.size()));
}
BENCHMARK(BM_CountWindowCooccurrence)->Arg(10)->Arg(20)->Unit(benchmark::kMillisecond);

void BM_ModelCoherence(benchmark::State& state) {
  const auto& w = world();
  static const auto stats = count_cooccurrence(w.docs, w.vocab.size(), CountMode::window, 20);
  static const auto model = synth::truth_model(w);
  for (auto _ : state) benchmark::DoNotOptimize(model_coherence(model, stats, 10).model_mean);
}
BENCHMARK(BM_ModelCoherence)->Unit(benchmark::kMicrosecond);

void BM_QueryLikelihood(benchmark::State& state) {
  const auto& w = world();
  static const auto index = build_index(w.docs, w.vocab.size());
  static const auto model = synth::truth_model(w);
  const auto query = model.topics[0].top_words(10);
  std::size_t d = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(query_likelihood(d, query, index).value);
    d = (d + 1) % index.num_docs();
  }
}
BENCHMARK(BM_QueryLikelihood);

void BM_TrainRanker(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z(0, 1);
  std::vector<RankGroup> groups(static_cast<std::size_t>(state.range(0)));
  for (auto& g : groups)
    for (TopicId t = 0; t < 4; ++t)
      g.instances.push_back({t, {z(rng) + (t == 0), z(rng) + (t == 0), z(rng)}, t == 0 ? 1 : 0});
  for (auto _ : state) benchmark::DoNotOptimize(train_ranker(groups, {}).weights);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_TrainRanker)->Arg(1000)->Arg(8000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
