// Serial reference vs OpenMP kernels. Argument 0 selects serial, 1 parallel.

#include <benchmark/benchmark.h>

#include "subsetvis/dataset.hpp"
#include "subsetvis/experiments.hpp"
#include "subsetvis/rng.hpp"
#include "subsetvis/sen.hpp"
#include "subsetvis/synthetic.hpp"
#include "subsetvis/tsne.hpp"

using namespace subsetvis;

namespace {

ExecPolicy policy_of(const benchmark::State& state) {
  return state.range(0) == 0 ? ExecPolicy::serial : ExecPolicy::parallel;
}

tsne::Matrix gaussian(Eigen::Index k, Eigen::Index d, std::uint64_t seed) {
  Rng rng(seed);
  tsne::Matrix x(k, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

void BM_SenGradients(benchmark::State& state) {
  const auto data = experiments::random_training_data(500, 30, 20, 1);
  sen::TrainConfig cfg;
  const auto model = sen::init_model(data, cfg);
  for (auto _ : state) benchmark::DoNotOptimize(sen::gradients(model, data, policy_of(state)));
}

void BM_TsneAffinities(benchmark::State& state) {
  const auto x = gaussian(500, 30, 2);
  for (auto _ : state) benchmark::DoNotOptimize(tsne::affinities(x, 20.0, policy_of(state)));
}

void BM_TsneKlGradient(benchmark::State& state) {
  const auto x = gaussian(500, 30, 3);
  const auto p = tsne::affinities(x, 20.0).p;
  const auto y = gaussian(500, 2, 4);
  tsne::Matrix grad;
  for (auto _ : state) benchmark::DoNotOptimize(tsne::kl_gradient(p, y, 1.0, grad, policy_of(state)));
}

void BM_CountRecords(benchmark::State& state) {
  const auto t = make_crime_like(200000, 5);
  const auto ds = ingest(t.csv, parse_schema_config(t.schema));
  const AttributeTuple tuple{ds.attribute_id("Week"), ds.attribute_id("Hour")};
  for (auto _ : state) benchmark::DoNotOptimize(count_records(ds, tuple, policy_of(state)));
}

}  // namespace

BENCHMARK(BM_SenGradients)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TsneAffinities)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_TsneKlGradient)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_CountRecords)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
