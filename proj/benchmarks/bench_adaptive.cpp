#include <benchmark/benchmark.h>

#include <vector>

#include "adakd/adaptive.hpp"
#include "adakd/rng.hpp"

using namespace adakd;

namespace {

std::vector<double> random_losses(std::size_t n) {
  rng::Engine eng(rng::mix(7, 0x10ad));
  std::vector<double> xs(n);
  for (double& v : xs) v = -std::log(eng.uniform01());
  return xs;
}

void BM_alpha_weight(benchmark::State& state) {
  double d = 1e-6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(adaptive::alpha_weight(d));
    d = d < 1e6 ? d * 1.001 : 1e-6;
  }
}
BENCHMARK(BM_alpha_weight);

void BM_batch_alphas(benchmark::State& state) {
  const std::vector<double> xs = random_losses(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(adaptive::batch_alphas(xs, 1.2, 1.0));
  }
}
BENCHMARK(BM_batch_alphas)->Arg(16)->Arg(64)->Arg(512);

void BM_cache_percentile(benchmark::State& state) {
  std::vector<adaptive::CacheRecord> recs;
  const std::vector<double> xs = random_losses(state.range(0));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    recs.push_back({static_cast<std::int64_t>(i), xs[i], {1.0, 0.0}});
  }
  const adaptive::TeacherCache cache{std::move(recs)};
  int tick = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(cache.percentile_loss(tick / 10.0));
    tick = tick < 1000 ? tick + 1 : 0;
  }
}
BENCHMARK(BM_cache_percentile)->Arg(600)->Arg(100000);

void BM_k_schedule(benchmark::State& state) {
  std::size_t step = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(adaptive::k_schedule(step, 10000, 2.0, -1.0));
    step = step < 10000 ? step + 1 : 0;
  }
}
BENCHMARK(BM_k_schedule);

}  // namespace

BENCHMARK_MAIN();
