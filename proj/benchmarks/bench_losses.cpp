#include <benchmark/benchmark.h>

#include <vector>

#include "adakd/losses.hpp"
#include "adakd/rng.hpp"

using namespace adakd;

namespace {

std::vector<double> random_logits(std::size_t n, std::uint64_t seed) {
  rng::Engine eng(rng::mix(seed, 0xbe9c));
  std::vector<double> z(n);
  for (double& v : z) v = 6.0 * eng.uniform01() - 3.0;
  return z;
}

void BM_softmax(benchmark::State& state) {
  const std::vector<double> z = random_logits(state.range(0), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(losses::softmax(z, 2.0));
  }
}
BENCHMARK(BM_softmax)->Arg(3)->Arg(10)->Arg(100);

void BM_cross_entropy_grad(benchmark::State& state) {
  const std::vector<double> z = random_logits(state.range(0), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(losses::cross_entropy_grad(z, 0));
  }
}
BENCHMARK(BM_cross_entropy_grad)->Arg(3)->Arg(10)->Arg(100);

void BM_kl_distill_grad(benchmark::State& state) {
  const std::vector<double> s = random_logits(state.range(0), 3);
  const std::vector<double> t = random_logits(state.range(0), 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(losses::kl_distill_grad(s, t, 2.0));
  }
}
BENCHMARK(BM_kl_distill_grad)->Arg(3)->Arg(10)->Arg(100);

void BM_focal_grad(benchmark::State& state) {
  const std::vector<double> z = random_logits(state.range(0), 5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(losses::focal_loss_grad(z, 0, 2.0));
  }
}
BENCHMARK(BM_focal_grad)->Arg(3)->Arg(10)->Arg(100);

void BM_lambert_w0(benchmark::State& state) {
  // cycle through the three initial-guess regions
  const double xs[3] = {-0.35, 1.5, 1e6};
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(losses::lambert_w0(xs[i]));
    i = (i + 1) % 3;
  }
}
BENCHMARK(BM_lambert_w0);

void BM_super_loss(benchmark::State& state) {
  double task = 0.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(losses::super_loss(task, 1.0, 1.0));
    task = task < 5.0 ? task + 1e-3 : 0.0;
  }
}
BENCHMARK(BM_super_loss);

}  // namespace

BENCHMARK_MAIN();
