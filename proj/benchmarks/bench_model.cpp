#include <benchmark/benchmark.h>

#include <vector>

#include "adakd/losses.hpp"
#include "adakd/model.hpp"
#include "adakd/rng.hpp"

using namespace adakd;

namespace {

std::vector<double> random_input(std::size_t n) {
  rng::Engine eng(rng::mix(3, 0x30d3));
  std::vector<double> x(n);
  for (double& v : x) v = 4.0 * eng.uniform01() - 2.0;
  return x;
}

void BM_forward_teacher(benchmark::State& state) {
  const model::DenseNet net = model::DenseNet::make({2, 64, 64, 3},
                                                    model::Activation::relu, 1);
  const std::vector<double> x = random_input(2);
  model::Trace trace;
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x, trace));
  }
}
BENCHMARK(BM_forward_teacher);

void BM_forward_student(benchmark::State& state) {
  const model::DenseNet net = model::DenseNet::make({2, 3},
                                                    model::Activation::relu, 1);
  const std::vector<double> x = random_input(2);
  model::Trace trace;
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x, trace));
  }
}
BENCHMARK(BM_forward_student);

void BM_forward_backward_teacher(benchmark::State& state) {
  const model::DenseNet net = model::DenseNet::make({2, 64, 64, 3},
                                                    model::Activation::relu, 1);
  const std::vector<double> x = random_input(2);
  model::Trace trace;
  model::GradientSet grads = net.zero_gradients();
  for (auto _ : state) {
    const std::vector<double> z = net.forward(x, trace);
    const losses::LossGrad lg = losses::cross_entropy_grad(z, 1);
    grads.zero();
    net.backward_into(trace, lg.grad, grads);
    benchmark::DoNotOptimize(grads);
  }
}
BENCHMARK(BM_forward_backward_teacher);

void BM_init(benchmark::State& state) {
  std::uint64_t seed = 1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        model::DenseNet::make({2, 64, 64, 3}, model::Activation::relu, seed++));
  }
}
BENCHMARK(BM_init);

}  // namespace

BENCHMARK_MAIN();
