#include <benchmark/benchmark.h>

#include <vector>

#include "dmt/kernels.hpp"
#include "dmt/rng.hpp"

namespace {

using dmt::kernels::ConvDims;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  dmt::CounterRng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

// Conv layer shapes from the image models: batch 32 at 12x12 and 6x6.
ConvDims conv_dims(const benchmark::State& state) {
  ConvDims d;
  d.batch = 32;
  d.c_in = static_cast<std::size_t>(state.range(0));
  d.c_out = static_cast<std::size_t>(state.range(1));
  d.height = d.width = static_cast<std::size_t>(state.range(2));
  return d;
}

template <auto Kernel>
void bm_conv_forward(benchmark::State& state) {
  const ConvDims d = conv_dims(state);
  const auto x = random_vec(d.batch * d.c_in * d.height * d.width, 1);
  const auto w = random_vec(d.c_out * d.c_in * 9, 2);
  std::vector<double> y(d.batch * d.c_out * d.height * d.width);
  for (auto _ : state) {
    Kernel(x, w, y, d);
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(static_cast<long>(state.iterations() * d.batch * d.c_out * d.c_in *
                                            d.height * d.width * 9));
}

template <auto Kernel>
void bm_conv_grad_weight(benchmark::State& state) {
  const ConvDims d = conv_dims(state);
  const auto x = random_vec(d.batch * d.c_in * d.height * d.width, 1);
  const auto dy = random_vec(d.batch * d.c_out * d.height * d.width, 3);
  std::vector<double> dw(d.c_out * d.c_in * 9);
  for (auto _ : state) {
    Kernel(x, dy, dw, d);
    benchmark::DoNotOptimize(dw.data());
  }
}

template <auto Kernel>
void bm_matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1);
  const auto b = random_vec(n * n, 2);
  std::vector<double> c(n * n);
  for (auto _ : state) {
    Kernel(a, b, c, n, n, n);
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<long>(state.iterations() * n * n * n));
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({16, 16, 12})->Args({16, 32, 6})->Args({32, 64, 3});
}

}  // namespace

BENCHMARK(bm_conv_forward<dmt::kernels::reference::conv2d_forward>)->Apply(conv_args);
BENCHMARK(bm_conv_forward<dmt::kernels::parallel::conv2d_forward>)->Apply(conv_args);
BENCHMARK(bm_conv_grad_weight<dmt::kernels::reference::conv2d_grad_weight>)->Apply(conv_args);
BENCHMARK(bm_conv_grad_weight<dmt::kernels::parallel::conv2d_grad_weight>)->Apply(conv_args);
BENCHMARK(bm_matmul<dmt::kernels::reference::matmul>)->Arg(64)->Arg(128);
BENCHMARK(bm_matmul<dmt::kernels::parallel::matmul>)->Arg(64)->Arg(128);

BENCHMARK_MAIN();
