#include <benchmark/benchmark.h>

#include <random>

#include "labnet/blocks.hpp"
#include "labnet/kernels.hpp"
#include "labnet/model.hpp"
#include "labnet/runtime.hpp"

using namespace labnet;

namespace {

Tensor<float> random_tensor(Shape s, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.f, 1.f);
  Tensor<float> t(s);
  for (float& v : t.values()) v = u(rng);
  return t;
}

// Arguments: channels, side, dilation.
template <bool kParallel>
void BM_Conv3x3(benchmark::State& state) {
  const int64_t c = state.range(0), n = state.range(1), d = state.range(2);
  const Tensor<float> x = random_tensor(Shape{1, c, n, n}, 1);
  const Tensor<float> w = random_tensor(Shape{c, c, 3, 3}, 2);
  std::vector<float> b(static_cast<size_t>(c), 0.1f);
  for (auto _ : state) {
    Tensor<float> y = kParallel ? kernels::conv2d_forward<float>(x, w, b, d)
                                : reference::conv2d_forward<float>(x, w, b, d);
    benchmark::DoNotOptimize(y.data());
  }
  state.counters["MAC/s"] = benchmark::Counter(static_cast<double>(conv_macs(c, c, 3, n * n)),
                                               benchmark::Counter::kIsIterationInvariantRate);
}

template <bool kParallel>
void BM_Resize(benchmark::State& state) {
  const int64_t n = state.range(0);
  const Tensor<float> x = random_tensor(Shape{1, 16, n, n}, 3);
  for (auto _ : state) {
    Tensor<float> y = kParallel ? kernels::resize_forward<float>(x, 2 * n, 2 * n, ResizeMode::kBilinear)
                                : reference::resize_forward<float>(x, 2 * n, 2 * n, ResizeMode::kBilinear);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool kParallel>
void BM_Laplacian(benchmark::State& state) {
  const int64_t n = state.range(0);
  const Tensor<float> x = random_tensor(Shape{1, 48, n, n}, 4);
  const Stencil3x3 k = laplacian_stencil(LaplacianKind::kFourNeighbor);
  for (auto _ : state) {
    Tensor<float> y = kParallel ? kernels::stencil3x3_forward<float>(x, k)
                                : reference::stencil3x3_forward<float>(x, k);
    benchmark::DoNotOptimize(y.data());
  }
}

void BM_ModelForward(benchmark::State& state) {
  const int64_t n = state.range(0);
  const ModelConfig cfg;
  ModelParams<float> p = init_params<float>(cfg, 1);
  const Tensor<float> x = random_tensor(Shape{1, 3, n, n}, 5);
  Tensor<float> mask(Shape{1, 1, n, n});
  for (int64_t y = n / 4; y < n / 2; ++y)
    for (int64_t xx = n / 4; xx < 3 * n / 4; ++xx) mask[y * n + xx] = 1.f;
  for (auto _ : state) {
    Tensor<float> y = predict(p, x, mask);
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_Conv3x3<true>)->Name("conv3x3/parallel")->Args({16, 128, 1})->Args({48, 64, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3<false>)->Name("conv3x3/reference")->Args({16, 128, 1})->Args({48, 64, 4})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Resize<true>)->Name("resize/parallel")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Resize<false>)->Name("resize/reference")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Laplacian<true>)->Name("laplacian/parallel")->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Laplacian<false>)->Name("laplacian/reference")->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ModelForward)->Name("model/forward")->Arg(128)->Unit(benchmark::kMillisecond)->Iterations(3);

int main(int argc, char** argv) {
  tune_blas_runtime(argv);
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}
