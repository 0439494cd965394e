// Serial reference kernels against their OpenMP counterparts.

#include <benchmark/benchmark.h>

#include <random>

#include "smpconv/conv.hpp"
#include "smpconv/optimizer.hpp"
#include "smpconv/smp.hpp"

namespace {

using namespace smp;

SmpFilter make_filter(std::size_t n_points, std::size_t channels) {
    const std::vector<Interval> square{{-1.0, 1.0}, {-1.0, 1.0}};
    return init_smp(n_points, 2, channels, 0.5, square, 0.2, 42);
}

KernelTensor make_upstream(std::size_t channels, std::size_t k) {
    KernelTensor up(1, channels, {k, k});
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : up.values) v = n(rng);
    return up;
}

FeatureMap make_input(std::size_t channels, std::size_t size) {
    FeatureMap in(channels, size, size);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : in.values) v = n(rng);
    return in;
}

void BM_RasterizeSerial(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const SmpFilter f = make_filter(64, 8);
    const GridSpec g = GridSpec::square(k);
    for (auto _ : state) benchmark::DoNotOptimize(reference::rasterize(f, g));
}

void BM_RasterizeParallel(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const SmpFilter f = make_filter(64, 8);
    const GridSpec g = GridSpec::square(k);
    for (auto _ : state) benchmark::DoNotOptimize(rasterize(f, g));
}

void BM_BackwardSerial(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const SmpFilter f = make_filter(64, 8);
    const GridSpec g = GridSpec::square(k);
    const KernelTensor up = make_upstream(8, k);
    for (auto _ : state) benchmark::DoNotOptimize(reference::smp_backward(f, g, up));
}

void BM_BackwardParallel(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const SmpFilter f = make_filter(64, 8);
    const GridSpec g = GridSpec::square(k);
    const KernelTensor up = make_upstream(8, k);
    for (auto _ : state) benchmark::DoNotOptimize(smp_backward(f, g, up));
}

void BM_Conv2dSerial(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const FeatureMap in = make_input(8, 32);
    const KernelTensor kernel = rasterize(make_filter(16, 8), GridSpec::square(k));
    for (auto _ : state) benchmark::DoNotOptimize(reference::conv2d_direct(in, kernel, true));
}

void BM_Conv2dParallel(benchmark::State& state) {
    const auto k = static_cast<std::size_t>(state.range(0));
    const FeatureMap in = make_input(8, 32);
    const KernelTensor kernel = rasterize(make_filter(16, 8), GridSpec::square(k));
    for (auto _ : state) benchmark::DoNotOptimize(conv2d_direct(in, kernel, true));
}

}  // namespace

BENCHMARK(BM_RasterizeSerial)->Arg(33)->Arg(65)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_RasterizeParallel)->Arg(33)->Arg(65)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardSerial)->Arg(33)->Arg(65)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackwardParallel)->Arg(33)->Arg(65)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dSerial)->Arg(7)->Arg(33)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv2dParallel)->Arg(7)->Arg(33)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
