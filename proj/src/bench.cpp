#include "smpconv/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>

#include "smpconv/conv.hpp"
#include "smpconv/errors.hpp"
#include "smpconv/optimizer.hpp"

namespace smp {

namespace {

template <typename Fn>
std::vector<double> time_ms(std::size_t repetitions, Fn&& fn) {
    std::vector<double> samples;
    samples.reserve(repetitions);
    for (std::size_t r = 0; r < repetitions; ++r) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        samples.push_back(
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count());
    }
    return samples;
}

BenchRow make_row(const std::string& name, const BenchConfig& c, std::size_t n_points,
                  std::size_t params, const std::vector<double>& samples) {
    return {name,
            c.kernel_extent,
            n_points,
            params,
            percentile(samples, 0.5),
            percentile(samples, 0.1),
            percentile(samples, 0.9)};
}

double checksum_sink = 0.0;

}  // namespace

std::vector<BenchConfig> default_bench_configs() {
    return {
        {"dense2d_k33", BenchKind::dense2d, 33, 0, 8, 32},
        {"smp2d_k33", BenchKind::smp2d, 33, 16, 8, 32},
        {"smp2d_k65", BenchKind::smp2d, 65, 16, 8, 32},
        {"smp1d_fft_L256", BenchKind::smp1d_fft, 256, 30, 8, 256},
    };
}

double percentile(std::vector<double> samples, double q) {
    require(!samples.empty(), "percentile of an empty sample");
    std::sort(samples.begin(), samples.end());
    const double pos = q * static_cast<double>(samples.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, samples.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return samples[lo] + frac * (samples[hi] - samples[lo]);
}

std::vector<BenchRow> cpu_microbench(const std::vector<BenchConfig>& configs,
                                     std::size_t repetitions, std::uint64_t seed) {
    require(repetitions >= 3, "cpu_microbench needs at least 3 repetitions");
    std::vector<BenchRow> rows;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    for (const BenchConfig& c : configs) {
        require(c.channels >= 1 && c.spatial >= 1 && c.kernel_extent >= 1, "invalid bench config");
        if (c.kind == BenchKind::smp1d_fft) {
            Sequence signal(c.channels, c.spatial);
            for (double& v : signal.values) v = noise(rng);
            const GridSpec grid = GridSpec::causal(c.spatial);
            ConvLayerSpec layer;
            layer.causal = true;
            for (std::size_t f = 0; f < c.channels; ++f) {
                layer.filters.push_back(init_smp(c.n_points, 1, c.channels, 0.1,
                                                 std::vector<Interval>{{-1.0, 0.0}},
                                                 default_radius(c.spatial, 1), rng()));
            }
            KernelTensor upstream(c.channels, c.channels, grid.extent);
            for (double& v : upstream.values) v = noise(rng);
            const auto fwd = time_ms(repetitions, [&] {
                checksum_sink += conv1d_causal_fft(signal, layer, grid).values[0];
            });
            const auto fwd_bwd = time_ms(repetitions, [&] {
                checksum_sink += conv1d_causal_fft(signal, layer, grid).values[0];
                checksum_sink += layer_backward(layer, grid, upstream).front().d_radii[0];
            });
            rows.push_back(make_row(c.name, c, c.n_points, param_count(layer), fwd));
            rows.push_back(make_row(c.name + "+bwd", c, c.n_points, param_count(layer), fwd_bwd));
            continue;
        }

        require(c.kernel_extent % 2 == 1, "2D bench kernels need an odd extent");
        FeatureMap input(c.channels, c.spatial, c.spatial);
        for (double& v : input.values) v = noise(rng);
        const GridSpec grid = GridSpec::square(c.kernel_extent);
        if (c.kind == BenchKind::dense2d) {
            KernelTensor kernel(1, c.channels, grid.extent);
            for (double& v : kernel.values) v = noise(rng);
            const auto fwd = time_ms(repetitions, [&] {
                checksum_sink += conv2d_direct(input, kernel, true).values[0];
            });
            rows.push_back(make_row(c.name, c, 0, kernel.values.size(), fwd));
            continue;
        }

        ConvLayerSpec layer;
        layer.depthwise = true;
        layer.filters.push_back(init_smp(c.n_points, 2, c.channels, 0.05,
                                         std::vector<Interval>{{-1.0, 1.0}, {-1.0, 1.0}},
                                         default_radius(c.kernel_extent, 2), rng()));
        KernelTensor upstream(1, c.channels, grid.extent);
        for (double& v : upstream.values) v = noise(rng);
        const auto fwd = time_ms(repetitions, [&] {
            checksum_sink += conv2d_direct(input, layer, grid).values[0];
        });
        const auto fwd_bwd = time_ms(repetitions, [&] {
            checksum_sink += conv2d_direct(input, layer, grid).values[0];
            checksum_sink += layer_backward(layer, grid, upstream).front().d_radii[0];
        });
        rows.push_back(make_row(c.name, c, c.n_points, param_count(layer), fwd));
        rows.push_back(make_row(c.name + "+bwd", c, c.n_points, param_count(layer), fwd_bwd));
    }
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
    out << "config_name,kernel_extent,n_points,params,median_ms,p10_ms,p90_ms\n"
        << std::setprecision(6) << std::fixed;
    for (const BenchRow& r : rows) {
        out << r.config_name << ',' << r.kernel_extent << ',' << r.n_points << ',' << r.params << ','
            << r.median_ms << ',' << r.p10_ms << ',' << r.p90_ms << '\n';
    }
}

}  // namespace smp
