#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace smp {

enum class BenchKind {
    smp2d,     // depthwise 2D conv with an SMP kernel
    dense2d,   // depthwise 2D conv with a dense kernel of the same extent
    smp1d_fft, // causal 1D FFT conv with a full-length SMP kernel
};

struct BenchConfig {
    std::string name;
    BenchKind kind = BenchKind::smp2d;
    std::size_t kernel_extent = 33;
    std::size_t n_points = 16;
    std::size_t channels = 8;
    std::size_t spatial = 32;  // H = W for 2D, sequence length for 1D
};

struct BenchRow {
    std::string config_name;
    std::size_t kernel_extent = 0;
    std::size_t n_points = 0;
    std::size_t params = 0;
    double median_ms = 0.0;
    double p10_ms = 0.0;
    double p90_ms = 0.0;
};

std::vector<BenchConfig> default_bench_configs();

/// Times each config `repetitions` times (>= 3) on a seeded workload. SMP
/// configs produce a forward row and a "<name>+bwd" row that adds the SMP
/// parameter backward pass.
std::vector<BenchRow> cpu_microbench(const std::vector<BenchConfig>& configs,
                                     std::size_t repetitions, std::uint64_t seed = 0);

/// config_name,kernel_extent,n_points,params,median_ms,p10_ms,p90_ms
void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out);

/// Linear-interpolated percentile (q in [0, 1]) of unsorted samples.
double percentile(std::vector<double> samples, double q);

}  // namespace smp
