#include "smpconv/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "smpconv/errors.hpp"

namespace smp {

std::string to_string(TargetKind kind) {
    switch (kind) {
        case TargetKind::sine_product: return "sine_product";
        case TargetKind::radial_sine: return "radial_sine";
        case TargetKind::zero: return "zero";
    }
    return "unknown";
}

TargetKind parse_target_kind(const std::string& name) {
    if (name == "sine_product") return TargetKind::sine_product;
    if (name == "radial_sine") return TargetKind::radial_sine;
    if (name == "zero") return TargetKind::zero;
    throw ContractError("unknown target '" + name + "' (expected sine_product, radial_sine or zero)");
}

double target_value(TargetKind kind, double x, double y) {
    constexpr double pi = std::numbers::pi;
    switch (kind) {
        case TargetKind::sine_product: return std::sin(4.0 * pi * x) * std::sin(4.0 * pi * y);
        case TargetKind::radial_sine: return std::sin(2.0 * pi * (x * x + y * y) * 3.0);
        case TargetKind::zero: return 0.0;
    }
    return 0.0;
}

TargetFunction TargetFunction::sample(TargetKind kind, std::size_t grid_size) {
    require(grid_size >= 1, "target grid size must be >= 1");
    TargetFunction t;
    t.name = to_string(kind);
    t.grid = GridSpec::square(grid_size);
    const std::vector<double> coords = t.grid.coordinates();
    t.values.resize(t.grid.size());
    for (std::size_t q = 0; q < t.values.size(); ++q) {
        t.values[q] = target_value(kind, coords[2 * q], coords[2 * q + 1]);
    }
    return t;
}

TargetFunction TargetFunction::from_filter(const SmpFilter& filter, const GridSpec& grid) {
    require(filter.channels() == 1, "realizable targets need a single-channel filter");
    TargetFunction t;
    t.name = "smp";
    t.grid = grid;
    t.values = rasterize(filter, grid).values;
    return t;
}

std::string to_string(FitMode mode) {
    switch (mode) {
        case FitMode::moving: return "moving";
        case FitMode::fixed: return "fixed";
        case FitMode::frozen: return "frozen";
    }
    return "unknown";
}

FitMode parse_fit_mode(const std::string& name) {
    if (name == "moving") return FitMode::moving;
    if (name == "fixed") return FitMode::fixed;
    if (name == "frozen") return FitMode::frozen;
    throw ContractError("unknown fit mode '" + name + "' (expected moving, fixed or frozen)");
}

TrainableMask trainable_mask(FitMode mode) {
    switch (mode) {
        case FitMode::moving: return {true, true, true};
        case FitMode::fixed: return {false, true, true};
        case FitMode::frozen: return {false, true, false};
    }
    return {};
}

double mean_squared_error(std::span<const double> prediction, std::span<const double> target) {
    require(prediction.size() == target.size() && !target.empty(), "mse: size mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double e = prediction[i] - target[i];
        sum += e * e;
    }
    return sum / static_cast<double>(target.size());
}

FitResult fit_function(const TargetFunction& target, const FitConfig& config) {
    require(target.grid.dim() >= 1 && target.grid.dim() <= 2, "target grid must be 1D or 2D");
    const std::vector<Interval> domain(target.grid.domain.begin(), target.grid.domain.end());
    SmpFilter initial = init_smp(config.n_points, target.grid.dim(), 1, config.sigma, domain,
                                 config.r_init, config.train.seed, config.train.bounds());
    return fit_function(target, config, std::move(initial));
}

FitResult fit_function(const TargetFunction& target, const FitConfig& config, SmpFilter filter) {
    config.train.validate();
    target.grid.validate();
    require(filter.channels() == 1, "fit_function fits single-channel filters");
    require(target.values.size() == target.grid.size(), "target values do not match its grid");

    const auto start = std::chrono::steady_clock::now();
    const TrainableMask mask = trainable_mask(config.mode);
    SmpOptimizer optimizer(config.train, std::span<const SmpFilter>(&filter, 1));
    const double scale = 2.0 / static_cast<double>(target.values.size());

    FitReport report;
    report.mode = config.mode;
    report.n_points = filter.n_points();
    report.seed = config.train.seed;
    report.mse_trace.reserve(config.train.steps);

    KernelTensor upstream(1, 1, target.grid.extent);
    for (std::size_t step = 0; step < config.train.steps; ++step) {
        const KernelTensor prediction = rasterize(filter, target.grid);
        const double loss = mean_squared_error(prediction.values, target.values);
        if (!std::isfinite(loss)) {
            throw NumericError("fit diverged at step " + std::to_string(step));
        }
        report.mse_trace.push_back(loss);
        for (std::size_t q = 0; q < upstream.values.size(); ++q) {
            upstream.values[q] = scale * (prediction.values[q] - target.values[q]);
        }
        const SmpGradients grads = smp_backward(filter, target.grid, upstream);
        optimizer.step(std::span<SmpFilter>(&filter, 1), std::span<const SmpGradients>(&grads, 1),
                       mask);
    }
    report.final_mse = mean_squared_error(rasterize(filter, target.grid).values, target.values);
    if (!std::isfinite(report.final_mse)) throw NumericError("fit diverged after the last step");
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(report), std::move(filter)};
}

void write_fit_csv(const FitReport& report, std::ostream& out) {
    out << "step,mse\n" << std::setprecision(17);
    for (std::size_t i = 0; i < report.mse_trace.size(); ++i) {
        out << i << ',' << report.mse_trace[i] << '\n';
    }
    out << "final," << report.final_mse << '\n';
}

std::vector<std::uint8_t> kernel_image_pixels(const SmpFilter& filter, const GridSpec& grid,
                                              std::size_t channel) {
    require(filter.dim() == 2 && grid.dim() == 2, "kernel images need a 2D filter and grid");
    require(channel < filter.channels(), "kernel image channel out of range");
    const KernelTensor kernel = rasterize(filter, grid);
    const auto values = kernel.slice(0, channel);
    double peak = 0.0;
    for (double v : values) peak = std::max(peak, std::abs(v));
    std::vector<std::uint8_t> pixels(values.size(), 0);
    if (peak == 0.0) return pixels;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double level = std::round(255.0 * std::abs(values[i]) / peak);
        pixels[i] = static_cast<std::uint8_t>(std::clamp(level, 0.0, 255.0));
    }
    return pixels;
}

KernelImageFiles export_kernel_image(const SmpFilter& filter, const GridSpec& grid,
                                     const std::filesystem::path& stem, std::size_t channel) {
    const std::vector<std::uint8_t> pixels = kernel_image_pixels(filter, grid, channel);
    KernelImageFiles files;
    files.image = stem;
    files.image += ".pgm";
    files.points = stem;
    files.points += "_points.csv";

    std::ofstream image(files.image, std::ios::binary);
    if (!image) throw std::runtime_error("cannot open '" + files.image.string() + "' for writing");
    image << "P5\n" << grid.extent[1] << ' ' << grid.extent[0] << "\n255\n";
    image.write(reinterpret_cast<const char*>(pixels.data()),
                static_cast<std::streamsize>(pixels.size()));
    if (!image) throw std::runtime_error("failed writing '" + files.image.string() + "'");

    std::ofstream points(files.points);
    if (!points) throw std::runtime_error("cannot open '" + files.points.string() + "' for writing");
    points << "index,x,y,radius\n" << std::setprecision(17);
    for (std::size_t i = 0; i < filter.n_points(); ++i) {
        const auto p = filter.position(i);
        points << i << ',' << p[0] << ',' << p[1] << ',' << filter.radius(i) << '\n';
    }
    if (!points) throw std::runtime_error("failed writing '" + files.points.string() + "'");
    return files;
}

}  // namespace smp
