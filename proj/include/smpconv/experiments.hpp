#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "smpconv/optimizer.hpp"
#include "smpconv/smp.hpp"

namespace smp {

// ---------------------------------------------------------------------------
// Function fitting

enum class TargetKind {
    sine_product,  // sin(4 pi x) sin(4 pi y)
    radial_sine,   // sin(6 pi (x^2 + y^2))
    zero,
};

std::string to_string(TargetKind kind);
TargetKind parse_target_kind(const std::string& name);
double target_value(TargetKind kind, double x, double y);

struct TargetFunction {
    std::string name;
    GridSpec grid;
    std::vector<double> values;  // one per grid coordinate, row-major

    /// Samples `kind` on a k x k grid over [-1, 1]^2.
    static TargetFunction sample(TargetKind kind, std::size_t grid_size = 51);
    /// Single-channel samples of an SMP filter, used for realizable targets.
    static TargetFunction from_filter(const SmpFilter& filter, const GridSpec& grid);
};

enum class FitMode {
    moving,  // positions, weights and radii train
    fixed,   // positions frozen at initialization
    frozen,  // positions and radii frozen; only weights train
};

std::string to_string(FitMode mode);
FitMode parse_fit_mode(const std::string& name);
TrainableMask trainable_mask(FitMode mode);

struct FitConfig {
    TrainConfig train;
    std::size_t n_points = 204;
    double sigma = 1.0;
    double r_init = 2.0 / 51.0 * 2.0;  // (2 / k) * d for the 51 x 51 grid
    FitMode mode = FitMode::moving;
};

struct FitReport {
    std::vector<double> mse_trace;  // loss before each update
    double final_mse = 0.0;         // loss after the last update
    FitMode mode = FitMode::moving;
    std::size_t n_points = 0;
    std::uint64_t seed = 0;
    double wall_seconds = 0.0;
};

struct FitResult {
    FitReport report;
    SmpFilter filter;
};

double mean_squared_error(std::span<const double> prediction, std::span<const double> target);

/// Minimizes the MSE between rasterize(filter, target.grid) and the target
/// samples, starting from a seeded init_smp filter.
FitResult fit_function(const TargetFunction& target, const FitConfig& config);
/// Same, starting from `initial` (n_points/sigma/r_init are ignored).
FitResult fit_function(const TargetFunction& target, const FitConfig& config, SmpFilter initial);

/// "step,mse" rows followed by a "final" row. Contains no timing data.
void write_fit_csv(const FitReport& report, std::ostream& out);

// ---------------------------------------------------------------------------
// Synthetic long-range sequence classification: the label is the sign of the
// first element of an i.i.d. Gaussian sequence, read out at the last step.

enum class SequenceModel {
    smp,    // full-length SMP kernels, FFT convolution
    dense,  // short dense causal kernels
};

std::string to_string(SequenceModel model);

struct SequenceTaskConfig {
    SequenceModel model = SequenceModel::smp;
    std::size_t length = 256;
    std::size_t n_train = 4096;
    std::size_t n_test = 1024;
    std::size_t hidden = 4;
    std::size_t n_points = 30;
    double sigma = 0.5;
    double r_init = 0.05;
    std::size_t dense_kernel = 5;
    std::size_t epochs = 40;
    std::size_t batch_size = 32;
    bool shuffle_labels = false;
    TrainConfig train = default_train();
    std::uint64_t seed = 0;

    /// Adam at 1e-3; coarser steps move points several taps at a time.
    static TrainConfig default_train() {
        TrainConfig t;
        t.base_lr = 1e-3;
        return t;
    }
    void validate() const;
};

struct SequenceReport {
    SequenceModel model = SequenceModel::smp;
    std::uint64_t seed = 0;
    bool shuffled_labels = false;
    std::size_t params = 0;
    double final_loss = 0.0;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
};

SequenceReport synth_sequence_task(const SequenceTaskConfig& config);

void write_sequence_csv(const std::vector<SequenceReport>& reports, std::ostream& out);

// ---------------------------------------------------------------------------
// Kernel visualization

/// |kernel| of one channel normalized by its maximum into 8-bit levels,
/// row-major over the 2D grid. An all-zero kernel yields all-zero pixels.
std::vector<std::uint8_t> kernel_image_pixels(const SmpFilter& filter, const GridSpec& grid,
                                              std::size_t channel = 0);

struct KernelImageFiles {
    std::filesystem::path image;   // binary portable graymap (P5)
    std::filesystem::path points;  // index,x,y,radius CSV
};

/// Writes `<stem>.pgm` and `<stem>_points.csv`.
KernelImageFiles export_kernel_image(const SmpFilter& filter, const GridSpec& grid,
                                     const std::filesystem::path& stem, std::size_t channel = 0);

}  // namespace smp
