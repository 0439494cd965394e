#pragma once

// Self-moving point (SMP) functions: a set of learnable points, each with a
// position, a per-channel weight vector and a radius. The function value at a
// query x is the count-normalized sum of L1-cone weighted point weights over
// the points whose cone is strictly positive at x.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "smpconv/kernel_tensor.hpp"

namespace smp {

struct RadiusBounds {
    double min = 1e-4;
    double max = 1.0;

    friend bool operator==(const RadiusBounds&, const RadiusBounds&) = default;
};

class SmpFilter {
public:
    SmpFilter() = default;

    /// positions: n_points x dim, weights: n_points x channels, both row-major.
    /// Throws ContractError when sizes disagree or a radius is outside bounds.
    SmpFilter(std::size_t dim, std::size_t channels, std::vector<double> positions,
              std::vector<double> weights, std::vector<double> radii, RadiusBounds bounds = {});

    std::size_t dim() const { return dim_; }
    std::size_t channels() const { return channels_; }
    std::size_t n_points() const { return radii_.size(); }
    const RadiusBounds& bounds() const { return bounds_; }

    std::span<const double> position(std::size_t i) const {
        return {positions_.data() + i * dim_, dim_};
    }
    std::span<const double> weight(std::size_t i) const {
        return {weights_.data() + i * channels_, channels_};
    }
    double radius(std::size_t i) const { return radii_[i]; }

    std::span<const double> positions() const { return positions_; }
    std::span<const double> weights() const { return weights_; }
    std::span<const double> radii() const { return radii_; }

    // Mutable flat views. Sizes are fixed; callers that write radii must
    // follow up with project_radii().
    std::span<double> positions() { return positions_; }
    std::span<double> weights() { return weights_; }
    std::span<double> radii() { return radii_; }

    /// Clamps every radius into [bounds.min, bounds.max].
    void project_radii();

    /// Re-checks all invariants (sizes, finite values, radius bounds).
    void validate() const;

    friend bool operator==(const SmpFilter&, const SmpFilter&) = default;

private:
    std::size_t dim_ = 0;
    std::size_t channels_ = 0;
    std::vector<double> positions_;
    std::vector<double> weights_;
    std::vector<double> radii_;
    RadiusBounds bounds_;
};

struct Interval {
    double lo = -1.0;
    double hi = 1.0;
};

/// Evenly spaced query lattice over a box. Endpoints are included when the
/// extent is at least 2; a single sample sits at the interval midpoint.
/// 2D grids are row-major: the first coordinate is the slowest index.
struct GridSpec {
    std::vector<std::size_t> extent;
    std::vector<Interval> domain;

    static GridSpec line(std::size_t k, Interval d = {-1.0, 1.0});
    static GridSpec square(std::size_t k, Interval d = {-1.0, 1.0});
    /// Causal 1D lattice over [-1, 0]; the last tap sits at 0 (lag zero).
    static GridSpec causal(std::size_t length);

    std::size_t dim() const { return extent.size(); }
    std::size_t size() const;
    void validate() const;

    double axis_coordinate(std::size_t axis, std::size_t index) const;
    void coordinate(std::size_t flat_index, std::span<double> out) const;
    /// size() x dim() row-major coordinate table.
    std::vector<double> coordinates() const;
};

struct SmpGradients {
    std::size_t dim = 0;
    std::size_t channels = 0;
    std::vector<double> d_positions;
    std::vector<double> d_weights;
    std::vector<double> d_radii;

    static SmpGradients zeros_like(const SmpFilter& filter);
    std::size_t n_points() const { return d_radii.size(); }
    bool congruent_with(const SmpFilter& filter) const;
    bool all_finite() const;
    SmpGradients& operator+=(const SmpGradients& other);
};

/// 1 - ||x - p||_1 / r. Throws std::domain_error for r <= 0.
double distance_g(std::span<const double> x, std::span<const double> p, double r);

/// Indices i with distance_g(x, p_i, r_i) > 0, ascending.
std::vector<std::size_t> neighborhood(std::span<const double> x, const SmpFilter& filter);

/// Count-normalized cone average at x; zero vector when no point covers x.
std::vector<double> evaluate_smp(std::span<const double> x, const SmpFilter& filter);
void evaluate_smp(std::span<const double> x, const SmpFilter& filter, std::span<double> out);

/// Samples the filter on every grid coordinate. The result has
/// out_channels = 1 and in_channels = filter.channels().
KernelTensor rasterize(const SmpFilter& filter, const GridSpec& grid);

/// Cotangents of <upstream, rasterize(filter, grid)> with respect to the
/// filter parameters. Neighbor counts are treated as constants and
/// sign(0) = 0 in the position term.
SmpGradients smp_backward(const SmpFilter& filter, const GridSpec& grid,
                          const KernelTensor& upstream);

/// Serial kernels kept as the reference path for tests and benchmarks.
namespace reference {

KernelTensor rasterize(const SmpFilter& filter, const GridSpec& grid);
SmpGradients smp_backward(const SmpFilter& filter, const GridSpec& grid,
                          const KernelTensor& upstream);

}  // namespace reference

}  // namespace smp
