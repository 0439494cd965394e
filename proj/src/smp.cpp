#include "smpconv/smp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "smpconv/errors.hpp"

namespace smp {

namespace {

// L1 norm of x - p.
inline double l1_distance(const double* x, const double* p, std::size_t dim) {
    double d = 0.0;
    for (std::size_t k = 0; k < dim; ++k) d += std::abs(x[k] - p[k]);
    return d;
}

inline double cone(const double* x, const double* p, double r, std::size_t dim) {
    return 1.0 - l1_distance(x, p, dim) / r;
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Shared by the serial and parallel rasterizers so both produce identical bits.
void evaluate_at(const double* x, const SmpFilter& filter, double* out) {
    const std::size_t dim = filter.dim();
    const std::size_t channels = filter.channels();
    const double* positions = filter.positions().data();
    const double* weights = filter.weights().data();
    const double* radii = filter.radii().data();

    std::fill(out, out + channels, 0.0);
    std::size_t count = 0;
    for (std::size_t i = 0; i < filter.n_points(); ++i) {
        const double g = cone(x, positions + i * dim, radii[i], dim);
        if (g > 0.0) {
            ++count;
            const double* w = weights + i * channels;
            for (std::size_t c = 0; c < channels; ++c) out[c] += g * w[c];
        }
    }
    if (count > 0) {
        const double inv = 1.0 / static_cast<double>(count);
        for (std::size_t c = 0; c < channels; ++c) out[c] *= inv;
    }
}

void check_grid_matches(const SmpFilter& filter, const GridSpec& grid) {
    grid.validate();
    require(grid.dim() == filter.dim(),
            "grid dimension " + std::to_string(grid.dim()) + " does not match filter dimension " +
                std::to_string(filter.dim()));
}

void check_upstream(const SmpFilter& filter, const GridSpec& grid, const KernelTensor& upstream) {
    check_grid_matches(filter, grid);
    require(upstream.out_channels == 1 && upstream.in_channels == filter.channels() &&
                upstream.extent == grid.extent,
            "upstream cotangent shape does not match rasterize output");
}

}  // namespace

SmpFilter::SmpFilter(std::size_t dim, std::size_t channels, std::vector<double> positions,
                     std::vector<double> weights, std::vector<double> radii, RadiusBounds bounds)
    : dim_(dim),
      channels_(channels),
      positions_(std::move(positions)),
      weights_(std::move(weights)),
      radii_(std::move(radii)),
      bounds_(bounds) {
    validate();
}

void SmpFilter::project_radii() {
    for (double& r : radii_) r = std::clamp(r, bounds_.min, bounds_.max);
}

void SmpFilter::validate() const {
    require(dim_ == 1 || dim_ == 2, "filter dimension must be 1 or 2, got " + std::to_string(dim_));
    require(channels_ >= 1, "filter needs at least one channel");
    require(bounds_.min > 0.0 && bounds_.min < bounds_.max, "radius bounds must satisfy 0 < min < max");
    const std::size_t n = radii_.size();
    require(positions_.size() == n * dim_, "positions must hold n_points x dim values");
    require(weights_.size() == n * channels_, "weights must hold n_points x channels values");
    for (double v : positions_) require(std::isfinite(v), "non-finite position");
    for (double v : weights_) require(std::isfinite(v), "non-finite weight");
    for (std::size_t i = 0; i < n; ++i) {
        require(std::isfinite(radii_[i]) && radii_[i] >= bounds_.min && radii_[i] <= bounds_.max,
                "radius " + std::to_string(i) + " = " + std::to_string(radii_[i]) +
                    " outside [" + std::to_string(bounds_.min) + ", " + std::to_string(bounds_.max) +
                    "]");
    }
}

GridSpec GridSpec::line(std::size_t k, Interval d) { return GridSpec{{k}, {d}}; }

GridSpec GridSpec::square(std::size_t k, Interval d) { return GridSpec{{k, k}, {d, d}}; }

GridSpec GridSpec::causal(std::size_t length) { return GridSpec{{length}, {{-1.0, 0.0}}}; }

std::size_t GridSpec::size() const {
    std::size_t n = 1;
    for (std::size_t e : extent) n *= e;
    return n;
}

void GridSpec::validate() const {
    require(!extent.empty() && extent.size() == domain.size(),
            "grid needs one extent and one interval per dimension");
    for (std::size_t a = 0; a < extent.size(); ++a) {
        require(extent[a] >= 1, "grid extent must be >= 1");
        require(domain[a].lo < domain[a].hi, "grid interval lower bound must be below upper bound");
    }
}

double GridSpec::axis_coordinate(std::size_t axis, std::size_t index) const {
    const Interval& d = domain[axis];
    const std::size_t n = extent[axis];
    if (n == 1) return 0.5 * (d.lo + d.hi);
    if (index + 1 == n) return d.hi;
    // t = i / (n - 1) keeps refinements (n - 1 -> 2(n - 1)) bit-exact at shared taps.
    const double t = static_cast<double>(index) / static_cast<double>(n - 1);
    return d.lo + (d.hi - d.lo) * t;
}

void GridSpec::coordinate(std::size_t flat_index, std::span<double> out) const {
    for (std::size_t a = extent.size(); a-- > 0;) {
        out[a] = axis_coordinate(a, flat_index % extent[a]);
        flat_index /= extent[a];
    }
}

std::vector<double> GridSpec::coordinates() const {
    validate();
    const std::size_t n = size();
    const std::size_t d = dim();
    std::vector<double> table(n * d);
    for (std::size_t q = 0; q < n; ++q) coordinate(q, {table.data() + q * d, d});
    return table;
}

SmpGradients SmpGradients::zeros_like(const SmpFilter& filter) {
    SmpGradients g;
    g.dim = filter.dim();
    g.channels = filter.channels();
    g.d_positions.assign(filter.n_points() * filter.dim(), 0.0);
    g.d_weights.assign(filter.n_points() * filter.channels(), 0.0);
    g.d_radii.assign(filter.n_points(), 0.0);
    return g;
}

bool SmpGradients::congruent_with(const SmpFilter& filter) const {
    return dim == filter.dim() && channels == filter.channels() &&
           d_radii.size() == filter.n_points() &&
           d_positions.size() == filter.n_points() * filter.dim() &&
           d_weights.size() == filter.n_points() * filter.channels();
}

bool SmpGradients::all_finite() const {
    auto finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    return finite(d_positions) && finite(d_weights) && finite(d_radii);
}

SmpGradients& SmpGradients::operator+=(const SmpGradients& other) {
    require(dim == other.dim && channels == other.channels && n_points() == other.n_points(),
            "gradient shapes differ");
    for (std::size_t i = 0; i < d_positions.size(); ++i) d_positions[i] += other.d_positions[i];
    for (std::size_t i = 0; i < d_weights.size(); ++i) d_weights[i] += other.d_weights[i];
    for (std::size_t i = 0; i < d_radii.size(); ++i) d_radii[i] += other.d_radii[i];
    return *this;
}

double distance_g(std::span<const double> x, std::span<const double> p, double r) {
    if (!(r > 0.0)) throw std::domain_error("distance_g: radius must be positive");
    require(x.size() == p.size(), "distance_g: coordinate dimensions differ");
    return cone(x.data(), p.data(), r, x.size());
}

std::vector<std::size_t> neighborhood(std::span<const double> x, const SmpFilter& filter) {
    require(x.size() == filter.dim(), "neighborhood: query dimension mismatch");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < filter.n_points(); ++i) {
        if (cone(x.data(), filter.position(i).data(), filter.radius(i), filter.dim()) > 0.0) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<double> evaluate_smp(std::span<const double> x, const SmpFilter& filter) {
    std::vector<double> out(filter.channels());
    evaluate_smp(x, filter, out);
    return out;
}

void evaluate_smp(std::span<const double> x, const SmpFilter& filter, std::span<double> out) {
    require(x.size() == filter.dim(), "evaluate_smp: query dimension mismatch");
    require(out.size() == filter.channels(), "evaluate_smp: output size mismatch");
    evaluate_at(x.data(), filter, out.data());
}

KernelTensor rasterize(const SmpFilter& filter, const GridSpec& grid) {
    check_grid_matches(filter, grid);
    const std::vector<double> coords = grid.coordinates();
    const std::size_t n = grid.size();
    const std::size_t dim = grid.dim();
    const std::size_t channels = filter.channels();
    KernelTensor out(1, channels, grid.extent);

#pragma omp parallel
    {
        std::vector<double> acc(channels);
#pragma omp for schedule(static)
        for (std::size_t q = 0; q < n; ++q) {
            evaluate_at(coords.data() + q * dim, filter, acc.data());
            for (std::size_t c = 0; c < channels; ++c) out.values[c * n + q] = acc[c];
        }
    }
    return out;
}

SmpGradients smp_backward(const SmpFilter& filter, const GridSpec& grid,
                          const KernelTensor& upstream) {
    check_upstream(filter, grid, upstream);
    const std::vector<double> coords = grid.coordinates();
    const std::size_t n = grid.size();
    const std::size_t dim = grid.dim();
    const std::size_t channels = filter.channels();
    const std::size_t n_points = filter.n_points();
    const double* positions = filter.positions().data();
    const double* weights = filter.weights().data();
    const double* radii = filter.radii().data();
    const double* up = upstream.values.data();

    // Pass 1: neighbor count per query.
    std::vector<double> inv_count(n, 0.0);
#pragma omp parallel for schedule(static)
    for (std::size_t q = 0; q < n; ++q) {
        std::size_t count = 0;
        for (std::size_t i = 0; i < n_points; ++i) {
            if (cone(coords.data() + q * dim, positions + i * dim, radii[i], dim) > 0.0) ++count;
        }
        inv_count[q] = count > 0 ? 1.0 / static_cast<double>(count) : 0.0;
    }

    // Pass 2: point-major accumulation. Each point sums its queries in ascending
    // order, which is the same order as the serial query-major loop.
    SmpGradients grads = SmpGradients::zeros_like(filter);
#pragma omp parallel for schedule(dynamic, 4)
    for (std::size_t i = 0; i < n_points; ++i) {
        const double* p = positions + i * dim;
        const double* w = weights + i * channels;
        const double r = radii[i];
        double* dp = grads.d_positions.data() + i * dim;
        double* dw = grads.d_weights.data() + i * channels;
        double dr = 0.0;
        for (std::size_t q = 0; q < n; ++q) {
            const double* x = coords.data() + q * dim;
            const double dist = l1_distance(x, p, dim);
            const double g = 1.0 - dist / r;
            if (!(g > 0.0)) continue;
            const double scale = inv_count[q];
            double dot = 0.0;
            for (std::size_t c = 0; c < channels; ++c) {
                const double u = up[c * n + q];
                dw[c] += g * scale * u;
                dot += u * w[c];
            }
            const double coef = dot * scale;
            for (std::size_t k = 0; k < dim; ++k) dp[k] += coef * (sign(x[k] - p[k]) / r);
            dr += coef * (dist / (r * r));
        }
        grads.d_radii[i] = dr;
    }
    return grads;
}

namespace reference {

KernelTensor rasterize(const SmpFilter& filter, const GridSpec& grid) {
    check_grid_matches(filter, grid);
    const std::size_t n = grid.size();
    const std::size_t channels = filter.channels();
    KernelTensor out(1, channels, grid.extent);
    std::vector<double> x(grid.dim());
    std::vector<double> acc(channels);
    for (std::size_t q = 0; q < n; ++q) {
        grid.coordinate(q, x);
        evaluate_at(x.data(), filter, acc.data());
        for (std::size_t c = 0; c < channels; ++c) out.values[c * n + q] = acc[c];
    }
    return out;
}

SmpGradients smp_backward(const SmpFilter& filter, const GridSpec& grid,
                          const KernelTensor& upstream) {
    check_upstream(filter, grid, upstream);
    const std::size_t n = grid.size();
    const std::size_t dim = grid.dim();
    const std::size_t channels = filter.channels();
    SmpGradients grads = SmpGradients::zeros_like(filter);
    std::vector<double> x(dim);

    for (std::size_t q = 0; q < n; ++q) {
        grid.coordinate(q, x);
        const std::vector<std::size_t> nbrs = neighborhood(x, filter);
        if (nbrs.empty()) continue;
        const double scale = 1.0 / static_cast<double>(nbrs.size());
        for (std::size_t i : nbrs) {
            const auto p = filter.position(i);
            const auto w = filter.weight(i);
            const double r = filter.radius(i);
            const double dist = l1_distance(x.data(), p.data(), dim);
            const double g = 1.0 - dist / r;
            double dot = 0.0;
            for (std::size_t c = 0; c < channels; ++c) {
                const double u = upstream.values[c * n + q];
                grads.d_weights[i * channels + c] += g * scale * u;
                dot += u * w[c];
            }
            const double coef = dot * scale;
            for (std::size_t k = 0; k < dim; ++k) {
                grads.d_positions[i * dim + k] += coef * (sign(x[k] - p[k]) / r);
            }
            grads.d_radii[i] += coef * (dist / (r * r));
        }
    }
    return grads;
}

}  // namespace reference

}  // namespace smp
