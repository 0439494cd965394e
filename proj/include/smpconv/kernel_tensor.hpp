#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace smp {

/// Dense kernel values laid out as out_channels x in_channels x spatial.
/// The spatial part is row-major over `extent` (one entry for 1D kernels,
/// two for 2D kernels).
struct KernelTensor {
    std::size_t out_channels = 0;
    std::size_t in_channels = 0;
    std::vector<std::size_t> extent;
    std::vector<double> values;

    KernelTensor() = default;
    KernelTensor(std::size_t out, std::size_t in, std::vector<std::size_t> spatial);

    std::size_t spatial_size() const;
    std::size_t dim() const { return extent.size(); }

    std::span<double> slice(std::size_t out, std::size_t in);
    std::span<const double> slice(std::size_t out, std::size_t in) const;

    bool same_shape(const KernelTensor& other) const;
    bool all_finite() const;
};

/// C x H x W activations.
struct FeatureMap {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<double> values;

    FeatureMap() = default;
    FeatureMap(std::size_t c, std::size_t h, std::size_t w)
        : channels(c), height(h), width(w), values(c * h * w, 0.0) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return values[(c * height + y) * width + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return values[(c * height + y) * width + x];
    }
};

/// C x L multichannel sequence.
struct Sequence {
    std::size_t channels = 0;
    std::size_t length = 0;
    std::vector<double> values;

    Sequence() = default;
    Sequence(std::size_t c, std::size_t l) : channels(c), length(l), values(c * l, 0.0) {}

    std::span<double> channel(std::size_t c) { return {values.data() + c * length, length}; }
    std::span<const double> channel(std::size_t c) const {
        return {values.data() + c * length, length};
    }
};

}  // namespace smp
