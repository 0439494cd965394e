#include "smpconv/kernel_tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

namespace smp {

KernelTensor::KernelTensor(std::size_t out, std::size_t in, std::vector<std::size_t> spatial)
    : out_channels(out), in_channels(in), extent(std::move(spatial)) {
    values.assign(out_channels * in_channels * spatial_size(), 0.0);
}

std::size_t KernelTensor::spatial_size() const {
    return std::accumulate(extent.begin(), extent.end(), std::size_t{1}, std::multiplies<>());
}

std::span<double> KernelTensor::slice(std::size_t out, std::size_t in) {
    const std::size_t s = spatial_size();
    return {values.data() + (out * in_channels + in) * s, s};
}

std::span<const double> KernelTensor::slice(std::size_t out, std::size_t in) const {
    const std::size_t s = spatial_size();
    return {values.data() + (out * in_channels + in) * s, s};
}

bool KernelTensor::same_shape(const KernelTensor& other) const {
    return out_channels == other.out_channels && in_channels == other.in_channels &&
           extent == other.extent;
}

bool KernelTensor::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

}  // namespace smp
