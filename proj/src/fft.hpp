#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace smp::detail {

std::size_t next_pow2(std::size_t n);

/// Real-to-complex transform of a fixed length backed by FFTW. Instances are
/// not thread-safe; use plan_for() to get the calling thread's cached copy.
class RealFft {
public:
    explicit RealFft(std::size_t n);
    ~RealFft();
    RealFft(const RealFft&) = delete;
    RealFft& operator=(const RealFft&) = delete;

    std::size_t size() const { return n_; }
    std::size_t spectrum_size() const { return n_ / 2 + 1; }

    /// Zero-pads `in` to size() and writes spectrum_size() bins.
    void forward(std::span<const double> in, std::span<std::complex<double>> out);
    /// Unnormalized inverse scaled by 1/n; writes the first out.size() samples.
    void inverse(std::span<const std::complex<double>> in, std::span<double> out);

private:
    std::size_t n_;
    double* real_ = nullptr;
    void* spectrum_ = nullptr;
    void* forward_plan_ = nullptr;
    void* inverse_plan_ = nullptr;
};

RealFft& plan_for(std::size_t n);

}  // namespace smp::detail
