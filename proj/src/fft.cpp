#include "fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <new>

namespace smp::detail {

namespace {
// FFTW's planner is not re-entrant.
std::mutex planner_mutex;
}  // namespace

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

RealFft::RealFft(std::size_t n) : n_(n) {
    std::lock_guard<std::mutex> lock(planner_mutex);
    real_ = fftw_alloc_real(n_);
    auto* spec = fftw_alloc_complex(spectrum_size());
    spectrum_ = spec;
    if (real_ == nullptr || spec == nullptr) throw std::bad_alloc();
    forward_plan_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), real_, spec, FFTW_ESTIMATE);
    inverse_plan_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), spec, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() {
    std::lock_guard<std::mutex> lock(planner_mutex);
    fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
    fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
    fftw_free(real_);
    fftw_free(spectrum_);
}

void RealFft::forward(std::span<const double> in, std::span<std::complex<double>> out) {
    const std::size_t m = std::min(in.size(), n_);
    std::copy_n(in.begin(), m, real_);
    std::fill(real_ + m, real_ + n_, 0.0);
    fftw_execute(static_cast<fftw_plan>(forward_plan_));
    const auto* spec = static_cast<const fftw_complex*>(spectrum_);
    for (std::size_t k = 0; k < spectrum_size(); ++k) out[k] = {spec[k][0], spec[k][1]};
}

void RealFft::inverse(std::span<const std::complex<double>> in, std::span<double> out) {
    auto* spec = static_cast<fftw_complex*>(spectrum_);
    for (std::size_t k = 0; k < spectrum_size(); ++k) {
        spec[k][0] = in[k].real();
        spec[k][1] = in[k].imag();
    }
    fftw_execute(static_cast<fftw_plan>(inverse_plan_));
    const double scale = 1.0 / static_cast<double>(n_);
    const std::size_t m = std::min(out.size(), n_);
    for (std::size_t t = 0; t < m; ++t) out[t] = real_[t] * scale;
}

RealFft& plan_for(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<RealFft>(n);
    return *slot;
}

}  // namespace smp::detail
