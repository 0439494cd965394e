#include "smpconv/conv.hpp"

#include <algorithm>
#include <complex>
#include <string>

#include "fft.hpp"
#include "smpconv/errors.hpp"

namespace smp {

namespace {

using cplx = std::complex<double>;

void check_conv1d(const Sequence& signal, const KernelTensor& kernel) {
    require(kernel.dim() == 1, "conv1d expects a 1D kernel");
    require(kernel.in_channels == signal.channels,
            "conv1d: kernel has " + std::to_string(kernel.in_channels) +
                " input channels, signal has " + std::to_string(signal.channels));
    require(signal.values.size() == signal.channels * signal.length, "conv1d: malformed signal");
    require(kernel.extent[0] >= 1 && kernel.extent[0] <= signal.length,
            "conv1d: kernel length must be in [1, signal length]");
}

void check_upstream1d(const Sequence& signal, const KernelTensor& kernel, const Sequence& up) {
    check_conv1d(signal, kernel);
    require(up.channels == kernel.out_channels && up.length == signal.length,
            "conv1d backward: upstream shape mismatch");
}

// Lag-ordered copy of one kernel slice: lag j multiplies signal[t - j].
std::vector<double> lag_order(std::span<const double> taps) {
    return std::vector<double>(taps.rbegin(), taps.rend());
}

void check_conv2d(const FeatureMap& input, const KernelTensor& kernel, bool depthwise) {
    require(kernel.dim() == 2, "conv2d expects a 2D kernel");
    require(kernel.extent[0] == kernel.extent[1], "conv2d expects a square kernel");
    require(kernel.extent[0] % 2 == 1, "conv2d: kernel extent must be odd, got " +
                                           std::to_string(kernel.extent[0]));
    require(input.values.size() == input.channels * input.height * input.width,
            "conv2d: malformed input");
    require(kernel.in_channels == input.channels,
            "conv2d: kernel has " + std::to_string(kernel.in_channels) +
                " input channels, input has " + std::to_string(input.channels));
    if (depthwise) {
        require(kernel.out_channels == 1, "depthwise conv2d expects a 1 x C x k x k kernel");
    }
}

bool odd_extents(const KernelTensor& k) {
    return std::all_of(k.extent.begin(), k.extent.end(), [](std::size_t e) { return e % 2 == 1; });
}

// One output plane of the 2D cross-correlation. Shared by both paths.
void correlate_plane(const FeatureMap& input, const KernelTensor& kernel, std::size_t c_begin,
                     std::size_t c_end, std::size_t k_out, FeatureMap& out, std::size_t out_c,
                     std::size_t y) {
    const std::size_t k = kernel.extent[0];
    const long half = static_cast<long>(k / 2);
    const long h = static_cast<long>(input.height);
    const long w = static_cast<long>(input.width);
    for (long x = 0; x < w; ++x) {
        double acc = 0.0;
        for (std::size_t c = c_begin; c < c_end; ++c) {
            const auto taps = kernel.slice(k_out, c);
            for (long u = 0; u < static_cast<long>(k); ++u) {
                const long yy = static_cast<long>(y) + u - half;
                if (yy < 0 || yy >= h) continue;
                for (long v = 0; v < static_cast<long>(k); ++v) {
                    const long xx = x + v - half;
                    if (xx < 0 || xx >= w) continue;
                    acc += taps[u * k + v] * input.at(c, yy, xx);
                }
            }
        }
        out.at(out_c, y, x) = acc;
    }
}

}  // namespace

void ConvLayerSpec::validate() const {
    require(!filters.empty(), "layer needs at least one filter");
    const SmpFilter& first = filters.front();
    for (const SmpFilter& f : filters) {
        f.validate();
        require(f.dim() == first.dim() && f.channels() == first.channels(),
                "all filters of a layer must agree on dim and channels");
    }
    if (sharing == PositionSharing::layer) {
        for (const SmpFilter& f : filters) {
            require(f.n_points() == first.n_points() &&
                        std::equal(f.positions().begin(), f.positions().end(),
                                   first.positions().begin()) &&
                        std::equal(f.radii().begin(), f.radii().end(), first.radii().begin()),
                    "layer-level position sharing requires identical positions and radii");
        }
    }
    if (depthwise) require(filters.size() == 1, "depthwise layers hold exactly one filter");
    if (causal) require(first.dim() == 1 && !depthwise, "causal layers must be 1D and not depthwise");
    if (small_branch) {
        const KernelTensor& s = *small_branch;
        require(s.dim() == first.dim(), "small branch dimension mismatch");
        require(s.in_channels == in_channels() &&
                    s.out_channels == (depthwise ? 1 : filters.size()),
                "small branch channel shape mismatch");
        if (!causal) require(odd_extents(s), "small branch extent must be odd");
    }
}

KernelTensor rasterize_layer(const ConvLayerSpec& layer, const GridSpec& grid) {
    layer.validate();
    const std::size_t n_filters = layer.filters.size();
    KernelTensor out(n_filters, layer.in_channels(), grid.extent);
    for (std::size_t f = 0; f < n_filters; ++f) {
        const KernelTensor k = rasterize(layer.filters[f], grid);
        std::copy(k.values.begin(), k.values.end(),
                  out.values.begin() + static_cast<long>(f * k.values.size()));
    }
    return out;
}

std::vector<SmpGradients> layer_backward(const ConvLayerSpec& layer, const GridSpec& grid,
                                         const KernelTensor& upstream) {
    layer.validate();
    const std::size_t n_filters = layer.filters.size();
    require(upstream.out_channels == n_filters && upstream.in_channels == layer.in_channels() &&
                upstream.extent == grid.extent,
            "layer_backward: upstream shape mismatch");
    std::vector<SmpGradients> grads;
    grads.reserve(n_filters);
    for (std::size_t f = 0; f < n_filters; ++f) {
        KernelTensor slice(1, layer.in_channels(), grid.extent);
        const std::size_t block = slice.values.size();
        std::copy_n(upstream.values.begin() + static_cast<long>(f * block), block,
                    slice.values.begin());
        grads.push_back(smp_backward(layer.filters[f], grid, slice));
    }
    if (layer.sharing == PositionSharing::layer && n_filters > 1) {
        SmpGradients& total = grads.front();
        for (std::size_t f = 1; f < n_filters; ++f) {
            for (std::size_t i = 0; i < total.d_positions.size(); ++i)
                total.d_positions[i] += grads[f].d_positions[i];
            for (std::size_t i = 0; i < total.d_radii.size(); ++i)
                total.d_radii[i] += grads[f].d_radii[i];
        }
        for (std::size_t f = 1; f < n_filters; ++f) {
            grads[f].d_positions = total.d_positions;
            grads[f].d_radii = total.d_radii;
        }
    }
    return grads;
}

Sequence conv1d_causal_fft(const Sequence& signal, const KernelTensor& kernel) {
    check_conv1d(signal, kernel);
    const std::size_t length = signal.length;
    const std::size_t taps = kernel.extent[0];
    const std::size_t n = detail::next_pow2(length + taps - 1);
    const std::size_t bins = n / 2 + 1;
    const std::size_t c_in = signal.channels;
    const std::size_t c_out = kernel.out_channels;

    std::vector<cplx> signal_spec(c_in * bins);
    for (std::size_t c = 0; c < c_in; ++c) {
        detail::plan_for(n).forward(signal.channel(c), {signal_spec.data() + c * bins, bins});
    }

    Sequence out(c_out, length);
#pragma omp parallel
    {
        std::vector<cplx> kernel_spec(bins);
        std::vector<cplx> acc(bins);
        detail::RealFft& fft = detail::plan_for(n);
#pragma omp for schedule(static)
        for (std::size_t o = 0; o < c_out; ++o) {
            std::fill(acc.begin(), acc.end(), cplx{});
            for (std::size_t c = 0; c < c_in; ++c) {
                fft.forward(lag_order(kernel.slice(o, c)), kernel_spec);
                const cplx* s = signal_spec.data() + c * bins;
                for (std::size_t b = 0; b < bins; ++b) acc[b] += s[b] * kernel_spec[b];
            }
            fft.inverse(acc, out.channel(o));
        }
    }
    return out;
}

Sequence conv1d_causal_direct(const Sequence& signal, const KernelTensor& kernel) {
    check_conv1d(signal, kernel);
    const std::size_t length = signal.length;
    const std::size_t taps = kernel.extent[0];
    Sequence out(kernel.out_channels, length);
    for (std::size_t o = 0; o < kernel.out_channels; ++o) {
        for (std::size_t t = 0; t < length; ++t) {
            double acc = 0.0;
            for (std::size_t c = 0; c < signal.channels; ++c) {
                const auto k = kernel.slice(o, c);
                const auto x = signal.channel(c);
                for (std::size_t i = 0; i < taps; ++i) {
                    const long s = static_cast<long>(t) - static_cast<long>(taps - 1) +
                                   static_cast<long>(i);
                    if (s >= 0) acc += k[i] * x[s];
                }
            }
            out.channel(o)[t] = acc;
        }
    }
    return out;
}

Sequence conv1d_causal_fft(const Sequence& signal, const ConvLayerSpec& layer,
                           const GridSpec& grid) {
    require(layer.causal, "conv1d_causal_fft requires a causal layer");
    require(grid.dim() == 1 && grid.extent[0] == signal.length,
            "causal grid extent " + std::to_string(grid.extent[0]) +
                " must equal signal length " + std::to_string(signal.length));
    Sequence out = conv1d_causal_fft(signal, rasterize_layer(layer, grid));
    if (layer.small_branch) {
        const Sequence extra = conv1d_causal_direct(signal, *layer.small_branch);
        for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += extra.values[i];
    }
    return out;
}

Conv1dGradients conv1d_causal_backward_fft(const Sequence& signal, const KernelTensor& kernel,
                                           const Sequence& upstream) {
    check_upstream1d(signal, kernel, upstream);
    const std::size_t length = signal.length;
    const std::size_t taps = kernel.extent[0];
    const std::size_t n = detail::next_pow2(length + taps - 1);
    const std::size_t bins = n / 2 + 1;
    const std::size_t c_in = signal.channels;
    const std::size_t c_out = kernel.out_channels;
    detail::RealFft& fft = detail::plan_for(n);

    std::vector<cplx> signal_spec(c_in * bins);
    std::vector<cplx> up_spec(c_out * bins);
    std::vector<cplx> kernel_spec(c_out * c_in * bins);
    for (std::size_t c = 0; c < c_in; ++c)
        fft.forward(signal.channel(c), {signal_spec.data() + c * bins, bins});
    for (std::size_t o = 0; o < c_out; ++o) {
        fft.forward(upstream.channel(o), {up_spec.data() + o * bins, bins});
        for (std::size_t c = 0; c < c_in; ++c) {
            fft.forward(lag_order(kernel.slice(o, c)),
                        {kernel_spec.data() + (o * c_in + c) * bins, bins});
        }
    }

    Conv1dGradients grads{Sequence(c_in, length), KernelTensor(c_out, c_in, kernel.extent)};
    std::vector<cplx> prod(bins);
    std::vector<double> lagged(taps);
    // d_kernel: cross-correlation of upstream with the signal at lags [0, taps).
    for (std::size_t o = 0; o < c_out; ++o) {
        const cplx* u = up_spec.data() + o * bins;
        for (std::size_t c = 0; c < c_in; ++c) {
            const cplx* s = signal_spec.data() + c * bins;
            for (std::size_t b = 0; b < bins; ++b) prod[b] = u[b] * std::conj(s[b]);
            fft.inverse(prod, lagged);
            auto dk = grads.d_kernel.slice(o, c);
            for (std::size_t j = 0; j < taps; ++j) dk[taps - 1 - j] = lagged[j];
        }
    }
    // d_signal[c][s] = sum_o sum_j upstream[o][s + j] * lag_kernel[o][c][j].
    for (std::size_t c = 0; c < c_in; ++c) {
        std::fill(prod.begin(), prod.end(), cplx{});
        for (std::size_t o = 0; o < c_out; ++o) {
            const cplx* u = up_spec.data() + o * bins;
            const cplx* k = kernel_spec.data() + (o * c_in + c) * bins;
            for (std::size_t b = 0; b < bins; ++b) prod[b] += u[b] * std::conj(k[b]);
        }
        fft.inverse(prod, grads.d_signal.channel(c));
    }
    return grads;
}

Conv1dGradients conv1d_causal_backward_direct(const Sequence& signal, const KernelTensor& kernel,
                                              const Sequence& upstream) {
    check_upstream1d(signal, kernel, upstream);
    const std::size_t length = signal.length;
    const std::size_t taps = kernel.extent[0];
    Conv1dGradients grads{Sequence(signal.channels, length),
                          KernelTensor(kernel.out_channels, signal.channels, kernel.extent)};
    for (std::size_t o = 0; o < kernel.out_channels; ++o) {
        for (std::size_t t = 0; t < length; ++t) {
            const double u = upstream.channel(o)[t];
            for (std::size_t c = 0; c < signal.channels; ++c) {
                const auto k = kernel.slice(o, c);
                auto dk = grads.d_kernel.slice(o, c);
                for (std::size_t i = 0; i < taps; ++i) {
                    const long s = static_cast<long>(t) - static_cast<long>(taps - 1) +
                                   static_cast<long>(i);
                    if (s < 0) continue;
                    dk[i] += u * signal.channel(c)[s];
                    grads.d_signal.channel(c)[s] += u * k[i];
                }
            }
        }
    }
    return grads;
}

FeatureMap conv2d_direct(const FeatureMap& input, const KernelTensor& kernel, bool depthwise) {
    check_conv2d(input, kernel, depthwise);
    const std::size_t c_out = depthwise ? input.channels : kernel.out_channels;
    FeatureMap out(c_out, input.height, input.width);
    const std::size_t rows = c_out * input.height;
#pragma omp parallel for schedule(static)
    for (std::size_t row = 0; row < rows; ++row) {
        const std::size_t o = row / input.height;
        const std::size_t y = row % input.height;
        if (depthwise) {
            correlate_plane(input, kernel, o, o + 1, 0, out, o, y);
        } else {
            correlate_plane(input, kernel, 0, input.channels, o, out, o, y);
        }
    }
    return out;
}

FeatureMap conv2d_direct(const FeatureMap& input, const ConvLayerSpec& layer,
                         const GridSpec& grid) {
    require(layer.dim() == 2 && grid.dim() == 2, "conv2d_direct requires a 2D layer and grid");
    KernelTensor kernel = rasterize_layer(layer, grid);
    if (layer.small_branch) kernel = fuse_branches(kernel, *layer.small_branch);
    return conv2d_direct(input, kernel, layer.depthwise);
}

namespace reference {

FeatureMap conv2d_direct(const FeatureMap& input, const KernelTensor& kernel, bool depthwise) {
    check_conv2d(input, kernel, depthwise);
    const std::size_t c_out = depthwise ? input.channels : kernel.out_channels;
    FeatureMap out(c_out, input.height, input.width);
    for (std::size_t o = 0; o < c_out; ++o) {
        for (std::size_t y = 0; y < input.height; ++y) {
            if (depthwise) {
                correlate_plane(input, kernel, o, o + 1, 0, out, o, y);
            } else {
                correlate_plane(input, kernel, 0, input.channels, o, out, o, y);
            }
        }
    }
    return out;
}

}  // namespace reference

KernelTensor fuse_branches(const KernelTensor& large, const KernelTensor& small) {
    require(large.out_channels == small.out_channels && large.in_channels == small.in_channels,
            "fuse_branches: channel shapes differ");
    require(large.dim() == small.dim(), "fuse_branches: kernel dimensions differ");
    require(odd_extents(large) && odd_extents(small), "fuse_branches: extents must be odd");
    for (std::size_t a = 0; a < large.dim(); ++a) {
        require(small.extent[a] <= large.extent[a],
                "fuse_branches: small extent exceeds large extent");
    }
    KernelTensor fused = large;
    const std::size_t dim = large.dim();
    const std::size_t small_size = small.spatial_size();
    for (std::size_t o = 0; o < large.out_channels; ++o) {
        for (std::size_t c = 0; c < large.in_channels; ++c) {
            auto dst = fused.slice(o, c);
            const auto src = small.slice(o, c);
            for (std::size_t s = 0; s < small_size; ++s) {
                // Map the small flat index to the centered flat index in the large grid.
                std::size_t rem = s;
                std::size_t target = 0;
                std::size_t stride = 1;
                for (std::size_t a = dim; a-- > 0;) {
                    const std::size_t idx = rem % small.extent[a];
                    rem /= small.extent[a];
                    const std::size_t offset = (large.extent[a] - small.extent[a]) / 2;
                    target += (idx + offset) * stride;
                    stride *= large.extent[a];
                }
                dst[target] += src[s];
            }
        }
    }
    return fused;
}

std::size_t param_count(const ConvLayerSpec& layer) {
    std::size_t total = 0;
    if (!layer.filters.empty()) {
        const std::size_t d = layer.dim();
        const std::size_t c = layer.in_channels();
        if (layer.sharing == PositionSharing::layer) {
            total += (1 + d) * layer.filters.front().n_points();
            for (const SmpFilter& f : layer.filters) total += c * f.n_points();
        } else {
            for (const SmpFilter& f : layer.filters) total += (1 + d + c) * f.n_points();
        }
    }
    if (layer.small_branch) total += layer.small_branch->values.size();
    return total;
}

std::size_t dense_param_count(std::size_t channels, std::size_t k, std::size_t dim) {
    std::size_t n = channels;
    for (std::size_t a = 0; a < dim; ++a) n *= k;
    return n;
}

}  // namespace smp
