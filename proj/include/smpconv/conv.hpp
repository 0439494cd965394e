#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "smpconv/kernel_tensor.hpp"
#include "smpconv/smp.hpp"

namespace smp {

enum class PositionSharing {
    filter,  // each filter owns its positions and radii, shared across its channels
    layer,   // one position/radius set shared by every filter of the layer
};

/// A convolution layer whose kernels come from SMP filters, one per output
/// channel. In depthwise mode a single filter with one weight channel per
/// input channel supplies one kernel slice per channel.
struct ConvLayerSpec {
    std::vector<SmpFilter> filters;
    PositionSharing sharing = PositionSharing::filter;
    std::optional<KernelTensor> small_branch;
    bool causal = false;
    bool depthwise = false;

    std::size_t dim() const { return filters.empty() ? 0 : filters.front().dim(); }
    std::size_t in_channels() const { return filters.empty() ? 0 : filters.front().channels(); }
    std::size_t out_channels() const {
        return depthwise ? in_channels() : filters.size();
    }
    void validate() const;
};

/// Stacks rasterize() of every filter into out_channels x in_channels x extent.
/// A depthwise layer yields a 1 x C x extent tensor.
KernelTensor rasterize_layer(const ConvLayerSpec& layer, const GridSpec& grid);

/// Per-filter gradients of <upstream, rasterize_layer(layer, grid)>. With
/// layer-level sharing the position and radius cotangents are summed over
/// filters and every filter receives the total, so identical updates keep
/// the shared arrays identical.
std::vector<SmpGradients> layer_backward(const ConvLayerSpec& layer, const GridSpec& grid,
                                         const KernelTensor& upstream);

// ---------------------------------------------------------------------------
// 1D causal convolution. Cross-correlation with K - 1 zeros of left padding:
//   out[o][t] = sum_c sum_i kernel[o][c][i] * signal[c][t - (K - 1) + i]
// so the last tap (i = K - 1) multiplies the current timestep.

Sequence conv1d_causal_fft(const Sequence& signal, const KernelTensor& kernel);
Sequence conv1d_causal_direct(const Sequence& signal, const KernelTensor& kernel);

/// Rasterizes the layer over a causal grid whose extent must equal the
/// signal length, convolves with FFT and adds the small branch (if any) as its
/// own causal convolution.
Sequence conv1d_causal_fft(const Sequence& signal, const ConvLayerSpec& layer,
                           const GridSpec& grid);

struct Conv1dGradients {
    Sequence d_signal;
    KernelTensor d_kernel;
};

/// Cotangents of <upstream, conv1d_causal(signal, kernel)>.
Conv1dGradients conv1d_causal_backward_fft(const Sequence& signal, const KernelTensor& kernel,
                                           const Sequence& upstream);
Conv1dGradients conv1d_causal_backward_direct(const Sequence& signal, const KernelTensor& kernel,
                                              const Sequence& upstream);

// ---------------------------------------------------------------------------
// 2D "same" cross-correlation with zero padding; kernel extent must be odd.

FeatureMap conv2d_direct(const FeatureMap& input, const KernelTensor& kernel,
                         bool depthwise = false);

/// Rasterizes, fuses the small branch when present, then convolves.
FeatureMap conv2d_direct(const FeatureMap& input, const ConvLayerSpec& layer,
                         const GridSpec& grid);

namespace reference {

FeatureMap conv2d_direct(const FeatureMap& input, const KernelTensor& kernel,
                         bool depthwise = false);

}  // namespace reference

/// Adds `small` zero-padded and centered into a copy of `large`.
KernelTensor fuse_branches(const KernelTensor& large, const KernelTensor& small);

/// Learnable scalars in the layer: (1 + d + C) * N_p per filter with private
/// positions, positions and radii counted once under layer sharing, and the
/// small branch counted densely.
std::size_t param_count(const ConvLayerSpec& layer);

/// Dense k^d kernel with C channels: C * k^d.
std::size_t dense_param_count(std::size_t channels, std::size_t k, std::size_t dim);

}  // namespace smp
