#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "smpconv/smp.hpp"

namespace smp {

enum class OptimizerKind { sgd, adam };

struct TrainConfig {
    double base_lr = 1e-2;
    double radius_lr_scale = 0.1;
    double radius_min = 1e-4;
    double radius_max = 1.0;
    OptimizerKind optimizer_kind = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // L2 penalty on weights only; positions and radii are never decayed.
    double weight_decay = 0.0;
    std::size_t steps = 2000;
    std::uint64_t seed = 0;

    RadiusBounds bounds() const { return {radius_min, radius_max}; }
    void validate() const;
};

nlohmann::json to_json(const TrainConfig& config);
/// Strict: unknown keys and wrongly typed values throw ContractError.
TrainConfig train_config_from_json(const nlohmann::json& doc);

std::string to_string(OptimizerKind kind);
OptimizerKind parse_optimizer_kind(const std::string& name);

/// Which parameter groups of an SMP filter receive updates.
struct TrainableMask {
    bool positions = true;
    bool weights = true;
    bool radii = true;
};

/// Random SMP filter. Positions are zero-mean Gaussian with standard
/// deviation `sigma`, rejection-sampled into the open box `domain`; radii are
/// all `r_init`; weights are zero-mean Gaussian with std 1/sqrt(n_points).
SmpFilter init_smp(std::size_t n_points, std::size_t dim, std::size_t channels, double sigma,
                   std::span<const Interval> domain, double r_init, std::uint64_t seed,
                   RadiusBounds bounds = {});

/// Radius heuristic (2 / k) * d for a kernel of width k in d dimensions.
double default_radius(std::size_t kernel_size, std::size_t dim);

/// First and second moment buffers for one flat parameter array.
struct MomentState {
    std::vector<double> m;
    std::vector<double> v;
};

/// Applies one SGD or bias-corrected Adam update in place. `t` is the
/// 1-based step index used for bias correction.
void apply_update(std::span<double> params, std::span<const double> grads, MomentState& state,
                  const TrainConfig& config, double lr, double weight_decay, std::size_t t);

/// Optimizer over a fixed set of SMP filters. Radii use base_lr *
/// radius_lr_scale and are projected into the configured bounds after every
/// step; positions are never projected.
class SmpOptimizer {
public:
    SmpOptimizer(const TrainConfig& config, std::span<const SmpFilter> filters);

    /// Throws NumericError naming the offending filter and group on NaN/Inf.
    void step(std::span<SmpFilter> filters, std::span<const SmpGradients> grads,
              const TrainableMask& mask = {});

    std::size_t steps_taken() const { return t_; }
    const TrainConfig& config() const { return config_; }

private:
    struct FilterState {
        MomentState positions;
        MomentState weights;
        MomentState radii;
    };
    TrainConfig config_;
    std::vector<FilterState> state_;
    std::size_t t_ = 0;
};

/// Optimizer for plain dense parameter arrays (biases, readouts, small
/// branches). Weight decay applies to every array handed to it.
class DenseOptimizer {
public:
    explicit DenseOptimizer(const TrainConfig& config) : config_(config) {}

    void step(std::span<const std::span<double>> params,
              std::span<const std::span<const double>> grads);

private:
    TrainConfig config_;
    std::vector<MomentState> state_;
    std::size_t t_ = 0;
};

}  // namespace smp
