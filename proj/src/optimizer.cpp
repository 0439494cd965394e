#include "smpconv/optimizer.hpp"

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "smpconv/errors.hpp"

namespace smp {

namespace {

using nlohmann::json;

void check_finite(std::span<const double> values, std::size_t filter, const char* group) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (!std::isfinite(values[i])) {
            std::ostringstream msg;
            msg << "non-finite gradient in filter " << filter << ", group '" << group
                << "', entry " << i << " (value " << values[i] << ")";
            throw NumericError(msg.str());
        }
    }
}

double read_double(const json& doc, const char* key, double fallback) {
    if (!doc.contains(key)) return fallback;
    require(doc.at(key).is_number(), std::string("config key '") + key + "' must be a number");
    return doc.at(key).get<double>();
}

std::uint64_t read_unsigned(const json& doc, const char* key, std::uint64_t fallback) {
    if (!doc.contains(key)) return fallback;
    require(doc.at(key).is_number_unsigned(),
            std::string("config key '") + key + "' must be a non-negative integer");
    return doc.at(key).get<std::uint64_t>();
}

}  // namespace

void TrainConfig::validate() const {
    require(base_lr > 0.0, "base_lr must be positive");
    require(radius_lr_scale > 0.0 && radius_lr_scale <= 1.0, "radius_lr_scale must lie in (0, 1]");
    require(radius_min > 0.0 && radius_min < radius_max, "need 0 < radius_min < radius_max");
    require(weight_decay >= 0.0, "weight_decay must be non-negative");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
    require(epsilon > 0.0, "epsilon must be positive");
}

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer_kind(const std::string& name) {
    if (name == "sgd") return OptimizerKind::sgd;
    if (name == "adam") return OptimizerKind::adam;
    throw ContractError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

json to_json(const TrainConfig& c) {
    return json{{"base_lr", c.base_lr},
                {"radius_lr_scale", c.radius_lr_scale},
                {"radius_min", c.radius_min},
                {"radius_max", c.radius_max},
                {"optimizer", to_string(c.optimizer_kind)},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"epsilon", c.epsilon},
                {"weight_decay", c.weight_decay},
                {"steps", c.steps},
                {"seed", c.seed}};
}

TrainConfig train_config_from_json(const json& doc) {
    require(doc.is_object(), "train config must be a JSON object");
    static const std::set<std::string> known = {"base_lr", "radius_lr_scale", "radius_min",
                                                "radius_max", "optimizer", "beta1", "beta2",
                                                "epsilon", "weight_decay", "steps", "seed"};
    for (const auto& item : doc.items()) {
        require(known.count(item.key()) == 1, "unknown train config key '" + item.key() + "'");
    }
    TrainConfig c;
    c.base_lr = read_double(doc, "base_lr", c.base_lr);
    c.radius_lr_scale = read_double(doc, "radius_lr_scale", c.radius_lr_scale);
    c.radius_min = read_double(doc, "radius_min", c.radius_min);
    c.radius_max = read_double(doc, "radius_max", c.radius_max);
    if (doc.contains("optimizer")) {
        require(doc.at("optimizer").is_string(), "config key 'optimizer' must be a string");
        c.optimizer_kind = parse_optimizer_kind(doc.at("optimizer").get<std::string>());
    }
    c.beta1 = read_double(doc, "beta1", c.beta1);
    c.beta2 = read_double(doc, "beta2", c.beta2);
    c.epsilon = read_double(doc, "epsilon", c.epsilon);
    c.weight_decay = read_double(doc, "weight_decay", c.weight_decay);
    c.steps = read_unsigned(doc, "steps", c.steps);
    c.seed = read_unsigned(doc, "seed", c.seed);
    c.validate();
    return c;
}

double default_radius(std::size_t kernel_size, std::size_t dim) {
    require(kernel_size >= 1, "kernel size must be >= 1");
    return 2.0 / static_cast<double>(kernel_size) * static_cast<double>(dim);
}

SmpFilter init_smp(std::size_t n_points, std::size_t dim, std::size_t channels, double sigma,
                   std::span<const Interval> domain, double r_init, std::uint64_t seed,
                   RadiusBounds bounds) {
    require(n_points >= 1, "init_smp: n_points must be >= 1");
    require(dim == 1 || dim == 2, "init_smp: dim must be 1 or 2");
    require(channels >= 1, "init_smp: channels must be >= 1");
    require(std::isfinite(sigma) && sigma > 0.0, "init_smp: sigma must be positive");
    require(domain.size() == dim, "init_smp: need one sampling interval per dimension");
    require(r_init >= bounds.min && r_init <= bounds.max,
            "init_smp: r_init must lie within the radius bounds");
    for (const Interval& d : domain) {
        require(d.lo < d.hi && d.lo <= 0.0 && d.hi >= 0.0,
                "init_smp: sampling interval must satisfy lo < hi and contain the origin");
    }

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> position_noise(0.0, sigma);
    std::vector<double> positions(n_points * dim);
    for (std::size_t i = 0; i < n_points; ++i) {
        for (std::size_t k = 0; k < dim; ++k) {
            // Truncation by rejection; the open interval excludes its endpoints.
            double v = 0.0;
            std::size_t attempts = 0;
            do {
                v = position_noise(rng);
                require(++attempts < 1000000, "init_smp: truncated sampling does not terminate");
            } while (!(v > domain[k].lo && v < domain[k].hi));
            positions[i * dim + k] = v;
        }
    }
    std::normal_distribution<double> weight_noise(0.0, 1.0 / std::sqrt(static_cast<double>(n_points)));
    std::vector<double> weights(n_points * channels);
    for (double& w : weights) w = weight_noise(rng);
    return SmpFilter(dim, channels, std::move(positions), std::move(weights),
                     std::vector<double>(n_points, r_init), bounds);
}

void apply_update(std::span<double> params, std::span<const double> grads, MomentState& state,
                  const TrainConfig& config, double lr, double weight_decay, std::size_t t) {
    require(params.size() == grads.size(), "apply_update: gradient size mismatch");
    if (config.optimizer_kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < params.size(); ++i) {
            params[i] -= lr * (grads[i] + weight_decay * params[i]);
        }
        return;
    }
    if (state.m.size() != params.size()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    const double b1 = config.beta1;
    const double b2 = config.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i] + weight_decay * params[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        const double m_hat = state.m[i] / c1;
        const double v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

SmpOptimizer::SmpOptimizer(const TrainConfig& config, std::span<const SmpFilter> filters)
    : config_(config), state_(filters.size()) {
    config_.validate();
    for (const SmpFilter& f : filters) {
        require(f.bounds().min == config_.radius_min && f.bounds().max == config_.radius_max,
                "filter radius bounds differ from the train config");
    }
}

void SmpOptimizer::step(std::span<SmpFilter> filters, std::span<const SmpGradients> grads,
                        const TrainableMask& mask) {
    require(filters.size() == state_.size() && grads.size() == filters.size(),
            "SmpOptimizer::step: filter/gradient count mismatch");
    for (std::size_t f = 0; f < filters.size(); ++f) {
        require(grads[f].congruent_with(filters[f]), "SmpOptimizer::step: gradient shape mismatch");
        check_finite(grads[f].d_positions, f, "positions");
        check_finite(grads[f].d_weights, f, "weights");
        check_finite(grads[f].d_radii, f, "radii");
    }
    ++t_;
    const double radius_lr = config_.base_lr * config_.radius_lr_scale;
    for (std::size_t f = 0; f < filters.size(); ++f) {
        SmpFilter& filter = filters[f];
        FilterState& st = state_[f];
        if (mask.positions) {
            apply_update(filter.positions(), grads[f].d_positions, st.positions, config_,
                         config_.base_lr, 0.0, t_);
        }
        if (mask.weights) {
            apply_update(filter.weights(), grads[f].d_weights, st.weights, config_, config_.base_lr,
                         config_.weight_decay, t_);
        }
        if (mask.radii) {
            apply_update(filter.radii(), grads[f].d_radii, st.radii, config_, radius_lr, 0.0, t_);
        }
        filter.project_radii();
    }
}

void DenseOptimizer::step(std::span<const std::span<double>> params,
                          std::span<const std::span<const double>> grads) {
    require(params.size() == grads.size(), "DenseOptimizer::step: parameter/gradient count mismatch");
    if (state_.empty()) state_.resize(params.size());
    require(state_.size() == params.size(), "DenseOptimizer::step: parameter set changed");
    for (std::size_t p = 0; p < params.size(); ++p) check_finite(grads[p], p, "dense");
    ++t_;
    for (std::size_t p = 0; p < params.size(); ++p) {
        apply_update(params[p], grads[p], state_[p], config_, config_.base_lr, config_.weight_decay,
                     t_);
    }
}

}  // namespace smp
