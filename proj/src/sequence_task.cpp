#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <random>

#include "smpconv/conv.hpp"
#include "smpconv/errors.hpp"
#include "smpconv/experiments.hpp"

namespace smp {

namespace {

struct Dataset {
    std::vector<Sequence> inputs;
    std::vector<double> labels;  // 0 or 1
};

Dataset make_dataset(std::size_t n, std::size_t length, std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 1.0);
    Dataset data;
    data.inputs.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        Sequence x(1, length);
        for (double& v : x.values) v = noise(rng);
        data.labels.push_back(x.values[0] > 0.0 ? 1.0 : 0.0);
        data.inputs.push_back(std::move(x));
    }
    return data;
}

double sigmoid(double z) {
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// Two causal convolutions with a ReLU in between, read out at the last step:
//   h = relu(conv(x, K1) + b1), z = conv(h, K2)[L - 1] + b2, logit = v . z + c
class SequenceClassifier {
public:
    SequenceClassifier(const SequenceTaskConfig& config, std::mt19937_64& rng)
        : config_(config), grid_(GridSpec::causal(config.length)) {
        const std::size_t h = config.hidden;
        if (config.model == SequenceModel::smp) {
            const std::vector<Interval> domain{{-1.0, 0.0}};
            layer1_.causal = layer2_.causal = true;
            for (std::size_t f = 0; f < h; ++f) {
                layer1_.filters.push_back(init_smp(config.n_points, 1, 1, config.sigma, domain,
                                                   config.r_init, rng(), config.train.bounds()));
                layer2_.filters.push_back(init_smp(config.n_points, 1, h, config.sigma, domain,
                                                   config.r_init, rng(), config.train.bounds()));
            }
            smp_opt1_.emplace(config.train, layer1_.filters);
            smp_opt2_.emplace(config.train, layer2_.filters);
        } else {
            k1_ = KernelTensor(h, 1, {config.dense_kernel});
            k2_ = KernelTensor(h, h, {config.dense_kernel});
            fill_gaussian(k1_.values, 1.0 / std::sqrt(static_cast<double>(config.dense_kernel)), rng);
            fill_gaussian(k2_.values, 1.0 / std::sqrt(static_cast<double>(h * config.dense_kernel)),
                          rng);
        }
        b1_.assign(h, 0.0);
        b2_.assign(h, 0.0);
        readout_.assign(h, 0.0);
        fill_gaussian(readout_, 1.0 / std::sqrt(static_cast<double>(h)), rng);
    }

    std::size_t params() const {
        std::size_t n = b1_.size() + b2_.size() + readout_.size() + 1;
        if (config_.model == SequenceModel::smp) return n + param_count(layer1_) + param_count(layer2_);
        return n + k1_.values.size() + k2_.values.size();
    }

    void refresh_kernels() {
        if (config_.model == SequenceModel::smp) {
            k1_ = rasterize_layer(layer1_, grid_);
            k2_ = rasterize_layer(layer2_, grid_);
        }
    }

    struct Activations {
        Sequence pre;     // conv(x, K1) + b1
        Sequence hidden;  // relu(pre)
        std::vector<double> z;
        double logit = 0.0;
    };

    // Requires refresh_kernels() after any parameter change.
    Activations forward(const Sequence& x) const {
        Activations a;
        a.pre = config_.model == SequenceModel::smp ? conv1d_causal_fft(x, k1_)
                                                    : conv1d_causal_direct(x, k1_);
        a.hidden = a.pre;
        const std::size_t length = x.length;
        for (std::size_t c = 0; c < a.pre.channels; ++c) {
            auto pre = a.pre.channel(c);
            auto hid = a.hidden.channel(c);
            for (std::size_t t = 0; t < length; ++t) {
                pre[t] += b1_[c];
                hid[t] = std::max(pre[t], 0.0);
            }
        }
        // Only the last output step of the second convolution is read out.
        const std::size_t taps = k2_.extent[0];
        const std::size_t offset = length - taps;
        a.z.assign(k2_.out_channels, 0.0);
        a.logit = bias_;
        for (std::size_t o = 0; o < k2_.out_channels; ++o) {
            double acc = b2_[o];
            for (std::size_t c = 0; c < k2_.in_channels; ++c) {
                const auto k = k2_.slice(o, c);
                const auto hid = a.hidden.channel(c);
                for (std::size_t i = 0; i < taps; ++i) acc += k[i] * hid[offset + i];
            }
            a.z[o] = acc;
            a.logit += readout_[o] * acc;
        }
        return a;
    }

    double train_batch(const Dataset& data, std::span<const std::size_t> batch) {
        refresh_kernels();
        KernelTensor dk1(k1_.out_channels, k1_.in_channels, k1_.extent);
        KernelTensor dk2(k2_.out_channels, k2_.in_channels, k2_.extent);
        std::vector<double> db1(b1_.size(), 0.0), db2(b2_.size(), 0.0), dv(readout_.size(), 0.0);
        double dbias = 0.0;
        double loss = 0.0;
        const double inv_batch = 1.0 / static_cast<double>(batch.size());
        const std::size_t taps = k2_.extent[0];

        for (std::size_t index : batch) {
            const Sequence& x = data.inputs[index];
            const double y = data.labels[index];
            const Activations a = forward(x);
            loss += (softplus(a.logit) - y * a.logit) * inv_batch;
            const double dlogit = (sigmoid(a.logit) - y) * inv_batch;
            dbias += dlogit;

            const std::size_t offset = x.length - taps;
            Sequence dpre(a.hidden.channels, x.length);
            for (std::size_t o = 0; o < k2_.out_channels; ++o) {
                dv[o] += dlogit * a.z[o];
                const double dz = dlogit * readout_[o];
                db2[o] += dz;
                for (std::size_t c = 0; c < k2_.in_channels; ++c) {
                    const auto k = k2_.slice(o, c);
                    auto dk = dk2.slice(o, c);
                    const auto hid = a.hidden.channel(c);
                    auto dh = dpre.channel(c);
                    for (std::size_t i = 0; i < taps; ++i) {
                        dk[i] += dz * hid[offset + i];
                        dh[offset + i] += dz * k[i];
                    }
                }
            }
            for (std::size_t c = 0; c < dpre.channels; ++c) {
                auto dh = dpre.channel(c);
                const auto pre = a.pre.channel(c);
                for (std::size_t t = 0; t < x.length; ++t) {
                    if (pre[t] <= 0.0) dh[t] = 0.0;
                    db1[c] += dh[t];
                }
            }
            const Conv1dGradients g = config_.model == SequenceModel::smp
                                          ? conv1d_causal_backward_fft(x, k1_, dpre)
                                          : conv1d_causal_backward_direct(x, k1_, dpre);
            for (std::size_t i = 0; i < dk1.values.size(); ++i) dk1.values[i] += g.d_kernel.values[i];
        }

        if (config_.model == SequenceModel::smp) {
            const auto g1 = layer_backward(layer1_, grid_, dk1);
            const auto g2 = layer_backward(layer2_, grid_, dk2);
            smp_opt1_->step(layer1_.filters, g1);
            smp_opt2_->step(layer2_.filters, g2);
            const std::vector<std::span<double>> params{b1_, b2_, readout_, {&bias_, 1}};
            const std::vector<std::span<const double>> grads{db1, db2, dv, {&dbias, 1}};
            dense_opt_.step(params, grads);
        } else {
            const std::vector<std::span<double>> params{k1_.values, k2_.values, b1_, b2_, readout_,
                                                        {&bias_, 1}};
            const std::vector<std::span<const double>> grads{dk1.values, dk2.values, db1, db2, dv,
                                                             {&dbias, 1}};
            dense_opt_.step(params, grads);
        }
        return loss;
    }

    double accuracy(const Dataset& data) {
        refresh_kernels();
        std::size_t correct = 0;
        for (std::size_t s = 0; s < data.inputs.size(); ++s) {
            const double predicted = forward(data.inputs[s]).logit > 0.0 ? 1.0 : 0.0;
            if (predicted == data.labels[s]) ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(data.inputs.size());
    }

private:
    static void fill_gaussian(std::vector<double>& v, double std, std::mt19937_64& rng) {
        std::normal_distribution<double> noise(0.0, std);
        for (double& x : v) x = noise(rng);
    }

    SequenceTaskConfig config_;
    GridSpec grid_;
    ConvLayerSpec layer1_;
    ConvLayerSpec layer2_;
    std::optional<SmpOptimizer> smp_opt1_;
    std::optional<SmpOptimizer> smp_opt2_;
    DenseOptimizer dense_opt_{config_.train};
    KernelTensor k1_;
    KernelTensor k2_;
    std::vector<double> b1_;
    std::vector<double> b2_;
    std::vector<double> readout_;
    double bias_ = 0.0;
};

}  // namespace

std::string to_string(SequenceModel model) { return model == SequenceModel::smp ? "smp" : "dense"; }

void SequenceTaskConfig::validate() const {
    train.validate();
    require(length >= 2, "sequence length must be >= 2");
    require(n_train >= 1 && n_test >= 1, "need at least one train and one test sequence");
    require(hidden >= 1, "hidden width must be >= 1");
    require(n_points >= 1, "n_points must be >= 1");
    require(dense_kernel >= 1 && dense_kernel <= length, "dense kernel must fit in the sequence");
    require(batch_size >= 1, "batch size must be >= 1");
}

SequenceReport synth_sequence_task(const SequenceTaskConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    Dataset train = make_dataset(config.n_train, config.length, rng);
    const Dataset test = make_dataset(config.n_test, config.length, rng);
    if (config.shuffle_labels) std::shuffle(train.labels.begin(), train.labels.end(), rng);

    SequenceClassifier model(config, rng);
    std::vector<std::size_t> order(train.inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    SequenceReport report;
    report.model = config.model;
    report.seed = config.seed;
    report.shuffled_labels = config.shuffle_labels;
    report.params = model.params();
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            epoch_loss += model.train_batch(train, std::span<const std::size_t>(order).subspan(start, end - start));
            ++batches;
        }
        report.final_loss = epoch_loss / static_cast<double>(batches);
        if (!std::isfinite(report.final_loss)) {
            throw NumericError("sequence training diverged in epoch " + std::to_string(epoch));
        }
    }
    report.train_accuracy = model.accuracy(train);
    report.test_accuracy = model.accuracy(test);
    return report;
}

void write_sequence_csv(const std::vector<SequenceReport>& reports, std::ostream& out) {
    out << "model,seed,shuffled_labels,params,final_loss,train_accuracy,test_accuracy\n"
        << std::setprecision(17);
    for (const SequenceReport& r : reports) {
        out << to_string(r.model) << ',' << r.seed << ',' << (r.shuffled_labels ? 1 : 0) << ','
            << r.params << ',' << r.final_loss << ',' << r.train_accuracy << ',' << r.test_accuracy
            << '\n';
    }
}

}  // namespace smp
