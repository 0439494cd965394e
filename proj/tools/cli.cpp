#include "cli.hpp"

#include <omp.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "smpconv/bench.hpp"
#include "smpconv/checkpoint.hpp"
#include "smpconv/errors.hpp"
#include "smpconv/experiments.hpp"
#include "smpconv/optimizer.hpp"

namespace smp::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Common {
    std::string out_dir = "out";
    std::string config;
    std::uint64_t seed = 0;
    int threads = 1;
};

struct FitArgs {
    std::string mode = "moving";
    std::string target = "sine_product";
    std::size_t points = 204;
    std::size_t grid = 51;
    double sigma = 1.0;
    double r_init = 0.0;  // 0 selects (2 / grid) * 2
    std::size_t steps = 2000;
    double lr = 1e-2;
    std::string optimizer = "adam";
    double radius_lr_scale = 0.1;
    double radius_min = 1e-4;
    double radius_max = 1.0;
    double weight_decay = 0.0;
    bool image = false;
};

struct RasterizeArgs {
    std::string checkpoint;
    std::size_t grid = 33;
    double lo = -1.0;
    double hi = 1.0;
    std::string name;
};

struct BenchArgs {
    std::string configs = "default";
    std::size_t repetitions = 5;
};

struct SequenceArgs {
    SequenceTaskConfig task;
    std::string models = "smp,dense";
    bool shuffle_labels = false;
};

struct VisualizeArgs {
    std::string checkpoint;
    std::size_t grid = 33;
    std::size_t points = 16;
    double sigma = 0.05;
    double r_init = 0.0;  // 0 selects (2 / grid) * 2
    std::size_t channel = 0;
};

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

void add_common(CLI::App* app, Common& common) {
    app->add_option("--out-dir", common.out_dir, "Directory for every output file")
        ->capture_default_str();
    app->add_option("--config", common.config, "JSON file of option values; flags win");
    app->add_option("--seed", common.seed, "Random seed")->capture_default_str();
    app->add_option("--threads", common.threads, "OpenMP threads (1 = serial reproducible path)")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
}

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    return out;
}

fs::path prepare_out_dir(const Common& common) {
    const fs::path dir(common.out_dir);
    fs::create_directories(dir);
    return dir;
}

void write_resolved_config(const fs::path& path, const json& doc) {
    std::ofstream out = open_output(path);
    out << doc.dump(2) << '\n';
}

// Expands `--config FILE` into option tokens placed ahead of the explicit
// flags so the command line wins (options keep their last value).
std::vector<std::string> expand_config(const std::vector<std::string>& args, CLI::App& app) {
    std::string path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
        if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
    }
    if (path.empty() || args.empty()) return args;

    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw UsageError("malformed config file '" + path + "': " + e.what());
    }
    if (!doc.is_object()) throw UsageError("config file '" + path + "' must hold a JSON object");

    CLI::App* sub = nullptr;
    try {
        sub = app.get_subcommand(args.front());
    } catch (const CLI::OptionNotFound&) {
        throw UsageError("unknown subcommand '" + args.front() + "'");
    }
    std::vector<std::string> tokens{args.front()};
    for (const auto& [key, value] : doc.items()) {
        const CLI::Option* opt = sub->get_option_no_throw("--" + key);
        if (opt == nullptr || key == "config") {
            throw UsageError("unknown config key '" + key + "' for '" + args.front() + "'");
        }
        if (value.is_boolean()) {
            if (value.get<bool>()) tokens.push_back("--" + key);
            continue;
        }
        tokens.push_back("--" + key);
        tokens.push_back(value.is_string() ? value.get<std::string>() : value.dump());
    }
    tokens.insert(tokens.end(), args.begin() + 1, args.end());
    return tokens;
}

TrainConfig fit_train_config(const FitArgs& a, std::uint64_t seed) {
    TrainConfig t;
    t.base_lr = a.lr;
    t.radius_lr_scale = a.radius_lr_scale;
    t.radius_min = a.radius_min;
    t.radius_max = a.radius_max;
    t.optimizer_kind = parse_optimizer_kind(a.optimizer);
    t.weight_decay = a.weight_decay;
    t.steps = a.steps;
    t.seed = seed;
    t.validate();
    return t;
}

int cmd_fit(const Common& common, const FitArgs& a, std::ostream& out) {
    FitConfig config;
    config.train = fit_train_config(a, common.seed);
    config.mode = parse_fit_mode(a.mode);
    config.n_points = a.points;
    config.sigma = a.sigma;
    config.r_init = a.r_init > 0.0 ? a.r_init : default_radius(a.grid, 2);
    const TargetFunction target = TargetFunction::sample(parse_target_kind(a.target), a.grid);

    const fs::path dir = prepare_out_dir(common);
    json resolved{{"command", "fit"},      {"mode", a.mode},          {"target", a.target},
                  {"points", a.points},    {"grid", a.grid},          {"sigma", config.sigma},
                  {"r_init", config.r_init}, {"image", a.image},      {"threads", common.threads},
                  {"train", to_json(config.train)}};
    write_resolved_config(dir / "fit_config.json", resolved);

    const FitResult result = fit_function(target, config);
    {
        std::ofstream csv = open_output(dir / "fit.csv");
        write_fit_csv(result.report, csv);
    }
    save_checkpoint(result.filter, dir / "checkpoint.json");
    if (a.image) export_kernel_image(result.filter, target.grid, dir / "kernel");

    out << "fit " << a.target << " mode=" << a.mode << " points=" << a.points
        << " final_mse=" << std::setprecision(6) << result.report.final_mse
        << " wall_s=" << result.report.wall_seconds << '\n';
    return kExitOk;
}

int cmd_rasterize(const Common& common, const RasterizeArgs& a, std::ostream& out) {
    const SmpFilter filter = load_checkpoint(a.checkpoint);
    GridSpec grid;
    for (std::size_t k = 0; k < filter.dim(); ++k) {
        grid.extent.push_back(a.grid);
        grid.domain.push_back({a.lo, a.hi});
    }
    grid.validate();
    const KernelTensor kernel = rasterize(filter, grid);
    const std::vector<double> coords = grid.coordinates();

    const fs::path dir = prepare_out_dir(common);
    const std::string name = a.name.empty() ? "kernel_" + std::to_string(a.grid) + ".csv" : a.name;
    std::ofstream csv = open_output(dir / name);
    csv << "index";
    for (std::size_t k = 0; k < grid.dim(); ++k) csv << ",x" << k;
    for (std::size_t c = 0; c < filter.channels(); ++c) csv << ",c" << c;
    csv << '\n' << std::setprecision(17);
    const std::size_t n = grid.size();
    for (std::size_t q = 0; q < n; ++q) {
        csv << q;
        for (std::size_t k = 0; k < grid.dim(); ++k) csv << ',' << coords[q * grid.dim() + k];
        for (std::size_t c = 0; c < filter.channels(); ++c) csv << ',' << kernel.values[c * n + q];
        csv << '\n';
    }
    out << "rasterized " << a.checkpoint << " at extent " << a.grid << " -> " << (dir / name).string()
        << '\n';
    return kExitOk;
}

std::vector<BenchConfig> load_bench_configs(const std::string& spec) {
    if (spec == "default") return default_bench_configs();
    std::ifstream in(spec);
    if (!in) throw UsageError("bench configs must be 'default' or a readable JSON file: " + spec);
    json doc;
    in >> doc;
    if (!doc.is_array()) throw UsageError("bench config file must hold a JSON array");
    std::vector<BenchConfig> configs;
    for (const json& item : doc) {
        BenchConfig c;
        c.name = item.at("name").get<std::string>();
        const std::string kind = item.at("kind").get<std::string>();
        if (kind == "smp2d") c.kind = BenchKind::smp2d;
        else if (kind == "dense2d") c.kind = BenchKind::dense2d;
        else if (kind == "smp1d_fft") c.kind = BenchKind::smp1d_fft;
        else throw UsageError("unknown bench kind '" + kind + "'");
        c.kernel_extent = item.value("kernel_extent", c.kernel_extent);
        c.n_points = item.value("n_points", c.n_points);
        c.channels = item.value("channels", c.channels);
        c.spatial = item.value("spatial", c.spatial);
        configs.push_back(c);
    }
    return configs;
}

int cmd_bench(const Common& common, const BenchArgs& a, std::ostream& out) {
    const std::vector<BenchConfig> configs = load_bench_configs(a.configs);
    const fs::path dir = prepare_out_dir(common);
    write_resolved_config(dir / "bench_config.json",
                          {{"command", "bench"}, {"configs", a.configs},
                           {"repetitions", a.repetitions}, {"threads", common.threads},
                           {"seed", common.seed}});
    const std::vector<BenchRow> rows = cpu_microbench(configs, a.repetitions, common.seed);
    std::ofstream csv = open_output(dir / "bench.csv");
    write_bench_csv(rows, csv);
    write_bench_csv(rows, out);
    return kExitOk;
}

int cmd_sequence(const Common& common, SequenceArgs a, std::ostream& out) {
    std::vector<SequenceModel> models;
    std::stringstream list(a.models);
    for (std::string item; std::getline(list, item, ',');) {
        if (item == "smp") models.push_back(SequenceModel::smp);
        else if (item == "dense") models.push_back(SequenceModel::dense);
        else throw UsageError("unknown sequence model '" + item + "'");
    }
    a.task.seed = common.seed;
    a.task.shuffle_labels = a.shuffle_labels;
    a.task.validate();

    const fs::path dir = prepare_out_dir(common);
    const SequenceTaskConfig& t = a.task;
    write_resolved_config(dir / "sequence_config.json",
                          {{"command", "sequence"}, {"models", a.models}, {"length", t.length},
                           {"n_train", t.n_train}, {"n_test", t.n_test}, {"hidden", t.hidden},
                           {"points", t.n_points}, {"sigma", t.sigma}, {"r_init", t.r_init},
                           {"dense_kernel", t.dense_kernel}, {"epochs", t.epochs},
                           {"batch_size", t.batch_size}, {"shuffle_labels", t.shuffle_labels},
                           {"threads", common.threads}, {"train", to_json(t.train)},
                           {"seed", common.seed}});
    std::vector<SequenceReport> reports;
    for (SequenceModel m : models) {
        SequenceTaskConfig config = a.task;
        config.model = m;
        reports.push_back(synth_sequence_task(config));
    }
    std::ofstream csv = open_output(dir / "sequence.csv");
    write_sequence_csv(reports, csv);
    write_sequence_csv(reports, out);
    return kExitOk;
}

int cmd_visualize(const Common& common, const VisualizeArgs& a, std::ostream& out) {
    const GridSpec grid = GridSpec::square(a.grid);
    SmpFilter filter;
    if (!a.checkpoint.empty()) {
        filter = load_checkpoint(a.checkpoint);
    } else {
        const double r = a.r_init > 0.0 ? a.r_init : default_radius(a.grid, 2);
        filter = init_smp(a.points, 2, 1, a.sigma, std::vector<Interval>{{-1.0, 1.0}, {-1.0, 1.0}},
                          r, common.seed);
    }
    if (filter.dim() != 2) throw UsageError("visualize needs a 2D filter");
    const fs::path dir = prepare_out_dir(common);
    write_resolved_config(dir / "visualize_config.json",
                          {{"command", "visualize"}, {"checkpoint", a.checkpoint}, {"grid", a.grid},
                           {"points", a.points}, {"sigma", a.sigma}, {"r_init", a.r_init},
                           {"channel", a.channel}, {"seed", common.seed}});
    const KernelImageFiles files = export_kernel_image(filter, grid, dir / "kernel", a.channel);
    out << "wrote " << files.image.string() << " and " << files.points.string() << '\n';
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Self-moving point continuous convolution toolkit", "smpconv"};
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
    app.require_subcommand(1);

    Common common;
    FitArgs fit;
    RasterizeArgs rast;
    BenchArgs bench;
    SequenceArgs seq;
    VisualizeArgs vis;

    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit an SMP to a sampled 2D target function");
    add_common(fit_cmd, common);
    fit_cmd->add_option("--mode", fit.mode, "moving | fixed | frozen")
        ->check(CLI::IsMember({"moving", "fixed", "frozen"}))
        ->capture_default_str();
    fit_cmd->add_option("--target", fit.target, "sine_product | radial_sine | zero")
        ->check(CLI::IsMember({"sine_product", "radial_sine", "zero"}))
        ->capture_default_str();
    fit_cmd->add_option("--points", fit.points)->check(CLI::PositiveNumber)->capture_default_str();
    fit_cmd->add_option("--grid", fit.grid)->check(CLI::PositiveNumber)->capture_default_str();
    fit_cmd->add_option("--sigma", fit.sigma)->check(CLI::PositiveNumber)->capture_default_str();
    fit_cmd->add_option("--r-init", fit.r_init, "Initial radius (default (2/grid)*2)");
    fit_cmd->add_option("--steps", fit.steps)->capture_default_str();
    fit_cmd->add_option("--lr", fit.lr)->check(CLI::PositiveNumber)->capture_default_str();
    fit_cmd->add_option("--optimizer", fit.optimizer)
        ->check(CLI::IsMember({"sgd", "adam"}))
        ->capture_default_str();
    fit_cmd->add_option("--radius-lr-scale", fit.radius_lr_scale)->capture_default_str();
    fit_cmd->add_option("--radius-min", fit.radius_min)->capture_default_str();
    fit_cmd->add_option("--radius-max", fit.radius_max)->capture_default_str();
    fit_cmd->add_option("--weight-decay", fit.weight_decay)->capture_default_str();
    fit_cmd->add_flag("--image", fit.image, "Also export the fitted kernel image");

    CLI::App* rast_cmd = app.add_subcommand("rasterize", "Sample a checkpoint on a grid");
    add_common(rast_cmd, common);
    rast_cmd->add_option("--checkpoint", rast.checkpoint)->required();
    rast_cmd->add_option("--grid", rast.grid)->check(CLI::PositiveNumber)->capture_default_str();
    rast_cmd->add_option("--lo", rast.lo)->capture_default_str();
    rast_cmd->add_option("--hi", rast.hi)->capture_default_str();
    rast_cmd->add_option("--name", rast.name, "Output file name (default kernel_<grid>.csv)");

    CLI::App* bench_cmd = app.add_subcommand("bench", "CPU microbenchmark of conv variants");
    add_common(bench_cmd, common);
    bench_cmd->add_option("--configs", bench.configs, "'default' or a JSON array file")
        ->capture_default_str();
    bench_cmd->add_option("--repetitions", bench.repetitions)
        ->check(CLI::Range(3, 1000000))
        ->capture_default_str();

    CLI::App* seq_cmd = app.add_subcommand("sequence", "Synthetic first-token classification");
    add_common(seq_cmd, common);
    SequenceTaskConfig& t = seq.task;
    seq_cmd->add_option("--models", seq.models, "Comma list of smp,dense")->capture_default_str();
    seq_cmd->add_option("--length", t.length)->check(CLI::Range(2, 1 << 20))->capture_default_str();
    seq_cmd->add_option("--n-train", t.n_train)->check(CLI::PositiveNumber)->capture_default_str();
    seq_cmd->add_option("--n-test", t.n_test)->check(CLI::PositiveNumber)->capture_default_str();
    seq_cmd->add_option("--hidden", t.hidden)->check(CLI::PositiveNumber)->capture_default_str();
    seq_cmd->add_option("--points", t.n_points)->check(CLI::PositiveNumber)->capture_default_str();
    seq_cmd->add_option("--sigma", t.sigma)->check(CLI::PositiveNumber)->capture_default_str();
    seq_cmd->add_option("--r-init", t.r_init)->check(CLI::PositiveNumber)->capture_default_str();
    seq_cmd->add_option("--dense-kernel", t.dense_kernel)
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    seq_cmd->add_option("--epochs", t.epochs)->capture_default_str();
    seq_cmd->add_option("--batch-size", t.batch_size)->check(CLI::PositiveNumber)->capture_default_str();
    seq_cmd->add_option("--lr", t.train.base_lr)->check(CLI::PositiveNumber)->capture_default_str();
    seq_cmd->add_flag("--shuffle-labels", seq.shuffle_labels, "Train on permuted labels");

    CLI::App* vis_cmd = app.add_subcommand("visualize", "Export a kernel image and point overlay");
    add_common(vis_cmd, common);
    vis_cmd->add_option("--checkpoint", vis.checkpoint, "Checkpoint (default: fresh random filter)");
    vis_cmd->add_option("--grid", vis.grid)->check(CLI::PositiveNumber)->capture_default_str();
    vis_cmd->add_option("--points", vis.points)->check(CLI::PositiveNumber)->capture_default_str();
    vis_cmd->add_option("--sigma", vis.sigma)->check(CLI::PositiveNumber)->capture_default_str();
    vis_cmd->add_option("--r-init", vis.r_init, "Initial radius (default (2/grid)*2)");
    vis_cmd->add_option("--channel", vis.channel)->capture_default_str();

    try {
        const std::vector<std::string> tokens = expand_config(args, app);
        std::vector<const char*> argv{"smpconv"};
        for (const std::string& s : tokens) argv.push_back(s.c_str());
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    }

    omp_set_num_threads(common.threads);
    try {
        if (fit_cmd->parsed()) {
            // Cheap validation before any compute.
            fit_train_config(fit, common.seed);
            parse_fit_mode(fit.mode);
            return cmd_fit(common, fit, out);
        }
        if (rast_cmd->parsed()) return cmd_rasterize(common, rast, out);
        if (bench_cmd->parsed()) return cmd_bench(common, bench, out);
        if (seq_cmd->parsed()) return cmd_sequence(common, seq, out);
        if (vis_cmd->parsed()) return cmd_visualize(common, vis, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    err << "usage error: no subcommand\n";
    return kExitUsage;
}

}  // namespace smp::cli
