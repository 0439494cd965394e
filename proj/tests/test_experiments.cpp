#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "oracles.hpp"
#include "smpconv/errors.hpp"
#include "smpconv/experiments.hpp"

using namespace smp;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("smpconv_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<unsigned char> pgm_pixels(const fs::path& path, std::size_t& w, std::size_t& h) {
    std::ifstream in(path, std::ios::binary);
    std::string magic;
    int maxval = 0;
    in >> magic >> w >> h >> maxval;
    in.get();
    EXPECT_EQ(magic, "P5");
    EXPECT_EQ(maxval, 255);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Targets, ValuesAndParsing) {
    EXPECT_NEAR(target_value(TargetKind::sine_product, 0.125, 0.125), 1.0, 1e-15);
    EXPECT_NEAR(target_value(TargetKind::sine_product, 0.0, 0.3), 0.0, 1e-15);
    EXPECT_EQ(target_value(TargetKind::zero, 0.3, 0.2), 0.0);
    EXPECT_EQ(parse_target_kind("radial_sine"), TargetKind::radial_sine);
    EXPECT_THROW(parse_target_kind("cosine"), ContractError);
    const TargetFunction t = TargetFunction::sample(TargetKind::sine_product, 5);
    ASSERT_EQ(t.values.size(), 25u);
    // (x, y) = (-0.5, 0.5) at row 1, column 3
    EXPECT_NEAR(t.values[1 * 5 + 3], std::sin(-2.0 * M_PI) * std::sin(2.0 * M_PI), 1e-15);
}

TEST(FitFunction, ZeroTargetIsReachedQuickly) {
    const TargetFunction target = TargetFunction::sample(TargetKind::zero, 21);
    FitConfig config;
    config.n_points = 20;
    config.sigma = 0.5;
    config.r_init = 0.3;
    config.train.steps = 200;
    const FitResult r = fit_function(target, config);
    EXPECT_LE(r.report.final_mse, 1e-6);
    EXPECT_EQ(r.report.mse_trace.size(), 200u);
}

TEST(FitFunction, RealizableTargetFromPerturbedStart) {
    std::mt19937_64 rng(5);
    const GridSpec grid = GridSpec::square(21);
    const SmpFilter truth = oracle::random_filter(8, 2, 1, rng, 0.3, 0.6);
    const TargetFunction target = TargetFunction::from_filter(truth, grid);
    SmpFilter start = truth;
    for (double& w : start.weights()) w *= 0.5;
    FitConfig config;
    config.train.steps = 300;
    config.mode = FitMode::frozen;
    const FitResult r = fit_function(target, config, start);
    EXPECT_LT(r.report.final_mse, 1e-3 * r.report.mse_trace.front());
}

TEST(FitFunction, FixedModeNeverMovesPoints) {
    const TargetFunction target = TargetFunction::sample(TargetKind::sine_product, 15);
    FitConfig config;
    config.n_points = 10;
    config.sigma = 0.5;
    config.r_init = 0.3;
    config.train.steps = 20;
    config.mode = FitMode::fixed;
    const SmpFilter start = init_smp(10, 2, 1, 0.5, target.grid.domain, 0.3, 0);
    const FitResult r = fit_function(target, config, start);
    EXPECT_TRUE(std::equal(r.filter.positions().begin(), r.filter.positions().end(),
                           start.positions().begin()));
    EXPECT_FALSE(std::equal(r.filter.radii().begin(), r.filter.radii().end(), start.radii().begin()));
}

TEST(FitFunction, CsvIsDeterministicAndTimingFree) {
    const TargetFunction target = TargetFunction::sample(TargetKind::radial_sine, 11);
    FitConfig config;
    config.n_points = 12;
    config.sigma = 0.5;
    config.r_init = 0.3;
    config.train.steps = 15;
    std::ostringstream a, b;
    write_fit_csv(fit_function(target, config).report, a);
    write_fit_csv(fit_function(target, config).report, b);
    EXPECT_EQ(a.str(), b.str());
    EXPECT_EQ(a.str().rfind("step,mse\n0,", 0), 0u);
    EXPECT_NE(a.str().find("\nfinal,"), std::string::npos);
}

TEST(KernelImage, ZeroKernelGivesZeroImage) {
    const SmpFilter f(2, 1, {0.0, 0.0, 0.3, 0.3}, {0.0, 0.0}, {0.5, 0.5});
    const GridSpec grid = GridSpec::square(9);
    const std::vector<std::uint8_t> px = kernel_image_pixels(f, grid);
    EXPECT_EQ(px, std::vector<std::uint8_t>(81, 0));
    const fs::path dir = scratch_dir("zero_image");
    const KernelImageFiles files = export_kernel_image(f, grid, dir / "k");
    std::size_t w = 0, h = 0;
    const auto bytes = pgm_pixels(files.image, w, h);
    EXPECT_EQ(w, 9u);
    EXPECT_EQ(h, 9u);
    EXPECT_EQ(bytes, std::vector<unsigned char>(81, 0));
}

TEST(KernelImage, NormalizesAbsoluteValue) {
    // Single point at the origin: peak at the centre pixel, symmetric magnitude.
    const SmpFilter f(2, 1, {0.0, 0.0}, {-2.0}, {1.0});
    const GridSpec grid = GridSpec::square(5);
    const std::vector<std::uint8_t> px = kernel_image_pixels(f, grid);
    EXPECT_EQ(px[12], 255);
    EXPECT_EQ(px[0], 0);
    // (-0.5, 0): g = 0.5 -> 127.5 rounds to 128
    EXPECT_EQ(px[11], 128);
    EXPECT_EQ(px[7], px[17]);
}

TEST(KernelImage, PointsCsvListsEveryPoint) {
    const SmpFilter f(2, 1, {0.25, -0.5, 0.0, 0.125}, {1.0, 2.0}, {0.5, 0.25});
    const fs::path dir = scratch_dir("points");
    const KernelImageFiles files = export_kernel_image(f, GridSpec::square(7), dir / "k");
    std::ifstream in(files.points);
    std::string header, l0, l1, extra;
    std::getline(in, header);
    std::getline(in, l0);
    std::getline(in, l1);
    EXPECT_EQ(header, "index,x,y,radius");
    EXPECT_EQ(l0, "0,0.25,-0.5,0.5");
    EXPECT_EQ(l1, "1,0,0.125,0.25");
    EXPECT_FALSE(std::getline(in, extra));
}

TEST(SequenceTask, SmallRunIsDeterministic) {
    SequenceTaskConfig c;
    c.length = 32;
    c.n_train = 64;
    c.n_test = 32;
    c.epochs = 2;
    c.n_points = 8;
    const SequenceReport a = synth_sequence_task(c);
    const SequenceReport b = synth_sequence_task(c);
    EXPECT_EQ(a.final_loss, b.final_loss);
    EXPECT_EQ(a.test_accuracy, b.test_accuracy);
    // 4 filters x (1 + 1 + 1) x 8 + 4 filters x (1 + 1 + 4) x 8 + biases and readout
    EXPECT_EQ(a.params, 4u * 3u * 8u + 4u * 6u * 8u + 4u + 4u + 4u + 1u);
    c.model = SequenceModel::dense;
    EXPECT_EQ(synth_sequence_task(c).params, 4u * 5u + 16u * 5u + 13u);
}

TEST(SequenceTask, RejectsBadConfig) {
    SequenceTaskConfig c;
    c.length = 1;
    EXPECT_THROW(synth_sequence_task(c), ContractError);
    c = {};
    c.dense_kernel = 1000;
    EXPECT_THROW(synth_sequence_task(c), ContractError);
}

TEST(SequenceTask, CsvHeader) {
    std::ostringstream out;
    write_sequence_csv({SequenceReport{}}, out);
    EXPECT_EQ(out.str().substr(0, out.str().find('\n')),
              "model,seed,shuffled_labels,params,final_loss,train_accuracy,test_accuracy");
}
