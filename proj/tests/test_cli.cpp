#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace fs = std::filesystem;
using smp::cli::run;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = run(args, out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("smpconv_cli_" + name);
    fs::remove_all(dir);
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

fs::path write_json(const fs::path& path, const nlohmann::json& doc) {
    fs::create_directories(path.parent_path());
    std::ofstream(path) << doc.dump();
    return path;
}

}  // namespace

TEST(Cli, NoSubcommandIsUsageError) {
    EXPECT_EQ(invoke({}).code, smp::cli::kExitUsage);
    EXPECT_EQ(invoke({"train"}).code, smp::cli::kExitUsage);
}

TEST(Cli, HelpSucceeds) {
    const Outcome o = invoke({"--help"});
    EXPECT_EQ(o.code, 0);
    EXPECT_NE(o.out.find("fit"), std::string::npos);
}

TEST(Cli, FitWritesOutputsUnderOutDir) {
    const fs::path dir = fresh_dir("fit");
    const Outcome o = invoke({"fit", "--out-dir", dir.string(), "--steps", "5", "--grid", "11",
                              "--points", "10", "--image", "--seed", "3"});
    ASSERT_EQ(o.code, 0) << o.err;
    for (const char* f : {"fit.csv", "checkpoint.json", "fit_config.json", "kernel.pgm",
                          "kernel_points.csv"})
        EXPECT_TRUE(fs::exists(dir / f)) << f;
    const auto cfg = nlohmann::json::parse(slurp(dir / "fit_config.json"));
    EXPECT_EQ(cfg["train"]["seed"], 3);
    EXPECT_EQ(cfg["points"], 10);
}

TEST(Cli, FitIsByteReproducible) {
    const fs::path a = fresh_dir("repro_a"), b = fresh_dir("repro_b");
    const std::vector<std::string> common{"--steps", "20", "--grid", "15", "--points", "20", "--seed", "9"};
    std::vector<std::string> args_a{"fit", "--out-dir", a.string()}, args_b{"fit", "--out-dir", b.string()};
    args_a.insert(args_a.end(), common.begin(), common.end());
    args_b.insert(args_b.end(), common.begin(), common.end());
    ASSERT_EQ(invoke(args_a).code, 0);
    ASSERT_EQ(invoke(args_b).code, 0);
    EXPECT_EQ(slurp(a / "fit.csv"), slurp(b / "fit.csv"));
    EXPECT_EQ(slurp(a / "checkpoint.json"), slurp(b / "checkpoint.json"));
}

TEST(Cli, ZeroPointsIsUsageError) {
    const Outcome o = invoke({"fit", "--points", "0", "--out-dir", fresh_dir("zero").string()});
    EXPECT_EQ(o.code, smp::cli::kExitUsage);
    EXPECT_FALSE(fs::exists(fresh_dir("zero") / "fit.csv"));
}

TEST(Cli, UnknownFlagIsUsageError) {
    EXPECT_EQ(invoke({"fit", "--nonsense", "1"}).code, smp::cli::kExitUsage);
    EXPECT_EQ(invoke({"fit", "--mode", "wobbly"}).code, smp::cli::kExitUsage);
}

TEST(Cli, ConfigFileUnknownKeyRejectedBeforeCompute) {
    const fs::path dir = fresh_dir("badcfg");
    const fs::path cfg = write_json(dir / "cfg.json", {{"steps", 3}, {"colour", "red"}});
    const Outcome o = invoke({"fit", "--config", cfg.string(), "--out-dir", (dir / "out").string()});
    EXPECT_EQ(o.code, smp::cli::kExitUsage);
    EXPECT_NE(o.err.find("colour"), std::string::npos);
    EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Cli, FlagsOverrideConfigFile) {
    const fs::path dir = fresh_dir("override");
    const fs::path cfg = write_json(dir / "cfg.json",
                                    {{"steps", 3}, {"grid", 9}, {"points", 5}, {"mode", "fixed"}});
    const Outcome o = invoke({"fit", "--config", cfg.string(), "--steps", "4", "--out-dir",
                              (dir / "out").string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const auto resolved = nlohmann::json::parse(slurp(dir / "out" / "fit_config.json"));
    EXPECT_EQ(resolved["train"]["steps"], 4);
    EXPECT_EQ(resolved["grid"], 9);
    EXPECT_EQ(resolved["mode"], "fixed");
}

TEST(Cli, MalformedConfigIsUsageError) {
    const fs::path dir = fresh_dir("malformed");
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << "{ steps: ";
    EXPECT_EQ(invoke({"fit", "--config", (dir / "cfg.json").string()}).code, smp::cli::kExitUsage);
    EXPECT_EQ(invoke({"fit", "--config", (dir / "missing.json").string()}).code,
              smp::cli::kExitUsage);
}

TEST(Cli, RasterizeMissingCheckpointIsRuntimeError) {
    const Outcome o = invoke({"rasterize", "--checkpoint", "/nonexistent/c.json", "--out-dir",
                              fresh_dir("rast_missing").string()});
    EXPECT_EQ(o.code, smp::cli::kExitRuntime);
    EXPECT_NE(o.err.find("/nonexistent/c.json"), std::string::npos);
}

TEST(Cli, RasterizeWritesFullPrecisionCsv) {
    const fs::path dir = fresh_dir("rast");
    ASSERT_EQ(invoke({"fit", "--steps", "3", "--grid", "9", "--points", "6", "--out-dir",
                      dir.string()}).code,
              0);
    const Outcome o = invoke({"rasterize", "--checkpoint", (dir / "checkpoint.json").string(),
                              "--grid", "5", "--out-dir", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    std::ifstream in(dir / "kernel_5.csv");
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "index,x0,x1,c0");
    std::size_t rows = 0;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 25u);
}

TEST(Cli, VisualizeFreshFilter) {
    const fs::path dir = fresh_dir("vis");
    const Outcome o = invoke({"visualize", "--grid", "9", "--points", "4", "--out-dir", dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    EXPECT_TRUE(fs::exists(dir / "kernel.pgm"));
    EXPECT_TRUE(fs::exists(dir / "kernel_points.csv"));
}

TEST(Cli, BenchWritesCsv) {
    const fs::path dir = fresh_dir("bench");
    const fs::path cfg = write_json(
        dir / "configs.json",
        nlohmann::json::array({{{"name", "tiny"}, {"kind", "smp2d"}, {"kernel_extent", 5},
                                {"n_points", 4}, {"channels", 2}, {"spatial", 8}}}));
    const Outcome o = invoke({"bench", "--configs", cfg.string(), "--repetitions", "3", "--out-dir",
                              dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const std::string csv = slurp(dir / "bench.csv");
    EXPECT_EQ(csv.rfind("config_name,kernel_extent,n_points,params,median_ms,p10_ms,p90_ms\ntiny,5,4,", 0), 0u);
    EXPECT_EQ(invoke({"bench", "--repetitions", "2", "--out-dir", dir.string()}).code,
              smp::cli::kExitUsage);
}

TEST(Cli, SequenceSmallRun) {
    const fs::path dir = fresh_dir("seq");
    const Outcome o = invoke({"sequence", "--length", "16", "--n-train", "32", "--n-test", "16",
                              "--epochs", "1", "--points", "4", "--shuffle-labels", "--out-dir",
                              dir.string()});
    ASSERT_EQ(o.code, 0) << o.err;
    const std::string csv = slurp(dir / "sequence.csv");
    EXPECT_NE(csv.find("\nsmp,0,1,"), std::string::npos);
    EXPECT_NE(csv.find("\ndense,0,1,"), std::string::npos);
    EXPECT_EQ(invoke({"sequence", "--models", "rnn"}).code, smp::cli::kExitUsage);
}
