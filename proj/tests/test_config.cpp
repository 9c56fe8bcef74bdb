#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "kspde/cli.hpp"

using namespace kspde;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("kspde_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

int cli(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + std::string(KSPDE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const auto p = dir / "run.cfg";
    std::ofstream(p) << text;
    return p;
}

std::string error_of(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigurationError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(Config, DefaultsFromEmptyText) { EXPECT_TRUE(parse_config("# nothing\n\n") == ExperimentConfig{}); }

TEST(Config, ParsesValuesAndComments) {
    const auto c = parse_config(
        "command = verify   # trailing comment\n"
        "experiment = energy\n"
        "n = 64\n"
        "flux = burgers\n"
        "epsilons = 0.2, 0.1,0.05\n"
        "seed = 18446744073709551615\n"
        "mollify = false\n"
        "xi_range = -1.5, 1.5\n"
        "scheme_constant = 0.25\n");
    EXPECT_EQ(c.command, "verify");
    EXPECT_EQ(c.experiment, "energy");
    EXPECT_EQ(c.n, 64);
    EXPECT_EQ(c.flux, "burgers");
    EXPECT_EQ(c.epsilons, (std::vector<double>{0.2, 0.1, 0.05}));
    EXPECT_EQ(c.seed, 18446744073709551615ull);
    EXPECT_FALSE(c.mollify);
    EXPECT_FALSE(c.xi_auto);
    EXPECT_EQ(c.xi_min, -1.5);
    EXPECT_EQ(c.scheme_constant, 0.25);
}

TEST(Config, CommandArgumentWins) {
    EXPECT_EQ(parse_config("command = verify\n", "sweep").command, "sweep");
}

TEST(Config, EmitRoundTrips) {
    auto c = parse_config("n = 32\nnoise = bounded\nepsilon = 0.1\ndt = 3e-4\nt_end = 0.03\nxi_range = -2, 2.5\n");
    c.out = "some/dir";
    EXPECT_TRUE(parse_config(emit(c)) == c);
    EXPECT_TRUE(parse_config(emit(ExperimentConfig{})) == ExperimentConfig{});
}

TEST(Config, ErrorsNameTheLine) {
    EXPECT_NE(error_of("n = 32\n\nbogus = 1\n").find("line 3"), std::string::npos);
    EXPECT_NE(error_of("n = 32\n\nbogus = 1\n").find("bogus"), std::string::npos);
    EXPECT_NE(error_of("n = 32\nn = 64\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("# c\nn = many\n").find("line 2"), std::string::npos);
    EXPECT_NE(error_of("dt\n").find("line 1"), std::string::npos);
    EXPECT_NE(error_of("flux = quadratic\n").find("flux"), std::string::npos);
}

TEST(Config, EpsilonRequirement) {
    const auto e = error_of("n = 16\nepsilon = 1.5\n");
    EXPECT_NE(e.find("line 2"), std::string::npos);
    EXPECT_NE(e.find("epsilon in (0,1)"), std::string::npos);
    EXPECT_NE(error_of("epsilons = 0.1, 0\n").find("epsilons"), std::string::npos);
    EXPECT_NO_THROW(parse_config("epsilon = 0\n"));
}

TEST(Config, CrossFieldChecks) {
    EXPECT_NE(error_of("dt = 0.003\nt_end = 0.01\n").find("t_end"), std::string::npos);
    EXPECT_NE(error_of("p = 3\n").find("p must"), std::string::npos);
    EXPECT_NE(error_of("xi_range = 1, -1\n").find("xi_range"), std::string::npos);
    EXPECT_NE(error_of("lambda = 0.5\n").find("lambda"), std::string::npos);
}

TEST(Config, HashIgnoresOutputAndWorkers) {
    ExperimentConfig a, b;
    b.out = "elsewhere";
    b.workers = 8;
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.seed = 1;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_EQ(hash_hex(0xabc), "0000000000000abc");
}

TEST(Builders, InitialData) {
    TorusGrid g(1, 8);
    const auto s = make_initial("step", 2.0, g);
    EXPECT_EQ(s[0], 2.0);
    EXPECT_EQ(make_initial("constant", 0.5, g).max_abs(), 0.5);
    EXPECT_EQ(make_initial("zero", 3.0, g).max_abs(), 0.0);
    EXPECT_NEAR(make_initial("cos", 1.0, g)[0], std::cos(std::numbers::pi / 8.0), 1e-15);
}

TEST(Cli, SolveHeatMatchesExactL2) {
    const auto d = scratch("solve");
    const auto cfg = write_config(d, "n = 128\ndt = 1e-5\nt_end = 0.01\nsave_every = 100\n");
    ASSERT_EQ(cli("solve --config " + cfg.string() + " --out " + (d / "out").string()), 0);
    EXPECT_TRUE(fs::exists(d / "out" / "snapshots" / "snap_000000.txt"));
    EXPECT_TRUE(fs::exists(d / "out" / "snapshots" / "snap_000010.txt"));
    EXPECT_FALSE(fs::exists(d / "out" / "INCOMPLETE"));
    std::ifstream in(d / "out" / "l2.dat");
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream s(line);
        double t, v;
        s >> t >> v;
        const double pi = std::numbers::pi;
        EXPECT_NEAR(v, std::exp(-4.0 * pi * pi * t) / std::sqrt(2.0), 5e-4) << t;
        ++rows;
    }
    EXPECT_EQ(rows, 1001);
    const auto header = slurp(d / "out" / "diagnostics.csv");
    EXPECT_EQ(header.rfind("# config_hash = ", 0), 0u);
}

TEST(Cli, TrivialContractionPasses) {
    const auto d = scratch("contraction");
    const auto cfg = write_config(d,
                                  "n = 32\nflux = burgers\ndiffusion = hyperbolic\nnoise = bounded\nnoise_modes = 8\n"
                                  "epsilon = 0.1\ndt = 1e-3\nt_end = 0.05\nsave_every = 10\ninitial_b = sin\n"
                                  "scheme_constant = 0.1\npaths = 3\n");
    EXPECT_EQ(cli("verify contraction --config " + cfg.string() + " --out " + (d / "out").string()), 0);
    EXPECT_TRUE(fs::exists(d / "out" / "contraction_report.json"));
    EXPECT_TRUE(fs::exists(d / "out" / "contraction_per_path.csv"));
}

TEST(Cli, ErrorsExitTwo) {
    const auto d = scratch("errors");
    const auto sweep = write_config(d, "n = 16\nepsilons = 0.1\ndt = 1e-3\nt_end = 0.01\n");
    EXPECT_EQ(cli("sweep --config " + sweep.string() + " --out " + (d / "sweep").string()), 2);
    EXPECT_TRUE(fs::exists(d / "sweep" / "INCOMPLETE"));
    const auto bad = d / "bad.cfg";
    std::ofstream(bad) << "n = 16\nwhat = 1\n";
    EXPECT_EQ(cli("solve --config " + bad.string() + " --out " + (d / "bad").string()), 2);
    EXPECT_EQ(cli("solve --config " + (d / "missing.cfg").string()), 2);
    const auto cfl = write_config(d, "n = 128\ndt = 1e-3\nt_end = 0.01\n");
    EXPECT_EQ(cli("solve --config " + cfl.string() + " --out " + (d / "cfl").string()), 2);
    EXPECT_NE(slurp(d / "cfl" / "INCOMPLETE").find("CFL"), std::string::npos);
}

TEST(Cli, SeedPrecedence) {
    const auto d = scratch("seed");
    const auto cfg = write_config(d, "n = 16\ndt = 1e-3\nt_end = 0.002\nseed = 5\n");
    ASSERT_EQ(cli("solve --config " + cfg.string() + " --out " + (d / "a").string(), "KSPDE_SEED=9"), 0);
    EXPECT_NE(slurp(d / "a" / "config.txt").find("seed = 9\n"), std::string::npos);
    ASSERT_EQ(cli("solve --seed 11 --config " + cfg.string() + " --out " + (d / "b").string(), "KSPDE_SEED=9"), 0);
    EXPECT_NE(slurp(d / "b" / "config.txt").find("seed = 11\n"), std::string::npos);
}

TEST(Cli, RerunsAreByteIdentical) {
    const auto d = scratch("rerun");
    const auto cfg = write_config(d,
                                  "n = 32\nflux = burgers\ndiffusion = hyperbolic\nnoise = bounded\nnoise_modes = 8\n"
                                  "epsilons = 0.2, 0.1\ndt = 5e-4\nt_end = 0.05\nsave_every = 10\npaths = 6\nseed = 4\n");
    const std::string base = "verify energy --config " + cfg.string() + " --out ";
    const int status = cli(base + (d / "a").string() + " --workers 1");
    ASSERT_NE(status, 2);
    ASSERT_EQ(cli(base + (d / "b").string() + " --workers 3"), status);
    ASSERT_EQ(cli(base + (d / "c").string() + " --workers 1"), status);
    for (const char* f : {"energy_report.csv", "energy_per_path.csv", "energy_report.json"}) {
        EXPECT_EQ(slurp(d / "a" / f), slurp(d / "b" / f)) << f;
        EXPECT_EQ(slurp(d / "a" / f), slurp(d / "c" / f)) << f;
    }
}

TEST(Cli, MeasureWritesArtifacts) {
    const auto d = scratch("measure");
    const auto cfg = write_config(d,
                                  "n = 64\nflux = burgers\ndiffusion = hyperbolic\nepsilon = 0.05\ndt = 5e-4\n"
                                  "t_end = 0.05\nsave_every = 5\nxi_bins = 64\n");
    ASSERT_EQ(cli("measure --config " + cfg.string() + " --out " + (d / "out").string()), 0);
    for (const char* f : {"measure_n1.txt", "measure_n2.txt", "residual.csv", "measure_summary.csv"})
        EXPECT_TRUE(fs::exists(d / "out" / f)) << f;
    EXPECT_NE(slurp(d / "out" / "measure_summary.csv").find("n1_tail,0\n"), std::string::npos);
}
