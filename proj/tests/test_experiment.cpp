#include <gtest/gtest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <fstream>
#include <sstream>

#include <experiment.hpp>

using namespace pwhid;
using namespace pwhid::tools;

namespace
{

const std::filesystem::path config_dir = PWHID_CONFIG_DIR;

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::filesystem::path scratch(const std::string& name)
{
    auto dir = std::filesystem::temp_directory_path() / ("pwhid_test_" + name);
    std::filesystem::remove_all(dir);
    return dir;
}

const char* small_system = R"(
name: small
rank: 1
L1: 2
L2: 2
degree: 2
points: 4
point_seed: 1
als_seed: 1
restarts: 2
A: [[1], [0.5]]
B: [[1], [-0.3]]
C: [[1], [0.5]]
)";

std::string config_error(const std::string& text)
{
    try
    {
        parse_config(text);
    }
    catch (const ConfigError& e)
    {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Config, ParsesSystem)
{
    const auto cfg = parse_config(small_system, "/base");
    EXPECT_EQ(cfg.name, "small");
    EXPECT_EQ(cfg.rank, 1);
    EXPECT_EQ(cfg.als.restarts, 2);
    EXPECT_EQ(cfg.als.max_cycles, 250);
    ASSERT_TRUE(cfg.system);
    EXPECT_EQ(cfg.system->C(1, 0), 0.5);
    EXPECT_FALSE(cfg.kernel_file);
}

TEST(Config, BundledConfigs)
{
    const auto cfg = load_config(config_dir / "two_branch_cubic.yaml");
    EXPECT_EQ(cfg.rank, 2);
    EXPECT_EQ(cfg.points, 30);
    EXPECT_EQ(cfg.als.restarts, 10);
    ASSERT_TRUE(cfg.system);
    EXPECT_EQ(cfg.system->A(1, 0), -0.4);
    EXPECT_EQ(cfg.system->const0[1], -7.0);
    EXPECT_EQ(load_config(config_dir / "linear.yaml").degree, 1);
}

TEST(Config, ErrorsNameTheLine)
{
    EXPECT_NE(config_error(std::string(small_system) + "colour: red\n")
                  .find("line 14: unknown key 'colour'"),
              std::string::npos);
    std::string bad = small_system;
    bad.replace(bad.find("[[1], [0.5]]"), 12, "[[1], [0.5], [2]]");
    EXPECT_NE(config_error(bad).find("line 11"), std::string::npos);
    bad = small_system;
    bad.replace(bad.find("rank: 1"), 7, "rank: x");
    EXPECT_NE(config_error(bad).find("line 3"), std::string::npos);
    EXPECT_NE(config_error(std::string(small_system) + "L: 4\n").find("inconsistent"),
              std::string::npos);
}

TEST(Config, RequiresSeedsAndOneSource)
{
    std::string text = small_system;
    text.erase(text.find("als_seed: 1\n"), 12);
    EXPECT_NE(config_error(text).find("als_seed"), std::string::npos);
    EXPECT_NE(config_error(std::string(small_system) + "kernel_file: k.txt\n")
                  .find("exactly one"),
              std::string::npos);
    EXPECT_NE(config_error("rank: [1\n").find("line"), std::string::npos);
}

TEST(Experiment, WritesArtifacts)
{
    const auto dir = scratch("artifacts");
    const auto cfg = parse_config(small_system);
    std::ostringstream log;
    const auto rep = run_experiment(cfg, dir, &log);
    for (const char* f : {"report.yaml", "summary.json", "residuals_restart_01.csv",
                          "residuals_restart_02.csv", "points.txt",
                          "sampling_matrix.txt", "kernels.txt"})
        EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
    EXPECT_TRUE(rep.als.converged);
    EXPECT_NE(log.str().find("2 of 2 restarts converged"), std::string::npos);
    const auto summary = slurp(dir / "summary.json");
    EXPECT_NE(summary.find("\"best_restart\""), std::string::npos);
    EXPECT_NE(summary.find("\"a_error\""), std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST(Experiment, KernelFileInputMatchesSystemInput)
{
    const auto dir = scratch("from_file");
    auto cfg       = parse_config(small_system);
    synthesize_only(cfg, dir, nullptr);
    std::ofstream(dir / "cfg.yaml")
        << "name: small\nrank: 1\nL1: 2\nL2: 2\ndegree: 2\npoints: 4\n"
           "point_seed: 1\nals_seed: 1\nrestarts: 2\nkernel_file: kernels.txt\n";
    const auto file_cfg = load_config(dir / "cfg.yaml");
    ASSERT_TRUE(file_cfg.kernel_file);
    const auto a = run_experiment(cfg, dir / "a", nullptr);
    const auto b = run_experiment(file_cfg, dir / "b", nullptr);
    EXPECT_EQ(slurp(dir / "a" / "residuals_restart_01.csv"),
              slurp(dir / "b" / "residuals_restart_01.csv"));
    EXPECT_FALSE(b.match);

    std::ofstream(dir / "cfg.yaml", std::ios::app) << "L: 3\n";
    auto wrong = load_config(dir / "cfg.yaml");
    wrong.degree = 3;
    EXPECT_THROW(run_experiment(wrong, dir / "c", nullptr), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST(Experiment, DeterministicArtifacts)
{
    const auto dir = scratch("determinism");
    const auto cfg = parse_config(small_system);
    run_experiment(cfg, dir / "1", nullptr);
    run_experiment(cfg, dir / "2", nullptr);
    for (const auto& entry : std::filesystem::directory_iterator(dir / "1"))
    {
        const auto name = entry.path().filename();
        EXPECT_EQ(slurp(entry.path()), slurp(dir / "2" / name)) << name;
    }
    std::filesystem::remove_all(dir);
}

TEST(Experiment, LinearConfig)
{
    const auto dir = scratch("linear");
    const auto rep = run_experiment(load_config(config_dir / "linear.yaml"), dir, nullptr);
    EXPECT_EQ(rep.measurements, 3);
    EXPECT_EQ(slurp(dir / "sampling_matrix.txt").substr(0, 6), "3 4 4\n");
    std::filesystem::remove_all(dir);
}

TEST(Experiment, SynthRequiresSystem)
{
    ExperimentConfig cfg = parse_config(small_system);
    cfg.system.reset();
    EXPECT_THROW(synthesize_only(cfg, scratch("none"), nullptr), ConfigError);
}

TEST(Cli, ExitCodes)
{
    const std::string cli = PWHID_CLI;
    const auto dir        = scratch("cli");
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "ok.yaml") << small_system;
    std::ofstream(dir / "bad.yaml") << small_system << "bogus: 1\n";

    auto run = [&](const std::string& args) {
        const int status = std::system((cli + " " + args + " > " +
                                        (dir / "stdout.txt").string() + " 2>&1")
                                           .c_str());
        return WEXITSTATUS(status);
    };
    EXPECT_EQ(run("run " + (dir / "ok.yaml").string() + " --out " +
                  (dir / "out").string()),
              0);
    EXPECT_TRUE(std::filesystem::exists(dir / "out" / "report.yaml"));
    EXPECT_NE(slurp(dir / "stdout.txt").find("restarts converged"), std::string::npos);
    EXPECT_EQ(run("synth " + (dir / "ok.yaml").string() + " --quiet --out " +
                  (dir / "synth").string()),
              0);
    EXPECT_TRUE(slurp(dir / "stdout.txt").empty());
    EXPECT_EQ(run("run " + (dir / "bad.yaml").string()), 1);
    EXPECT_NE(slurp(dir / "stdout.txt").find("unknown key 'bogus'"), std::string::npos);
    EXPECT_EQ(run("run " + (dir / "missing.yaml").string()), 2);
    EXPECT_EQ(run("frobnicate"), 1);
    std::filesystem::create_directories(dir / "blocker");
    std::ofstream(dir / "blocker" / "file") << "x";
    EXPECT_EQ(run("run " + (dir / "ok.yaml").string() + " --quiet --out " +
                  (dir / "blocker" / "file").string()),
              2);
    std::filesystem::remove_all(dir);
}
