#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

const fs::path kWork = fs::path(FRACSOB_TEST_WORKDIR) / "cli";

struct Outcome {
    int code = -1;
    std::string output;
};

Outcome run_cli(const std::string& args) {
    const std::string cmd = std::string(FRACSOB_CLI) + " " + args + " 2>&1";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe) return o;
    char buf[512];
    while (std::fgets(buf, sizeof buf, pipe)) o.output += buf;
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

Json load(const fs::path& p) { return Json::parse(slurp(p)); }

fs::path write_config(const std::string& name, const Json& j) {
    fs::create_directories(kWork);
    const auto p = kWork / (name + ".json");
    std::ofstream(p) << j.dump(2);
    return p;
}

std::string config_path(const std::string& name) { return (fs::path(FRACSOB_CONFIG_DIR) / (name + ".json")).string(); }

Outcome run_in(const std::string& cmd, const std::string& config, const fs::path& out, const std::string& extra = "") {
    fs::remove_all(out);
    return run_cli(cmd + " --config " + config + " --out " + out.string() + " --quiet " + extra);
}

}  // namespace

TEST(Cli, GridTorusAndSphereVolumes) {
    const auto out = kWork / "grid_torus";
    ASSERT_EQ(run_in("grid", config_path("grid_torus"), out).code, 0);
    const auto g = load(out / "grid.json");
    EXPECT_NEAR(g["total_weight"].get<double>(), 1.0, 1e-12);
    EXPECT_EQ(g["count"].get<int>(), 1024);
    EXPECT_EQ(g["points"].size(), 1024u);

    const auto outs = kWork / "grid_sphere";
    ASSERT_EQ(run_in("grid", config_path("grid_sphere"), outs).code, 0);
    EXPECT_NEAR(load(outs / "grid.json")["total_weight"].get<double>(), 4 * M_PI, 1e-12);
}

TEST(Cli, BadManifoldKind) {
    const auto cfg = write_config("bad_kind", {{"manifold", {{"kind", "klein_bottle"}}}, {"resolution", 8}});
    const auto out = kWork / "bad_kind";
    const auto r = run_in("grid", cfg.string(), out);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.output.find("unsupported manifold"), std::string::npos) << r.output;
    const auto m = load(out / "manifest.json");
    EXPECT_EQ(m["exit_code"].get<int>(), 2);
}

TEST(Cli, ConfigErrors) {
    const auto missing = write_config("missing", {{"manifold", {{"kind", "torus"}}}});
    EXPECT_EQ(run_in("grid", missing.string(), kWork / "missing").code, 2);
    fs::create_directories(kWork);
    std::ofstream(kWork / "broken.json") << "{ not json";
    EXPECT_EQ(run_in("grid", (kWork / "broken.json").string(), kWork / "broken").code, 2);
    EXPECT_EQ(run_in("grid", (kWork / "nonexistent.json").string(), kWork / "nofile").code, 2);
    EXPECT_EQ(run_cli("grid").code, 2);
    EXPECT_EQ(run_cli("frobnicate --config x").code, 2);
    const auto super = write_config("supercritical", {{"manifold", {{"kind", "torus"}, {"dim", 1}}},
                                                      {"resolution", 16},
                                                      {"kernel", {{"s", 0.6}}},
                                                      {"h", 1.0},
                                                      {"f", 1.0},
                                                      {"q", 2.0}});
    EXPECT_EQ(run_in("solve", super.string(), kWork / "super").code, 2);
}

TEST(Cli, KernelCheck) {
    const auto out = kWork / "kc_pure";
    ASSERT_EQ(run_in("kernel-check", config_path("kernel_check_pure"), out).code, 0);
    const auto r = load(out / "kernel_check.json");
    EXPECT_EQ(r["k3"]["inf"].get<double>(), 1.0);
    EXPECT_EQ(r["k3"]["sup"].get<double>(), 1.0);
    EXPECT_EQ(r["k2_max_asymmetry"].get<double>(), 0.0);
    for (const auto& step : r["k4"]["ladder"]) EXPECT_EQ(step["max_deviation"].get<double>(), 0.0);

    const auto outt = kWork / "kc_tail";
    ASSERT_EQ(run_in("kernel-check", config_path("kernel_check_tail"), outt).code, 0);
    EXPECT_TRUE(load(outt / "kernel_check.json")["k4"]["strictly_decreasing"].get<bool>());
}

TEST(Cli, BubbleSweepDefaultSlope) {
    const auto out = kWork / "sweep";
    ASSERT_EQ(run_in("bubble-sweep", config_path("bubble_sweep"), out).code, 0);
    const auto r = load(out / "sweep.json");
    const double slope = r["l2_slope"].get<double>();
    EXPECT_GE(slope, 0.45);
    EXPECT_LE(slope, 0.75);
    const auto csv = slurp(out / "sweep.csv");
    EXPECT_EQ(csv.rfind("eps,l2,lcrit,energy,reference,ratio\r\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST(Cli, SolveConstantMatchesClosedForm) {
    const auto out = kWork / "solve_const";
    ASSERT_EQ(run_in("solve", config_path("solve_constant"), out).code, 0);
    const auto r = load(out / "result.json");
    EXPECT_NEAR(r["result"]["mu"].get<double>(), 0.5, 1e-6);
    EXPECT_NEAR(r["constant_level"].get<double>(), 0.5, 1e-15);
    EXPECT_LE(r["result"]["constraint_defect"].get<double>(), 1e-8);
    EXPECT_TRUE(fs::exists(out / "trace.csv"));
    EXPECT_TRUE(fs::exists(out / "solution.csv"));
}

TEST(Cli, SolveRefusesNonCoercive) {
    const auto cfg = write_config("noncoercive", {{"manifold", {{"kind", "torus"}, {"dim", 2}}},
                                                  {"resolution", 12},
                                                  {"kernel", {{"s", 0.5}}},
                                                  {"h", -100.0},
                                                  {"f", 1.0},
                                                  {"q", 2.0}});
    const auto out = kWork / "noncoercive";
    const auto r = run_in("solve", cfg.string(), out);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.output.find("non-coercive"), std::string::npos);
    EXPECT_TRUE(fs::exists(out / "manifest.json"));
}

TEST(Cli, ConditionZeroPotential) {
    const auto out = kWork / "cond0";
    ASSERT_EQ(run_in("condition", config_path("condition_zero_h"), out).code, 0);
    const auto c = load(out / "condition.json")["condition"];
    EXPECT_EQ(c["corollary_lhs"].get<double>(), 0.0);
    EXPECT_LT(c["corollary_lhs"].get<double>(), c["kinv"].get<double>());
    EXPECT_TRUE(c["condition_holds"].get<bool>());
    EXPECT_TRUE(c["corollary_holds"].get<bool>());
}

TEST(Cli, Equivalence) {
    const auto out = kWork / "equiv";
    ASSERT_EQ(run_in("equivalence", config_path("equivalence"), out).code, 0);
    const auto r = load(out / "equivalence.json");
    EXPECT_LE(r["band"].get<double>(), 3.0);
    EXPECT_TRUE(r["jensen_holds_all"].get<bool>());
}

TEST(Cli, EveryRunWritesManifestAndReport) {
    const std::vector<std::pair<std::string, std::string>> runs{
        {"grid", "grid_torus"}, {"kernel-check", "kernel_check_pure"}, {"solve", "solve_constant"}, {"equivalence", "equivalence"}};
    for (const auto& [cmd, name] : runs) {
        const auto out = kWork / ("manifest_" + name);
        ASSERT_EQ(run_in(cmd, config_path(name), out).code, 0) << name;
        const auto m = load(out / "manifest.json");
        EXPECT_EQ(m["command"].get<std::string>(), cmd);
        EXPECT_EQ(m["version"].get<std::string>(), "1.0.0");
        EXPECT_TRUE(m.contains("seed"));
        EXPECT_TRUE(m.contains("wall_time_s"));
        ASSERT_GE(m["files"].size(), 1u);
        for (const auto& f : m["files"]) EXPECT_TRUE(fs::exists(out / f.get<std::string>()));
    }
}

TEST(Cli, DeterministicReports) {
    const auto a = kWork / "det_a", b = kWork / "det_b", c = kWork / "det_c";
    ASSERT_EQ(run_in("solve", config_path("solve_torus"), a, "--seed 7 --threads 1").code, 0);
    ASSERT_EQ(run_in("solve", config_path("solve_torus"), b, "--seed 7 --threads 1").code, 0);
    ASSERT_EQ(run_in("solve", config_path("solve_torus"), c, "--seed 7 --threads 3").code, 0);
    for (const char* f : {"result.json", "trace.csv", "solution.csv"}) {
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(c / f)) << f;
    }
    EXPECT_EQ(load(a / "manifest.json")["seed"].get<int>(), 7);
}
