#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>
#include <sys/wait.h>

#include "inls/cli.hpp"
#include "inls/config.hpp"
#include "inls/io.hpp"

using namespace inls;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "model": {"N": 3, "b": 1, "p": 2},
  "grid": {"n": 512, "r_max": 24},
  "evolve": {"dt": 0.01, "t_final": 0.2, "snapshot_stride": 2}
})";

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("inls_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int run_lab(const std::string& args) {
    const char* lab = std::getenv("INLS_LAB");
    if (!lab) return -1;
    const int rc = std::system((std::string(lab) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

template <class E>
std::string error_of(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const E& e) {
        return e.what();
    }
    return "";
}

} // namespace

TEST(ParseConfig, MinimalFile) {
    const RunConfig c = parse_config_text(kMinimal);
    EXPECT_EQ(c.grid.n, 512u);
    EXPECT_DOUBLE_EQ(c.evolve.dt, 0.01);
    EXPECT_DOUBLE_EQ(c.criteria.R_crit, 10.0);
    EXPECT_DOUBLE_EQ(to_json(c)["model"]["s_c"].get<double>(), 0.5);
    EXPECT_EQ(c.init.family, InitFamily::GroundStateScaled);
}

TEST(ParseConfig, EndpointRejected) {
    const std::string msg = error_of<ValidationError>(R"({"model": {"N": 3, "b": 1, "p": 3}, "evolve": {"dt": 0.01, "t_final": 1}})");
    EXPECT_NE(msg.find("p outside intercritical range"), std::string::npos) << msg;
}

TEST(ParseConfig, MissingDt) {
    EXPECT_EQ(error_of<ValidationError>(R"({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"t_final": 1}})"),
              "evolve.dt required");
    EXPECT_EQ(error_of<ValidationError>(R"({"model": {"N": 3, "b": 1, "p": 2}})"), "evolve.dt required");
}

TEST(ParseConfig, UnknownKeys) {
    EXPECT_EQ(error_of<ValidationError>(R"({"model": {"N": 3, "b": 1, "p": 2, "q": 1}, "evolve": {"dt": 0.1, "t_final": 1}})"),
              "unknown key model.q");
    EXPECT_EQ(error_of<ValidationError>(R"({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 0.1, "t_final": 1}, "extra": 1})"),
              "unknown key extra");
}

TEST(ParseConfig, MalformedJsonCarriesLine) {
    try {
        parse_config_text("{\n  \"model\": {\"N\": 3,\n    \"b\": 1 \"p\": 2}\n}");
        FAIL() << "no error";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3);
    }
}

TEST(ParseConfig, Validation) {
    EXPECT_FALSE(error_of<ValidationError>(
                     R"({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": -1, "t_final": 1}})")
                     .empty());
    EXPECT_FALSE(error_of<ValidationError>(
                     R"({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 0.1, "t_final": 1}, "grid": {"r_max": 5}})")
                     .empty());
    EXPECT_FALSE(error_of<ValidationError>(
                     R"({"model": {"N": 3, "b": 1, "p": 2}, "evolve": {"dt": 0.1, "t_final": 1}, "init": {"family": "box"}})")
                     .empty());
    EXPECT_FALSE(error_of<ValidationError>(
                     R"({"model": {"N": 3, "b": 1, "p": "two"}, "evolve": {"dt": 0.1, "t_final": 1}})")
                     .empty());
}

TEST(Dispatch, UnknownSubcommand) {
    std::ostringstream log;
    EXPECT_EQ(dispatch("plot", parse_config_text(kMinimal), {}, log), kExitConfig);
}

TEST(Dispatch, GroundWritesJsonAndProfile) {
    const fs::path dir = scratch("ground");
    std::ostringstream log;
    DispatchOptions opt;
    opt.out_dir = dir;
    ASSERT_EQ(dispatch("ground", parse_config_text(kMinimal), opt, log), kExitOk) << log.str();
    const auto j = nlohmann::json::parse(slurp(dir / "inls_ground.json"));
    for (const char* k : {"N", "b", "p", "s_c", "mass", "energy", "grad_norm", "me_threshold", "grad_threshold", "residual"})
        EXPECT_TRUE(j["ground_state"].contains(k)) << k;
    EXPECT_GT(j["ground_state"]["energy"].get<double>(), 0.0);
    const RadialField q = read_profile_csv((dir / "inls_ground.csv").string(), build_grid(512, 24, 3));
    EXPECT_DOUBLE_EQ(q[0].real(), j["ground_state"]["Q0"].get<double>());
}

TEST(Dispatch, EvolveOutputsAndDeterminism) {
    const fs::path a = scratch("evolve_a"), b = scratch("evolve_b");
    const RunConfig cfg = parse_config_text(kMinimal);
    std::ostringstream log;
    DispatchOptions oa, ob;
    oa.out_dir = a;
    ob.out_dir = b;
    ASSERT_EQ(dispatch("evolve", cfg, oa, log), kExitOk);
    ASSERT_EQ(dispatch("evolve", cfg, ob, log), kExitOk);
    const std::string csv = slurp(a / "inls_trajectory.csv");
    EXPECT_EQ(csv, slurp(b / "inls_trajectory.csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,mass,energy,grad_norm,local_mass,Z,dZdt_rhs,sup_norm");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 11);
    const auto j = nlohmann::json::parse(slurp(a / "inls_summary.json"));
    EXPECT_EQ(j["termination"], "horizon");
    EXPECT_TRUE(j["threshold"]["below_grad"].get<bool>());
    EXPECT_FALSE(fs::exists(a / "inls_trajectory.csv.tmp"));
}

TEST(Dispatch, ComputationErrorRollsBack) {
    const fs::path dir = scratch("rollback");
    RunConfig cfg = parse_config_text(kMinimal);
    cfg.init.family = InitFamily::CustomCsv;
    cfg.init.path = (dir / "missing.csv").string();
    std::ostringstream log;
    DispatchOptions opt;
    opt.out_dir = dir;
    EXPECT_EQ(dispatch("evolve", cfg, opt, log), kExitConfig);
    EXPECT_TRUE(fs::is_empty(dir));
}

TEST(Dispatch, DecayFit) {
    const fs::path dir = scratch("decay");
    RunConfig cfg = parse_config_text(R"({
      "model": {"N": 3, "b": 1, "p": 2},
      "grid": {"n": 4096, "r_max": 120},
      "evolve": {"dt": 0.05, "t_final": 1},
      "init": {"family": "gaussian", "scale": 1}
    })");
    std::ostringstream log;
    DispatchOptions opt;
    opt.out_dir = dir;
    ASSERT_EQ(dispatch("decay", cfg, opt, log), kExitOk);
    const auto j = nlohmann::json::parse(slurp(dir / "inls_decay.json"));
    EXPECT_NEAR(j["slope"].get<double>(), -1.5, 0.15);
}

TEST(Fmt17, RoundTrips) {
    for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) EXPECT_EQ(std::stod(fmt17(x)), x);
    EXPECT_EQ(fmt17(1.0), "1.0000000000000000e+00");
}

TEST(ExponentTable, ListsPairs) {
    const std::string t = exponent_table(ModelParams::make(3, 1, 2));
    EXPECT_NE(t.find("q_hat"), std::string::npos);
    EXPECT_NE(t.find("(a_bar,r_bar)"), std::string::npos);
}

TEST(Binary, ExitStatuses) {
    if (!std::getenv("INLS_LAB")) GTEST_SKIP() << "INLS_LAB not set";
    const fs::path dir = scratch("binary");
    const fs::path cfg = dir / "cfg.json";
    std::ofstream(cfg) << kMinimal;
    EXPECT_EQ(run_lab("plot --config " + cfg.string()), 2);
    EXPECT_EQ(run_lab("evolve --config " + (dir / "nope.json").string()), 2);
    const fs::path bad = dir / "bad.json";
    std::ofstream(bad) << R"({"model": {"N": 3, "b": 1, "p": 3}, "evolve": {"dt": 0.1, "t_final": 1}})";
    EXPECT_EQ(run_lab("ground --config " + bad.string()), 2);
    EXPECT_EQ(run_lab("check exponents --config " + cfg.string()), 0);
    EXPECT_EQ(run_lab("evolve --config " + cfg.string() + " --out " + (dir / "o1").string()), 0);
    EXPECT_EQ(run_lab("evolve --config " + cfg.string() + " --out " + (dir / "o2").string()), 0);
    EXPECT_EQ(slurp(dir / "o1" / "inls_trajectory.csv"), slurp(dir / "o2" / "inls_trajectory.csv"));
}
