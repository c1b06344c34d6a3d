#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "cbf/config.hpp"
#include "cbf/errors.hpp"
#include "cbf/experiment.hpp"
#include "cbf/io.hpp"

using namespace cbf;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("cbf_harness_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error(const std::string& text) {
    try {
        parse_config_text(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

// tiny problem so the cli runs finish in well under a second
const char* kTiny = R"({"n": 8, "nt": 8, "max_iters": 5, "probes": 2, "deltas": [0.1, 0.01]})";

int cbfctl(const std::string& env, const std::string& args) {
    const std::string cmd = env + " " + CBFCTL_PATH + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& text) {
    const fs::path p = dir / "config.json";
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST(Config, EmptyObjectGivesDefaults) {
    const ProblemConfig c = parse_config_text("{}");
    EXPECT_EQ(c.d, 2);
    EXPECT_EQ(c.n, 16);
    EXPECT_DOUBLE_EQ(c.kappa, 0.75);
    EXPECT_TRUE(c.hypothesis.kappa_defaulted);
    EXPECT_EQ(c.delta, 0.0);
    EXPECT_TRUE(c.hypothesis.hypothesis);
    EXPECT_TRUE(c.hypothesis.wellposed);
    EXPECT_TRUE(c.hypothesis.warnings.empty());
}

TEST(Config, ErrorsNameTheKey) {
    EXPECT_NE(config_error(R"({"beta": -1})").find("beta"), std::string::npos);
    EXPECT_NE(config_error(R"({"betta": 1})").find("betta"), std::string::npos);
    EXPECT_NE(config_error(R"({"betta": 1})").find("unknown key"), std::string::npos);
    EXPECT_NE(config_error(R"({"mu": "one"})").find("expected a number"), std::string::npos);
    EXPECT_NE(config_error(R"({"n": 8.5})").find("n"), std::string::npos);
    EXPECT_NE(config_error(R"({"n": 7})").find("even"), std::string::npos);
    EXPECT_NE(config_error(R"({"kappa": 1.5})").find("kappa"), std::string::npos);
    EXPECT_NE(config_error(R"({"rho_ladder": [0.5, 2]})").find("rho_ladder"), std::string::npos);
    EXPECT_NE(config_error("{\"mu\": ").find("not valid JSON"), std::string::npos);
    EXPECT_NE(config_error("[1, 2]").find("object"), std::string::npos);
    EXPECT_THROW(parse_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, WeakViscosityWarns) {
    const ProblemConfig c = parse_config_text(R"({"mu": 0.25})");
    EXPECT_FALSE(c.hypothesis.wellposed);
    EXPECT_FALSE(c.hypothesis.hypothesis);
    EXPECT_EQ(c.hypothesis.warnings.size(), 2u);

    // kappa* adapts to mu, so only a pinned kappa leaves the hypothesis:
    // 2 beta mu = 1.2 < 1/kappa = 4/3
    EXPECT_TRUE(parse_config_text(R"({"mu": 0.6})").hypothesis.hypothesis);
    const ProblemConfig m = parse_config_text(R"({"mu": 0.6, "kappa": 0.75})");
    EXPECT_TRUE(m.hypothesis.wellposed);
    EXPECT_FALSE(m.hypothesis.hypothesis);
    EXPECT_EQ(m.hypothesis.warnings.size(), 1u);
}

TEST(Config, RoundTrip) {
    const ProblemConfig a = parse_config_text(R"({"d": 3, "n": 8, "lambda": 0.02, "deltas": [0.5], "seed": 42})");
    const ProblemConfig b = parse_config_text(to_json(a));
    EXPECT_EQ(to_json(a), to_json(b));
    EXPECT_EQ(b.d, 3);
    EXPECT_EQ(b.seed, 42u);
    EXPECT_EQ(b.deltas, std::vector<double>{0.5});
    EXPECT_FALSE(b.hypothesis.kappa_defaulted);
    EXPECT_EQ(b.kappa, a.kappa);
}

TEST(Io, CsvAndNormTable) {
    const fs::path dir = scratch("csv");
    write_csv(dir / "t.csv", {{"a", "b"}, {{1.0, 0.1}, {2.0, -3e-20}}});
    const std::string text = slurp(dir / "t.csv");
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "a,b");
    std::getline(in, line);
    EXPECT_EQ(std::stod(line.substr(line.find(',') + 1)), 0.1);
    std::getline(in, line);
    EXPECT_EQ(std::stod(line.substr(line.find(',') + 1)), -3e-20);

    const CsvTable nt = norm_table({0.0, 0.5}, {{1.0, 2.0, 3.0}, {4.0, 5.0, 6.0}});
    EXPECT_EQ(nt.header, (std::vector<std::string>{"t", "l2", "v_norm", "l4"}));
    ASSERT_EQ(nt.rows.size(), 2u);
    EXPECT_EQ(nt.rows[1], (std::vector<double>{0.5, 4.0, 5.0, 6.0}));
}

TEST(Io, SvgAndJson) {
    const std::string svg = render_svg({"title", "x", "y", true}, {{"s", {1, 2, 3}, {1e-3, 1e-2, 1e-1}}});
    EXPECT_NE(svg.find("<svg"), std::string::npos);
    EXPECT_NE(svg.find("</svg>"), std::string::npos);
    EXPECT_NE(svg.find("title"), std::string::npos);

    const fs::path dir = scratch("json");
    write_json(dir / "s.json", {{"k", 1.5}, {"v", {1, 2}}});
    const auto j = nlohmann::json::parse(slurp(dir / "s.json"));
    EXPECT_EQ(j["k"], 1.5);
    EXPECT_EQ(j["v"].size(), 2u);
}

TEST(Experiment, DataIsDeterministicPerSeed) {
    ProblemConfig c = parse_config_text(kTiny);
    const ProblemData a = make_data(c), b = make_data(c);
    EXPECT_EQ((a.m0 - b.m0).max_abs(), 0.0);
    for (int i = 0; i <= c.nt; ++i) {
        EXPECT_EQ((a.f1[i] - b.f1[i]).max_abs(), 0.0);
        EXPECT_EQ((a.h[i] - b.h[i]).max_abs(), 0.0);
    }
    c.seed = 2;
    EXPECT_GT((make_data(c).m0 - a.m0).max_abs(), 0.0);
}

TEST(Experiment, SimulateIsReproducible) {
    const ProblemConfig c = parse_config_text(kTiny);
    const fs::path a = scratch("sim_a"), b = scratch("sim_b");
    const ExperimentResult ra = run_experiment("simulate", c, {a, 1});
    run_experiment("simulate", c, {b, 1});
    EXPECT_TRUE(ra.passed());
    EXPECT_EQ(slurp(a / "norms.csv"), slurp(b / "norms.csv"));
    EXPECT_EQ(slurp(a / "state.cbft"), slurp(b / "state.cbft"));
    const Trajectory st = read_trajectory(a / "state.cbft");
    EXPECT_EQ(st.nt(), c.nt);
    const auto s = nlohmann::json::parse(slurp(a / "summary.json"));
    EXPECT_EQ(s["status"], "pass");
    EXPECT_EQ(s["experiment"], "simulate");
}

TEST(Experiment, DeltaSweepDistancesShrink) {
    ProblemConfig c = parse_config_text(kTiny);
    c.deltas = {1e-1, 1e-2, 1e-3, 1e-4};
    const fs::path dir = scratch("sweep");
    const ExperimentResult r = run_experiment("delta-sweep", c, {dir, 2});
    EXPECT_TRUE(r.passed());
    std::istringstream in(slurp(dir / "delta_sweep.csv"));
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line.rfind("delta,distance", 0), 0u);
    double prev = INFINITY;
    int rows = 0;
    while (std::getline(in, line)) {
        const std::size_t c1 = line.find(',');
        const double dist = std::stod(line.substr(c1 + 1));
        EXPECT_LT(dist, prev);
        prev = dist;
        ++rows;
    }
    EXPECT_EQ(rows, 4);
}

TEST(Experiment, UnknownKindThrows) {
    EXPECT_THROW(run_experiment("nope", parse_config_text(kTiny), {scratch("nope"), 1}), InvalidArgument);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch("cli");
    const fs::path good = write_config(dir, kTiny);
    const std::string base = " --config " + good.string() + " --out " + (dir / "out").string();
    EXPECT_EQ(cbfctl("", "simulate" + base), 0);
    EXPECT_EQ(cbfctl("", "adjoint" + base + " --seed 3"), 0);
    EXPECT_EQ(cbfctl("", "delta-sweep" + base), 0);

    EXPECT_EQ(cbfctl("", "simulate --config " + (dir / "missing.json").string() + " --out " + dir.string()), 3);
    EXPECT_EQ(cbfctl("", "simulate"), 3);
    EXPECT_EQ(cbfctl("", "frobnicate" + base), 3);
    EXPECT_EQ(cbfctl("CBFCTL_THREADS=abc", "simulate" + base), 3);
    EXPECT_EQ(cbfctl("CBFCTL_THREADS=0", "simulate" + base), 3);

    const fs::path bad = scratch("cli_bad");
    write_config(bad, R"({"beta": -2})");
    EXPECT_EQ(cbfctl("", "simulate --config " + (bad / "config.json").string() + " --out " + bad.string()), 3);
}

TEST(Cli, InvariantViolationAndSolverFailure) {
    const fs::path strict = scratch("cli_strict");
    write_config(strict, R"({"n": 8, "nt": 8, "tol_duality": 1e-30})");
    EXPECT_EQ(cbfctl("", "adjoint --config " + (strict / "config.json").string() + " --out " + strict.string()), 1);
    const auto s = nlohmann::json::parse(slurp(strict / "summary.json"));
    EXPECT_EQ(s["status"], "invariant_violation");

    const fs::path starved = scratch("cli_starved");
    write_config(starved, R"({"n": 8, "nt": 8, "max_picard_iters": 1, "picard_tol": 1e-300})");
    EXPECT_EQ(cbfctl("", "simulate --config " + (starved / "config.json").string() + " --out " + starved.string()),
              2);
    const auto p = nlohmann::json::parse(slurp(starved / "summary.json"));
    EXPECT_EQ(p["status"], "solver_failure");
    EXPECT_TRUE(p["partial"].get<bool>());
}

TEST(Cli, ThreadsEnvironmentOverridesFlag) {
    const fs::path dir = scratch("cli_threads");
    const fs::path cfg = write_config(dir, kTiny);
    const std::string args = "delta-sweep --threads 1 --config " + cfg.string() + " --out " + dir.string();
    ASSERT_EQ(cbfctl("CBFCTL_THREADS=2", args), 0);
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "summary.json"))["threads"], 2);
    const std::string first = slurp(dir / "delta_sweep.csv");
    ASSERT_EQ(cbfctl("", args), 0);
    EXPECT_EQ(nlohmann::json::parse(slurp(dir / "summary.json"))["threads"], 1);
    EXPECT_EQ(slurp(dir / "delta_sweep.csv"), first);
}
