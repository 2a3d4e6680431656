#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "alloceval/estimators.hpp"
#include "alloceval/io.hpp"

using namespace alloceval;

namespace {

std::string g_binary;
std::filesystem::path g_dir;

struct RunResult {
    int exit_code = -1;
    std::string out;
};

std::string slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

RunResult run(const std::string& args) {
    const auto out_path = g_dir / "stdout.txt";
    const std::string cmd =
        g_binary + " " + args + " >" + out_path.string() + " 2>" + (g_dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    RunResult result;
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    result.out = slurp(out_path);
    return result;
}

void write_text(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    out << content;
}

std::string sim_config(const std::filesystem::path& dataset, int n, double alpha, int horizon,
                       int seed) {
    std::ostringstream ss;
    ss << R"({"simulator": {"domain": "synthetic", "n": )" << n << R"(, "horizon": )" << horizon
       << R"(, "seed": )" << seed << R"(}, "policy": {"alpha": )" << alpha
       << R"(}, "output": {"dataset_path": ")" << dataset.string() << R"("}})";
    return ss.str();
}

double json_field(const std::string& json, const std::string& name) {
    const auto pos = json.find("\"" + name + "\":");
    REQUIRE(pos != std::string::npos);
    return std::stod(json.substr(pos + name.size() + 3));
}

}  // namespace

TEST_CASE("missing subcommand and bad flags exit with code 2") {
    CHECK(run("").exit_code == 2);
    CHECK(run("estimate").exit_code == 2);
    CHECK(run("frobnicate").exit_code == 2);
}

TEST_CASE("simulate then estimate round-trips the in-process result") {
    const auto dataset = g_dir / "sim.csv";
    const auto config = g_dir / "sim.json";
    write_text(config, sim_config(dataset, 40, 0.2, 4, 77));
    CHECK(run("simulate " + config.string()).exit_code == 0);

    const RctDataset data = read_rct_csv(dataset.string());
    const EstimateReport expected = estimate_subgroup(data);

    const RunResult est = run("estimate " + dataset.string() + " --estimator subgroup");
    CHECK(est.exit_code == 0);
    CHECK(std::abs(json_field(est.out, "point") - expected.point) <= 1e-12);
    CHECK(std::abs(json_field(est.out, "ci_low") - *expected.ci_low) <= 1e-8);
}

TEST_CASE("simulate is byte-identical for a fixed seed") {
    const auto d1 = g_dir / "same1.csv";
    const auto d2 = g_dir / "same2.csv";
    const auto c1 = g_dir / "same1.json";
    const auto c2 = g_dir / "same2.json";
    write_text(c1, sim_config(d1, 30, 0.2, 3, 123));
    write_text(c2, sim_config(d2, 30, 0.2, 3, 123));
    CHECK(run("simulate " + c1.string()).exit_code == 0);
    CHECK(run("simulate " + c2.string()).exit_code == 0);
    CHECK(slurp(d1) == slurp(d2));
}

TEST_CASE("hybrid with weight zero matches the subgroup estimate") {
    const auto dataset = g_dir / "hyb.csv";
    const auto config = g_dir / "hyb.json";
    write_text(config, sim_config(dataset, 60, 0.25, 5, 31));
    REQUIRE(run("simulate " + config.string()).exit_code == 0);
    const RunResult sg = run("estimate " + dataset.string() + " --estimator subgroup");
    const RunResult hyb =
        run("estimate " + dataset.string() + " --estimator hybrid --weight 0");
    CHECK(sg.exit_code == 0);
    CHECK(hyb.exit_code == 0);
    CHECK(json_field(hyb.out, "point") == json_field(sg.out, "point"));
}

TEST_CASE("truncating at the full horizon changes nothing") {
    const auto dataset = g_dir / "trunc.csv";
    const auto config = g_dir / "trunc.json";
    write_text(config, sim_config(dataset, 40, 0.25, 6, 32));
    REQUIRE(run("simulate " + config.string()).exit_code == 0);
    const RunResult plain = run("estimate " + dataset.string() + " --estimator base");
    const RunResult trunc = run("estimate " + dataset.string() + " --estimator base --truncate 6");
    CHECK(plain.out == trunc.out);
}

TEST_CASE("multiple estimators emit one report per line") {
    const auto dataset = g_dir / "multi.csv";
    const auto config = g_dir / "multi.json";
    write_text(config, sim_config(dataset, 40, 0.25, 4, 33));
    REQUIRE(run("simulate " + config.string()).exit_code == 0);
    const RunResult result = run("estimate " + dataset.string() +
                                 " --estimator base --estimator subgroup --estimator threshold");
    CHECK(result.exit_code == 0);
    int lines = 0;
    for (char c : result.out)
        if (c == '\n') ++lines;
    CHECK(lines == 3);
    CHECK(result.out.find("\"estimator\":\"threshold\"") != std::string::npos);
}

TEST_CASE("malformed input exits with code 2") {
    const auto bad = g_dir / "bad.csv";
    write_text(bad, "agent_id,arm,index\n0,policy,0.5\n");
    CHECK(run("estimate " + bad.string()).exit_code == 2);

    const auto bad_config = g_dir / "bad.json";
    write_text(bad_config, R"({"simulator": {"n": 10, "mystery": true}})");
    CHECK(run("simulate " + bad_config.string()).exit_code == 2);

    const auto dataset = g_dir / "ok.csv";
    const auto config = g_dir / "ok.json";
    write_text(config, sim_config(dataset, 20, 0.2, 3, 34));
    REQUIRE(run("simulate " + config.string()).exit_code == 0);
    CHECK(run("estimate " + dataset.string() + " --estimator nope").exit_code == 2);
}

TEST_CASE("invariant violations exit with code 3") {
    const auto bad = g_dir / "treated_control.csv";
    write_text(bad,
               "agent_id,arm,index,treat_week,reward_t0\n"
               "0,policy,0.1,1,1\n1,policy,0.9,0,0\n"
               "0,control,0.2,1,1\n1,control,0.8,0,0\n");
    CHECK(run("estimate " + bad.string()).exit_code == 3);
}

TEST_CASE("degenerate variance exits with code 4") {
    // Constant rewards make the hybrid curvature vanish.
    const auto flat = g_dir / "flat.csv";
    write_text(flat,
               "agent_id,arm,index,treat_week,reward_t0\n"
               "0,policy,0.1,1,1\n1,policy,0.2,1,1\n2,policy,0.8,0,1\n3,policy,0.9,0,1\n"
               "0,control,0.1,0,1\n1,control,0.2,0,1\n2,control,0.8,0,1\n3,control,0.9,0,1\n");
    CHECK(run("estimate " + flat.string() + " --estimator hybrid").exit_code == 4);
}

TEST_CASE("coverage command emits the summary csv") {
    const auto config = g_dir / "cov.json";
    write_text(config, R"({
      "simulator": {"domain": "synthetic", "n": 100, "horizon": 3, "seed": 9},
      "policy": {"alpha": 0.2},
      "experiment": {"replicates": 20, "estimand_reps": 20,
                     "estimators": ["base", "subgroup"], "workers": 2}
    })");
    const RunResult result = run("coverage " + config.string());
    CHECK(result.exit_code == 0);
    CHECK(result.out.rfind("estimator,below,covered,above,", 0) == 0);
    int lines = 0;
    for (char c : result.out)
        if (c == '\n') ++lines;
    CHECK(lines == 3);  // header + one row per estimator
}

TEST_CASE("sweep command emits one row per grid value and estimator") {
    const auto config = g_dir / "sweep.json";
    write_text(config, R"({
      "simulator": {"domain": "synthetic", "n": 100, "horizon": 3, "seed": 10},
      "policy": {"alpha": 0.2},
      "experiment": {"replicates": 10, "estimand_reps": 10,
                     "estimators": ["base"], "workers": 2,
                     "sweep": {"axis": "level", "grid": [0.9, 0.95]}}
    })");
    const RunResult result = run("sweep " + config.string());
    CHECK(result.exit_code == 0);
    CHECK(result.out.rfind("level,estimator,", 0) == 0);
    int lines = 0;
    for (char c : result.out)
        if (c == '\n') ++lines;
    CHECK(lines == 3);
    // sweep requires the sweep section
    const auto cov_only = g_dir / "nosweep.json";
    write_text(cov_only, R"({"simulator": {"n": 100}, "experiment": {"replicates": 5}})");
    CHECK(run("sweep " + cov_only.string()).exit_code == 2);
}

TEST_CASE("corner-case command reports all three estimators") {
    const RunResult result = run("corner-case --n 100 --replicates 50 --seed 4 --workers 2");
    CHECK(result.exit_code == 0);
    CHECK(result.out.find("\"base\"") != std::string::npos);
    CHECK(result.out.find("\"subgroup\"") != std::string::npos);
    CHECK(result.out.find("\"hybrid\"") != std::string::npos);
    CHECK(result.out.find("\"replicates\":50") != std::string::npos);
}

TEST_CASE("compare command wraps the policy comparison") {
    const auto dataset = g_dir / "cmp.csv";
    const auto config = g_dir / "cmp.json";
    write_text(config, sim_config(dataset, 50, 0.2, 4, 35));
    REQUIRE(run("simulate " + config.string()).exit_code == 0);
    const RunResult base = run("estimate " + dataset.string() + " --estimator base");
    const RunResult sg = run("estimate " + dataset.string() + " --estimator subgroup");
    const auto r1 = g_dir / "r1.json";
    const auto r2 = g_dir / "r2.json";
    write_text(r1, base.out);
    write_text(r2, sg.out);
    const RunResult cmp = run("compare " + r1.string() + " " + r2.string());
    CHECK(cmp.exit_code == 0);
    const double diff = json_field(cmp.out, "diff");
    CHECK(std::abs(diff - (json_field(base.out, "point") - json_field(sg.out, "point"))) <= 1e-8);
    CHECK(json_field(cmp.out, "ci_low") <= diff);
    CHECK(json_field(cmp.out, "ci_high") >= diff);
}

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: test_cli <alloceval binary>\n");
        return 1;
    }
    g_binary = argv[1];
    g_dir = std::filesystem::temp_directory_path() / "alloceval_cli_tests";
    std::filesystem::create_directories(g_dir);
    doctest::Context context;
    context.applyCommandLine(argc - 1, argv + 1);
    const int rc = context.run();
    std::error_code ec;
    std::filesystem::remove_all(g_dir, ec);
    return rc;
}
