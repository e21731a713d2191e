#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "costknock/csv.hpp"
#include "costknock/rng.hpp"

namespace fs = std::filesystem;
using costknock::read_text_file;

namespace {

// Scratch tree for fixture files and command outputs.
fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "costknock_cli" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_cli(const std::string& args, const fs::path& dir) {
    const std::string cmd = std::string(CLI_BINARY) + " " + args + " >" +
                            (dir / "stdout.txt").string() + " 2>" +
                            (dir / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string captured(const fs::path& dir, const char* which) {
    return read_text_file((dir / which).string());
}

void write_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

// 40x4 regression fixture with a strong first feature.
void write_dataset(const fs::path& path, bool binomial = false) {
    costknock::Rng rng(424242);
    std::string csv = "x1,x2,x3,x4,y\n";
    for (int i = 0; i < 40; ++i) {
        const double x1 = rng.normal();
        const double x2 = rng.normal();
        const double x3 = rng.normal();
        const double x4 = rng.normal();
        double y = 2.0 * x1 + 0.5 * rng.normal();
        if (binomial) y = y > 0.0 ? 1.0 : 0.0;
        csv += costknock::format_double(x1) + "," + costknock::format_double(x2) + "," +
               costknock::format_double(x3) + "," + costknock::format_double(x4) + "," +
               costknock::format_double(y) + "\n";
    }
    write_file(path, csv);
}

const std::string kCosts = "feature,omega\nx1,2\nx2,3\nx3,2\nx4,6\n";

std::string select_base(const fs::path& dir) {
    return "select " + (dir / "data.csv").string() +
           " --response y --family gaussian --seed 7 --folds 4 --grid 12";
}

} // namespace

TEST_CASE("select writes the documented outputs") {
    const fs::path dir = fresh_dir("select_ok");
    write_dataset(dir / "data.csv");
    write_file(dir / "costs.csv", kCosts);

    const std::string args = select_base(dir) + " --costs " +
                             (dir / "costs.csv").string() + " --at-k 2 --out " +
                             (dir / "out").string();
    REQUIRE(run_cli(args, dir) == 0);

    const std::string path_csv = read_text_file((dir / "out" / "path.csv").string());
    CHECK(path_csv.rfind("k,feature,omega,kappa,tau,selected,cost_k,ubar_k,wfdp_k\n", 0) == 0);
    CHECK(std::count(path_csv.begin(), path_csv.end(), '\n') == 5);
    // No oracle on real data: the wfdp column must be empty.
    CHECK(path_csv.find("\n1,") != std::string::npos);
    CHECK(path_csv.substr(path_csv.size() - 2) == ",\n");

    const nlohmann::json summary =
        nlohmann::json::parse(read_text_file((dir / "out" / "summary.json").string()));
    CHECK(summary.at("omega") == nlohmann::json({2, 3, 2, 6}));
    CHECK(summary.at("selected_sets").size() == 1);
    CHECK(summary.at("selected_sets")[0].at("k").get<int>() == 2);
    CHECK(summary.at("alpha").get<double>() == 0.2);
    // Empirical covariance estimation is outside the known-law assumption.
    CHECK(summary.contains("warnings"));
    CHECK(captured(dir, "stderr.txt").find("empirical") != std::string::npos);

    // Same seed, fresh output directory: byte-identical artifacts.
    const std::string rerun = select_base(dir) + " --costs " +
                              (dir / "costs.csv").string() + " --at-k 2 --out " +
                              (dir / "out2").string();
    REQUIRE(run_cli(rerun, dir) == 0);
    CHECK(read_text_file((dir / "out2" / "path.csv").string()) == path_csv);
}

TEST_CASE("select validates its cost inputs") {
    const fs::path dir = fresh_dir("select_bad_costs");
    write_dataset(dir / "data.csv");

    SUBCASE("cost below 2") {
        write_file(dir / "costs.csv", "feature,omega\nx1,2\nx2,1\nx3,2\nx4,6\n");
        const int code = run_cli(select_base(dir) + " --costs " +
                                 (dir / "costs.csv").string(), dir);
        CHECK(code == 2);
        CHECK(captured(dir, "stderr.txt").find("omega_j >= 2") != std::string::npos);
    }

    SUBCASE("non-integer cost requires --cost-scale") {
        write_file(dir / "costs.csv", "feature,omega\nx1,2.5\nx2,3\nx3,2\nx4,6\n");
        const std::string base = select_base(dir) + " --costs " +
                                 (dir / "costs.csv").string();
        CHECK(run_cli(base, dir) == 2);
        CHECK(captured(dir, "stderr.txt").find("cost-scale") != std::string::npos);
        CHECK(run_cli(base + " --cost-scale 2 --out " + (dir / "scaled").string(),
                      dir) == 0);
    }

    SUBCASE("missing feature row") {
        write_file(dir / "costs.csv", "feature,omega\nx1,2\nx2,3\nx3,2\n");
        const int code = run_cli(select_base(dir) + " --costs " +
                                 (dir / "costs.csv").string(), dir);
        CHECK(code == 2);
        CHECK(captured(dir, "stderr.txt").find("x4") != std::string::npos);
    }

    SUBCASE("uniform override needs no costs file") {
        CHECK(run_cli(select_base(dir) + " --omega-override 2 --out " +
                      (dir / "uniform").string(), dir) == 0);
    }
}

TEST_CASE("select rejects malformed requests") {
    const fs::path dir = fresh_dir("select_bad_args");
    write_dataset(dir / "data.csv");

    CHECK(run_cli("select " + (dir / "data.csv").string() +
                  " --response z --omega-override 2", dir) == 2);
    CHECK(captured(dir, "stderr.txt").find("z") != std::string::npos);

    CHECK(run_cli(select_base(dir) + " --omega-override 2 --at-k 99", dir) == 2);

    CHECK(run_cli("select " + (dir / "missing.csv").string() +
                  " --response y --omega-override 2", dir) == 2);

    // Gaussian responses are not binomial labels.
    CHECK(run_cli("select " + (dir / "data.csv").string() +
                  " --response y --family binomial --omega-override 2", dir) == 2);

    CHECK(run_cli("select " + (dir / "data.csv").string() +
                  " --response y --family poisson --omega-override 2", dir) == 2);

    CHECK(run_cli("--help", dir) == 0);
}

TEST_CASE("simulate runs a config end to end") {
    const fs::path dir = fresh_dir("simulate_ok");
    const nlohmann::json config = {
        {"n", 60}, {"p", 6}, {"gamma", 0.5}, {"reps", 4},  {"seed", 11},
        {"beta", {2.0, 2.0}}, {"cv_folds", 4}, {"cv_grid", 10},
    };
    write_file(dir / "config.json", config.dump(2));

    const std::string base = "simulate " + (dir / "config.json").string();
    REQUIRE(run_cli(base + " --out " + (dir / "out").string(), dir) == 0);

    const std::string violations =
        read_text_file((dir / "out" / "violations.csv").string());
    CHECK(violations.rfind("rep,flag,sup_ratio\n", 0) == 0);
    CHECK(std::count(violations.begin(), violations.end(), '\n') == 5);

    const std::string tradeoff = read_text_file((dir / "out" / "tradeoff.csv").string());
    CHECK(tradeoff.rfind("k,mean_cost,mean_rmse,mode\n", 0) == 0);
    CHECK(tradeoff.find(",cheap\n") != std::string::npos);

    const nlohmann::json report =
        nlohmann::json::parse(read_text_file((dir / "out" / "report.json").string()));
    CHECK(report.at("runs").size() == 1);

    // Byte-identical artifacts on rerun.
    REQUIRE(run_cli(base + " --out " + (dir / "out2").string(), dir) == 0);
    CHECK(read_text_file((dir / "out2" / "violations.csv").string()) == violations);
    CHECK(read_text_file((dir / "out2" / "tradeoff.csv").string()) == tradeoff);
    CHECK(read_text_file((dir / "out2" / "report.json").string()) ==
          read_text_file((dir / "out" / "report.json").string()));

    // Side-by-side mode comparison lands in one tradeoff file.
    REQUIRE(run_cli(base + " --mode both --out " + (dir / "both").string(), dir) == 0);
    const std::string both = read_text_file((dir / "both" / "tradeoff.csv").string());
    CHECK(both.find(",cheap\n") != std::string::npos);
    CHECK(both.find(",baseline-omega2\n") != std::string::npos);
    CHECK(captured(dir, "stdout.txt").find("baseline-omega2") != std::string::npos);
}

TEST_CASE("simulate sweeps gamma arrays") {
    const fs::path dir = fresh_dir("simulate_sweep");
    const nlohmann::json config = {
        {"n", 60}, {"p", 6}, {"gamma", {0.0, 1.0}}, {"reps", 2}, {"seed", 11},
        {"beta", {2.0, 2.0}}, {"cv_folds", 4}, {"cv_grid", 10},
    };
    write_file(dir / "config.json", config.dump(2));
    REQUIRE(run_cli("simulate " + (dir / "config.json").string() + " --out " +
                    (dir / "out").string(), dir) == 0);
    CHECK(fs::exists(dir / "out" / "violations_gamma0_cheap.csv"));
    CHECK(fs::exists(dir / "out" / "violations_gamma1_cheap.csv"));
    CHECK(fs::exists(dir / "out" / "tradeoff_gamma0.csv"));
    CHECK(fs::exists(dir / "out" / "tradeoff_gamma1.csv"));
    const nlohmann::json report =
        nlohmann::json::parse(read_text_file((dir / "out" / "report.json").string()));
    CHECK(report.at("runs").size() == 2);
}

TEST_CASE("simulate rejects bad configs") {
    const fs::path dir = fresh_dir("simulate_bad");
    const nlohmann::json zero_reps = {
        {"n", 60}, {"p", 6}, {"gamma", 0.5}, {"reps", 0}, {"seed", 11},
        {"beta", {2.0}},
    };
    write_file(dir / "config.json", zero_reps.dump());
    CHECK(run_cli("simulate " + (dir / "config.json").string(), dir) == 2);

    write_file(dir / "broken.json", "{\"n\": 60,");
    CHECK(run_cli("simulate " + (dir / "broken.json").string(), dir) == 2);

    CHECK(run_cli("simulate " + (dir / "absent.json").string(), dir) == 2);
}

TEST_CASE("validate-knockoffs diagnoses constructions") {
    const fs::path dir = fresh_dir("validate");

    REQUIRE(run_cli("validate-knockoffs --dim 3 --omega 2,3,2 --seed 3 "
                    "--n-mc 20000 --reps 60 --n 40 --grid 10", dir) == 0);
    const std::string output = captured(dir, "stdout.txt");
    CHECK(output.find("swap") != std::string::npos);
    CHECK(output.find("kappa") != std::string::npos);

    // Deliberately oversized decorrelation: infeasible, exit 3.
    CHECK(run_cli("validate-knockoffs --dim 1 --omega 2 --s-override 3 --reps 0",
                  dir) == 3);

    CHECK(run_cli("validate-knockoffs --omega 2 --sigma " +
                  (dir / "nosuch.csv").string(), dir) == 2);
    CHECK(run_cli("validate-knockoffs --dim 2 --omega 2,1 --reps 0", dir) == 2);
}
