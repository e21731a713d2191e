#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "costknock/simulate.hpp"

using namespace costknock;

namespace {

SimConfig small_config() {
    SimConfig config;
    config.n = 80;
    config.p = 8;
    config.beta = Eigen::VectorXd::Zero(8);
    config.beta[0] = 2.0;
    config.beta[1] = 2.0;
    config.gamma = 0.5;
    config.reps = 8;
    config.seed = 33;
    config.cv_folds = 4;
    config.cv_grid = 15;
    return config;
}

} // namespace

TEST_CASE("documented defaults") {
    const SimConfig config;
    CHECK(config.n == 200);
    CHECK(config.p == 30);
    CHECK(config.cost_expensive == 6);
    CHECK(config.cost_cheap == 2);
    CHECK(config.alpha == 0.2);
    CHECK(config.c == 1.0);
    CHECK(config.reps == 100);
    CHECK(config.cv_folds == 10);
    CHECK(config.cv_grid == 100);
    CHECK(config.mode == SimMode::Cheap);
    CHECK(config.noise_rule == NoiseRule::SnrScaled);
}

TEST_CASE("config validation") {
    SimConfig config = small_config();
    config.reps = 0;
    CHECK_THROWS_AS(config.validate(), input_error);

    config = small_config();
    config.gamma = 1.5;
    CHECK_THROWS_AS(config.validate(), input_error);

    config = small_config();
    config.beta = Eigen::VectorXd::Zero(3);
    CHECK_THROWS_AS(config.validate(), input_error);

    config = small_config();
    config.cost_cheap = 1;
    CHECK_THROWS_AS(config.validate(), input_error);

    config = small_config();
    config.n = 6;  // fewer than 2 observations per fold
    CHECK_THROWS_AS(config.validate(), input_error);
}

TEST_CASE("config JSON round trip and parsing") {
    const nlohmann::json doc = {
        {"n", 64},
        {"p", 5},
        {"gamma", 0.25},
        {"reps", 3},
        {"seed", 99},
        {"beta", {1.5, -0.5}},
        {"mode", "baseline-omega2"},
        {"noise_rule", "fixed-sigma"},
        {"sigma2", 2.0},
        {"cv_folds", 4},
        {"cv_grid", 10},
    };
    const SimConfig config = sim_config_from_json(doc);
    CHECK(config.n == 64);
    CHECK(config.p == 5);
    CHECK(config.beta.size() == 5);        // zero-padded to p
    CHECK(config.beta[0] == 1.5);
    CHECK(config.beta[1] == -0.5);
    CHECK(config.beta[4] == 0.0);
    CHECK(config.mode == SimMode::BaselineOmega2);
    CHECK(config.noise_rule == NoiseRule::FixedSigma);
    CHECK(config.sigma2 == 2.0);

    const SimConfig again = sim_config_from_json(sim_config_to_json(config));
    CHECK(again.n == config.n);
    CHECK(again.seed == config.seed);
    CHECK((again.beta - config.beta).cwiseAbs().maxCoeff() == 0.0);
    CHECK(again.mode == config.mode);

    nlohmann::json missing = doc;
    missing.erase("reps");
    CHECK_THROWS_AS(sim_config_from_json(missing), input_error);

    nlohmann::json bad_mode = doc;
    bad_mode["mode"] = "expensive";
    CHECK_THROWS_AS(sim_config_from_json(bad_mode), input_error);

    nlohmann::json bad_rule = doc;
    bad_rule["noise_rule"] = "snr";
    CHECK_THROWS_AS(sim_config_from_json(bad_rule), input_error);
}

TEST_CASE("synthetic data respects the cost regime") {
    SimConfig config;
    config.beta = Eigen::VectorXd::Zero(30);
    for (int j = 0; j < 10; ++j) config.beta[j] = 2.0;
    config.reps = 1;
    config.seed = 5;

    SUBCASE("all nulls expensive at gamma = 1") {
        config.gamma = 1.0;
        Rng rng = Rng::stream(config.seed, 0);
        const SyntheticData data = generate_synthetic(config, rng);
        CHECK(data.h0 == std::vector<int>{10, 11, 12, 13, 14, 15, 16, 17, 18, 19,
                                          20, 21, 22, 23, 24, 25, 26, 27, 28, 29});
        for (int j : data.h0) CHECK(data.omega[j] == 6);
        // Relevant features split: first half expensive, second half cheap.
        for (int j = 0; j < 5; ++j) CHECK(data.omega[j] == 6);
        for (int j = 5; j < 10; ++j) CHECK(data.omega[j] == 2);
        CHECK_FALSE(data.sigma_fallback);

        // snr-scaled noise: sigma2 = ||X beta||^2 / (4n) from the drawn X.
        const double expected =
            (data.data.X * config.beta).squaredNorm() / (4.0 * config.n);
        CHECK(data.sigma2 == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("all nulls cheap at gamma = 0") {
        config.gamma = 0.0;
        Rng rng = Rng::stream(config.seed, 0);
        const SyntheticData data = generate_synthetic(config, rng);
        for (int j : data.h0) CHECK(data.omega[j] == 2);
    }

    SUBCASE("zero signal falls back to unit noise") {
        config.beta.setZero();
        Rng rng = Rng::stream(config.seed, 0);
        const SyntheticData data = generate_synthetic(config, rng);
        CHECK(data.sigma_fallback);
        CHECK(data.sigma2 == 1.0);
        CHECK(static_cast<int>(data.h0.size()) == 30);
    }

    SUBCASE("fixed sigma rule") {
        config.noise_rule = NoiseRule::FixedSigma;
        config.sigma2 = 3.5;
        Rng rng = Rng::stream(config.seed, 0);
        const SyntheticData data = generate_synthetic(config, rng);
        CHECK(data.sigma2 == 3.5);
        CHECK_FALSE(data.sigma_fallback);
    }
}

TEST_CASE("replicates are deterministic") {
    const SimConfig config = small_config();
    const RepRecord a = run_replicate(config, 3);
    const RepRecord b = run_replicate(config, 3);
    CHECK_FALSE(a.failed);
    CHECK(a.kappa == b.kappa);
    CHECK(a.wfdp == b.wfdp);
    CHECK(a.ubar == b.ubar);
    CHECK(a.rmse == b.rmse);
    CHECK(a.sup_ratio == b.sup_ratio);
    CHECK(a.omega_true == b.omega_true);
}

TEST_CASE("modes see identical data") {
    SimConfig cheap = small_config();
    SimConfig baseline = small_config();
    baseline.mode = SimMode::BaselineOmega2;
    for (int rep = 0; rep < 3; ++rep) {
        const RepRecord a = run_replicate(cheap, rep);
        const RepRecord b = run_replicate(baseline, rep);
        CHECK(a.omega_true == b.omega_true);
        CHECK(a.is_null == b.is_null);
    }
}

TEST_CASE("modes coincide when every real cost is 2") {
    SimConfig cheap = small_config();
    cheap.cost_expensive = 2;
    SimConfig baseline = cheap;
    baseline.mode = SimMode::BaselineOmega2;
    for (int rep = 0; rep < 3; ++rep) {
        const RepRecord a = run_replicate(cheap, rep);
        const RepRecord b = run_replicate(baseline, rep);
        CHECK(a.kappa == b.kappa);
        CHECK(a.wfdp == b.wfdp);
        CHECK(a.ubar == b.ubar);
        CHECK(a.rmse == b.rmse);
        CHECK(a.violation == b.violation);
        CHECK(a.sup_ratio == b.sup_ratio);
    }
}

TEST_CASE("single-replicate experiments") {
    SimConfig config = small_config();
    config.reps = 1;
    const SimReport report = run_experiment(config);
    CHECK(report.per_rep.size() == 1);
    CHECK(report.failed == 0);
    CHECK((report.violation_rate == 0.0 || report.violation_rate == 1.0));
    CHECK(static_cast<int>(report.mean_cost.size()) == config.p);
    CHECK(static_cast<int>(report.mean_rmse.size()) == config.p);
}

TEST_CASE("null winners are uniform within sampling error") {
    // Pool kappa = 1 counts for null features by real cost; each group's
    // frequency must sit within 3 binomial standard errors of 1/omega.
    SimConfig config = small_config();
    config.reps = 50;
    config.n = 100;
    const SimReport report = run_experiment(config);
    CHECK(report.failed == 0);

    int trials[2] = {0, 0};
    int wins[2] = {0, 0};
    for (const RepRecord& rec : report.per_rep) {
        for (int j = 0; j < config.p; ++j) {
            if (!rec.is_null[static_cast<std::size_t>(j)]) continue;
            const int slot = rec.omega_true[static_cast<std::size_t>(j)] == 2 ? 0 : 1;
            trials[slot] += 1;
            wins[slot] += rec.kappa[static_cast<std::size_t>(j)] == 1;
        }
    }
    for (int slot = 0; slot < 2; ++slot) {
        REQUIRE(trials[slot] > 50);
        const double q = slot == 0 ? 0.5 : 1.0 / 6.0;
        const double freq = double(wins[slot]) / trials[slot];
        const double band = 3.0 * std::sqrt(q * (1.0 - q) / trials[slot]);
        CHECK(std::abs(freq - q) <= band);
    }
}

TEST_CASE("serialized outputs are stable and deterministic") {
    SimConfig config = small_config();
    config.reps = 4;
    const SimReport report = run_experiment(config);
    const SimReport again = run_experiment(config);

    const std::string violations = violations_to_csv(report);
    CHECK(violations == violations_to_csv(again));
    CHECK(violations.rfind("rep,flag,sup_ratio\n", 0) == 0);
    CHECK(std::count(violations.begin(), violations.end(), '\n') == 5);

    SimConfig baseline = config;
    baseline.mode = SimMode::BaselineOmega2;
    const SimReport base_report = run_experiment(baseline);
    const std::string tradeoff = tradeoff_to_csv({&report, &base_report});
    CHECK(tradeoff.rfind("k,mean_cost,mean_rmse,mode\n", 0) == 0);
    CHECK(tradeoff.find(",cheap\n") != std::string::npos);
    CHECK(tradeoff.find(",baseline-omega2\n") != std::string::npos);
    CHECK(std::count(tradeoff.begin(), tradeoff.end(), '\n') ==
          1 + 2 * config.p);

    const nlohmann::json doc = report_to_json(report);
    CHECK(doc.at("per_rep").size() == 4);
    CHECK(doc.at("violation_rate").is_number());
    CHECK(doc.at("config").at("mode").get<std::string>() == "cheap");
    CHECK(report_to_json(again).dump() == doc.dump());
}
