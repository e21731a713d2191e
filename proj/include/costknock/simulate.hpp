#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "costknock/cost.hpp"
#include "costknock/lasso.hpp"
#include "costknock/rng.hpp"

namespace costknock {

enum class NoiseRule { SnrScaled, FixedSigma };
enum class SimMode { Cheap, BaselineOmega2 };

/// One synthetic experiment: design size, signal, cost regime, bound
/// parameters and seeding. Mirrors the config-file keys one to one.
struct SimConfig {
    int n = 200;
    int p = 30;
    Eigen::VectorXd beta;                  // length p
    NoiseRule noise_rule = NoiseRule::SnrScaled;
    double sigma2 = 1.0;                   // fixed-sigma rule only
    double gamma = 1.0;                    // P(null feature is expensive)
    int cost_expensive = 6;
    int cost_cheap = 2;
    int reps = 100;
    double alpha = 0.2;
    double c = 1.0;
    std::uint64_t seed = 1;
    SimMode mode = SimMode::Cheap;
    int cv_folds = 10;
    int cv_grid = 100;

    void validate() const;
};

SimConfig sim_config_from_json(const nlohmann::json& doc);
nlohmann::json sim_config_to_json(const SimConfig& config);

std::string to_string(SimMode mode);
std::string to_string(NoiseRule rule);

/// One replicate's data: features, response, true costs, and the true nulls.
struct SyntheticData {
    Dataset data;
    CostVector omega;
    std::vector<int> h0;          // 0-based null features
    double sigma2 = 0.0;
    bool sigma_fallback = false;  // beta = 0 forced sigma2 = 1
};

/// Draw one synthetic dataset. X entries are iid standard normal,
/// y = X beta + eps with eps ~ N(0, sigma2 I); under the snr-scaled rule
/// sigma2 = ||X beta||^2 / (4n), falling back to 1 when beta = 0. Relevant
/// features take cost_expensive for the first half (by index) and cost_cheap
/// for the rest; each null feature is expensive with probability gamma.
SyntheticData generate_synthetic(const SimConfig& config, Rng& rng);

struct RepRecord {
    int rep = 0;
    bool failed = false;
    std::string error;
    bool violation = false;
    double sup_ratio = 0.0;
    std::vector<double> wfdp;       // oracle, real costs
    std::vector<double> ubar;       // bound, construction costs
    std::vector<double> real_cost;  // cumulative real cost of R_k
    std::vector<double> rmse;       // test RMSE of the OLS refit on R_k
    std::vector<int> kappa;
    std::vector<int> omega_true;
    std::vector<char> is_null;
    int tie_events = 0;
    bool sigma_fallback = false;
};

/// Run the full pipeline for one replicate. Deterministic in (config.seed,
/// rep_index); data, test set and cost draws use streams that do not depend
/// on the mode, so cheap and baseline runs see identical datasets.
RepRecord run_replicate(const SimConfig& config, int rep_index);

struct SimReport {
    SimConfig config;
    std::vector<RepRecord> per_rep;
    int failed = 0;
    int sigma_fallbacks = 0;
    double violation_rate = 0.0;          // over successful replicates
    std::vector<double> mean_cost;        // per k, successful replicates
    std::vector<double> mean_rmse;
};

/// Execute all replicates (in parallel when hardware allows; results are
/// independent of scheduling) and aggregate. Throws solver_error when more
/// than 5% of replicates fail.
SimReport run_experiment(const SimConfig& config);

/// violations.csv body: rep,flag,sup_ratio (failed replicates are skipped).
std::string violations_to_csv(const SimReport& report);

/// tradeoff.csv body: k,mean_cost,mean_rmse,mode. Several reports may be
/// stacked into one file; the header is emitted once.
std::string tradeoff_to_csv(const std::vector<const SimReport*>& reports);

nlohmann::json report_to_json(const SimReport& report);

} // namespace costknock
