#pragma once

#include <Eigen/Dense>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "costknock/cost.hpp"
#include "costknock/rng.hpp"

namespace costknock {

/// Per-feature statistics derived from one lasso fit on the augmented design.
/// t[j][l] holds T_j^(l+1) = |theta| for copy l (0 = original); kappa_j is the
/// 1-based index of the winning copy and tau_j the cost-scaled winning margin
/// 2/omega_j * (best - second best).
struct StatisticTable {
    std::vector<std::vector<double>> t;
    std::vector<int> kappa;      // 1-based; kappa_j = 1 means the original won
    Eigen::VectorXd tau;
    double lambda_used = 0.0;
    int tie_events = 0;
};

/// Fill t from a coefficient vector over the augmented design. Any intercept
/// must already be excluded (theta covers exactly the W penalized columns).
StatisticTable compute_statistics(const Eigen::VectorXd& theta,
                                  const IndexMap& map,
                                  const CostVector& omega);

/// Fill kappa and tau. Argmax ties (exact float equality) are broken
/// uniformly at random and counted in tie_events; anything else would bias
/// kappa toward the original when a whole group is zeroed out.
void compute_kappa_tau(StatisticTable& table, const CostVector& omega, Rng& rng);

nlohmann::json statistic_table_to_json(const StatisticTable& table);
StatisticTable statistic_table_from_json(const nlohmann::json& doc);

} // namespace costknock
