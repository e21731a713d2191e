#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "costknock/cost.hpp"

namespace costknock {

/// Nested candidate path: sigma orders the features, R_k is the set of
/// winners (kappa = 1) among the first k ordered features. Features are
/// stored 0-based; selected[j] flags whether sigma[j] is a winner.
struct SelectionPath {
    std::vector<int> sigma;
    std::vector<char> selected;
    std::vector<double> cost_k;   // sum of omega over R_k
    std::vector<int> size_k;      // |R_k|

    int p() const { return static_cast<int>(sigma.size()); }
    /// Members of R_k (0-based feature indices), k in 1..p.
    std::vector<int> members(int k) const;
};

struct BoundParams {
    double alpha = 0.2;
    double c = 1.0;
    /// Optional feature subset (0-based) assumed to contain the nulls; the
    /// bound's max term then runs over it instead of all features. An empty
    /// set falls back to all features — callers should surface a warning.
    std::optional<std::vector<int>> h0_estimate;
};

struct WfdpCurve {
    Eigen::VectorXd ubar_k;
    std::optional<Eigen::VectorXd> wfdp_k;
    std::optional<double> ratio_sup;
};

/// Sort features by tau descending; ties by smaller omega, then smaller index.
std::vector<int> order_features(const Eigen::VectorXd& tau, const CostVector& omega);

/// kappa is 1-based per copy-group (1 = original won).
SelectionPath build_path(const std::vector<int>& sigma,
                         const std::vector<int>& kappa,
                         const CostVector& omega);

/// Simultaneous high-probability bound: for each k,
///   Ubar(R_k, c) = (-log alpha) * (1 + c * #{j <= k : sigma(j) not in R_k})
///                  / (cost(R_k) v 1)
///                  * max_m omega_m / log(omega_m - (omega_m - 1) * alpha^c)
/// with the max over the assumed-null set (all features by default). The
/// unselected count uses ordered-prefix indexing: it equals the number of the
/// first k ordered features whose original lost to a knockoff copy.
Eigen::VectorXd wfdp_bound(const SelectionPath& path,
                           const CostVector& omega,
                           const BoundParams& params);

/// Oracle cost-weighted false discovery proportion, given the true null set
/// (0-based): cost(R_k intersect h0) / (cost(R_k) v 1).
Eigen::VectorXd true_wfdp(const SelectionPath& path,
                          const CostVector& omega,
                          const std::vector<int>& h0);

/// sup_k wfdp_k / ubar_k, for the violation convention below.
double ratio_sup(const WfdpCurve& curve);

/// True iff the oracle wFDP strictly exceeds the bound anywhere on the path.
bool violation_indicator(const WfdpCurve& curve);

/// Interchange CSV: k,feature,omega,kappa,tau,selected,cost_k,ubar_k,wfdp_k.
/// Features are written 1-based; wfdp cells stay empty when no oracle is
/// available. kappa and tau follow the path order (row k describes sigma(k)).
std::string path_to_csv(const SelectionPath& path,
                        const CostVector& omega,
                        const std::vector<int>& kappa,
                        const Eigen::VectorXd& tau,
                        const WfdpCurve& curve);

nlohmann::json path_to_json(const SelectionPath& path,
                            const CostVector& omega,
                            const std::vector<int>& kappa,
                            const Eigen::VectorXd& tau,
                            const WfdpCurve& curve);

} // namespace costknock
