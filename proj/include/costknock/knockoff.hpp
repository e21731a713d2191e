#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include <nlohmann/json_fwd.hpp>

#include "costknock/cost.hpp"
#include "costknock/gaussian_model.hpp"
#include "costknock/rng.hpp"

namespace costknock {

/// Precomputed joint law of originals + knockoffs and the factors needed to
/// sample knockoffs conditional on observed feature rows. Immutable after
/// construction and safe to share across threads; reusable across datasets
/// drawn from the same feature model.
struct KnockoffPlan {
    CostVector omega;
    IndexMap index_map;
    GaussianFeatureModel model;
    Eigen::VectorXd s;           // per-feature decorrelation amounts, s_j >= 0
    Eigen::MatrixXd joint_cov;   // W x W augmented covariance G
    Eigen::MatrixXd cond_gain;   // (W-p) x p, maps centered X to conditional mean
    Eigen::MatrixXd cond_chol;   // (W-p) x (W-p) lower-triangular factor
    double jitter_used = 0.0;    // diagonal repair applied to the conditional covariance
};

/// Augmented covariance with G[(j,l),(k,m)] = sigma_jk - s_j * 1{j=k} * 1{l!=m}.
/// Entries are copied or formed with a single subtraction, so the construction
/// is bit-reproducible and exactly invariant under within-group copy swaps.
Eigen::MatrixXd build_joint_covariance(const GaussianFeatureModel& model,
                                       const CostVector& omega,
                                       const Eigen::VectorXd& s);

enum class SPolicy { EquicorrelatedScaled };

/// Pick the decorrelation vector s along the equicorrelated direction
/// d_j = sigma_jj. Returns s = gamma * safety * d with gamma the largest value
/// in [0, min_j omega_j/(omega_j-1)] such that the joint covariance passes a
/// positive-semidefiniteness check with margin and no copy becomes negatively
/// correlated with its original (s_j <= sigma_jj). gamma is located by
/// bisection to relative width 1e-6.
Eigen::VectorXd select_s(const GaussianFeatureModel& model,
                         const CostVector& omega,
                         SPolicy policy = SPolicy::EquicorrelatedScaled,
                         double safety = 1.0);

/// Build the conditional-sampling factors: cond_gain = G21 * Sigma^-1 and the
/// lower-triangular factor of G22 - G21 Sigma^-1 G12, with diagonal jitter up
/// to 1e-10 * trace allowed before the construction is declared infeasible.
KnockoffPlan precompute_sampler(const GaussianFeatureModel& model,
                                const CostVector& omega,
                                const Eigen::VectorXd& s);

/// Draw knockoff copies row-by-row, conditionally on the observed rows of X.
/// Output columns follow the plan's flat layout restricted to copies l >= 1.
/// Deterministic given the rng state.
Eigen::MatrixXd sample_knockoffs(const KnockoffPlan& plan,
                                 const Eigen::MatrixXd& X,
                                 Rng& rng);

/// Draw n rows of X ~ N(mean, sigma) (eigendecomposition square root, so
/// semidefinite models are handled).
Eigen::MatrixXd sample_features(const GaussianFeatureModel& model, int n, Rng& rng);

/// Assemble the augmented design [originals | knockoffs] in flat layout order.
Eigen::MatrixXd assemble_augmented(const IndexMap& map,
                                   const Eigen::MatrixXd& X,
                                   const Eigen::MatrixXd& knockoffs);

struct PlanDiagnostics {
    double max_cov_deviation = 0.0;   // empirical joint covariance vs G, entrywise
    double psd_margin = 0.0;          // smallest eigenvalue of G
    double swap_deviation = 0.0;      // G vs its image under within-group permutations
    int n_mc = 0;
};

/// Monte Carlo and exact diagnostics of a plan against its defining law.
PlanDiagnostics validate_plan(const KnockoffPlan& plan,
                              const GaussianFeatureModel& model,
                              const CostVector& omega,
                              int n_mc,
                              Rng& rng);

/// JSON round trip. The document stores omega, s, mean and sigma (row-major,
/// full round-trip precision) plus the seed policy; the joint covariance and
/// factors are always recomputed on load.
nlohmann::json plan_to_json(const KnockoffPlan& plan,
                            std::optional<std::uint64_t> master_seed = std::nullopt);
KnockoffPlan plan_from_json(const nlohmann::json& doc);

} // namespace costknock
