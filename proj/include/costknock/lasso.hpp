#pragma once

#include <Eigen/Dense>

#include "costknock/errors.hpp"
#include "costknock/rng.hpp"

namespace costknock {

enum class Family { Gaussian, Binomial };

/// Design matrix, response, and response family for one regression problem.
struct Dataset {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Family family = Family::Gaussian;

    /// Enforce the type invariants: n >= 2, finite y, binomial y in {0,1}.
    void validate() const;
};

struct LassoFit {
    Eigen::VectorXd theta;       // coefficients on the original column scale
    double intercept = 0.0;      // unpenalized intercept (binomial only)
    double lambda = 0.0;
    double objective = 0.0;      // penalized objective at the returned point
    double kkt_residual = 0.0;   // worst stationarity violation, original scale
    int sweeps = 0;              // coordinate sweeps consumed
    bool converged = true;
};

/// Minimize 1/2 ||y - Z theta||^2 + lambda ||theta||_1 (gaussian) or the
/// logistic negative log-likelihood plus lambda ||theta||_1 with an
/// unpenalized intercept (binomial) by coordinate descent. Columns are
/// rescaled internally for conditioning; the returned coefficients are on the
/// original scale and satisfy the original-scale KKT conditions to tol:
/// |g_j| <= lambda + tol where theta_j = 0 and |g_j + lambda sign(theta_j)|
/// <= tol where theta_j != 0. Throws solver_error after max_iter sweeps
/// without meeting the tolerance.
LassoFit fit_lasso(const Eigen::MatrixXd& Z,
                   const Eigen::VectorXd& y,
                   Family family,
                   double lambda,
                   double tol = 1e-7,
                   int max_iter = 100000);

/// Same solver but reports non-convergence through the `converged` flag
/// instead of throwing. Used by cross-validation and the simulation harness.
LassoFit fit_lasso_noexcept(const Eigen::MatrixXd& Z,
                            const Eigen::VectorXd& y,
                            Family family,
                            double lambda,
                            double tol = 1e-7,
                            int max_iter = 100000);

/// Smallest lambda that zeroes every penalized coefficient.
double lambda_max(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Family family);

/// K-fold cross-validation over a log-spaced grid of grid_size values from
/// lambda_max down to 1e-3 * lambda_max, warm-started along each fold's path.
/// Returns the lambda minimizing pooled out-of-fold deviance (squared error
/// for gaussian, -2 log-likelihood for binomial); ties resolve to the larger
/// lambda. Fold assignment is a deterministic function of the rng state.
double cross_validate_lambda(const Eigen::MatrixXd& Z,
                             const Eigen::VectorXd& y,
                             Family family,
                             int folds,
                             int grid_size,
                             Rng& rng);

} // namespace costknock
