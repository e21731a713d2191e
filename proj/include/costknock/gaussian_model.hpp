#pragma once

#include <Eigen/Dense>
#include <string>

#include "costknock/errors.hpp"

namespace costknock {

/// Known joint Gaussian law of the feature vector: X ~ N(mean, sigma).
///
/// sigma must be symmetric to 1e-10 relative and positive semidefinite up to
/// a small eigenvalue slack (>= -1e-8 * trace / p). The stored matrix is the
/// symmetrized input, so downstream constructions are exactly symmetric.
struct GaussianFeatureModel {
    Eigen::VectorXd mean;
    Eigen::MatrixXd sigma;

    GaussianFeatureModel() = default;

    GaussianFeatureModel(Eigen::VectorXd mean_in, Eigen::MatrixXd sigma_in)
        : mean(std::move(mean_in)), sigma(std::move(sigma_in)) {
        validate();
        sigma = ((sigma + sigma.transpose()) * 0.5).eval();
    }

    static GaussianFeatureModel standard(int p) {
        return GaussianFeatureModel(Eigen::VectorXd::Zero(p),
                                    Eigen::MatrixXd::Identity(p, p));
    }

    int dimension() const { return static_cast<int>(sigma.rows()); }

private:
    void validate() const {
        if (sigma.rows() != sigma.cols()) {
            throw input_error("covariance matrix must be square");
        }
        if (mean.size() != sigma.rows()) {
            throw input_error("mean length does not match covariance dimension");
        }
        const int p = static_cast<int>(sigma.rows());
        if (p < 1) throw input_error("feature model needs at least one feature");

        const double scale = sigma.cwiseAbs().maxCoeff();
        const double asym = (sigma - sigma.transpose()).cwiseAbs().maxCoeff();
        if (scale > 0.0 && asym > 1e-10 * scale) {
            throw input_error("covariance matrix is not symmetric (relative asymmetry " +
                              std::to_string(asym / scale) + ")");
        }

        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(
            (sigma + sigma.transpose()) * 0.5, Eigen::EigenvaluesOnly);
        const double lambda_min = eig.eigenvalues().minCoeff();
        const double slack = 1e-8 * sigma.trace() / p;
        if (lambda_min < -slack) {
            throw input_error("covariance matrix is not positive semidefinite (min eigenvalue " +
                              std::to_string(lambda_min) + ")");
        }
    }
};

} // namespace costknock
