#include "costknock/lasso.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

namespace costknock {

namespace {

double soft_threshold(double z, double a) {
    // The relative slack absorbs rounding between the scaled-column inner
    // products and the penalty, so lambda = lambda_max returns an exact zero.
    const double guard = a * (1.0 + 1e-12);
    if (z > guard) return z - a;
    if (z < -guard) return z + a;
    return 0.0;
}

double sigmoid(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

// log(1 + exp(eta)), overflow-safe
double softplus(double eta) {
    return std::max(eta, 0.0) + std::log1p(std::exp(-std::abs(eta)));
}

constexpr double kProbClip = 1e-5;
constexpr int kMaxOuterIrls = 25;

// Columns rescaled to unit l2 norm (and centered first for binomial, where
// the intercept absorbs the shift exactly).
struct ScaledDesign {
    Eigen::MatrixXd Zs;
    Eigen::VectorXd scale;
    Eigen::VectorXd center;
};

ScaledDesign make_scaled(const Eigen::MatrixXd& Z, Family family) {
    const int n = static_cast<int>(Z.rows());
    const int w = static_cast<int>(Z.cols());
    ScaledDesign d;
    d.Zs = Z;
    d.scale.resize(w);
    d.center = Eigen::VectorXd::Zero(w);

    for (int j = 0; j < w; ++j) {
        if (family == Family::Binomial) {
            d.center[j] = Z.col(j).mean();
            d.Zs.col(j).array() -= d.center[j];
        }
        const double norm = d.Zs.col(j).norm();
        const bool degenerate = (family == Family::Binomial)
                                    ? norm <= 1e-10 * std::max(1.0, Z.col(j).norm())
                                    : norm == 0.0;
        if (degenerate) {
            throw input_error("design column " + std::to_string(j + 1) +
                              " is constant; the lasso problem is degenerate");
        }
        d.scale[j] = norm;
        d.Zs.col(j) /= norm;
    }
    (void)n;
    return d;
}

struct SolveResult {
    Eigen::VectorXd theta_s;   // coefficients for the unit-norm columns
    double b = 0.0;            // intercept in centered coordinates
    double kkt = 0.0;
    int sweeps = 0;
    bool converged = false;
};

#ifndef NDEBUG
double gaussian_objective_scaled(const ScaledDesign& d, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& theta_s, double lambda) {
    const Eigen::VectorXd r = y - d.Zs * theta_s;
    return 0.5 * r.squaredNorm() +
           lambda * (theta_s.cwiseQuotient(d.scale)).cwiseAbs().sum();
}
#endif

SolveResult solve_gaussian(const ScaledDesign& d, const Eigen::VectorXd& y,
                           double lambda, double tol, int max_sweeps,
                           Eigen::VectorXd theta_s) {
    const int w = static_cast<int>(d.Zs.cols());
    const Eigen::VectorXd pen = lambda * d.scale.cwiseInverse();
    Eigen::VectorXd r = y - d.Zs * theta_s;
    const double c_max = d.scale.maxCoeff();
    const double delta_tol = 0.5 * tol / (c_max * w);

    SolveResult res;
    std::vector<int> active;
    active.reserve(static_cast<std::size_t>(w));

    const auto update = [&](int j, double& max_delta) {
        const double old = theta_s[j];
        const double z = d.Zs.col(j).dot(r) + old;
        const double next = soft_threshold(z, pen[j]);
        if (next != old) {
            r.noalias() += d.Zs.col(j) * (old - next);
            theta_s[j] = next;
            max_delta = std::max(max_delta, std::abs(next - old));
        }
    };

    while (res.sweeps < max_sweeps) {
#ifndef NDEBUG
        const double obj_before = gaussian_objective_scaled(d, y, theta_s, lambda);
#endif
        double full_delta = 0.0;
        for (int j = 0; j < w; ++j) update(j, full_delta);
        ++res.sweeps;
#ifndef NDEBUG
        // Coordinate descent never increases the objective (small slack for
        // floating-point noise).
        const double obj_after = gaussian_objective_scaled(d, y, theta_s, lambda);
        assert(obj_after <= obj_before + 1e-9 * (1.0 + std::abs(obj_before)));
#endif

        active.clear();
        for (int j = 0; j < w; ++j) {
            if (theta_s[j] != 0.0) active.push_back(j);
        }
        while (res.sweeps < max_sweeps) {
            double max_delta = 0.0;
            for (int j : active) update(j, max_delta);
            ++res.sweeps;
            if (max_delta <= delta_tol) break;
        }

        // Fresh residual kills incremental drift before the exact test.
        r = y - d.Zs * theta_s;
        const Eigen::VectorXd cors = d.Zs.transpose() * r;
        double worst = 0.0;
        for (int j = 0; j < w; ++j) {
            const double g = d.scale[j] * cors[j];   // Z_j . (y - Z theta)
            if (theta_s[j] == 0.0) {
                worst = std::max(worst, std::abs(g) - lambda);
            } else {
                worst = std::max(worst, std::abs(g - lambda * (theta_s[j] > 0.0 ? 1.0 : -1.0)));
            }
        }
        res.kkt = worst;
        if (worst <= tol) {
            res.converged = true;
            break;
        }
    }
    res.theta_s = std::move(theta_s);
    return res;
}

SolveResult solve_binomial(const ScaledDesign& d, const Eigen::VectorXd& y,
                           double lambda, double tol, int max_sweeps,
                           Eigen::VectorXd theta_s, double b) {
    const int n = static_cast<int>(d.Zs.rows());
    const int w = static_cast<int>(d.Zs.cols());
    const Eigen::VectorXd pen = lambda * d.scale.cwiseInverse();
    const double c_max = d.scale.maxCoeff();
    const double delta_tol = 0.5 * tol / (c_max * w);

    SolveResult res;
    Eigen::VectorXd eta = (d.Zs * theta_s).array() + b;
    Eigen::VectorXd prob(n), weight(n), rw(n), quad(w);

    for (int outer = 0; outer < kMaxOuterIrls && res.sweeps < max_sweeps; ++outer) {
        for (int i = 0; i < n; ++i) {
            const double p = std::clamp(sigmoid(eta[i]), kProbClip, 1.0 - kProbClip);
            prob[i] = p;
            weight[i] = p * (1.0 - p);
            rw[i] = (y[i] - p) / weight[i];
        }
        for (int j = 0; j < w; ++j) {
            quad[j] = d.Zs.col(j).cwiseAbs2().dot(weight);
        }
        const double weight_sum = weight.sum();

        // Penalized weighted least squares on the working response.
        for (int inner = 0; inner < 200 && res.sweeps < max_sweeps; ++inner) {
            double max_delta = 0.0;
            for (int j = 0; j < w; ++j) {
                const double old = theta_s[j];
                const double z = d.Zs.col(j).dot(weight.cwiseProduct(rw)) + quad[j] * old;
                const double next = soft_threshold(z, pen[j]) / quad[j];
                if (next != old) {
                    rw.noalias() += d.Zs.col(j) * (old - next);
                    theta_s[j] = next;
                    max_delta = std::max(max_delta, std::abs(next - old));
                }
            }
            const double db = weight.dot(rw) / weight_sum;
            if (db != 0.0) {
                b += db;
                rw.array() -= db;
                max_delta = std::max(max_delta, std::abs(db));
            }
            ++res.sweeps;
            if (max_delta <= delta_tol) break;
        }

        eta = (d.Zs * theta_s).array() + b;

        // Stationarity of the true logistic objective, original column scale.
        Eigen::VectorXd grad_n(n);
        for (int i = 0; i < n; ++i) grad_n[i] = sigmoid(eta[i]) - y[i];
        const double grad_sum = grad_n.sum();
        const Eigen::VectorXd cors = d.Zs.transpose() * grad_n;
        double worst = std::abs(grad_sum);
        for (int j = 0; j < w; ++j) {
            const double g = d.scale[j] * cors[j] + d.center[j] * grad_sum;
            if (theta_s[j] == 0.0) {
                worst = std::max(worst, std::abs(g) - lambda);
            } else {
                worst = std::max(worst, std::abs(g + lambda * (theta_s[j] > 0.0 ? 1.0 : -1.0)));
            }
        }
        res.kkt = worst;
        if (worst <= tol) {
            res.converged = true;
            break;
        }
    }
    res.theta_s = std::move(theta_s);
    res.b = b;
    return res;
}

void validate_inputs(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                     Family family, double lambda) {
    if (Z.rows() != y.size()) throw input_error("design and response row counts differ");
    if (y.size() < 2) throw input_error("at least two observations are required");
    if (!(lambda > 0.0)) throw input_error("lambda must be positive");
    if (!y.allFinite()) throw input_error("response contains non-finite values");
    if (!Z.allFinite()) throw input_error("design contains non-finite values");
    if (family == Family::Binomial) {
        for (int i = 0; i < y.size(); ++i) {
            if (y[i] != 0.0 && y[i] != 1.0) {
                throw input_error("binomial response must be 0/1; row " +
                                  std::to_string(i + 1) + " holds " + std::to_string(y[i]));
            }
        }
    }
}

LassoFit finalize_fit(const ScaledDesign& d, const Eigen::VectorXd& y, Family family,
                      double lambda, const SolveResult& res) {
    LassoFit fit;
    fit.theta = res.theta_s.cwiseQuotient(d.scale);
    fit.lambda = lambda;
    fit.kkt_residual = res.kkt;
    fit.sweeps = res.sweeps;
    fit.converged = res.converged;

    if (family == Family::Gaussian) {
        const Eigen::VectorXd r = y - d.Zs * res.theta_s;
        fit.objective = 0.5 * r.squaredNorm() + lambda * fit.theta.cwiseAbs().sum();
    } else {
        fit.intercept = res.b - d.center.dot(fit.theta);
        const Eigen::VectorXd eta = (d.Zs * res.theta_s).array() + res.b;
        double nll = 0.0;
        for (int i = 0; i < y.size(); ++i) nll += softplus(eta[i]) - y[i] * eta[i];
        fit.objective = nll + lambda * fit.theta.cwiseAbs().sum();
    }
    return fit;
}

LassoFit run_fit(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Family family,
                 double lambda, double tol, int max_iter) {
    validate_inputs(Z, y, family, lambda);
    const ScaledDesign d = make_scaled(Z, family);
    const Eigen::VectorXd start = Eigen::VectorXd::Zero(Z.cols());
    const SolveResult res = (family == Family::Gaussian)
                                ? solve_gaussian(d, y, lambda, tol, max_iter, start)
                                : solve_binomial(d, y, lambda, tol, max_iter, start, 0.0);
    return finalize_fit(d, y, family, lambda, res);
}

} // namespace

void Dataset::validate() const {
    if (X.rows() != y.size()) throw input_error("design and response row counts differ");
    if (y.size() < 2) throw input_error("at least two observations are required");
    if (!y.allFinite()) throw input_error("response contains non-finite values");
    if (family == Family::Binomial) {
        for (int i = 0; i < y.size(); ++i) {
            if (y[i] != 0.0 && y[i] != 1.0) {
                throw input_error("binomial response must be 0/1; row " +
                                  std::to_string(i + 1) + " holds " + std::to_string(y[i]));
            }
        }
    }
}

LassoFit fit_lasso(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Family family,
                   double lambda, double tol, int max_iter) {
    LassoFit fit = run_fit(Z, y, family, lambda, tol, max_iter);
    if (!fit.converged) {
        throw solver_error("lasso failed to meet the KKT tolerance after " +
                           std::to_string(fit.sweeps) + " sweeps (residual " +
                           std::to_string(fit.kkt_residual) + ", tolerance " +
                           std::to_string(tol) + ")");
    }
    return fit;
}

LassoFit fit_lasso_noexcept(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Family family,
                            double lambda, double tol, int max_iter) {
    return run_fit(Z, y, family, lambda, tol, max_iter);
}

double lambda_max(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Family family) {
    if (Z.rows() != y.size()) throw input_error("design and response row counts differ");
    if (family == Family::Gaussian) {
        return (Z.transpose() * y).cwiseAbs().maxCoeff();
    }
    const Eigen::VectorXd centered = y.array() - y.mean();
    return (Z.transpose() * centered).cwiseAbs().maxCoeff();
}

double cross_validate_lambda(const Eigen::MatrixXd& Z, const Eigen::VectorXd& y,
                             Family family, int folds, int grid_size, Rng& rng) {
    const int n = static_cast<int>(Z.rows());
    const int w = static_cast<int>(Z.cols());
    if (folds < 2) throw input_error("cross-validation needs at least 2 folds");
    if (grid_size < 1) throw input_error("cross-validation grid must hold at least 1 value");
    if (n < 2 * folds) {
        throw input_error("fewer than 2 observations per fold (" + std::to_string(n) +
                          " rows, " + std::to_string(folds) + " folds)");
    }

    const double lam_max = lambda_max(Z, y, family);
    if (!(lam_max > 0.0)) {
        throw input_error("response is orthogonal to every design column; "
                          "the cross-validation grid is degenerate");
    }
    std::vector<double> grid(static_cast<std::size_t>(grid_size));
    for (int i = 0; i < grid_size; ++i) {
        const double frac = (grid_size == 1) ? 0.0 : static_cast<double>(i) / (grid_size - 1);
        grid[static_cast<std::size_t>(i)] = lam_max * std::pow(1e-3, frac);
    }

    std::vector<int> fold_of(static_cast<std::size_t>(n));
    {
        std::vector<int> order(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        rng.shuffle(order);
        for (int i = 0; i < n; ++i) fold_of[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = i % folds;
    }

    // CV fits only rank lambdas by out-of-fold deviance, so they run under a
    // relaxed tolerance and a hard sweep cap; the ill-conditioned tail of the
    // grid would otherwise dominate the runtime for no gain in the ranking.
    const double cv_tol = 1e-5 * std::max(1.0, lam_max);
    constexpr int kCvSweepBudget = 400;
    std::vector<double> deviance(static_cast<std::size_t>(grid_size), 0.0);

    for (int f = 0; f < folds; ++f) {
        int n_train = 0;
        for (int i = 0; i < n; ++i) n_train += (fold_of[static_cast<std::size_t>(i)] != f);
        Eigen::MatrixXd z_train(n_train, w);
        Eigen::VectorXd y_train(n_train);
        Eigen::MatrixXd z_test(n - n_train, w);
        Eigen::VectorXd y_test(n - n_train);
        int it = 0, iv = 0;
        for (int i = 0; i < n; ++i) {
            if (fold_of[static_cast<std::size_t>(i)] != f) {
                z_train.row(it) = Z.row(i);
                y_train[it++] = y[i];
            } else {
                z_test.row(iv) = Z.row(i);
                y_test[iv++] = y[i];
            }
        }

        const ScaledDesign d = make_scaled(z_train, family);
        Eigen::VectorXd theta_s = Eigen::VectorXd::Zero(w);
        double b = 0.0;
        for (int g = 0; g < grid_size; ++g) {
            SolveResult res = (family == Family::Gaussian)
                                  ? solve_gaussian(d, y_train, grid[static_cast<std::size_t>(g)],
                                                   cv_tol, kCvSweepBudget, theta_s)
                                  : solve_binomial(d, y_train, grid[static_cast<std::size_t>(g)],
                                                   cv_tol, kCvSweepBudget, theta_s, b);
            theta_s = res.theta_s;
            b = res.b;
            const Eigen::VectorXd theta = theta_s.cwiseQuotient(d.scale);
            if (family == Family::Gaussian) {
                deviance[static_cast<std::size_t>(g)] += (y_test - z_test * theta).squaredNorm();
            } else {
                const double intercept = b - d.center.dot(theta);
                const Eigen::VectorXd eta = (z_test * theta).array() + intercept;
                for (int i = 0; i < y_test.size(); ++i) {
                    const double p = std::clamp(sigmoid(eta[i]), 1e-12, 1.0 - 1e-12);
                    deviance[static_cast<std::size_t>(g)] +=
                        -2.0 * (y_test[i] * std::log(p) + (1.0 - y_test[i]) * std::log1p(-p));
                }
            }
        }
    }

    // Grid is descending, so the first minimum is the largest lambda.
    int best = 0;
    for (int g = 1; g < grid_size; ++g) {
        if (deviance[static_cast<std::size_t>(g)] < deviance[static_cast<std::size_t>(best)]) best = g;
    }
    return grid[static_cast<std::size_t>(best)];
}

} // namespace costknock
