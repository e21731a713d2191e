#include "costknock/knockoff.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <vector>

namespace costknock {

namespace {

// Jitter ladder shared by every factorization that is allowed numerical
// repair: multiples of the matrix trace added to the diagonal, capped at 1e-10.
constexpr double kJitterFactors[] = {0.0, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10};

struct CholResult {
    Eigen::LLT<Eigen::MatrixXd> llt;
    double jitter = 0.0;
    bool ok = false;
};

CholResult cholesky_with_jitter(const Eigen::MatrixXd& m) {
    CholResult result;
    const double trace = m.trace();
    for (double factor : kJitterFactors) {
        Eigen::MatrixXd work = m;
        const double jit = factor * trace;
        if (factor > 0.0) {
            if (jit <= 0.0) break;
            work.diagonal().array() += jit;
        }
        result.llt.compute(work);
        if (result.llt.info() == Eigen::Success) {
            result.jitter = jit;
            result.ok = true;
            return result;
        }
    }
    return result;
}

bool joint_psd_with_margin(const Eigen::MatrixXd& g, double margin) {
    Eigen::MatrixXd shifted = g;
    shifted.diagonal().array() -= margin;
    return Eigen::LLT<Eigen::MatrixXd>(shifted).info() == Eigen::Success;
}

} // namespace

Eigen::MatrixXd build_joint_covariance(const GaussianFeatureModel& model,
                                       const CostVector& omega,
                                       const Eigen::VectorXd& s) {
    const int p = model.dimension();
    if (omega.size() != p) throw input_error("cost vector length does not match feature model");
    if (s.size() != p) throw input_error("s length does not match feature model");
    for (int j = 0; j < p; ++j) {
        if (s[j] < 0.0) {
            throw input_error("s[" + std::to_string(j + 1) + "] is negative");
        }
    }

    const IndexMap map(omega);
    const int width = map.total_width();
    Eigen::MatrixXd g(width, width);
    for (int j = 0; j < p; ++j) {
        for (int k = 0; k < p; ++k) {
            const double sigma_jk = model.sigma(j, k);
            const double within = (j == k) ? sigma_jk - s[j] : sigma_jk;
            for (int l = 0; l < omega[j]; ++l) {
                const int row = map.flat(j, l);
                for (int m = 0; m < omega[k]; ++m) {
                    const int col = map.flat(k, m);
                    g(row, col) = (j == k && l != m) ? within : sigma_jk;
                }
            }
        }
    }
    return g;
}

Eigen::VectorXd select_s(const GaussianFeatureModel& model,
                         const CostVector& omega,
                         SPolicy policy,
                         double safety) {
    (void)policy;
    const int p = model.dimension();
    if (omega.size() != p) throw input_error("cost vector length does not match feature model");
    if (!(safety > 0.0 && safety <= 1.0)) throw input_error("safety must lie in (0, 1]");

    const Eigen::VectorXd direction = model.sigma.diagonal();
    if (direction.minCoeff() <= 0.0) {
        throw infeasible_error("a feature has non-positive variance; no knockoff construction exists");
    }

    double multiplicity_cap = std::numeric_limits<double>::infinity();
    for (int j = 0; j < p; ++j) {
        const double w = static_cast<double>(omega[j]);
        multiplicity_cap = std::min(multiplicity_cap, w / (w - 1.0));
    }
    // Keep every copy nonnegatively correlated with its original: s_j <= sigma_jj.
    const double gamma_hi = std::min(multiplicity_cap, 1.0 / safety);

    // The diagonal of G does not depend on s, so the margin is fixed.
    double trace_g = 0.0;
    for (int j = 0; j < p; ++j) trace_g += omega[j] * model.sigma(j, j);
    const int width = omega.total_width();
    const double margin = 1e-8 * trace_g / width;

    const auto feasible = [&](double gamma) {
        const Eigen::VectorXd s = (safety * gamma) * direction;
        return joint_psd_with_margin(build_joint_covariance(model, omega, s), margin);
    };

    if (feasible(gamma_hi)) {
        return (safety * gamma_hi) * direction;
    }

    // The feasible gammas form an interval that excludes 0 (at s = 0 the
    // copies are exact duplicates and G is singular). Scan for a point inside
    // it, then bisect toward the upper endpoint.
    double lo = -1.0;
    double hi = gamma_hi;
    for (int i = 15; i >= 1 && lo < 0.0; --i) {
        const double gamma = gamma_hi * i / 16.0;
        if (feasible(gamma)) {
            lo = gamma;
        } else {
            hi = gamma;
        }
    }
    for (int k = 5; k <= 40 && lo < 0.0; ++k) {
        const double gamma = gamma_hi / std::pow(2.0, k);
        if (feasible(gamma)) {
            lo = gamma;
        } else {
            hi = gamma;
        }
    }
    if (lo < 0.0) {
        throw infeasible_error("no feasible decorrelation vector found; "
                               "the feature covariance may be singular beyond the jitter tolerance");
    }

    while (hi - lo > 1e-6 * gamma_hi) {
        const double mid = 0.5 * (lo + hi);
        if (feasible(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return (safety * lo) * direction;
}

KnockoffPlan precompute_sampler(const GaussianFeatureModel& model,
                                const CostVector& omega,
                                const Eigen::VectorXd& s) {
    KnockoffPlan plan;
    plan.omega = omega;
    plan.index_map = IndexMap(omega);
    plan.model = model;
    plan.s = s;
    plan.joint_cov = build_joint_covariance(model, omega, s);

    const int p = model.dimension();
    const int width = plan.index_map.total_width();
    const int num_knock = width - p;
    const std::vector<int> knock_cols = plan.index_map.knockoff_columns();

    CholResult sigma_chol = cholesky_with_jitter(model.sigma);
    if (!sigma_chol.ok) {
        throw infeasible_error("feature covariance is singular beyond the jitter tolerance");
    }

    // Cross-covariance between knockoff rows and original columns of G.
    Eigen::MatrixXd cross(p, num_knock);
    const std::vector<int> orig_cols = plan.index_map.original_columns();
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < num_knock; ++c) {
            cross(r, c) = plan.joint_cov(orig_cols[static_cast<std::size_t>(r)],
                                         knock_cols[static_cast<std::size_t>(c)]);
        }
    }
    plan.cond_gain = sigma_chol.llt.solve(cross).transpose();

    Eigen::MatrixXd knock_block(num_knock, num_knock);
    for (int r = 0; r < num_knock; ++r) {
        for (int c = 0; c < num_knock; ++c) {
            knock_block(r, c) = plan.joint_cov(knock_cols[static_cast<std::size_t>(r)],
                                               knock_cols[static_cast<std::size_t>(c)]);
        }
    }
    Eigen::MatrixXd cond_cov = knock_block - plan.cond_gain * cross;
    cond_cov = ((cond_cov + cond_cov.transpose()) * 0.5).eval();

    const double scale = std::max(1.0, plan.joint_cov.trace());
    if (cond_cov.cwiseAbs().maxCoeff() <= 1e-14 * scale) {
        // Degenerate construction (s = 0): knockoffs duplicate the originals.
        plan.cond_chol = Eigen::MatrixXd::Zero(num_knock, num_knock);
        plan.jitter_used = 0.0;
        return plan;
    }

    CholResult cond_chol = cholesky_with_jitter(cond_cov);
    if (!cond_chol.ok) {
        throw infeasible_error("conditional knockoff covariance is not positive semidefinite "
                               "within the jitter budget; pick a smaller s via select_s");
    }
    plan.cond_chol = cond_chol.llt.matrixL();
    plan.jitter_used = cond_chol.jitter;
    return plan;
}

Eigen::MatrixXd sample_knockoffs(const KnockoffPlan& plan,
                                 const Eigen::MatrixXd& X,
                                 Rng& rng) {
    const int p = plan.model.dimension();
    if (X.cols() != p) throw input_error("X column count does not match the plan");
    const int n = static_cast<int>(X.rows());
    const int num_knock = plan.index_map.total_width() - p;

    Eigen::VectorXd knock_mean(num_knock);
    {
        const std::vector<int> knock_cols = plan.index_map.knockoff_columns();
        for (int c = 0; c < num_knock; ++c) {
            knock_mean[c] = plan.model.mean[plan.index_map.group_of(knock_cols[static_cast<std::size_t>(c)])];
        }
    }

    Eigen::MatrixXd out(n, num_knock);
    Eigen::VectorXd noise(num_knock);
    for (int i = 0; i < n; ++i) {
        for (int c = 0; c < num_knock; ++c) noise[c] = rng.normal();
        const Eigen::VectorXd centered = X.row(i).transpose() - plan.model.mean;
        out.row(i) = (knock_mean + plan.cond_gain * centered +
                      plan.cond_chol * noise).transpose();
    }
    return out;
}

Eigen::MatrixXd sample_features(const GaussianFeatureModel& model, int n, Rng& rng) {
    const int p = model.dimension();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.sigma);
    Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd transform = eig.eigenvectors() * roots.asDiagonal();

    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd noise(p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) noise[j] = rng.normal();
        x.row(i) = (model.mean + transform * noise).transpose();
    }
    return x;
}

Eigen::MatrixXd assemble_augmented(const IndexMap& map,
                                   const Eigen::MatrixXd& X,
                                   const Eigen::MatrixXd& knockoffs) {
    const int p = map.num_features();
    const int width = map.total_width();
    if (X.cols() != p) throw input_error("X column count does not match the index map");
    if (knockoffs.cols() != width - p) throw input_error("knockoff column count does not match the index map");
    if (knockoffs.rows() != X.rows()) throw input_error("X and knockoffs disagree on row count");

    Eigen::MatrixXd z(X.rows(), width);
    const std::vector<int> orig_cols = map.original_columns();
    const std::vector<int> knock_cols = map.knockoff_columns();
    for (int j = 0; j < p; ++j) z.col(orig_cols[static_cast<std::size_t>(j)]) = X.col(j);
    for (std::size_t c = 0; c < knock_cols.size(); ++c) {
        z.col(knock_cols[c]) = knockoffs.col(static_cast<Eigen::Index>(c));
    }
    return z;
}

PlanDiagnostics validate_plan(const KnockoffPlan& plan,
                              const GaussianFeatureModel& model,
                              const CostVector& omega,
                              int n_mc,
                              Rng& rng) {
    PlanDiagnostics report;
    report.n_mc = n_mc;

    const Eigen::MatrixXd x = sample_features(model, n_mc, rng);
    const Eigen::MatrixXd knockoffs = sample_knockoffs(plan, x, rng);
    const Eigen::MatrixXd z = assemble_augmented(plan.index_map, x, knockoffs);

    const Eigen::RowVectorXd col_means = z.colwise().mean();
    const Eigen::MatrixXd centered = z.rowwise() - col_means;
    const Eigen::MatrixXd emp_cov = (centered.transpose() * centered) / (n_mc - 1.0);
    report.max_cov_deviation = (emp_cov - plan.joint_cov).cwiseAbs().maxCoeff();

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(plan.joint_cov, Eigen::EigenvaluesOnly);
    report.psd_margin = eig.eigenvalues().minCoeff();

    const int p = omega.size();
    const int width = plan.index_map.total_width();
    double swap_dev = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> perm(static_cast<std::size_t>(width));
        for (int j = 0; j < p; ++j) {
            std::vector<int> copies(static_cast<std::size_t>(omega[j]));
            for (int l = 0; l < omega[j]; ++l) copies[static_cast<std::size_t>(l)] = l;
            rng.shuffle(copies);
            for (int l = 0; l < omega[j]; ++l) {
                perm[static_cast<std::size_t>(plan.index_map.flat(j, l))] =
                    plan.index_map.flat(j, copies[static_cast<std::size_t>(l)]);
            }
        }
        for (int a = 0; a < width; ++a) {
            for (int b = 0; b < width; ++b) {
                const double dev = std::abs(
                    plan.joint_cov(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]) -
                    plan.joint_cov(a, b));
                swap_dev = std::max(swap_dev, dev);
            }
        }
    }
    report.swap_deviation = swap_dev;
    return report;
}

nlohmann::json plan_to_json(const KnockoffPlan& plan, std::optional<std::uint64_t> master_seed) {
    nlohmann::json doc;
    doc["omega"] = plan.omega.values();
    doc["s"] = std::vector<double>(plan.s.data(), plan.s.data() + plan.s.size());
    doc["mean"] = std::vector<double>(plan.model.mean.data(),
                                      plan.model.mean.data() + plan.model.mean.size());
    const int p = plan.model.dimension();
    std::vector<double> sigma_rows;
    sigma_rows.reserve(static_cast<std::size_t>(p) * static_cast<std::size_t>(p));
    for (int r = 0; r < p; ++r) {
        for (int c = 0; c < p; ++c) sigma_rows.push_back(plan.model.sigma(r, c));
    }
    doc["sigma"] = sigma_rows;
    nlohmann::json policy;
    policy["kind"] = "per-stream-split";
    if (master_seed) policy["master_seed"] = *master_seed;
    doc["seed_policy"] = policy;
    return doc;
}

KnockoffPlan plan_from_json(const nlohmann::json& doc) {
    const std::vector<int> omega_values = doc.at("omega").get<std::vector<int>>();
    const std::vector<double> s_values = doc.at("s").get<std::vector<double>>();
    const std::vector<double> mean_values = doc.at("mean").get<std::vector<double>>();
    const std::vector<double> sigma_values = doc.at("sigma").get<std::vector<double>>();

    const int p = static_cast<int>(omega_values.size());
    if (static_cast<int>(mean_values.size()) != p ||
        static_cast<int>(s_values.size()) != p ||
        static_cast<int>(sigma_values.size()) != p * p) {
        throw input_error("knockoff plan document has inconsistent dimensions");
    }

    Eigen::VectorXd mean(p);
    Eigen::VectorXd s(p);
    Eigen::MatrixXd sigma(p, p);
    for (int j = 0; j < p; ++j) {
        mean[j] = mean_values[static_cast<std::size_t>(j)];
        s[j] = s_values[static_cast<std::size_t>(j)];
        for (int k = 0; k < p; ++k) {
            sigma(j, k) = sigma_values[static_cast<std::size_t>(j * p + k)];
        }
    }
    return precompute_sampler(GaussianFeatureModel(std::move(mean), std::move(sigma)),
                              CostVector(omega_values), s);
}

} // namespace costknock
