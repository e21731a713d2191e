#include "costknock/diagnostics.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numeric>

#include "costknock/knockoff.hpp"
#include "costknock/lasso.hpp"
#include "costknock/statistics.hpp"

namespace costknock {

double chi_square_uniform_pvalue(const std::vector<int>& counts) {
    const std::size_t cells = counts.size();
    if (cells < 2) throw input_error("goodness-of-fit test needs at least 2 cells");
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    if (total <= 0.0) throw input_error("goodness-of-fit test needs at least one observation");
    const double expected = total / static_cast<double>(cells);
    double stat = 0.0;
    for (int c : counts) {
        const double d = c - expected;
        stat += d * d / expected;
    }
    const double dof = static_cast<double>(cells) - 1.0;
    return boost::math::gamma_q(dof / 2.0, stat / 2.0);
}

UniformityReport run_null_uniformity(const GaussianFeatureModel& model,
                                     const CostVector& omega,
                                     int n,
                                     int reps,
                                     std::uint64_t seed,
                                     int folds,
                                     int grid_size,
                                     std::optional<double> fixed_lambda_frac) {
    const int p = model.dimension();
    if (omega.size() != p) throw input_error("cost vector length does not match feature model");
    if (n < 2 * folds) throw input_error("n too small for the requested fold count");
    if (reps < 1) throw input_error("at least one replicate is required");
    if (fixed_lambda_frac && !(*fixed_lambda_frac > 0.0 && *fixed_lambda_frac <= 1.0)) {
        throw input_error("fixed lambda fraction must lie in (0, 1]");
    }

    const Eigen::VectorXd s = select_s(model, omega);
    const KnockoffPlan plan = precompute_sampler(model, omega, s);

    UniformityReport report;
    report.reps = reps;
    report.kappa_counts.resize(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        report.kappa_counts[static_cast<std::size_t>(j)].assign(static_cast<std::size_t>(omega[j]), 0);
    }

    for (int rep = 0; rep < reps; ++rep) {
        const std::uint64_t base = static_cast<std::uint64_t>(rep) * 16ull;
        Rng data_rng = Rng::stream(seed, base + 0);
        Rng knock_rng = Rng::stream(seed, base + 1);
        Rng cv_rng = Rng::stream(seed, base + 2);
        Rng tie_rng = Rng::stream(seed, base + 3);

        const Eigen::MatrixXd x = sample_features(model, n, data_rng);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) y[i] = data_rng.normal();

        const Eigen::MatrixXd knockoffs = sample_knockoffs(plan, x, knock_rng);
        const Eigen::MatrixXd z = assemble_augmented(plan.index_map, x, knockoffs);

        try {
            double lambda = 0.0;
            if (fixed_lambda_frac) {
                lambda = *fixed_lambda_frac * lambda_max(z, y, Family::Gaussian);
            } else {
                lambda = cross_validate_lambda(z, y, Family::Gaussian, folds, grid_size, cv_rng);
            }
            const LassoFit fit = fit_lasso(z, y, Family::Gaussian, lambda);
            StatisticTable table = compute_statistics(fit.theta, plan.index_map, omega);
            compute_kappa_tau(table, omega, tie_rng);
            for (int j = 0; j < p; ++j) {
                const int copy = table.kappa[static_cast<std::size_t>(j)] - 1;
                ++report.kappa_counts[static_cast<std::size_t>(j)][static_cast<std::size_t>(copy)];
            }
        } catch (const std::runtime_error&) {
            ++report.failed;
        }
    }

    report.p_values.resize(static_cast<std::size_t>(p));
    report.kappa1_freq.resize(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        const auto& counts = report.kappa_counts[static_cast<std::size_t>(j)];
        report.p_values[static_cast<std::size_t>(j)] = chi_square_uniform_pvalue(counts);
        const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
        report.kappa1_freq[static_cast<std::size_t>(j)] = total > 0.0 ? counts[0] / total : 0.0;
    }
    return report;
}

} // namespace costknock
