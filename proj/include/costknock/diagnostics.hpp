#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "costknock/cost.hpp"
#include "costknock/gaussian_model.hpp"

namespace costknock {

/// Upper-tail p-value of a chi-square goodness-of-fit test of the counts
/// against the uniform distribution over the cells.
double chi_square_uniform_pvalue(const std::vector<int>& counts);

struct UniformityReport {
    std::vector<std::vector<int>> kappa_counts;   // per feature, per copy
    std::vector<double> p_values;                 // per feature
    std::vector<double> kappa1_freq;              // empirical P(kappa_j = 1)
    int reps = 0;
    int failed = 0;
};

/// End-to-end null pipeline: beta = 0 responses through knockoff sampling,
/// lasso (cross-validated lambda, or fixed_lambda scaled by lambda_max when
/// provided as a fraction in (0,1]) and the kappa statistic, repeated `reps`
/// times with streams split off `seed`. Under a valid construction each
/// kappa_j is uniform on {1..omega_j}.
UniformityReport run_null_uniformity(const GaussianFeatureModel& model,
                                     const CostVector& omega,
                                     int n,
                                     int reps,
                                     std::uint64_t seed,
                                     int folds = 5,
                                     int grid_size = 20,
                                     std::optional<double> fixed_lambda_frac = std::nullopt);

} // namespace costknock
