#include "costknock/simulate.hpp"

#include <atomic>
#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>

#include "costknock/csv.hpp"
#include "costknock/knockoff.hpp"
#include "costknock/path.hpp"
#include "costknock/statistics.hpp"

namespace costknock {

void SimConfig::validate() const {
    if (n < 2) throw input_error("config: n must be at least 2");
    if (p < 1) throw input_error("config: p must be at least 1");
    if (beta.size() != p) throw input_error("config: beta length must equal p");
    if (reps < 1) throw input_error("config: reps must be at least 1");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw input_error("config: gamma must lie in [0, 1]");
    if (!(alpha > 0.0 && alpha < 1.0)) throw input_error("config: alpha must lie in (0, 1)");
    if (!(c > 0.0)) throw input_error("config: c must be positive");
    if (cost_cheap < 2 || cost_expensive < 2) {
        throw input_error("config: costs must be integers >= 2");
    }
    if (cv_folds < 2) throw input_error("config: cv_folds must be at least 2");
    if (cv_grid < 1) throw input_error("config: cv_grid must be at least 1");
    if (n < 2 * cv_folds) throw input_error("config: n must allow 2 observations per fold");
    if (noise_rule == NoiseRule::FixedSigma && !(sigma2 > 0.0)) {
        throw input_error("config: sigma2 must be positive under the fixed-sigma rule");
    }
}

std::string to_string(SimMode mode) {
    return mode == SimMode::Cheap ? "cheap" : "baseline-omega2";
}

std::string to_string(NoiseRule rule) {
    return rule == NoiseRule::SnrScaled ? "snr-scaled" : "fixed-sigma";
}

SimConfig sim_config_from_json(const nlohmann::json& doc) {
    SimConfig config;
    try {
        config.n = doc.at("n").get<int>();
        config.p = doc.at("p").get<int>();
        config.gamma = doc.at("gamma").get<double>();
        config.reps = doc.at("reps").get<int>();
        config.seed = doc.at("seed").get<std::uint64_t>();

        const auto beta_in = doc.at("beta").get<std::vector<double>>();
        if (static_cast<int>(beta_in.size()) > config.p) {
            throw input_error("config: beta is longer than p");
        }
        config.beta = Eigen::VectorXd::Zero(config.p);
        for (std::size_t j = 0; j < beta_in.size(); ++j) {
            config.beta[static_cast<Eigen::Index>(j)] = beta_in[j];
        }

        if (doc.contains("noise_rule")) {
            const std::string rule = doc.at("noise_rule").get<std::string>();
            if (rule == "snr-scaled") config.noise_rule = NoiseRule::SnrScaled;
            else if (rule == "fixed-sigma") config.noise_rule = NoiseRule::FixedSigma;
            else throw input_error("config: unknown noise_rule '" + rule + "'");
        }
        if (doc.contains("sigma2")) config.sigma2 = doc.at("sigma2").get<double>();
        if (doc.contains("cost_expensive")) config.cost_expensive = doc.at("cost_expensive").get<int>();
        if (doc.contains("cost_cheap")) config.cost_cheap = doc.at("cost_cheap").get<int>();
        if (doc.contains("alpha")) config.alpha = doc.at("alpha").get<double>();
        if (doc.contains("c")) config.c = doc.at("c").get<double>();
        if (doc.contains("mode")) {
            const std::string mode = doc.at("mode").get<std::string>();
            if (mode == "cheap") config.mode = SimMode::Cheap;
            else if (mode == "baseline-omega2") config.mode = SimMode::BaselineOmega2;
            else throw input_error("config: unknown mode '" + mode + "'");
        }
        if (doc.contains("cv_folds")) config.cv_folds = doc.at("cv_folds").get<int>();
        if (doc.contains("cv_grid")) config.cv_grid = doc.at("cv_grid").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw input_error(std::string("config: ") + e.what());
    }
    config.validate();
    return config;
}

nlohmann::json sim_config_to_json(const SimConfig& config) {
    nlohmann::json doc;
    doc["n"] = config.n;
    doc["p"] = config.p;
    doc["beta"] = std::vector<double>(config.beta.data(), config.beta.data() + config.beta.size());
    doc["noise_rule"] = to_string(config.noise_rule);
    doc["sigma2"] = config.sigma2;
    doc["gamma"] = config.gamma;
    doc["cost_expensive"] = config.cost_expensive;
    doc["cost_cheap"] = config.cost_cheap;
    doc["reps"] = config.reps;
    doc["alpha"] = config.alpha;
    doc["c"] = config.c;
    doc["seed"] = config.seed;
    doc["mode"] = to_string(config.mode);
    doc["cv_folds"] = config.cv_folds;
    doc["cv_grid"] = config.cv_grid;
    return doc;
}

SyntheticData generate_synthetic(const SimConfig& config, Rng& rng) {
    const int n = config.n;
    const int p = config.p;
    SyntheticData out;

    Eigen::MatrixXd x(n, p);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
    }

    const Eigen::VectorXd signal = x * config.beta;
    double sigma2 = config.sigma2;
    if (config.noise_rule == NoiseRule::SnrScaled) {
        sigma2 = signal.squaredNorm() / (4.0 * n);
        if (sigma2 == 0.0) {
            sigma2 = 1.0;
            out.sigma_fallback = true;
        }
    }
    const double sigma = std::sqrt(sigma2);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = signal[i] + sigma * rng.normal();

    // First half of the relevant features (by index) is expensive, the rest
    // cheap; each null feature is expensive with probability gamma.
    std::vector<int> relevant;
    for (int j = 0; j < p; ++j) {
        if (config.beta[j] != 0.0) relevant.push_back(j);
    }
    std::vector<int> omega(static_cast<std::size_t>(p), config.cost_cheap);
    const std::size_t expensive_half = relevant.size() / 2;
    for (std::size_t r = 0; r < relevant.size(); ++r) {
        omega[static_cast<std::size_t>(relevant[r])] =
            r < expensive_half ? config.cost_expensive : config.cost_cheap;
    }
    for (int j = 0; j < p; ++j) {
        if (config.beta[j] == 0.0) {
            out.h0.push_back(j);
            omega[static_cast<std::size_t>(j)] =
                rng.bernoulli(config.gamma) ? config.cost_expensive : config.cost_cheap;
        }
    }

    out.data.X = std::move(x);
    out.data.y = std::move(y);
    out.data.family = Family::Gaussian;
    out.omega = CostVector(std::move(omega));
    out.sigma2 = sigma2;
    return out;
}

namespace {

// Intercept + OLS on the given feature columns; test-set RMSE.
double ols_test_rmse(const Eigen::MatrixXd& x_train, const Eigen::VectorXd& y_train,
                     const Eigen::MatrixXd& x_test, const Eigen::VectorXd& y_test,
                     const std::vector<int>& features) {
    const int n = static_cast<int>(x_train.rows());
    const int m = static_cast<int>(features.size());
    Eigen::MatrixXd a(n, m + 1);
    a.col(0).setOnes();
    for (int c = 0; c < m; ++c) a.col(c + 1) = x_train.col(features[static_cast<std::size_t>(c)]);
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y_train);

    Eigen::MatrixXd a_test(x_test.rows(), m + 1);
    a_test.col(0).setOnes();
    for (int c = 0; c < m; ++c) a_test.col(c + 1) = x_test.col(features[static_cast<std::size_t>(c)]);
    const Eigen::VectorXd resid = y_test - a_test * coef;
    return std::sqrt(resid.squaredNorm() / static_cast<double>(x_test.rows()));
}

} // namespace

RepRecord run_replicate(const SimConfig& config, int rep_index) {
    RepRecord rec;
    rec.rep = rep_index;
    const std::uint64_t base = static_cast<std::uint64_t>(rep_index) * 16ull;
    const int p = config.p;

    try {
        Rng data_rng = Rng::stream(config.seed, base + 0);
        SyntheticData syn = generate_synthetic(config, data_rng);
        rec.sigma_fallback = syn.sigma_fallback;
        rec.omega_true = syn.omega.values();
        rec.is_null.assign(static_cast<std::size_t>(p), 0);
        for (int j : syn.h0) rec.is_null[static_cast<std::size_t>(j)] = 1;

        Rng test_rng = Rng::stream(config.seed, base + 4);
        Eigen::MatrixXd x_test(config.n, p);
        for (int i = 0; i < config.n; ++i) {
            for (int j = 0; j < p; ++j) x_test(i, j) = test_rng.normal();
        }
        const double sigma = std::sqrt(syn.sigma2);
        Eigen::VectorXd y_test = x_test * config.beta;
        for (int i = 0; i < config.n; ++i) y_test[i] += sigma * test_rng.normal();

        const CostVector omega_used =
            config.mode == SimMode::Cheap ? syn.omega : CostVector::uniform(p, 2);
        const GaussianFeatureModel model = GaussianFeatureModel::standard(p);
        const Eigen::VectorXd s = select_s(model, omega_used);
        const KnockoffPlan plan = precompute_sampler(model, omega_used, s);

        Rng knock_rng = Rng::stream(config.seed, base + 1);
        const Eigen::MatrixXd knockoffs = sample_knockoffs(plan, syn.data.X, knock_rng);
        const Eigen::MatrixXd z = assemble_augmented(plan.index_map, syn.data.X, knockoffs);

        Rng cv_rng = Rng::stream(config.seed, base + 2);
        const double lambda = cross_validate_lambda(z, syn.data.y, Family::Gaussian,
                                                    config.cv_folds, config.cv_grid, cv_rng);
        const LassoFit fit = fit_lasso(z, syn.data.y, Family::Gaussian, lambda);

        StatisticTable table = compute_statistics(fit.theta, plan.index_map, omega_used);
        table.lambda_used = lambda;
        Rng tie_rng = Rng::stream(config.seed, base + 3);
        compute_kappa_tau(table, omega_used, tie_rng);
        rec.kappa = table.kappa;
        rec.tie_events = table.tie_events;

        const std::vector<int> sigma_order = order_features(table.tau, omega_used);
        const SelectionPath path = build_path(sigma_order, table.kappa, omega_used);

        BoundParams params;
        params.alpha = config.alpha;
        params.c = config.c;
        WfdpCurve curve;
        curve.ubar_k = wfdp_bound(path, omega_used, params);
        curve.wfdp_k = true_wfdp(path, syn.omega, syn.h0);
        rec.sup_ratio = ratio_sup(curve);
        rec.violation = rec.sup_ratio > 1.0;

        rec.ubar.assign(curve.ubar_k.data(), curve.ubar_k.data() + p);
        rec.wfdp.assign(curve.wfdp_k->data(), curve.wfdp_k->data() + p);

        rec.real_cost.resize(static_cast<std::size_t>(p));
        double cumulative = 0.0;
        for (int k = 1; k <= p; ++k) {
            if (path.selected[static_cast<std::size_t>(k - 1)]) {
                cumulative += syn.omega[path.sigma[static_cast<std::size_t>(k - 1)]];
            }
            rec.real_cost[static_cast<std::size_t>(k - 1)] = cumulative;
        }

        rec.rmse.resize(static_cast<std::size_t>(p));
        std::vector<int> members;
        double current_rmse =
            ols_test_rmse(syn.data.X, syn.data.y, x_test, y_test, members);
        for (int k = 1; k <= p; ++k) {
            if (path.selected[static_cast<std::size_t>(k - 1)]) {
                members.push_back(path.sigma[static_cast<std::size_t>(k - 1)]);
                current_rmse = ols_test_rmse(syn.data.X, syn.data.y, x_test, y_test, members);
            }
            rec.rmse[static_cast<std::size_t>(k - 1)] = current_rmse;
        }
    } catch (const std::runtime_error& e) {
        rec.failed = true;
        rec.error = e.what();
    }
    return rec;
}

SimReport run_experiment(const SimConfig& config) {
    config.validate();

    SimReport report;
    report.config = config;
    report.per_rep.resize(static_cast<std::size_t>(config.reps));

    const unsigned hw = std::thread::hardware_concurrency();
    const int workers = static_cast<int>(
        std::min<unsigned>(hw == 0 ? 1 : hw, static_cast<unsigned>(config.reps)));
    if (workers <= 1) {
        for (int rep = 0; rep < config.reps; ++rep) {
            report.per_rep[static_cast<std::size_t>(rep)] = run_replicate(config, rep);
        }
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(workers));
        for (int t = 0; t < workers; ++t) {
            pool.emplace_back([&]() {
                for (;;) {
                    const int rep = next.fetch_add(1);
                    if (rep >= config.reps) return;
                    report.per_rep[static_cast<std::size_t>(rep)] = run_replicate(config, rep);
                }
            });
        }
        for (auto& worker : pool) worker.join();
    }

    int violations = 0;
    for (const RepRecord& rec : report.per_rep) {
        if (rec.failed) {
            ++report.failed;
            continue;
        }
        if (rec.violation) ++violations;
        if (rec.sigma_fallback) ++report.sigma_fallbacks;
    }
    if (20 * report.failed > config.reps) {
        std::string detail;
        for (const RepRecord& rec : report.per_rep) {
            if (rec.failed) {
                detail = rec.error;
                break;
            }
        }
        throw solver_error("replicate failure budget exceeded: " + std::to_string(report.failed) +
                           " of " + std::to_string(config.reps) + " failed (first error: " +
                           detail + ")");
    }

    const int ok = config.reps - report.failed;
    report.violation_rate = ok > 0 ? static_cast<double>(violations) / ok : 0.0;
    report.mean_cost.assign(static_cast<std::size_t>(config.p), 0.0);
    report.mean_rmse.assign(static_cast<std::size_t>(config.p), 0.0);
    for (const RepRecord& rec : report.per_rep) {
        if (rec.failed) continue;
        for (int k = 0; k < config.p; ++k) {
            report.mean_cost[static_cast<std::size_t>(k)] += rec.real_cost[static_cast<std::size_t>(k)];
            report.mean_rmse[static_cast<std::size_t>(k)] += rec.rmse[static_cast<std::size_t>(k)];
        }
    }
    if (ok > 0) {
        for (int k = 0; k < config.p; ++k) {
            report.mean_cost[static_cast<std::size_t>(k)] /= ok;
            report.mean_rmse[static_cast<std::size_t>(k)] /= ok;
        }
    }
    return report;
}

std::string violations_to_csv(const SimReport& report) {
    std::string out = "rep,flag,sup_ratio\n";
    for (const RepRecord& rec : report.per_rep) {
        if (rec.failed) continue;
        out += std::to_string(rec.rep + 1);
        out += rec.violation ? ",1," : ",0,";
        out += format_double(rec.sup_ratio);
        out += '\n';
    }
    return out;
}

std::string tradeoff_to_csv(const std::vector<const SimReport*>& reports) {
    std::string out = "k,mean_cost,mean_rmse,mode\n";
    for (const SimReport* report : reports) {
        const std::string mode = to_string(report->config.mode);
        for (int k = 1; k <= report->config.p; ++k) {
            out += std::to_string(k);
            out += ',';
            out += format_double(report->mean_cost[static_cast<std::size_t>(k - 1)]);
            out += ',';
            out += format_double(report->mean_rmse[static_cast<std::size_t>(k - 1)]);
            out += ',';
            out += mode;
            out += '\n';
        }
    }
    return out;
}

nlohmann::json report_to_json(const SimReport& report) {
    nlohmann::json doc;
    doc["config"] = sim_config_to_json(report.config);
    doc["violation_rate"] = report.violation_rate;
    doc["failed"] = report.failed;
    doc["sigma_fallbacks"] = report.sigma_fallbacks;

    nlohmann::json reps = nlohmann::json::array();
    for (const RepRecord& rec : report.per_rep) {
        nlohmann::json row;
        row["rep"] = rec.rep + 1;
        row["failed"] = rec.failed;
        if (rec.failed) {
            row["error"] = rec.error;
        } else {
            row["violation"] = rec.violation;
            row["sup_ratio"] = rec.sup_ratio;
            row["wfdp"] = rec.wfdp;
            row["ubar"] = rec.ubar;
            std::vector<double> ratio(rec.wfdp.size());
            for (std::size_t k = 0; k < ratio.size(); ++k) ratio[k] = rec.wfdp[k] / rec.ubar[k];
            row["ratio"] = ratio;
            row["tie_events"] = rec.tie_events;
        }
        reps.push_back(std::move(row));
    }
    doc["per_rep"] = std::move(reps);
    doc["mean_cost"] = report.mean_cost;
    doc["mean_rmse"] = report.mean_rmse;
    return doc;
}

} // namespace costknock
