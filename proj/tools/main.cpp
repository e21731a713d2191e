#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "costknock/csv.hpp"
#include "costknock/diagnostics.hpp"
#include "costknock/knockoff.hpp"
#include "costknock/lasso.hpp"
#include "costknock/path.hpp"
#include "costknock/simulate.hpp"
#include "costknock/statistics.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace costknock;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitSolver = 4;

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> values;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        try {
            std::size_t used = 0;
            const int v = std::stoi(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            values.push_back(v);
        } catch (const std::exception&) {
            throw input_error(what + ": '" + item + "' is not an integer");
        }
    }
    if (values.empty()) throw input_error(what + ": empty list");
    return values;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> values;
    std::stringstream stream(text);
    std::string item;
    while (std::getline(stream, item, ',')) {
        try {
            std::size_t used = 0;
            const double v = std::stod(item, &used);
            if (used != item.size()) throw std::invalid_argument(item);
            values.push_back(v);
        } catch (const std::exception&) {
            throw input_error(what + ": '" + item + "' is not a number");
        }
    }
    if (values.empty()) throw input_error(what + ": empty list");
    return values;
}

// Row-major numeric matrix; a non-numeric first line is treated as a header.
Eigen::MatrixXd read_matrix_csv(const std::string& path, int expected_dim) {
    const std::string body = read_text_file(path);
    std::vector<std::vector<double>> rows;
    std::stringstream stream(body);
    std::string line;
    bool first = true;
    while (std::getline(stream, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream cells(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(cells, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
            if (!numeric) break;
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw input_error(path + ": non-numeric matrix row '" + line + "'");
        }
        first = false;
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw input_error(path + ": no matrix rows found");
    const std::size_t cols = rows.front().size();
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != cols) {
            throw input_error(path + ": matrix row " + std::to_string(r + 1) +
                              " has " + std::to_string(rows[r].size()) + " columns, expected " +
                              std::to_string(cols));
        }
    }
    if (expected_dim > 0 &&
        (static_cast<int>(rows.size()) != expected_dim || static_cast<int>(cols) != expected_dim)) {
        throw input_error(path + ": expected a " + std::to_string(expected_dim) + "x" +
                          std::to_string(expected_dim) + " matrix, found " +
                          std::to_string(rows.size()) + "x" + std::to_string(cols));
    }
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

struct SelectOptions {
    std::string input;
    std::string response;
    std::string family = "gaussian";
    std::string costs_path;
    std::string sigma_path;
    std::string out_dir = ".";
    double alpha = 0.2;
    double c = 1.0;
    std::uint64_t seed = 1;
    std::vector<int> at_k;
    int omega_override = 0;
    double cost_scale = 0.0;
    double shrinkage = 0.1;
    int folds = 10;
    int grid = 100;
};

CostVector resolve_costs(const SelectOptions& opt, const std::vector<std::string>& features) {
    const int p = static_cast<int>(features.size());
    if (opt.omega_override > 0) {
        if (opt.omega_override < 2) {
            throw input_error("--omega-override " + std::to_string(opt.omega_override) +
                              " violates the omega_j >= 2 requirement");
        }
        return CostVector::uniform(p, opt.omega_override);
    }
    if (opt.costs_path.empty()) {
        throw input_error("either --costs or --omega-override is required");
    }

    const CsvFile file = read_csv(opt.costs_path);
    const int name_col = file.column_index("feature");
    const int omega_col = file.column_index("omega");
    if (name_col < 0 || omega_col < 0) {
        throw input_error(opt.costs_path + ": costs file needs 'feature' and 'omega' columns");
    }
    std::vector<int> omega(static_cast<std::size_t>(p), 0);
    std::vector<char> found(static_cast<std::size_t>(p), 0);
    for (std::size_t r = 0; r < file.rows.size(); ++r) {
        const std::string& name = file.rows[r][static_cast<std::size_t>(name_col)];
        int j = -1;
        for (int f = 0; f < p; ++f) {
            if (features[static_cast<std::size_t>(f)] == name) {
                j = f;
                break;
            }
        }
        if (j < 0) continue; // costs for columns absent from the data are ignored
        const double value = parse_cell(file, r, omega_col, opt.costs_path);
        double scaled = value;
        if (opt.cost_scale > 0.0) {
            scaled = std::max(2.0, std::round(value * opt.cost_scale));
        } else if (value != std::floor(value)) {
            throw input_error(opt.costs_path + ": cost for feature '" + name + "' is " +
                              format_double(value) +
                              "; non-integer costs need --cost-scale");
        }
        if (scaled < 2.0) {
            throw input_error(opt.costs_path + ": cost for feature '" + name + "' is " +
                              format_double(value) +
                              ", which violates the omega_j >= 2 requirement");
        }
        omega[static_cast<std::size_t>(j)] = static_cast<int>(scaled);
        found[static_cast<std::size_t>(j)] = 1;
    }
    for (int j = 0; j < p; ++j) {
        if (!found[static_cast<std::size_t>(j)]) {
            throw input_error(opt.costs_path + ": no cost given for feature '" +
                              features[static_cast<std::size_t>(j)] + "'");
        }
    }
    return CostVector(std::move(omega));
}

int cmd_select(const SelectOptions& opt) {
    Family family;
    if (opt.family == "gaussian") family = Family::Gaussian;
    else if (opt.family == "binomial") family = Family::Binomial;
    else throw input_error("--family must be 'gaussian' or 'binomial'");
    if (!(opt.alpha > 0.0 && opt.alpha < 1.0)) throw input_error("--alpha must lie in (0, 1)");
    if (!(opt.c > 0.0)) throw input_error("--c must be positive");

    const CsvFile file = read_csv(opt.input);
    const int response_col = file.column_index(opt.response);
    if (response_col < 0) {
        throw input_error(opt.input + ": response column '" + opt.response + "' not found");
    }
    std::vector<std::string> features;
    std::vector<int> feature_cols;
    for (std::size_t cidx = 0; cidx < file.header.size(); ++cidx) {
        if (static_cast<int>(cidx) == response_col) continue;
        features.push_back(file.header[cidx]);
        feature_cols.push_back(static_cast<int>(cidx));
    }
    const int p = static_cast<int>(features.size());
    const int n = static_cast<int>(file.rows.size());
    if (p < 1) throw input_error(opt.input + ": no feature columns besides the response");
    if (n < 2) throw input_error(opt.input + ": at least two data rows are required");

    Dataset data;
    data.family = family;
    data.X.resize(n, p);
    data.y.resize(n);
    for (int i = 0; i < n; ++i) {
        data.y[i] = parse_cell(file, static_cast<std::size_t>(i), response_col, opt.input);
        for (int j = 0; j < p; ++j) {
            data.X(i, j) = parse_cell(file, static_cast<std::size_t>(i),
                                      feature_cols[static_cast<std::size_t>(j)], opt.input);
        }
    }
    data.validate();

    const CostVector omega = resolve_costs(opt, features);

    std::vector<std::string> warnings;
    const Eigen::VectorXd mean = data.X.colwise().mean();
    Eigen::MatrixXd sigma;
    if (!opt.sigma_path.empty()) {
        sigma = read_matrix_csv(opt.sigma_path, p);
    } else {
        const Eigen::MatrixXd centered = data.X.rowwise() - mean.transpose();
        Eigen::MatrixXd emp = (centered.transpose() * centered) / (n - 1.0);
        sigma = (1.0 - opt.shrinkage) * emp;
        sigma.diagonal() = emp.diagonal();
        warnings.push_back("feature covariance estimated empirically with diagonal shrinkage " +
                           format_double(opt.shrinkage) +
                           "; the simultaneous bound assumes a known covariance");
    }
    const GaussianFeatureModel model(mean, sigma);

    const Eigen::VectorXd s = select_s(model, omega);
    const KnockoffPlan plan = precompute_sampler(model, omega, s);

    Rng knock_rng = Rng::stream(opt.seed, 1);
    const Eigen::MatrixXd knockoffs = sample_knockoffs(plan, data.X, knock_rng);
    const Eigen::MatrixXd z = assemble_augmented(plan.index_map, data.X, knockoffs);

    Rng cv_rng = Rng::stream(opt.seed, 2);
    const double lambda = cross_validate_lambda(z, data.y, family, opt.folds, opt.grid, cv_rng);
    const LassoFit fit = fit_lasso(z, data.y, family, lambda);

    StatisticTable table = compute_statistics(fit.theta, plan.index_map, omega);
    table.lambda_used = lambda;
    Rng tie_rng = Rng::stream(opt.seed, 3);
    compute_kappa_tau(table, omega, tie_rng);

    const std::vector<int> order = order_features(table.tau, omega);
    const SelectionPath path = build_path(order, table.kappa, omega);
    BoundParams params;
    params.alpha = opt.alpha;
    params.c = opt.c;
    WfdpCurve curve;
    curve.ubar_k = wfdp_bound(path, omega, params);

    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    write_text_file((out / "path.csv").string(), path_to_csv(path, omega, table.kappa, table.tau, curve));

    std::vector<int> report_ks = opt.at_k;
    if (report_ks.empty()) {
        report_ks.resize(static_cast<std::size_t>(p));
        std::iota(report_ks.begin(), report_ks.end(), 1);
    }
    json sets = json::array();
    for (int k : report_ks) {
        if (k < 1 || k > p) {
            throw input_error("--at-k value " + std::to_string(k) + " is outside 1.." +
                              std::to_string(p));
        }
        json entry;
        entry["k"] = k;
        entry["cost"] = path.cost_k[static_cast<std::size_t>(k - 1)];
        entry["ubar"] = curve.ubar_k[k - 1];
        json names = json::array();
        for (int j : path.members(k)) names.push_back(features[static_cast<std::size_t>(j)]);
        entry["features"] = std::move(names);
        sets.push_back(std::move(entry));
    }

    json summary;
    summary["command"] = "select";
    summary["input"] = opt.input;
    summary["n"] = n;
    summary["p"] = p;
    summary["family"] = opt.family;
    summary["alpha"] = opt.alpha;
    summary["c"] = opt.c;
    summary["seed"] = opt.seed;
    summary["lambda"] = lambda;
    summary["tie_events"] = table.tie_events;
    summary["feature_names"] = features;
    summary["omega"] = omega.values();
    summary["s"] = std::vector<double>(s.data(), s.data() + s.size());
    summary["jitter_used"] = plan.jitter_used;
    summary["warnings"] = warnings;
    summary["selected_sets"] = std::move(sets);
    write_text_file((out / "summary.json").string(), summary.dump(2) + "\n");

    for (const std::string& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "select: n=" << n << " p=" << p << " lambda=" << format_double(lambda)
              << "\nwrote " << (out / "path.csv").string() << " and "
              << (out / "summary.json").string() << "\n";
    return kExitOk;
}

struct SimulateOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::string mode_override;
    int reps_override = -1;
    std::int64_t seed_override = -1;
};

int cmd_simulate(const SimulateOptions& opt) {
    json doc;
    try {
        doc = json::parse(read_text_file(opt.config_path));
    } catch (const json::exception& e) {
        throw input_error(opt.config_path + ": " + e.what());
    }

    std::vector<double> gammas;
    if (doc.contains("gamma") && doc.at("gamma").is_array()) {
        gammas = doc.at("gamma").get<std::vector<double>>();
        if (gammas.empty()) throw input_error("config: gamma array is empty");
        doc["gamma"] = gammas.front();
    }
    SimConfig base = sim_config_from_json(doc);
    if (gammas.empty()) gammas.push_back(base.gamma);
    if (opt.reps_override >= 0) base.reps = opt.reps_override;
    if (opt.seed_override >= 0) base.seed = static_cast<std::uint64_t>(opt.seed_override);

    std::vector<SimMode> modes;
    if (opt.mode_override.empty()) {
        modes.push_back(base.mode);
    } else if (opt.mode_override == "cheap") {
        modes.push_back(SimMode::Cheap);
    } else if (opt.mode_override == "baseline-omega2") {
        modes.push_back(SimMode::BaselineOmega2);
    } else if (opt.mode_override == "both") {
        modes.push_back(SimMode::Cheap);
        modes.push_back(SimMode::BaselineOmega2);
    } else {
        throw input_error("--mode must be 'cheap', 'baseline-omega2' or 'both'");
    }

    fs::create_directories(opt.out_dir);
    const fs::path out(opt.out_dir);
    const bool single = gammas.size() == 1 && modes.size() == 1;

    std::vector<SimReport> reports;
    json runs = json::array();
    for (double gamma : gammas) {
        for (SimMode mode : modes) {
            SimConfig config = base;
            config.gamma = gamma;
            config.mode = mode;
            config.validate();
            reports.push_back(run_experiment(config));
        }
    }

    std::size_t idx = 0;
    for (double gamma : gammas) {
        std::vector<const SimReport*> per_gamma;
        for (SimMode mode : modes) {
            const SimReport& report = reports[idx++];
            per_gamma.push_back(&report);
            const std::string tag = "gamma" + format_double(gamma) + "_" + to_string(mode);
            const std::string violations_name = single ? "violations.csv" : "violations_" + tag + ".csv";
            write_text_file((out / violations_name).string(), violations_to_csv(report));
            json entry = report_to_json(report);
            entry["gamma"] = gamma;
            entry["mode"] = to_string(mode);
            runs.push_back(std::move(entry));
        }
        const std::string tradeoff_name =
            gammas.size() == 1 ? "tradeoff.csv" : "tradeoff_gamma" + format_double(gamma) + ".csv";
        write_text_file((out / tradeoff_name).string(), tradeoff_to_csv(per_gamma));
    }
    json report_doc;
    report_doc["runs"] = std::move(runs);
    write_text_file((out / "report.json").string(), report_doc.dump(2) + "\n");

    // Table-1-style summary: violation proportion per gamma and mode.
    std::cout << "violation proportion (alpha = " << format_double(base.alpha)
              << ", reps = " << base.reps << ")\n";
    std::cout << std::left << std::setw(18) << "mode \\ gamma";
    for (double gamma : gammas) std::cout << std::setw(10) << format_double(gamma);
    std::cout << "\n";
    for (std::size_t m = 0; m < modes.size(); ++m) {
        std::cout << std::left << std::setw(18) << to_string(modes[m]);
        for (std::size_t g = 0; g < gammas.size(); ++g) {
            const SimReport& report = reports[g * modes.size() + m];
            std::cout << std::setw(10) << format_double(report.violation_rate);
        }
        std::cout << "\n";
    }
    int failed_total = 0;
    for (const SimReport& report : reports) failed_total += report.failed;
    if (failed_total > 0) {
        std::cout << "failed replicates: " << failed_total << " (excluded from aggregates)\n";
    }
    std::cout << "wrote report files to " << out.string() << "\n";
    return kExitOk;
}

struct ValidateOptions {
    std::string sigma_path;
    int dim = 0;
    std::string omega_text;
    std::string s_override;
    std::uint64_t seed = 1;
    int n_mc = 50000;
    int reps = 2000;
    int n = 50;
    int folds = 5;
    int grid = 20;
    double fixed_lambda = 0.0;
};

int cmd_validate(const ValidateOptions& opt) {
    Eigen::MatrixXd sigma;
    if (!opt.sigma_path.empty()) {
        sigma = read_matrix_csv(opt.sigma_path, 0);
        if (sigma.rows() != sigma.cols()) {
            throw input_error(opt.sigma_path + ": covariance matrix must be square");
        }
    } else if (opt.dim > 0) {
        sigma = Eigen::MatrixXd::Identity(opt.dim, opt.dim);
    } else {
        throw input_error("provide --sigma or --dim");
    }
    const int p = static_cast<int>(sigma.rows());
    const GaussianFeatureModel model(Eigen::VectorXd::Zero(p), sigma);

    if (opt.omega_text.empty()) throw input_error("--omega is required");
    std::vector<int> omega_values = parse_int_list(opt.omega_text, "--omega");
    if (omega_values.size() == 1) {
        omega_values.assign(static_cast<std::size_t>(p), omega_values.front());
    }
    if (static_cast<int>(omega_values.size()) != p) {
        throw input_error("--omega needs 1 or " + std::to_string(p) + " values, got " +
                          std::to_string(omega_values.size()));
    }
    const CostVector omega(omega_values);

    Eigen::VectorXd s;
    if (!opt.s_override.empty()) {
        std::vector<double> sv = parse_double_list(opt.s_override, "--s-override");
        if (sv.size() == 1) sv.assign(static_cast<std::size_t>(p), sv.front());
        if (static_cast<int>(sv.size()) != p) {
            throw input_error("--s-override needs 1 or " + std::to_string(p) + " values");
        }
        s = Eigen::Map<const Eigen::VectorXd>(sv.data(), p);
    } else {
        s = select_s(model, omega);
    }

    const KnockoffPlan plan = precompute_sampler(model, omega, s);
    Rng diag_rng = Rng::stream(opt.seed, 0);
    const PlanDiagnostics diag = validate_plan(plan, model, omega, opt.n_mc, diag_rng);

    std::cout << "knockoff plan diagnostics (n_mc = " << diag.n_mc << ")\n";
    std::cout << "  s = ";
    for (int j = 0; j < p; ++j) std::cout << (j ? "," : "") << format_double(s[j]);
    std::cout << "\n  jitter_used = " << format_double(plan.jitter_used) << "\n";
    std::cout << "  max |empirical cov - G| = " << format_double(diag.max_cov_deviation) << "\n";
    std::cout << "  PSD margin (min eigenvalue of G) = " << format_double(diag.psd_margin) << "\n";
    std::cout << "  swap-invariance deviation = " << format_double(diag.swap_deviation) << "\n";

    if (opt.reps > 0) {
        const std::optional<double> fixed =
            opt.fixed_lambda > 0.0 ? std::optional<double>(opt.fixed_lambda) : std::nullopt;
        const UniformityReport uni = run_null_uniformity(model, omega, opt.n, opt.reps,
                                                         opt.seed, opt.folds, opt.grid, fixed);
        std::cout << "null kappa uniformity (" << uni.reps << " replicates, " << uni.failed
                  << " failed)\n";
        for (int j = 0; j < p; ++j) {
            std::cout << "  feature " << (j + 1) << ": omega = " << omega[j]
                      << ", P(kappa=1) = " << format_double(uni.kappa1_freq[static_cast<std::size_t>(j)])
                      << ", chi-square p = " << format_double(uni.p_values[static_cast<std::size_t>(j)])
                      << "\n";
        }
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cost-conscious knockoff feature selection"};
    app.require_subcommand(1);

    SelectOptions sel;
    CLI::App* select_cmd = app.add_subcommand("select", "run the selection pipeline on a CSV dataset");
    select_cmd->add_option("input", sel.input, "data CSV with header")->required();
    select_cmd->add_option("--response", sel.response, "response column name")->required();
    select_cmd->add_option("--family", sel.family, "gaussian or binomial");
    select_cmd->add_option("--costs", sel.costs_path, "costs CSV with feature,omega columns");
    select_cmd->add_option("--sigma", sel.sigma_path, "known feature covariance, row-major CSV");
    select_cmd->add_option("--alpha", sel.alpha, "bound confidence level (default 0.2)");
    select_cmd->add_option("--c", sel.c, "bound trade-off constant (default 1)");
    select_cmd->add_option("--seed", sel.seed, "master seed");
    select_cmd->add_option("--at-k", sel.at_k, "report selected sets at these path positions")
        ->delimiter(',');
    select_cmd->add_option("--omega-override", sel.omega_override,
                           "ignore costs and use this omega for every feature");
    select_cmd->add_option("--cost-scale", sel.cost_scale,
                           "multiply costs by this factor and round (clamped to >= 2)");
    select_cmd->add_option("--out", sel.out_dir, "output directory (default .)");
    select_cmd->add_option("--shrinkage", sel.shrinkage,
                           "diagonal shrinkage for the empirical covariance (default 0.1)");
    select_cmd->add_option("--folds", sel.folds, "cross-validation folds (default 10)");
    select_cmd->add_option("--grid", sel.grid, "cross-validation grid size (default 100)");

    SimulateOptions sim;
    CLI::App* simulate_cmd = app.add_subcommand("simulate", "run the Monte Carlo study from a config file");
    simulate_cmd->add_option("config", sim.config_path, "JSON simulation config")->required();
    simulate_cmd->add_option("--out", sim.out_dir, "output directory (default .)");
    simulate_cmd->add_option("--mode", sim.mode_override, "cheap, baseline-omega2 or both");
    simulate_cmd->add_option("--reps", sim.reps_override, "override replicate count");
    simulate_cmd->add_option("--seed", sim.seed_override, "override master seed");

    ValidateOptions val;
    CLI::App* validate_cmd =
        app.add_subcommand("validate-knockoffs", "diagnostics for the knockoff construction");
    validate_cmd->add_option("--sigma", val.sigma_path, "feature covariance, row-major CSV");
    validate_cmd->add_option("--dim", val.dim, "use the identity covariance of this dimension");
    validate_cmd->add_option("--omega", val.omega_text, "comma list of costs, or one value for all")
        ->required();
    validate_cmd->add_option("--s-override", val.s_override,
                             "bypass select_s with this decorrelation vector");
    validate_cmd->add_option("--seed", val.seed, "master seed");
    validate_cmd->add_option("--n-mc", val.n_mc, "Monte Carlo sample count (default 50000)");
    validate_cmd->add_option("--reps", val.reps, "null-pipeline replicates (default 2000; 0 skips)");
    validate_cmd->add_option("--n", val.n, "rows per null replicate (default 50)");
    validate_cmd->add_option("--folds", val.folds, "cross-validation folds (default 5)");
    validate_cmd->add_option("--grid", val.grid, "cross-validation grid size (default 20)");
    validate_cmd->add_option("--fixed-lambda", val.fixed_lambda,
                             "skip cross-validation; lambda as a fraction of lambda_max");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitInput;
    }

    try {
        if (app.got_subcommand(select_cmd)) return cmd_select(sel);
        if (app.got_subcommand(simulate_cmd)) return cmd_simulate(sim);
        if (app.got_subcommand(validate_cmd)) return cmd_validate(val);
        return kExitInput;
    } catch (const input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const infeasible_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const solver_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSolver;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
}
