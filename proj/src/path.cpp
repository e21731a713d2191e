#include "costknock/path.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "costknock/csv.hpp"
#include "costknock/errors.hpp"

namespace costknock {

std::vector<int> SelectionPath::members(int k) const {
    if (k < 1 || k > p()) throw input_error("path prefix index out of range");
    std::vector<int> result;
    for (int j = 0; j < k; ++j) {
        if (selected[static_cast<std::size_t>(j)]) result.push_back(sigma[static_cast<std::size_t>(j)]);
    }
    return result;
}

std::vector<int> order_features(const Eigen::VectorXd& tau, const CostVector& omega) {
    const int p = omega.size();
    if (tau.size() != p) throw input_error("tau length does not match the cost vector");
    std::vector<int> sigma(static_cast<std::size_t>(p));
    std::iota(sigma.begin(), sigma.end(), 0);
    std::sort(sigma.begin(), sigma.end(), [&](int a, int b) {
        if (tau[a] != tau[b]) return tau[a] > tau[b];
        if (omega[a] != omega[b]) return omega[a] < omega[b];
        return a < b;
    });
    return sigma;
}

SelectionPath build_path(const std::vector<int>& sigma,
                         const std::vector<int>& kappa,
                         const CostVector& omega) {
    const int p = omega.size();
    if (static_cast<int>(sigma.size()) != p || static_cast<int>(kappa.size()) != p) {
        throw input_error("sigma/kappa lengths do not match the cost vector");
    }
    SelectionPath path;
    path.sigma = sigma;
    path.selected.resize(static_cast<std::size_t>(p));
    path.cost_k.resize(static_cast<std::size_t>(p));
    path.size_k.resize(static_cast<std::size_t>(p));

    double cost = 0.0;
    int size = 0;
    for (int j = 0; j < p; ++j) {
        const int feature = sigma[static_cast<std::size_t>(j)];
        if (feature < 0 || feature >= p) throw input_error("sigma holds an out-of-range feature");
        const bool won = kappa[static_cast<std::size_t>(feature)] == 1;
        path.selected[static_cast<std::size_t>(j)] = won ? 1 : 0;
        if (won) {
            cost += omega[feature];
            ++size;
        }
        path.cost_k[static_cast<std::size_t>(j)] = cost;
        path.size_k[static_cast<std::size_t>(j)] = size;
    }
    return path;
}

Eigen::VectorXd wfdp_bound(const SelectionPath& path,
                           const CostVector& omega,
                           const BoundParams& params) {
    if (!(params.alpha > 0.0 && params.alpha < 1.0)) {
        throw input_error("alpha must lie strictly inside (0, 1)");
    }
    if (!(params.c > 0.0)) throw input_error("c must be positive");
    const int p = path.p();
    if (omega.size() != p) throw input_error("cost vector does not match the path");

    std::vector<int> max_set;
    if (params.h0_estimate && !params.h0_estimate->empty()) {
        max_set = *params.h0_estimate;
        for (int m : max_set) {
            if (m < 0 || m >= p) throw input_error("h0 estimate holds an out-of-range feature");
        }
    } else {
        max_set.resize(static_cast<std::size_t>(p));
        std::iota(max_set.begin(), max_set.end(), 0);
    }

    const double alpha_c = std::pow(params.alpha, params.c);
    double cost_factor = 0.0;
    for (int m : max_set) {
        const double w = omega[m];
        cost_factor = std::max(cost_factor, w / std::log(w - (w - 1.0) * alpha_c));
    }
    const double log_term = -std::log(params.alpha);

    Eigen::VectorXd ubar(p);
    for (int k = 1; k <= p; ++k) {
        const int unselected = k - path.size_k[static_cast<std::size_t>(k - 1)];
        const double numer = 1.0 + params.c * unselected;
        const double denom = std::max(path.cost_k[static_cast<std::size_t>(k - 1)], 1.0);
        ubar[k - 1] = log_term * (numer / denom) * cost_factor;
    }
    return ubar;
}

Eigen::VectorXd true_wfdp(const SelectionPath& path,
                          const CostVector& omega,
                          const std::vector<int>& h0) {
    const int p = path.p();
    if (omega.size() != p) throw input_error("cost vector does not match the path");
    std::vector<char> is_null(static_cast<std::size_t>(p), 0);
    for (int j : h0) {
        if (j < 0 || j >= p) throw input_error("null set holds an out-of-range feature");
        is_null[static_cast<std::size_t>(j)] = 1;
    }

    // Costs are re-accumulated from the passed vector rather than read off
    // path.cost_k: the path may have been built under different construction
    // costs (the cost-unconscious baseline) while the oracle always weighs
    // discoveries by their real costs.
    Eigen::VectorXd wfdp(p);
    double null_cost = 0.0;
    double selected_cost = 0.0;
    for (int k = 1; k <= p; ++k) {
        const int feature = path.sigma[static_cast<std::size_t>(k - 1)];
        if (path.selected[static_cast<std::size_t>(k - 1)]) {
            selected_cost += omega[feature];
            if (is_null[static_cast<std::size_t>(feature)]) null_cost += omega[feature];
        }
        wfdp[k - 1] = null_cost / std::max(selected_cost, 1.0);
    }
    return wfdp;
}

double ratio_sup(const WfdpCurve& curve) {
    if (!curve.wfdp_k) throw input_error("violation check requires the oracle wFDP curve");
    const Eigen::VectorXd& wfdp = *curve.wfdp_k;
    if (wfdp.size() != curve.ubar_k.size()) {
        throw input_error("wFDP and bound curves have different lengths");
    }
    double sup = 0.0;
    for (int k = 0; k < wfdp.size(); ++k) {
        sup = std::max(sup, wfdp[k] / curve.ubar_k[k]);
    }
    return sup;
}

bool violation_indicator(const WfdpCurve& curve) { return ratio_sup(curve) > 1.0; }

namespace {

std::vector<std::string> path_row(const SelectionPath& path,
                                  const CostVector& omega,
                                  const std::vector<int>& kappa,
                                  const Eigen::VectorXd& tau,
                                  const WfdpCurve& curve,
                                  int k) {
    const int feature = path.sigma[static_cast<std::size_t>(k - 1)];
    std::vector<std::string> row;
    row.push_back(std::to_string(k));
    row.push_back(std::to_string(feature + 1));
    row.push_back(std::to_string(omega[feature]));
    row.push_back(std::to_string(kappa[static_cast<std::size_t>(feature)]));
    row.push_back(format_double(tau[feature]));
    row.push_back(path.selected[static_cast<std::size_t>(k - 1)] ? "1" : "0");
    row.push_back(format_double(path.cost_k[static_cast<std::size_t>(k - 1)]));
    row.push_back(format_double(curve.ubar_k[k - 1]));
    row.push_back(curve.wfdp_k ? format_double((*curve.wfdp_k)[k - 1]) : std::string());
    return row;
}

} // namespace

std::string path_to_csv(const SelectionPath& path,
                        const CostVector& omega,
                        const std::vector<int>& kappa,
                        const Eigen::VectorXd& tau,
                        const WfdpCurve& curve) {
    std::string out = "k,feature,omega,kappa,tau,selected,cost_k,ubar_k,wfdp_k\n";
    for (int k = 1; k <= path.p(); ++k) {
        out += join_fields(path_row(path, omega, kappa, tau, curve, k));
        out += '\n';
    }
    return out;
}

nlohmann::json path_to_json(const SelectionPath& path,
                            const CostVector& omega,
                            const std::vector<int>& kappa,
                            const Eigen::VectorXd& tau,
                            const WfdpCurve& curve) {
    nlohmann::json doc;
    nlohmann::json rows = nlohmann::json::array();
    for (int k = 1; k <= path.p(); ++k) {
        const int feature = path.sigma[static_cast<std::size_t>(k - 1)];
        nlohmann::json row;
        row["k"] = k;
        row["feature"] = feature + 1;
        row["omega"] = omega[feature];
        row["kappa"] = kappa[static_cast<std::size_t>(feature)];
        row["tau"] = tau[feature];
        row["selected"] = path.selected[static_cast<std::size_t>(k - 1)] != 0;
        row["cost_k"] = path.cost_k[static_cast<std::size_t>(k - 1)];
        row["ubar_k"] = curve.ubar_k[k - 1];
        if (curve.wfdp_k) row["wfdp_k"] = (*curve.wfdp_k)[k - 1];
        rows.push_back(std::move(row));
    }
    doc["path"] = std::move(rows);
    if (curve.ratio_sup) doc["ratio_sup"] = *curve.ratio_sup;
    return doc;
}

} // namespace costknock
