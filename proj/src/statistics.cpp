#include "costknock/statistics.hpp"

#include <cmath>
#include <nlohmann/json.hpp>

#include "costknock/errors.hpp"

namespace costknock {

StatisticTable compute_statistics(const Eigen::VectorXd& theta,
                                  const IndexMap& map,
                                  const CostVector& omega) {
    if (theta.size() != map.total_width()) {
        throw input_error("coefficient vector length " + std::to_string(theta.size()) +
                          " does not match augmented width " + std::to_string(map.total_width()));
    }
    StatisticTable table;
    const int p = omega.size();
    table.t.resize(static_cast<std::size_t>(p));
    for (int j = 0; j < p; ++j) {
        auto& group = table.t[static_cast<std::size_t>(j)];
        group.resize(static_cast<std::size_t>(omega[j]));
        for (int l = 0; l < omega[j]; ++l) {
            group[static_cast<std::size_t>(l)] = std::abs(theta[map.flat(j, l)]);
        }
    }
    return table;
}

void compute_kappa_tau(StatisticTable& table, const CostVector& omega, Rng& rng) {
    const int p = omega.size();
    if (static_cast<int>(table.t.size()) != p) {
        throw input_error("statistic table does not match the cost vector length");
    }
    table.kappa.assign(static_cast<std::size_t>(p), 0);
    table.tau.resize(p);

    std::vector<int> tied;
    for (int j = 0; j < p; ++j) {
        const auto& group = table.t[static_cast<std::size_t>(j)];
        const int width = static_cast<int>(group.size());
        if (width != omega[j]) {
            throw input_error("statistic group " + std::to_string(j + 1) +
                              " has the wrong number of copies");
        }
        double best = group[0];
        for (int l = 1; l < width; ++l) best = std::max(best, group[static_cast<std::size_t>(l)]);

        tied.clear();
        for (int l = 0; l < width; ++l) {
            if (group[static_cast<std::size_t>(l)] == best) tied.push_back(l);
        }
        int winner = tied[0];
        if (tied.size() > 1) {
            winner = tied[rng.uniform_int(tied.size())];
            ++table.tie_events;
        }
        table.kappa[static_cast<std::size_t>(j)] = winner + 1;

        double second = -1.0;
        for (int l = 0; l < width; ++l) {
            if (l == winner) continue;
            second = std::max(second, group[static_cast<std::size_t>(l)]);
        }
        table.tau[j] = 2.0 / omega[j] * (best - second);
    }
}

nlohmann::json statistic_table_to_json(const StatisticTable& table) {
    nlohmann::json doc;
    doc["t"] = table.t;
    doc["kappa"] = table.kappa;
    doc["tau"] = std::vector<double>(table.tau.data(), table.tau.data() + table.tau.size());
    doc["lambda_used"] = table.lambda_used;
    doc["tie_events"] = table.tie_events;
    return doc;
}

StatisticTable statistic_table_from_json(const nlohmann::json& doc) {
    StatisticTable table;
    table.t = doc.at("t").get<std::vector<std::vector<double>>>();
    table.kappa = doc.at("kappa").get<std::vector<int>>();
    const std::vector<double> tau = doc.at("tau").get<std::vector<double>>();
    table.tau = Eigen::Map<const Eigen::VectorXd>(tau.data(), static_cast<Eigen::Index>(tau.size()));
    table.lambda_used = doc.at("lambda_used").get<double>();
    table.tie_events = doc.at("tie_events").get<int>();
    return table;
}

} // namespace costknock
