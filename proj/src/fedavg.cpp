#include "fedsim/fedavg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fedsim {

ParamVector aggregate(std::vector<ClientUpdate> updates) {
    if (updates.empty()) throw std::invalid_argument("no client updates to aggregate");
    std::sort(updates.begin(), updates.end(),
              [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });

    const ParamVector& first = updates.front().params;
    first.validate();
    std::uint64_t total = 0;
    for (const auto& u : updates) {
        if (u.sample_count == 0) throw std::invalid_argument("client sample count must be >= 1");
        if (u.params.layout != first.layout)
            throw std::invalid_argument("client update layout mismatch");
        u.params.validate();
        total += u.sample_count;
    }

    // Anchored at the first client's params so a consensus of identical
    // updates reproduces them bit-for-bit; clamped to the per-element hull.
    const double inv_n = 1.0 / static_cast<double>(total);
    ParamVector out = first;
    for (std::size_t j = 0; j < out.values.size(); ++j) {
        double base = first.values[j];
        double acc = 0.0;
        double lo = base, hi = base;
        for (const auto& u : updates) {
            double v = u.params.values[j];
            acc += static_cast<double>(u.sample_count) * inv_n * (v - base);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        out.values[j] = std::clamp(base + acc, lo, hi);
    }
    return out;
}

std::pair<GlobalModel, RoundReport> run_round(const GlobalModel& global,
                                              const std::vector<ClientState>& clients,
                                              const LabeledDataset& eval_set,
                                              double target_metric) {
    if (clients.empty()) throw std::invalid_argument("at least one client required");

    std::vector<ClientUpdate> updates;
    updates.reserve(clients.size());
    for (const auto& client : clients) {
        std::uint64_t epoch_offset = global.round * client.config.local_epochs;
        TrainResult trained;
        try {
            trained = local_train(global.params, client.data, client.config, epoch_offset);
        } catch (const std::runtime_error& e) {
            throw std::runtime_error("client " + std::to_string(client.client_id) +
                                     " aborted the round: " + e.what());
        }
        double local_metric = evaluate_accuracy(trained.params, client.data);
        updates.push_back(ClientUpdate{client.client_id, client.data.size(),
                                       std::move(trained.params), local_metric});
    }

    GlobalModel next;
    next.round = global.round + 1;
    next.params = aggregate(updates);
    next.metric = evaluate_accuracy(next.params, eval_set);

    RoundReport report;
    report.round = next.round;
    report.global_metric = next.metric;
    for (const auto& u : updates)
        report.per_client_metrics.emplace_back(u.client_id, u.local_metric);
    std::sort(report.per_client_metrics.begin(), report.per_client_metrics.end());
    report.reached_target = next.metric >= target_metric;
    return {std::move(next), std::move(report)};
}

const Candidate& select_best_local(const std::vector<Candidate>& candidates) {
    if (candidates.empty()) throw std::invalid_argument("no candidates");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i)
        if (candidates[i].metric >= candidates[best].metric) best = i;
    return candidates[best];
}

RunResult run_until_target(const std::vector<ClientState>& clients,
                           const LabeledDataset& eval_set, const ParamVector& initial,
                           double target_metric, std::uint64_t max_rounds) {
    if (!(target_metric > 0.0) || target_metric > 1.0)
        throw std::invalid_argument("target_metric must be in (0, 1]");
    if (max_rounds == 0) throw std::invalid_argument("max_rounds must be positive");
    if (clients.empty()) throw std::invalid_argument("at least one client required");

    RunResult result;
    result.final_model = GlobalModel{0, initial, evaluate_accuracy(initial, eval_set)};

    RoundReport initial_report;
    initial_report.round = 0;
    initial_report.global_metric = result.final_model.metric;
    for (const auto& client : clients)
        initial_report.per_client_metrics.emplace_back(
            client.client_id, evaluate_accuracy(initial, client.data));
    std::sort(initial_report.per_client_metrics.begin(), initial_report.per_client_metrics.end());
    initial_report.reached_target = initial_report.global_metric >= target_metric;
    result.reports.push_back(initial_report);
    if (initial_report.reached_target) {
        result.reached_target = true;
        return result;
    }

    for (std::uint64_t r = 0; r < max_rounds; ++r) {
        auto [next, report] = run_round(result.final_model, clients, eval_set, target_metric);
        result.final_model = std::move(next);
        result.reports.push_back(std::move(report));
        if (result.reports.back().reached_target) {
            result.reached_target = true;
            break;
        }
    }
    return result;
}

} // namespace fedsim
