#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

struct ClientUpdate {
    std::uint64_t client_id = 0;
    std::uint64_t sample_count = 0; // n_k
    ParamVector params;
    double local_metric = 0.0;
};

struct GlobalModel {
    std::uint64_t round = 0; // 0 = initial broadcast
    ParamVector params;
    double metric = 0.0;
};

struct RoundReport {
    std::uint64_t round = 0;
    double global_metric = 0.0;
    std::vector<std::pair<std::uint64_t, double>> per_client_metrics; // sorted by client_id
    bool reached_target = false;
};

// Element-wise convex combination with weights n_k / n, summed in ascending
// client_id order. Identical inputs aggregate to themselves exactly, and each
// output element stays inside the per-element hull of the client values.
ParamVector aggregate(std::vector<ClientUpdate> updates);

struct ClientState {
    std::uint64_t client_id = 0;
    LabeledDataset data;
    TrainConfig config;
};

// One synchronous round: every client trains from the incoming global params
// (epoch offset advances with the round so chained rounds continue the local
// SGD schedule), the server aggregates all updates, and the new global metric
// is measured on the held-out eval set. Simulation executes clients
// sequentially in client_id order.
std::pair<GlobalModel, RoundReport> run_round(const GlobalModel& global,
                                              const std::vector<ClientState>& clients,
                                              const LabeledDataset& eval_set,
                                              double target_metric);

struct Candidate {
    ParamVector params;
    double metric = 0.0;
};

// Maximal-metric candidate; ties break toward the latest entry in the list.
const Candidate& select_best_local(const std::vector<Candidate>& candidates);

struct RunResult {
    std::vector<RoundReport> reports; // round 0 evaluation first
    GlobalModel final_model;
    bool reached_target = false;
    // Completed aggregation rounds (the round-0 broadcast is not counted).
    std::uint64_t rounds_completed() const { return final_model.round; }
};

RunResult run_until_target(const std::vector<ClientState>& clients,
                           const LabeledDataset& eval_set, const ParamVector& initial,
                           double target_metric, std::uint64_t max_rounds);

} // namespace fedsim
