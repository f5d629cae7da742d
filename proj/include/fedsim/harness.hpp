#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsim/fedavg.hpp"
#include "fedsim/partition.hpp"

namespace fedsim {

struct ExperimentConfig {
    std::size_t clients = 5;        // C
    std::size_t local_epochs = 1;   // E
    std::size_t batch_size = 1;     // B
    double learning_rate = 2e-5;
    double target_metric = 0.80;
    std::uint64_t max_rounds = 200;
    PartitionMode partition = PartitionMode::iid;
    std::size_t shards_per_client = 2;
    std::size_t dataset_size = 2000;
    std::size_t num_classes = 4;
    std::size_t eval_size = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

// Everything a run needs, derived deterministically from the config.
struct Experiment {
    LabeledDataset train_set;
    LabeledDataset eval_set;
    std::vector<ClientState> clients;
    ParamVector initial;
};

TrainConfig client_train_config(const ExperimentConfig& cfg, std::uint64_t client_id);
std::vector<Shard> experiment_shards(const ExperimentConfig& cfg, const LabeledDataset& train_set);
Experiment build_experiment(const ExperimentConfig& cfg);

RunResult simulate(const ExperimentConfig& cfg);

struct SweepRow {
    std::size_t local_epochs = 0;
    std::uint64_t rounds = 0;
    bool reached_target = false;
};

std::vector<SweepRow> sweep_local_epochs(const ExperimentConfig& cfg,
                                         const std::vector<std::size_t>& e_values);

// CSV renderers; the round CSV is the byte-compared artifact of networked
// vs simulated runs.
std::string round_reports_csv(const std::vector<RoundReport>& reports);
std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& model_name);
std::string plot_series_csv(const std::vector<RoundReport>& reports);
std::string partition_stats_table(const LabeledDataset& data,
                                  const std::vector<std::vector<std::size_t>>& hist);

inline constexpr const char* kModelName = "logreg-sgd";

} // namespace fedsim
