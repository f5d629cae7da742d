#include "fedsim/harness.hpp"

#include <charconv>
#include <sstream>
#include <stdexcept>

#include "fedsim/rng.hpp"

namespace fedsim {

namespace {

// Stream tags for deriving independent seeds from the experiment seed.
constexpr std::uint64_t kTrainSetTag = 1;
constexpr std::uint64_t kEvalSetTag = 2;
constexpr std::uint64_t kInitTag = 3;
constexpr std::uint64_t kPartitionTag = 4;
constexpr std::uint64_t kClientTagBase = 0x100;

} // namespace

void ExperimentConfig::validate() const {
    if (clients == 0) throw std::invalid_argument("clients must be >= 1");
    if (local_epochs == 0) throw std::invalid_argument("local_epochs must be >= 1");
    if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
    if (!(target_metric > 0.0) || target_metric > 1.0)
        throw std::invalid_argument("target_metric must be in (0, 1]");
    if (max_rounds == 0) throw std::invalid_argument("max_rounds must be >= 1");
    if (dataset_size == 0) throw std::invalid_argument("dataset_size must be >= 1");
    if (num_classes == 0) throw std::invalid_argument("num_classes must be >= 1");
    if (shards_per_client == 0) throw std::invalid_argument("shards_per_client must be >= 1");
}

TrainConfig client_train_config(const ExperimentConfig& cfg, std::uint64_t client_id) {
    TrainConfig tc;
    tc.local_epochs = cfg.local_epochs;
    tc.batch_size = cfg.batch_size;
    tc.learning_rate = cfg.learning_rate;
    tc.seed = mix_seed(cfg.seed, kClientTagBase + client_id);
    return tc;
}

std::vector<Shard> experiment_shards(const ExperimentConfig& cfg, const LabeledDataset& train_set) {
    return cfg.partition == PartitionMode::iid
               ? partition_iid(train_set, cfg.clients, mix_seed(cfg.seed, kPartitionTag))
               : partition_label_skew(train_set, cfg.clients, cfg.shards_per_client,
                                      mix_seed(cfg.seed, kPartitionTag));
}

Experiment build_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    std::vector<double> weights = cfg.num_classes == 4
                                      ? default_class_weights()
                                      : std::vector<double>(cfg.num_classes, 1.0 / cfg.num_classes);

    Experiment exp;
    exp.train_set = synth_dataset(cfg.dataset_size, cfg.num_classes, weights,
                                  mix_seed(cfg.seed, kTrainSetTag));
    exp.eval_set =
        synth_dataset(cfg.eval_size, cfg.num_classes, weights, mix_seed(cfg.seed, kEvalSetTag));

    std::vector<Shard> shards = experiment_shards(cfg, exp.train_set);

    for (const auto& shard : shards) {
        ClientState state;
        state.client_id = shard.client_id;
        state.data = subset(exp.train_set, shard.indices);
        state.config = client_train_config(cfg, shard.client_id);
        exp.clients.push_back(std::move(state));
    }

    exp.initial = init_params(classifier_layout(kSynthFeatureDim, cfg.num_classes),
                              mix_seed(cfg.seed, kInitTag));
    return exp;
}

RunResult simulate(const ExperimentConfig& cfg) {
    Experiment exp = build_experiment(cfg);
    return run_until_target(exp.clients, exp.eval_set, exp.initial, cfg.target_metric,
                            cfg.max_rounds);
}

std::vector<SweepRow> sweep_local_epochs(const ExperimentConfig& cfg,
                                         const std::vector<std::size_t>& e_values) {
    if (e_values.empty()) throw std::invalid_argument("e_values must be non-empty");
    std::vector<SweepRow> rows;
    for (std::size_t e : e_values) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.local_epochs = e;
        RunResult result = simulate(run_cfg);
        rows.push_back(SweepRow{e, result.rounds_completed(), result.reached_target});
    }
    return rows;
}

namespace {

// Shortest representation that round-trips.
std::string format_metric(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

} // namespace

std::string round_reports_csv(const std::vector<RoundReport>& reports) {
    std::ostringstream out;
    out << "round,global_metric,reached_target\n";
    for (const auto& r : reports)
        out << r.round << "," << format_metric(r.global_metric) << ","
            << (r.reached_target ? "true" : "false") << "\n";
    return out.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows, const std::string& model_name) {
    std::ostringstream out;
    out << "model,local_epochs,rounds,reached_target\n";
    for (const auto& row : rows)
        out << model_name << "," << row.local_epochs << "," << row.rounds << ","
            << (row.reached_target ? "true" : "false") << "\n";
    return out.str();
}

std::string plot_series_csv(const std::vector<RoundReport>& reports) {
    std::ostringstream out;
    out << "round,metric\n";
    for (const auto& r : reports) out << r.round << "," << format_metric(r.global_metric) << "\n";
    return out.str();
}

std::string partition_stats_table(const LabeledDataset& data,
                                  const std::vector<std::vector<std::size_t>>& hist) {
    std::ostringstream out;
    out << "client";
    for (std::size_t c = 0; c < data.num_classes; ++c) out << ",class" << c;
    out << ",total\n";
    std::vector<std::size_t> totals(data.num_classes, 0);
    std::size_t grand = 0;
    for (std::size_t k = 0; k < hist.size(); ++k) {
        std::size_t row_total = 0;
        out << k;
        for (std::size_t c = 0; c < data.num_classes; ++c) {
            out << "," << hist[k][c];
            totals[c] += hist[k][c];
            row_total += hist[k][c];
        }
        out << "," << row_total << "\n";
        grand += row_total;
    }
    out << "total";
    for (std::size_t c = 0; c < data.num_classes; ++c) out << "," << totals[c];
    out << "," << grand << "\n";
    return out.str();
}

} // namespace fedsim
