#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedsim/detmetrics.hpp"
#include "fedsim/harness.hpp"
#include "fedsim/net.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitTargetMissed = 2;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

void write_or_print(const std::string& path, const std::string& content) {
    if (path.empty())
        std::cout << content;
    else
        write_file(path, content);
}

struct CommonFlags {
    fedsim::ExperimentConfig config;
    std::string partition = "iid";

    void attach(CLI::App& cmd) {
        cmd.add_option("--seed", config.seed, "PRNG seed")->capture_default_str();
        cmd.add_option("--clients", config.clients, "number of clients C")->capture_default_str();
        cmd.add_option("--local-epochs", config.local_epochs, "local epochs per round E")
            ->capture_default_str();
        cmd.add_option("--batch-size", config.batch_size, "minibatch size B")
            ->capture_default_str();
        cmd.add_option("--learning-rate", config.learning_rate, "SGD learning rate")
            ->capture_default_str();
        cmd.add_option("--target-metric", config.target_metric,
                       "target global accuracy in (0, 1]")
            ->capture_default_str();
        cmd.add_option("--max-rounds", config.max_rounds, "round budget")->capture_default_str();
        cmd.add_option("--partition", partition, "partition mode: iid or label-skew")
            ->check(CLI::IsMember({"iid", "label-skew"}))
            ->capture_default_str();
        cmd.add_option("--shards-per-client", config.shards_per_client,
                       "label-skew shards per client")
            ->capture_default_str();
        cmd.add_option("--dataset-size", config.dataset_size, "synthetic dataset size")
            ->capture_default_str();
        cmd.set_config("--config", "", "flat key=value config file (flags override)");
    }

    fedsim::ExperimentConfig resolve() const {
        fedsim::ExperimentConfig cfg = config;
        cfg.partition = partition == "label-skew" ? fedsim::PartitionMode::label_skew
                                                  : fedsim::PartitionMode::iid;
        cfg.validate();
        return cfg;
    }
};

int emit_run(const fedsim::RunResult& result, const std::string& out_path,
             const std::string& plot_path, const std::string& model_path) {
    write_or_print(out_path, fedsim::round_reports_csv(result.reports));
    if (!plot_path.empty()) write_file(plot_path, fedsim::plot_series_csv(result.reports));
    if (!model_path.empty()) {
        auto bytes = fedsim::encode_params(result.final_model.params, fedsim::Dtype::f64);
        std::ofstream out(model_path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + model_path);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    std::cerr << "rounds completed: " << result.rounds_completed()
              << (result.reached_target ? " (target reached)" : " (target missed)") << "\n";
    return result.reached_target ? kExitOk : kExitTargetMissed;
}

std::string default_bind() {
    const char* env = std::getenv("FEDSIM_BIND");
    return env ? env : "127.0.0.1";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated-averaging simulator and detection-metrics toolkit"};
    app.require_subcommand(1);

    // simulate
    auto* simulate = app.add_subcommand("simulate", "run a deterministic in-process FL experiment");
    CommonFlags sim_flags;
    sim_flags.attach(*simulate);
    std::string sim_out, sim_plot, sim_model;
    simulate->add_option("--out", sim_out, "round report CSV path (default: stdout)");
    simulate->add_option("--plot-data", sim_plot, "write (round, metric) series CSV");
    simulate->add_option("--model-out", sim_model, "write final model parameters (binary)");

    // sweep-e
    auto* sweep = app.add_subcommand("sweep-e", "rounds-to-target for a sweep of E values");
    CommonFlags sweep_flags;
    sweep_flags.attach(*sweep);
    std::vector<std::size_t> e_values{1, 5, 10};
    std::string sweep_out;
    sweep->add_option("--e-values", e_values, "local-epoch values to sweep")
        ->capture_default_str();
    sweep->add_option("--out", sweep_out, "sweep CSV path (default: stdout)");

    // serve
    auto* serve = app.add_subcommand("serve", "run the federated server over TCP");
    CommonFlags serve_flags;
    serve_flags.attach(*serve);
    fedsim::ServerOptions server_opts;
    server_opts.bind_address = default_bind();
    std::string serve_out, serve_plot, serve_model;
    serve->add_option("--bind", server_opts.bind_address, "bind address")->capture_default_str();
    serve->add_option("--port", server_opts.port, "listen port")->capture_default_str();
    serve->add_option("--timeout-secs", server_opts.timeout_secs, "client response timeout")
        ->capture_default_str();
    serve->add_option("--out", serve_out, "round report CSV path (default: stdout)");
    serve->add_option("--plot-data", serve_plot, "write (round, metric) series CSV");
    serve->add_option("--model-out", serve_model, "write final model parameters (binary)");

    // client
    auto* client = app.add_subcommand("client", "join a federated server as one client");
    CommonFlags client_flags;
    client_flags.attach(*client);
    fedsim::ClientOptions client_opts;
    client->add_option("--address", client_opts.address, "server IPv4 address")
        ->capture_default_str();
    client->add_option("--port", client_opts.port, "server port")->capture_default_str();
    client->add_option("--client-id", client_opts.client_id, "this client's id")->required();
    client->add_option("--timeout-secs", client_opts.timeout_secs, "server response timeout")
        ->capture_default_str();

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate YOLO-format detections against ground truth");
    std::string pred_dir, gt_dir, eval_csv;
    double iou_threshold = 0.5, nms_threshold = 0.5;
    bool apply_nms = false;
    eval->add_option("pred_dir", pred_dir, "directory of prediction label files")->required();
    eval->add_option("gt_dir", gt_dir, "directory of ground-truth label files")->required();
    eval->add_option("--iou-threshold", iou_threshold, "match IoU threshold")
        ->capture_default_str();
    eval->add_flag("--nms", apply_nms, "apply per-class NMS before matching");
    eval->add_option("--nms-threshold", nms_threshold, "NMS IoU threshold")
        ->capture_default_str();
    eval->add_option("--csv", eval_csv, "also write the report as CSV");

    // partition-stats
    auto* stats = app.add_subcommand("partition-stats", "per-client class histogram of a partition");
    CommonFlags stats_flags;
    stats_flags.attach(*stats);
    std::string stats_out;
    stats->add_option("--out", stats_out, "histogram CSV path (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try {
        if (simulate->parsed()) {
            return emit_run(fedsim::simulate(sim_flags.resolve()), sim_out, sim_plot, sim_model);
        }
        if (sweep->parsed()) {
            auto rows = fedsim::sweep_local_epochs(sweep_flags.resolve(), e_values);
            write_or_print(sweep_out, fedsim::sweep_csv(rows, fedsim::kModelName));
            bool all_reached = true;
            for (const auto& row : rows) all_reached = all_reached && row.reached_target;
            return all_reached ? kExitOk : kExitTargetMissed;
        }
        if (serve->parsed()) {
            auto result = fedsim::server_session(serve_flags.resolve(), server_opts);
            return emit_run(result, serve_out, serve_plot, serve_model);
        }
        if (client->parsed()) {
            auto result = fedsim::client_session(client_flags.resolve(), client_opts);
            std::cerr << "final round " << result.final_model.round << ", global metric "
                      << result.final_model.metric << "\n";
            return kExitOk;
        }
        if (eval->parsed()) {
            auto report = fedsim::evaluate(pred_dir, gt_dir, iou_threshold, apply_nms,
                                           nms_threshold);
            std::cout << fedsim::report_table(report);
            if (!eval_csv.empty()) write_file(eval_csv, fedsim::report_csv(report));
            return kExitOk;
        }
        if (stats->parsed()) {
            auto cfg = stats_flags.resolve();
            fedsim::Experiment exp = fedsim::build_experiment(cfg);
            auto shards = fedsim::experiment_shards(cfg, exp.train_set);
            auto hist = fedsim::shard_stats(exp.train_set, shards);
            write_or_print(stats_out, fedsim::partition_stats_table(exp.train_set, hist));
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
