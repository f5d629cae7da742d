#pragma once

#include <cstdint>
#include <string>

#include "fedsim/harness.hpp"
#include "fedsim/wire.hpp"

namespace fedsim {

inline constexpr std::uint16_t kDefaultPort = 7070;

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    std::uint16_t port = kDefaultPort;
    int timeout_secs = 30;
    Dtype dtype = Dtype::f64;
};

struct ClientOptions {
    std::string address = "127.0.0.1";
    std::uint16_t port = kDefaultPort;
    std::uint64_t client_id = 0;
    int timeout_secs = 30;
};

// Runs the full synchronous round loop: waits for exactly cfg.clients joins,
// then broadcasts the global model, collects one update per client behind a
// barrier, aggregates, and repeats until the target metric or the round
// budget is hit. The final model is broadcast in a TargetReached frame.
RunResult server_session(const ExperimentConfig& cfg, const ServerOptions& opts);

struct ClientResult {
    GlobalModel final_model;
    bool target_reached = false;
};

// Joins the server, trains on the shard owned by opts.client_id (derived
// deterministically from cfg), and participates until the run ends.
ClientResult client_session(const ExperimentConfig& cfg, const ClientOptions& opts);

} // namespace fedsim
