#include "fedsim/net.hpp"

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <map>
#include <stdexcept>
#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

namespace fedsim {

namespace {

[[noreturn]] void throw_errno(const std::string& what) {
    throw std::runtime_error(what + ": " + std::strerror(errno));
}

// RAII socket with frame-level send/receive.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept {
        if (this != &other) {
            close_fd();
            fd_ = other.fd_;
            other.fd_ = -1;
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close_fd(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }

    void set_recv_timeout(int secs) {
        timeval tv{};
        tv.tv_sec = secs;
        if (::setsockopt(fd_, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv)) != 0)
            throw_errno("setsockopt(SO_RCVTIMEO)");
    }

    void send_frame(MsgType type, std::span<const std::uint8_t> payload) {
        auto bytes = frame(type, payload);
        std::size_t sent = 0;
        while (sent < bytes.size()) {
            ssize_t n = ::send(fd_, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw_errno("send");
            }
            sent += static_cast<std::size_t>(n);
        }
    }

    Frame recv_frame() {
        auto read = [this](std::span<std::uint8_t> buf, bool) {
            std::size_t got = 0;
            while (got < buf.size()) {
                ssize_t n = ::recv(fd_, buf.data() + got, buf.size() - got, 0);
                if (n == 0) {
                    if (got == 0) return false;
                    throw WireError(WireErrorKind::short_read, "peer closed mid-frame");
                }
                if (n < 0) {
                    if (errno == EINTR) continue;
                    if (errno == EAGAIN || errno == EWOULDBLOCK)
                        throw WireError(WireErrorKind::short_read, "receive timeout");
                    throw_errno("recv");
                }
                got += static_cast<std::size_t>(n);
            }
            return true;
        };
        return read_frame(read);
    }

private:
    void close_fd() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    int fd_ = -1;
};

sockaddr_in make_addr(const std::string& address, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, address.c_str(), &addr.sin_addr) != 1)
        throw std::runtime_error("invalid IPv4 address: " + address);
    return addr;
}

} // namespace

RunResult server_session(const ExperimentConfig& cfg, const ServerOptions& opts) {
    Experiment exp = build_experiment(cfg);

    Socket listener(::socket(AF_INET, SOCK_STREAM, 0));
    if (!listener.valid()) throw_errno("socket");
    int one = 1;
    ::setsockopt(listener.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = make_addr(opts.bind_address, opts.port);
    if (::bind(listener.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw_errno("bind " + opts.bind_address + ":" + std::to_string(opts.port));
    if (::listen(listener.fd(), static_cast<int>(cfg.clients)) != 0) throw_errno("listen");
    listener.set_recv_timeout(opts.timeout_secs);

    // Join phase: wait for exactly cfg.clients distinct client ids. A
    // duplicate id gets an Abort frame and its connection is dropped.
    std::map<std::uint64_t, Socket> sessions;
    while (sessions.size() < cfg.clients) {
        timeval tv{};
        tv.tv_sec = opts.timeout_secs;
        fd_set fds;
        FD_ZERO(&fds);
        FD_SET(listener.fd(), &fds);
        int ready = ::select(listener.fd() + 1, &fds, nullptr, nullptr, &tv);
        if (ready == 0) throw std::runtime_error("timed out waiting for clients to join");
        if (ready < 0) throw_errno("select");
        Socket conn(::accept(listener.fd(), nullptr, nullptr));
        if (!conn.valid()) throw_errno("accept");
        conn.set_recv_timeout(opts.timeout_secs);
        Frame join = conn.recv_frame();
        if (join.type != MsgType::join_request) {
            conn.send_frame(MsgType::abort, encode_abort("expected JoinRequest"));
            continue;
        }
        std::uint64_t client_id = decode_join_request(join.payload);
        if (sessions.contains(client_id)) {
            conn.send_frame(MsgType::abort,
                            encode_abort("duplicate client_id " + std::to_string(client_id)));
            continue;
        }
        conn.send_frame(MsgType::join_accept, encode_join_accept(cfg.clients));
        sessions.emplace(client_id, std::move(conn));
    }

    auto abort_all = [&](const std::string& reason) {
        auto payload = encode_abort(reason);
        for (auto& [id, sock] : sessions) {
            try {
                sock.send_frame(MsgType::abort, payload);
            } catch (...) {
            }
        }
    };

    RunResult result;
    try {
        result.final_model =
            GlobalModel{0, exp.initial, evaluate_accuracy(exp.initial, exp.eval_set)};

        RoundReport initial_report;
        initial_report.round = 0;
        initial_report.global_metric = result.final_model.metric;
        for (const auto& client : exp.clients)
            initial_report.per_client_metrics.emplace_back(
                client.client_id, evaluate_accuracy(exp.initial, client.data));
        std::sort(initial_report.per_client_metrics.begin(),
                  initial_report.per_client_metrics.end());
        initial_report.reached_target = initial_report.global_metric >= cfg.target_metric;
        result.reports.push_back(initial_report);
        result.reached_target = initial_report.reached_target;

        while (!result.reached_target && result.final_model.round < cfg.max_rounds) {
            GlobalModelPayload broadcast{result.final_model.round, result.final_model.metric,
                                         result.final_model.params};
            auto payload = encode_global_model(broadcast, opts.dtype);
            for (auto& [id, sock] : sessions) sock.send_frame(MsgType::global_model, payload);

            // Barrier: collect one update per client; arrival order does not
            // matter, aggregation sorts by client_id.
            std::vector<ClientUpdate> updates(sessions.size());
            std::vector<std::string> errors(sessions.size());
            std::vector<std::thread> readers;
            std::size_t slot = 0;
            for (auto& [id, sock] : sessions) {
                readers.emplace_back([&, slot, expected_id = id, s = &sock]() {
                    try {
                        Frame f = s->recv_frame();
                        if (f.type == MsgType::abort)
                            throw std::runtime_error("client abort: " + decode_abort(f.payload));
                        if (f.type != MsgType::local_update)
                            throw std::runtime_error("unexpected frame type");
                        LocalUpdatePayload update = decode_local_update(f.payload);
                        if (update.round != broadcast.round)
                            throw std::runtime_error(
                                "stale round " + std::to_string(update.round) + " from client " +
                                std::to_string(update.client_id));
                        if (update.client_id != expected_id)
                            throw std::runtime_error("client_id mismatch on session");
                        updates[slot] = ClientUpdate{update.client_id, update.sample_count,
                                                     std::move(update.params), update.metric};
                    } catch (const std::exception& e) {
                        errors[slot] = e.what();
                    }
                });
                ++slot;
            }
            for (auto& t : readers) t.join();
            for (const auto& e : errors)
                if (!e.empty()) throw std::runtime_error(e);

            GlobalModel next;
            next.round = result.final_model.round + 1;
            next.params = aggregate(updates);
            next.metric = evaluate_accuracy(next.params, exp.eval_set);

            RoundReport report;
            report.round = next.round;
            report.global_metric = next.metric;
            for (const auto& u : updates)
                report.per_client_metrics.emplace_back(u.client_id, u.local_metric);
            std::sort(report.per_client_metrics.begin(), report.per_client_metrics.end());
            report.reached_target = next.metric >= cfg.target_metric;

            result.final_model = std::move(next);
            result.reports.push_back(std::move(report));
            result.reached_target = result.reports.back().reached_target;
        }

        GlobalModelPayload final_msg{result.final_model.round, result.final_model.metric,
                                     result.final_model.params};
        auto final_payload = encode_global_model(final_msg, opts.dtype);
        for (auto& [id, sock] : sessions) sock.send_frame(MsgType::target_reached, final_payload);
    } catch (const std::exception& e) {
        abort_all(e.what());
        throw;
    }
    return result;
}

ClientResult client_session(const ExperimentConfig& cfg, const ClientOptions& opts) {
    if (opts.client_id >= cfg.clients)
        throw std::invalid_argument("client_id must be < configured client count");
    Experiment exp = build_experiment(cfg);
    const ClientState* self = nullptr;
    for (const auto& client : exp.clients)
        if (client.client_id == opts.client_id) self = &client;
    if (!self) throw std::logic_error("client shard not found");

    Socket sock(::socket(AF_INET, SOCK_STREAM, 0));
    if (!sock.valid()) throw_errno("socket");
    sockaddr_in addr = make_addr(opts.address, opts.port);
    if (::connect(sock.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0)
        throw_errno("connect " + opts.address + ":" + std::to_string(opts.port));
    sock.set_recv_timeout(opts.timeout_secs);

    sock.send_frame(MsgType::join_request, encode_join_request(opts.client_id));
    Frame accept = sock.recv_frame();
    if (accept.type == MsgType::abort)
        throw std::runtime_error("server abort: " + decode_abort(accept.payload));
    if (accept.type != MsgType::join_accept)
        throw std::runtime_error("expected JoinAccept from server");

    while (true) {
        Frame f = sock.recv_frame();
        switch (f.type) {
        case MsgType::global_model: {
            GlobalModelPayload global = decode_global_model(f.payload);
            std::uint64_t epoch_offset = global.round * self->config.local_epochs;
            TrainResult trained;
            try {
                trained = local_train(global.params, self->data, self->config, epoch_offset);
            } catch (const std::exception& e) {
                sock.send_frame(MsgType::abort,
                                encode_abort("client " + std::to_string(opts.client_id) +
                                             " aborted the round: " + e.what()));
                throw;
            }
            LocalUpdatePayload update;
            update.round = global.round;
            update.client_id = opts.client_id;
            update.sample_count = self->data.size();
            update.metric = evaluate_accuracy(trained.params, self->data);
            update.params = std::move(trained.params);
            sock.send_frame(MsgType::local_update, encode_local_update(update, Dtype::f64));
            break;
        }
        case MsgType::target_reached: {
            GlobalModelPayload final_msg = decode_global_model(f.payload);
            return ClientResult{GlobalModel{final_msg.round, std::move(final_msg.params),
                                            final_msg.metric},
                                true};
        }
        case MsgType::abort:
            throw std::runtime_error("server abort: " + decode_abort(f.payload));
        default:
            throw std::runtime_error("unexpected frame type from server");
        }
    }
}

} // namespace fedsim
