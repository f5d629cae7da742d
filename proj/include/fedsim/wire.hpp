#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fedsim/model.hpp"

namespace fedsim {

enum class MsgType : std::uint8_t {
    join_request = 1,
    join_accept = 2,
    global_model = 3,
    local_update = 4,
    target_reached = 5,
    abort = 6,
};

enum class WireErrorKind {
    bad_magic,
    bad_crc,
    unknown_msg_type,
    short_read,
    unknown_dtype,
    truncated,
    size_mismatch,
    oversized,
    bad_value,
};

class WireError : public std::runtime_error {
public:
    WireError(WireErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    WireErrorKind kind() const { return kind_; }

private:
    WireErrorKind kind_;
};

enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

// Parameter serialization: tensor count (u32), then per tensor name length
// (u16) + UTF-8 name + dtype byte + rank byte + dims (u32 each) + raw values.
// Integers are big-endian; value bytes are little-endian IEEE-754 row-major.
// f32 encoding rounds to nearest-even; f64 round-trips exactly.
std::vector<std::uint8_t> encode_params(const ParamVector& p, Dtype dtype = Dtype::f64);
ParamVector decode_params(std::span<const std::uint8_t> bytes);

// Frame layout: magic "FLV1", msg type byte, payload length (u32 BE),
// payload, CRC-32 (IEEE) of the payload (u32 BE).
std::vector<std::uint8_t> frame(MsgType type, std::span<const std::uint8_t> payload);

struct Frame {
    MsgType type;
    std::vector<std::uint8_t> payload;
};

// Reads exactly buf.size() bytes; returns false on clean EOF at a frame
// boundary, throws WireError(short_read) on timeout or mid-frame EOF.
using ReadExact = std::function<bool(std::span<std::uint8_t> buf, bool at_frame_start)>;

Frame read_frame(const ReadExact& read);

// Frame parsing from a memory buffer (must consume the whole buffer).
Frame parse_frame(std::span<const std::uint8_t> bytes);

// Payload helpers for the session messages. Metadata integers are big-endian;
// metrics travel as big-endian IEEE-754 bit patterns.
struct GlobalModelPayload {
    std::uint64_t round = 0;
    double metric = 0.0;
    ParamVector params;
};

struct LocalUpdatePayload {
    std::uint64_t round = 0;
    std::uint64_t client_id = 0;
    std::uint64_t sample_count = 0;
    double metric = 0.0;
    ParamVector params;
};

std::vector<std::uint8_t> encode_join_request(std::uint64_t client_id);
std::uint64_t decode_join_request(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_join_accept(std::uint64_t expected_clients);
std::uint64_t decode_join_accept(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_global_model(const GlobalModelPayload& msg, Dtype dtype);
GlobalModelPayload decode_global_model(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_local_update(const LocalUpdatePayload& msg, Dtype dtype);
LocalUpdatePayload decode_local_update(std::span<const std::uint8_t> payload);

std::vector<std::uint8_t> encode_abort(const std::string& reason);
std::string decode_abort(std::span<const std::uint8_t> payload);

} // namespace fedsim
