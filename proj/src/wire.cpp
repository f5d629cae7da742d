#include "fedsim/wire.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>

#include <zlib.h>

namespace fedsim {

namespace {

constexpr std::uint8_t kMagic[4] = {'F', 'L', 'V', '1'};
constexpr std::size_t kMaxPayload = std::size_t{1} << 31;

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_f64_be(std::vector<std::uint8_t>& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

// Cursor over an input buffer; every read is bounds-checked.
class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> buf) : buf_(buf) {}

    std::uint8_t u8() { return take(1)[0]; }

    std::uint16_t u16() {
        auto b = take(2);
        return static_cast<std::uint16_t>((b[0] << 8) | b[1]);
    }

    std::uint32_t u32() {
        auto b = take(4);
        return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) |
               (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
    }

    std::uint64_t u64() {
        std::uint64_t v = 0;
        auto b = take(8);
        for (int i = 0; i < 8; ++i) v = (v << 8) | b[i];
        return v;
    }

    double f64_be() { return std::bit_cast<double>(u64()); }

    std::span<const std::uint8_t> take(std::size_t n) {
        if (pos_ + n > buf_.size())
            throw WireError(WireErrorKind::truncated, "truncated buffer");
        auto s = buf_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t remaining() const { return buf_.size() - pos_; }

private:
    std::span<const std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

std::uint32_t payload_crc(std::span<const std::uint8_t> payload) {
    return static_cast<std::uint32_t>(
        ::crc32(0L, payload.empty() ? Z_NULL : payload.data(),
                static_cast<uInt>(payload.size())));
}

bool valid_msg_type(std::uint8_t t) { return t >= 1 && t <= 6; }

} // namespace

std::vector<std::uint8_t> encode_params(const ParamVector& p, Dtype dtype) {
    if (!p.layout.empty() || !p.values.empty()) p.validate();
    std::vector<std::uint8_t> out;
    put_u32(out, static_cast<std::uint32_t>(p.layout.size()));
    std::size_t offset = 0;
    for (const auto& tensor : p.layout) {
        if (tensor.name.size() > 0xffff)
            throw WireError(WireErrorKind::oversized, "tensor name too long");
        if (tensor.shape.size() > 0xff)
            throw WireError(WireErrorKind::oversized, "tensor rank too large");
        put_u16(out, static_cast<std::uint16_t>(tensor.name.size()));
        out.insert(out.end(), tensor.name.begin(), tensor.name.end());
        out.push_back(static_cast<std::uint8_t>(dtype));
        out.push_back(static_cast<std::uint8_t>(tensor.shape.size()));
        for (std::size_t d : tensor.shape) put_u32(out, static_cast<std::uint32_t>(d));
        std::size_t count = tensor.element_count();
        for (std::size_t i = 0; i < count; ++i) {
            double v = p.values[offset + i];
            if (dtype == Dtype::f64) {
                std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
                for (int s = 0; s < 64; s += 8)
                    out.push_back(static_cast<std::uint8_t>(bits >> s)); // little-endian
            } else {
                std::uint32_t bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
                for (int s = 0; s < 32; s += 8)
                    out.push_back(static_cast<std::uint8_t>(bits >> s));
            }
        }
        offset += count;
    }
    return out;
}

namespace {

ParamVector decode_params_from(Reader& r) {
    std::uint32_t tensor_count = r.u32();
    ParamVector p;
    for (std::uint32_t t = 0; t < tensor_count; ++t) {
        TensorSpec spec;
        std::uint16_t name_len = r.u16();
        auto name_bytes = r.take(name_len);
        spec.name.assign(name_bytes.begin(), name_bytes.end());
        std::uint8_t dtype_byte = r.u8();
        if (dtype_byte > 1)
            throw WireError(WireErrorKind::unknown_dtype,
                            "unknown dtype " + std::to_string(dtype_byte));
        Dtype dtype = static_cast<Dtype>(dtype_byte);
        std::uint8_t rank = r.u8();
        std::size_t count = 1;
        for (std::uint8_t i = 0; i < rank; ++i) {
            std::uint32_t dim = r.u32();
            if (dim == 0) throw WireError(WireErrorKind::bad_value, "zero tensor dimension");
            if (count > kMaxPayload / dim)
                throw WireError(WireErrorKind::oversized, "tensor size overflow");
            spec.shape.push_back(dim);
            count *= dim;
        }
        if (rank == 0) throw WireError(WireErrorKind::bad_value, "zero tensor rank");
        std::size_t width = dtype == Dtype::f64 ? 8 : 4;
        if (r.remaining() < count * width)
            throw WireError(WireErrorKind::size_mismatch,
                            "value byte count does not match tensor dims");
        auto bytes = r.take(count * width);
        for (std::size_t i = 0; i < count; ++i) {
            if (dtype == Dtype::f64) {
                std::uint64_t bits = 0;
                for (int b = 7; b >= 0; --b) bits = (bits << 8) | bytes[i * 8 + b];
                p.values.push_back(std::bit_cast<double>(bits));
            } else {
                std::uint32_t bits = 0;
                for (int b = 3; b >= 0; --b) bits = (bits << 8) | bytes[i * 4 + b];
                p.values.push_back(static_cast<double>(std::bit_cast<float>(bits)));
            }
        }
        p.layout.push_back(std::move(spec));
    }
    return p;
}

} // namespace

ParamVector decode_params(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    ParamVector p = decode_params_from(r);
    if (r.remaining() != 0)
        throw WireError(WireErrorKind::size_mismatch, "trailing bytes after parameters");
    if (!p.layout.empty()) p.validate();
    return p;
}

std::vector<std::uint8_t> frame(MsgType type, std::span<const std::uint8_t> payload) {
    if (payload.size() > kMaxPayload)
        throw WireError(WireErrorKind::oversized, "payload exceeds 2^31 bytes");
    std::vector<std::uint8_t> out;
    out.reserve(13 + payload.size());
    out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
    out.push_back(static_cast<std::uint8_t>(type));
    put_u32(out, static_cast<std::uint32_t>(payload.size()));
    out.insert(out.end(), payload.begin(), payload.end());
    put_u32(out, payload_crc(payload));
    return out;
}

Frame read_frame(const ReadExact& read) {
    std::uint8_t header[9];
    if (!read(std::span<std::uint8_t>(header, 4), true))
        throw WireError(WireErrorKind::short_read, "connection closed");
    if (std::memcmp(header, kMagic, 4) != 0)
        throw WireError(WireErrorKind::bad_magic, "bad frame magic");
    if (!read(std::span<std::uint8_t>(header + 4, 5), false))
        throw WireError(WireErrorKind::short_read, "short read in frame header");
    std::uint8_t type = header[4];
    if (!valid_msg_type(type))
        throw WireError(WireErrorKind::unknown_msg_type,
                        "unknown message type " + std::to_string(type));
    std::uint32_t len = (std::uint32_t{header[5]} << 24) | (std::uint32_t{header[6]} << 16) |
                        (std::uint32_t{header[7]} << 8) | std::uint32_t{header[8]};
    if (len > kMaxPayload)
        throw WireError(WireErrorKind::oversized, "payload length exceeds 2^31 bytes");
    Frame f;
    f.type = static_cast<MsgType>(type);
    // chunked so a corrupted length field fails on the first short read
    // instead of allocating the claimed size upfront
    constexpr std::uint32_t kChunk = 1 << 16;
    f.payload.reserve(std::min(len, kChunk));
    while (f.payload.size() < len) {
        std::uint32_t n = std::min<std::uint32_t>(kChunk, len - static_cast<std::uint32_t>(f.payload.size()));
        std::size_t old = f.payload.size();
        f.payload.resize(old + n);
        if (!read(std::span<std::uint8_t>(f.payload.data() + old, n), false))
            throw WireError(WireErrorKind::short_read, "short read in frame payload");
    }
    std::uint8_t crc_bytes[4];
    if (!read(std::span<std::uint8_t>(crc_bytes, 4), false))
        throw WireError(WireErrorKind::short_read, "short read in frame trailer");
    std::uint32_t crc = (std::uint32_t{crc_bytes[0]} << 24) | (std::uint32_t{crc_bytes[1]} << 16) |
                        (std::uint32_t{crc_bytes[2]} << 8) | std::uint32_t{crc_bytes[3]};
    if (crc != payload_crc(f.payload))
        throw WireError(WireErrorKind::bad_crc, "payload CRC mismatch");
    return f;
}

Frame parse_frame(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    bool eof = false;
    auto read = [&](std::span<std::uint8_t> buf, bool) {
        if (pos + buf.size() > bytes.size()) {
            eof = true;
            return false;
        }
        std::memcpy(buf.data(), bytes.data() + pos, buf.size());
        pos += buf.size();
        return true;
    };
    Frame f = read_frame(read);
    if (pos != bytes.size())
        throw WireError(WireErrorKind::size_mismatch, "trailing bytes after frame");
    return f;
}

std::vector<std::uint8_t> encode_join_request(std::uint64_t client_id) {
    std::vector<std::uint8_t> out;
    put_u64(out, client_id);
    return out;
}

std::uint64_t decode_join_request(std::span<const std::uint8_t> payload) {
    Reader r(payload);
    std::uint64_t id = r.u64();
    if (r.remaining() != 0)
        throw WireError(WireErrorKind::size_mismatch, "trailing bytes in join request");
    return id;
}

std::vector<std::uint8_t> encode_join_accept(std::uint64_t expected_clients) {
    std::vector<std::uint8_t> out;
    put_u64(out, expected_clients);
    return out;
}

std::uint64_t decode_join_accept(std::span<const std::uint8_t> payload) {
    Reader r(payload);
    std::uint64_t n = r.u64();
    if (r.remaining() != 0)
        throw WireError(WireErrorKind::size_mismatch, "trailing bytes in join accept");
    return n;
}

std::vector<std::uint8_t> encode_global_model(const GlobalModelPayload& msg, Dtype dtype) {
    std::vector<std::uint8_t> out;
    put_u64(out, msg.round);
    put_f64_be(out, msg.metric);
    auto params = encode_params(msg.params, dtype);
    out.insert(out.end(), params.begin(), params.end());
    return out;
}

GlobalModelPayload decode_global_model(std::span<const std::uint8_t> payload) {
    Reader r(payload);
    GlobalModelPayload msg;
    msg.round = r.u64();
    msg.metric = r.f64_be();
    msg.params = decode_params_from(r);
    if (r.remaining() != 0)
        throw WireError(WireErrorKind::size_mismatch, "trailing bytes in global model");
    if (!msg.params.layout.empty()) msg.params.validate();
    return msg;
}

std::vector<std::uint8_t> encode_local_update(const LocalUpdatePayload& msg, Dtype dtype) {
    std::vector<std::uint8_t> out;
    put_u64(out, msg.round);
    put_u64(out, msg.client_id);
    put_u64(out, msg.sample_count);
    put_f64_be(out, msg.metric);
    auto params = encode_params(msg.params, dtype);
    out.insert(out.end(), params.begin(), params.end());
    return out;
}

LocalUpdatePayload decode_local_update(std::span<const std::uint8_t> payload) {
    Reader r(payload);
    LocalUpdatePayload msg;
    msg.round = r.u64();
    msg.client_id = r.u64();
    msg.sample_count = r.u64();
    msg.metric = r.f64_be();
    msg.params = decode_params_from(r);
    if (r.remaining() != 0)
        throw WireError(WireErrorKind::size_mismatch, "trailing bytes in local update");
    if (!msg.params.layout.empty()) msg.params.validate();
    return msg;
}

std::vector<std::uint8_t> encode_abort(const std::string& reason) {
    return std::vector<std::uint8_t>(reason.begin(), reason.end());
}

std::string decode_abort(std::span<const std::uint8_t> payload) {
    return std::string(payload.begin(), payload.end());
}

} // namespace fedsim
