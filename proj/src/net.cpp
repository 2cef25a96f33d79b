#include "bsense/net.hpp"

#include <cmath>
#include <cstring>

#include "json.hpp"

#include "bsense/errors.hpp"

namespace bsense::net {

namespace {

void put_u8(std::vector<std::uint8_t>& out, std::uint8_t v) { out.push_back(v); }

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    put_u32(out, bits);
}

std::uint32_t get_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint64_t get_u64(const std::uint8_t* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

float get_f32(const std::uint8_t* p) {
    const std::uint32_t bits = get_u32(p);
    float v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

} // namespace

std::vector<std::uint8_t> encode_frame(const Frame& frame) {
    if (frame.payload.size() > kMaxPayloadLen)
        throw std::invalid_argument("frame payload exceeds the size cap");
    std::vector<std::uint8_t> out;
    out.reserve(kFrameHeaderSize + frame.payload.size());
    out.insert(out.end(), kMagic.begin(), kMagic.end());
    put_u8(out, kProtocolVersion);
    put_u8(out, static_cast<std::uint8_t>(frame.kind));
    put_u64(out, frame.device_ts_ns);
    put_u32(out, static_cast<std::uint32_t>(frame.payload.size()));
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

std::optional<Frame> decode_frame(const std::uint8_t* data, std::size_t size,
                                  std::size_t& consumed) {
    consumed = 0;
    if (size < kFrameHeaderSize) return std::nullopt;
    if (std::memcmp(data, kMagic.data(), kMagic.size()) != 0)
        throw ParseError("frame: bad magic bytes");
    if (data[4] != kProtocolVersion)
        throw ParseError("frame: unsupported protocol version " + std::to_string(data[4]));
    const std::uint8_t kind = data[5];
    if (kind > static_cast<std::uint8_t>(StreamKind::HEARTBEAT))
        throw ParseError("frame: unknown stream kind " + std::to_string(kind));
    const std::uint64_t ts = get_u64(data + 6);
    const std::uint32_t len = get_u32(data + 14);
    if (len > kMaxPayloadLen) throw ParseError("frame: payload length exceeds the cap");
    if (size < kFrameHeaderSize + len) return std::nullopt;

    Frame frame;
    frame.kind = static_cast<StreamKind>(kind);
    frame.device_ts_ns = ts;
    frame.payload.assign(data + kFrameHeaderSize, data + kFrameHeaderSize + len);
    consumed = kFrameHeaderSize + len;
    return frame;
}

std::vector<std::uint8_t> encode_imu_payload(const std::vector<ImuSample>& samples) {
    std::vector<std::uint8_t> out;
    out.reserve(samples.size() * 32);
    for (const ImuSample& s : samples) {
        put_u64(out, s.t_ns);
        for (float v : s.values) put_f32(out, v);
    }
    return out;
}

std::vector<ImuSample> decode_imu_payload(const std::vector<std::uint8_t>& payload) {
    if (payload.size() % 32 != 0)
        throw ParseError("imu payload: length is not a multiple of the record size");
    std::vector<ImuSample> samples(payload.size() / 32);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const std::uint8_t* p = payload.data() + i * 32;
        samples[i].t_ns = get_u64(p);
        for (int a = 0; a < 6; ++a) samples[i].values[a] = get_f32(p + 8 + 4 * a);
    }
    return samples;
}

std::vector<std::uint8_t> encode_audio_payload(const AudioChunk& chunk) {
    std::vector<std::uint8_t> out;
    out.reserve(8 + chunk.pcm.size() * 2);
    put_u64(out, chunk.t_ns);
    for (std::int16_t s : chunk.pcm) {
        const auto u = static_cast<std::uint16_t>(s);
        out.push_back(static_cast<std::uint8_t>(u));
        out.push_back(static_cast<std::uint8_t>(u >> 8));
    }
    return out;
}

AudioChunk decode_audio_payload(const std::vector<std::uint8_t>& payload) {
    if (payload.size() < 8 || (payload.size() - 8) % 2 != 0)
        throw ParseError("audio payload: bad length");
    AudioChunk chunk;
    chunk.t_ns = get_u64(payload.data());
    chunk.pcm.resize((payload.size() - 8) / 2);
    for (std::size_t i = 0; i < chunk.pcm.size(); ++i) {
        const std::uint16_t u = static_cast<std::uint16_t>(payload[8 + 2 * i]) |
                                (static_cast<std::uint16_t>(payload[9 + 2 * i]) << 8);
        chunk.pcm[i] = static_cast<std::int16_t>(u);
    }
    return chunk;
}

std::vector<std::uint8_t> encode_control_payload(const ControlMessage& msg) {
    nlohmann::ordered_json j;
    j["type"] = msg.type;
    if (!msg.session_id.empty()) j["session_id"] = msg.session_id;
    if (!msg.device_id.empty()) j["device_id"] = msg.device_id;
    if (msg.wall_clock_start_ns != 0) j["wall_clock_start_ns"] = msg.wall_clock_start_ns;
    if (!msg.message.empty()) j["message"] = msg.message;
    const std::string text = j.dump();
    return {text.begin(), text.end()};
}

ControlMessage decode_control_payload(const std::vector<std::uint8_t>& payload) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(payload.begin(), payload.end());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("control payload: invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
        throw ParseError("control payload: missing \"type\"");
    ControlMessage msg;
    msg.type = j["type"].get<std::string>();
    msg.session_id = j.value("session_id", std::string());
    msg.device_id = j.value("device_id", std::string());
    msg.wall_clock_start_ns = j.value("wall_clock_start_ns", std::uint64_t{0});
    msg.message = j.value("message", std::string());
    return msg;
}

std::vector<std::uint8_t> encode_heartbeat_payload(const HeartbeatPayload& hb) {
    std::vector<std::uint8_t> out;
    out.reserve(1 + 4 * 8);
    put_u8(out, static_cast<std::uint8_t>(hb.op));
    put_u64(out, hb.t1);
    put_u64(out, hb.t2);
    put_u64(out, hb.t3);
    put_u64(out, hb.t4);
    return out;
}

HeartbeatPayload decode_heartbeat_payload(const std::vector<std::uint8_t>& payload) {
    if (payload.size() != 33) throw ParseError("heartbeat payload: bad length");
    if (payload[0] > static_cast<std::uint8_t>(HeartbeatOp::Report))
        throw ParseError("heartbeat payload: unknown op");
    HeartbeatPayload hb;
    hb.op = static_cast<HeartbeatOp>(payload[0]);
    hb.t1 = get_u64(payload.data() + 1);
    hb.t2 = get_u64(payload.data() + 9);
    hb.t3 = get_u64(payload.data() + 17);
    hb.t4 = get_u64(payload.data() + 25);
    return hb;
}

std::optional<ClockOffset> estimate_offset(std::uint64_t t1, std::uint64_t t2,
                                           std::uint64_t t3, std::uint64_t t4) {
    // t1/t4 share the client clock and t2/t3 the server clock; each span must
    // move forward, and the client span must cover the server processing time.
    if (t4 < t1 || t3 < t2) return std::nullopt;
    const std::int64_t client_span = static_cast<std::int64_t>(t4 - t1);
    const std::int64_t server_span = static_cast<std::int64_t>(t3 - t2);
    if (client_span < server_span) return std::nullopt;

    ClockOffset sample;
    sample.offset_ns = (static_cast<std::int64_t>(t2) - static_cast<std::int64_t>(t1) +
                        static_cast<std::int64_t>(t3) - static_cast<std::int64_t>(t4)) /
                       2;
    sample.rtt_ns = static_cast<std::uint64_t>(client_span - server_span);
    sample.sampled_at_ns = t4;
    return sample;
}

void OffsetTracker::update(const ClockOffset& sample) {
    if (!has_) {
        smoothed_ = static_cast<double>(sample.offset_ns);
        has_ = true;
    } else {
        smoothed_ += alpha_ * (static_cast<double>(sample.offset_ns) - smoothed_);
    }
    last_rtt_ = sample.rtt_ns;
}

std::int64_t OffsetTracker::offset_ns() const {
    return has_ ? std::llround(smoothed_) : 0;
}

} // namespace bsense::net
