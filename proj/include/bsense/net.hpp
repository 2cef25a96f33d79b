#ifndef BSENSE_NET_HPP
#define BSENSE_NET_HPP

// Wire protocol for sensor streaming: length-prefixed little-endian frames
// carrying IMU batches, audio PCM chunks, JSON control messages, and
// NTP-style heartbeat exchanges for clock alignment.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bsense::net {

// ---------------------------------------------------------------------------
// Frame envelope
// ---------------------------------------------------------------------------

inline constexpr std::array<std::uint8_t, 4> kMagic = {'B', 'S', 'N', '1'};
inline constexpr std::uint8_t kProtocolVersion = 1;

// magic(4) + version(1) + kind(1) + device_ts_ns(8) + payload_len(4)
inline constexpr std::size_t kFrameHeaderSize = 18;

// Sanity cap on a single frame's payload; anything larger is malformed.
inline constexpr std::uint32_t kMaxPayloadLen = 16u * 1024u * 1024u;

enum class StreamKind : std::uint8_t {
    IMU = 0,
    AUDIO = 1,
    CONTROL = 2,
    HEARTBEAT = 3,
};

struct Frame {
    StreamKind kind = StreamKind::CONTROL;
    std::uint64_t device_ts_ns = 0; // sender's clock when the frame was built
    std::vector<std::uint8_t> payload;
};

// Serializes header + payload. Throws std::invalid_argument if the payload
// exceeds kMaxPayloadLen.
std::vector<std::uint8_t> encode_frame(const Frame& frame);

// Parses one frame from the front of `data`. Returns std::nullopt when the
// buffer holds an incomplete frame (caller should read more bytes). Throws
// ParseError on bad magic, unknown version or kind, or oversized payload.
// On success, `consumed` is set to the number of bytes used.
std::optional<Frame> decode_frame(const std::uint8_t* data, std::size_t size,
                                  std::size_t& consumed);

// ---------------------------------------------------------------------------
// Payload codecs
// ---------------------------------------------------------------------------

// IMU payload: N x (u64 t_ns + 6 x f32), 32 bytes per sample.
struct ImuSample {
    std::uint64_t t_ns = 0;
    std::array<float, 6> values{}; // ax ay az gx gy gz
};

std::vector<std::uint8_t> encode_imu_payload(const std::vector<ImuSample>& samples);
std::vector<ImuSample> decode_imu_payload(const std::vector<std::uint8_t>& payload);

// Audio payload: u64 t_ns of the first sample + 16-bit signed PCM block.
struct AudioChunk {
    std::uint64_t t_ns = 0;
    std::vector<std::int16_t> pcm;
};

// Default chunk size: 10 ms at 16 kHz.
inline constexpr std::size_t kAudioChunkSamples = 160;

std::vector<std::uint8_t> encode_audio_payload(const AudioChunk& chunk);
AudioChunk decode_audio_payload(const std::vector<std::uint8_t>& payload);

// Control payload: UTF-8 JSON object {"type": "start"|"stop"|"stop_ack"|"error", ...}.
struct ControlMessage {
    std::string type;
    std::string session_id;              // start
    std::string device_id;               // start
    std::uint64_t wall_clock_start_ns = 0; // start (optional, 0 = unset)
    std::string message;                 // error
};

std::vector<std::uint8_t> encode_control_payload(const ControlMessage& msg);
ControlMessage decode_control_payload(const std::vector<std::uint8_t>& payload);

// Heartbeat payload: op(u8) + four u64 timestamps (unused ones zero).
//   REQUEST: client -> server, carries t1 (client send time).
//   REPLY:   server -> client, carries t1, t2 (server recv), t3 (server send).
//   REPORT:  client -> server, carries the completed exchange t1..t4 so the
//            server can refresh its per-client offset estimate.
enum class HeartbeatOp : std::uint8_t {
    Request = 0,
    Reply = 1,
    Report = 2,
};

struct HeartbeatPayload {
    HeartbeatOp op = HeartbeatOp::Request;
    std::uint64_t t1 = 0;
    std::uint64_t t2 = 0;
    std::uint64_t t3 = 0;
    std::uint64_t t4 = 0;
};

std::vector<std::uint8_t> encode_heartbeat_payload(const HeartbeatPayload& hb);
HeartbeatPayload decode_heartbeat_payload(const std::vector<std::uint8_t>& payload);

// ---------------------------------------------------------------------------
// Clock synchronization
// ---------------------------------------------------------------------------

struct ClockOffset {
    std::int64_t offset_ns = 0; // add to client timestamps to get server time
    std::uint64_t rtt_ns = 0;
    std::uint64_t sampled_at_ns = 0; // t4 of the exchange
};

// One NTP-style exchange: t1 client send, t2 server receive, t3 server send,
// t4 client receive.  offset = ((t2 - t1) + (t3 - t4)) / 2,
// rtt = (t4 - t1) - (t3 - t2).  Returns std::nullopt (exchange discarded)
// when the same-clock spans run backwards (t4 < t1 or t3 < t2) or the
// implied rtt is negative.
std::optional<ClockOffset> estimate_offset(std::uint64_t t1, std::uint64_t t2,
                                           std::uint64_t t3, std::uint64_t t4);

// Exponentially smoothed per-client offset, refreshed on every accepted
// heartbeat exchange.
class OffsetTracker {
public:
    explicit OffsetTracker(double alpha = 0.2) : alpha_(alpha) {}

    void update(const ClockOffset& sample);
    bool has_estimate() const { return has_; }
    // Current smoothed offset in nanoseconds; 0 until the first update.
    std::int64_t offset_ns() const;
    std::uint64_t last_rtt_ns() const { return last_rtt_; }

private:
    double alpha_;
    bool has_ = false;
    double smoothed_ = 0.0;
    std::uint64_t last_rtt_ = 0;
};

} // namespace bsense::net

#endif
