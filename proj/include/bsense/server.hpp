#ifndef BSENSE_SERVER_HPP
#define BSENSE_SERVER_HPP

// TCP ingest server and the matching replay client used for desk-scale
// testing. One handler thread per connection; the session lifecycle is driven
// by CONTROL frames (start/stop), sample timestamps are aligned onto the
// server clock with the heartbeat offset estimate before persistence.

#include <cstdint>
#include <memory>
#include <string>

#include "bsense/net.hpp"
#include "bsense/session.hpp"
#include "bsense/store.hpp"

namespace bsense::net {

struct ServerStats {
    std::uint64_t connections = 0;
    std::uint64_t sessions_completed = 0;
    std::uint64_t sessions_incomplete = 0;
    std::uint64_t protocol_errors = 0;
    std::uint64_t heartbeats_accepted = 0;
    std::uint64_t heartbeats_discarded = 0;
};

class StreamServer {
public:
    // Does not start listening until start() is called. Port 0 asks the OS
    // for a free port; the bound port is available from port() after start().
    StreamServer(SessionStore& store, std::string host = "127.0.0.1",
                 std::uint16_t port = 0);
    ~StreamServer();
    StreamServer(const StreamServer&) = delete;
    StreamServer& operator=(const StreamServer&) = delete;

    void start(); // throws ConfigError when the address cannot be bound
    void stop();  // closes the listener and all live connections, joins threads

    bool running() const;
    std::uint16_t port() const;
    ServerStats stats() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct ReplayOptions {
    double speed = 1.0;            // stream-time to wall-time ratio, > 0
    std::size_t imu_batch = 10;    // IMU samples per frame (100 ms at 100 Hz)
    std::size_t audio_chunk = kAudioChunkSamples;
    double heartbeat_period_s = 1.0; // wall-clock period; 0 disables sync
};

struct ReplayResult {
    std::size_t frames_sent = 0;
    bool stop_acked = false;
};

// Streams a recording to a server, pacing frames so inter-sample intervals
// are preserved at `speed` x real time. Throws std::invalid_argument when
// speed <= 0 and ConfigError when the server cannot be reached.
ReplayResult replay_session(const SessionRecording& recording, const std::string& host,
                            std::uint16_t port, const ReplayOptions& options = {});

} // namespace bsense::net

#endif
