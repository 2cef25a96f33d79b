#include "bsense/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <iostream>
#include <mutex>
#include <thread>
#include <vector>

#include "bsense/errors.hpp"

namespace bsense::net {

namespace {

std::uint64_t wall_now_ns() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(
            std::chrono::system_clock::now().time_since_epoch())
            .count());
}

// Writes the whole buffer; returns false when the peer is gone.
bool send_all(int fd, const std::uint8_t* data, std::size_t size) {
    std::size_t sent = 0;
    while (sent < size) {
        const ssize_t n = ::send(fd, data + sent, size - sent, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) continue;
            return false;
        }
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

bool send_frame(int fd, const Frame& frame) {
    const std::vector<std::uint8_t> bytes = encode_frame(frame);
    return send_all(fd, bytes.data(), bytes.size());
}

Frame make_frame(StreamKind kind, std::vector<std::uint8_t> payload) {
    Frame f;
    f.kind = kind;
    f.device_ts_ns = wall_now_ns();
    f.payload = std::move(payload);
    return f;
}

// Incremental frame reader over a blocking socket.
class FrameReader {
public:
    explicit FrameReader(int fd) : fd_(fd) {}

    // Returns the next frame, or std::nullopt on orderly shutdown / closed
    // socket. Throws ParseError on malformed bytes.
    std::optional<Frame> next() {
        for (;;) {
            std::size_t consumed = 0;
            if (auto frame = decode_frame(buf_.data() + pos_, buf_.size() - pos_, consumed)) {
                pos_ += consumed;
                if (pos_ > 1 << 20) { // compact occasionally
                    buf_.erase(buf_.begin(), buf_.begin() + static_cast<long>(pos_));
                    pos_ = 0;
                }
                return frame;
            }
            std::uint8_t chunk[65536];
            const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
            if (n == 0) return std::nullopt;
            if (n < 0) {
                if (errno == EINTR) continue;
                return std::nullopt;
            }
            buf_.insert(buf_.end(), chunk, chunk + n);
        }
    }

private:
    int fd_;
    std::vector<std::uint8_t> buf_;
    std::size_t pos_ = 0;
};

} // namespace

// ---------------------------------------------------------------------------
// StreamServer
// ---------------------------------------------------------------------------

struct StreamServer::Impl {
    SessionStore& store;
    std::string host;
    std::uint16_t requested_port;

    int listen_fd = -1;
    std::uint16_t bound_port = 0;
    std::atomic<bool> running{false};
    std::thread accept_thread;

    std::mutex mu; // guards conn_fds, threads, stats
    std::vector<int> conn_fds;
    std::vector<std::thread> threads;
    ServerStats stats;

    explicit Impl(SessionStore& s, std::string h, std::uint16_t p)
        : store(s), host(std::move(h)), requested_port(p) {}

    void bump(std::uint64_t ServerStats::* field) {
        std::lock_guard<std::mutex> lock(mu);
        ++(stats.*field);
    }

    void handle_connection(int fd);
    void accept_loop();
};

void StreamServer::Impl::handle_connection(int fd) {
    FrameReader reader(fd);
    OffsetTracker tracker; // per-client smoothed clock offset, alpha = 0.2
    std::unique_ptr<SessionWriter> writer;

    auto close_incomplete = [&] {
        if (writer) {
            writer->finalize(false);
            writer.reset();
            bump(&ServerStats::sessions_incomplete);
        }
    };

    try {
        for (;;) {
            std::optional<Frame> frame;
            try {
                frame = reader.next();
            } catch (const ParseError& e) {
                std::cerr << "[serve] protocol error: " << e.what() << "\n";
                bump(&ServerStats::protocol_errors);
                close_incomplete();
                break;
            }
            if (!frame) { // peer closed (or server shutdown)
                close_incomplete();
                break;
            }

            switch (frame->kind) {
            case StreamKind::HEARTBEAT: {
                const HeartbeatPayload hb = decode_heartbeat_payload(frame->payload);
                if (hb.op == HeartbeatOp::Request) {
                    HeartbeatPayload reply;
                    reply.op = HeartbeatOp::Reply;
                    reply.t1 = hb.t1;
                    reply.t2 = wall_now_ns();
                    reply.t3 = wall_now_ns();
                    send_frame(fd, make_frame(StreamKind::HEARTBEAT,
                                              encode_heartbeat_payload(reply)));
                } else if (hb.op == HeartbeatOp::Report) {
                    if (auto sample = estimate_offset(hb.t1, hb.t2, hb.t3, hb.t4)) {
                        tracker.update(*sample);
                        bump(&ServerStats::heartbeats_accepted);
                    } else {
                        bump(&ServerStats::heartbeats_discarded);
                    }
                }
                break;
            }
            case StreamKind::CONTROL: {
                const ControlMessage msg = decode_control_payload(frame->payload);
                if (msg.type == "start") {
                    if (writer) throw ParseError("start while a session is open");
                    const std::int64_t wall_start =
                        msg.wall_clock_start_ns != 0
                            ? static_cast<std::int64_t>(msg.wall_clock_start_ns)
                            : static_cast<std::int64_t>(wall_now_ns());
                    try {
                        writer = store.create_session(msg.session_id, msg.device_id,
                                                      wall_start);
                    } catch (const ConfigError& e) {
                        ControlMessage err;
                        err.type = "error";
                        err.message = e.what();
                        send_frame(fd, make_frame(StreamKind::CONTROL,
                                                  encode_control_payload(err)));
                        throw ParseError(std::string("session rejected: ") + e.what());
                    }
                } else if (msg.type == "stop") {
                    if (!writer) throw ParseError("stop without an open session");
                    writer->finalize(true);
                    writer.reset();
                    bump(&ServerStats::sessions_completed);
                    ControlMessage ack;
                    ack.type = "stop_ack";
                    ack.session_id = msg.session_id;
                    send_frame(fd, make_frame(StreamKind::CONTROL,
                                              encode_control_payload(ack)));
                } else {
                    throw ParseError("unknown control type: " + msg.type);
                }
                break;
            }
            case StreamKind::IMU: {
                if (!writer) throw ParseError("IMU frame outside a session");
                const std::int64_t offset = tracker.offset_ns();
                for (const ImuSample& s : decode_imu_payload(frame->payload)) {
                    std::array<double, 6> v;
                    for (int a = 0; a < 6; ++a) v[a] = static_cast<double>(s.values[a]);
                    writer->append_imu(static_cast<std::int64_t>(s.t_ns) + offset, v);
                }
                break;
            }
            case StreamKind::AUDIO: {
                if (!writer) throw ParseError("audio frame outside a session");
                const AudioChunk chunk = decode_audio_payload(frame->payload);
                writer->append_audio(
                    static_cast<std::int64_t>(chunk.t_ns) + tracker.offset_ns(),
                    chunk.pcm);
                break;
            }
            }
        }
    } catch (const ParseError& e) {
        std::cerr << "[serve] protocol error: " << e.what() << "\n";
        bump(&ServerStats::protocol_errors);
        close_incomplete();
    } catch (const std::exception& e) {
        std::cerr << "[serve] connection failed: " << e.what() << "\n";
        close_incomplete();
    }

    ::close(fd);
    std::lock_guard<std::mutex> lock(mu);
    conn_fds.erase(std::remove(conn_fds.begin(), conn_fds.end(), fd), conn_fds.end());
}

void StreamServer::Impl::accept_loop() {
    while (running.load()) {
        sockaddr_in peer{};
        socklen_t len = sizeof peer;
        const int fd = ::accept(listen_fd, reinterpret_cast<sockaddr*>(&peer), &len);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break; // listener closed by stop()
        }
        std::lock_guard<std::mutex> lock(mu);
        if (!running.load()) {
            ::close(fd);
            break;
        }
        ++stats.connections;
        conn_fds.push_back(fd);
        threads.emplace_back([this, fd] { handle_connection(fd); });
    }
}

StreamServer::StreamServer(SessionStore& store, std::string host, std::uint16_t port)
    : impl_(std::make_unique<Impl>(store, std::move(host), port)) {}

StreamServer::~StreamServer() { stop(); }

void StreamServer::start() {
    if (impl_->running.load()) return;

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConfigError("cannot create listen socket");
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(impl_->requested_port);
    if (::inet_pton(AF_INET, impl_->host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw ConfigError("invalid listen address: " + impl_->host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        const std::string why = std::strerror(errno);
        ::close(fd);
        throw ConfigError("cannot bind " + impl_->host + ":" +
                          std::to_string(impl_->requested_port) + ": " + why);
    }
    if (::listen(fd, 16) != 0) {
        ::close(fd);
        throw ConfigError("listen failed on " + impl_->host);
    }

    sockaddr_in bound{};
    socklen_t blen = sizeof bound;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &blen);
    impl_->bound_port = ntohs(bound.sin_port);
    impl_->listen_fd = fd;
    impl_->running.store(true);
    impl_->accept_thread = std::thread([this] { impl_->accept_loop(); });
}

void StreamServer::stop() {
    if (!impl_ || !impl_->running.exchange(false)) return;

    ::shutdown(impl_->listen_fd, SHUT_RDWR);
    ::close(impl_->listen_fd);
    impl_->listen_fd = -1;
    if (impl_->accept_thread.joinable()) impl_->accept_thread.join();

    std::vector<std::thread> threads;
    {
        std::lock_guard<std::mutex> lock(impl_->mu);
        for (int fd : impl_->conn_fds) ::shutdown(fd, SHUT_RDWR);
        threads.swap(impl_->threads);
    }
    for (std::thread& t : threads)
        if (t.joinable()) t.join();
}

bool StreamServer::running() const { return impl_->running.load(); }

std::uint16_t StreamServer::port() const { return impl_->bound_port; }

ServerStats StreamServer::stats() const {
    std::lock_guard<std::mutex> lock(impl_->mu);
    return impl_->stats;
}

// ---------------------------------------------------------------------------
// Replay client
// ---------------------------------------------------------------------------

namespace {

// Blocks until a heartbeat reply arrives, then reports the exchange back so
// the server can refresh its offset estimate.
bool run_heartbeat_exchange(int fd, FrameReader& reader, std::size_t& frames_sent) {
    HeartbeatPayload req;
    req.op = HeartbeatOp::Request;
    req.t1 = wall_now_ns();
    if (!send_frame(fd, make_frame(StreamKind::HEARTBEAT, encode_heartbeat_payload(req))))
        return false;
    ++frames_sent;

    for (;;) {
        const std::optional<Frame> frame = reader.next();
        if (!frame) return false;
        if (frame->kind != StreamKind::HEARTBEAT) continue;
        const HeartbeatPayload hb = decode_heartbeat_payload(frame->payload);
        if (hb.op != HeartbeatOp::Reply || hb.t1 != req.t1) continue;

        HeartbeatPayload report;
        report.op = HeartbeatOp::Report;
        report.t1 = hb.t1;
        report.t2 = hb.t2;
        report.t3 = hb.t3;
        report.t4 = wall_now_ns();
        if (!send_frame(fd, make_frame(StreamKind::HEARTBEAT,
                                       encode_heartbeat_payload(report))))
            return false;
        ++frames_sent;
        return true;
    }
}

} // namespace

ReplayResult replay_session(const SessionRecording& recording, const std::string& host,
                            std::uint16_t port, const ReplayOptions& options) {
    if (!(options.speed > 0.0))
        throw std::invalid_argument("replay: speed must be > 0");
    if (options.imu_batch == 0 || options.audio_chunk == 0)
        throw std::invalid_argument("replay: batch sizes must be > 0");
    validate_session(recording);

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConfigError("cannot create socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw ConfigError("invalid server address: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        const std::string why = std::strerror(errno);
        ::close(fd);
        throw ConfigError("cannot connect to " + host + ":" + std::to_string(port) +
                          ": " + why);
    }

    ReplayResult result;
    FrameReader reader(fd);

    // Pre-build the frame schedule: IMU batches and audio chunks merged by
    // their first-sample timestamps.
    struct Event {
        std::int64_t t_ns;
        Frame frame;
    };
    std::vector<Event> events;
    for (std::size_t i = 0; i < recording.imu.size(); i += options.imu_batch) {
        const std::size_t end = std::min(recording.imu.size(), i + options.imu_batch);
        std::vector<ImuSample> batch(end - i);
        for (std::size_t k = i; k < end; ++k) {
            batch[k - i].t_ns = static_cast<std::uint64_t>(recording.imu.t_ns[k]);
            for (int a = 0; a < 6; ++a)
                batch[k - i].values[a] = static_cast<float>(recording.imu.axes[a][k]);
        }
        Frame f;
        f.kind = StreamKind::IMU;
        f.payload = encode_imu_payload(batch);
        events.push_back({recording.imu.t_ns[i], std::move(f)});
    }
    for (std::size_t i = 0; i < recording.audio.samples.size(); i += options.audio_chunk) {
        const std::size_t end =
            std::min(recording.audio.samples.size(), i + options.audio_chunk);
        AudioChunk chunk;
        chunk.t_ns = static_cast<std::uint64_t>(
            recording.audio.start_ns +
            static_cast<std::int64_t>(std::llround(
                static_cast<double>(i) * 1e9 / recording.audio.sample_rate_hz)));
        chunk.pcm.resize(end - i);
        for (std::size_t k = i; k < end; ++k)
            chunk.pcm[k - i] = static_cast<std::int16_t>(
                std::llround(std::clamp(recording.audio.samples[k], -1.0, 1.0) * 32767.0));
        Frame f;
        f.kind = StreamKind::AUDIO;
        f.payload = encode_audio_payload(chunk);
        events.push_back({static_cast<std::int64_t>(chunk.t_ns), std::move(f)});
    }
    std::stable_sort(events.begin(), events.end(),
                     [](const Event& a, const Event& b) { return a.t_ns < b.t_ns; });

    const bool sync = options.heartbeat_period_s > 0.0;
    if (sync && !run_heartbeat_exchange(fd, reader, result.frames_sent)) {
        ::close(fd);
        throw ConfigError("server closed the connection during clock sync");
    }

    ControlMessage start;
    start.type = "start";
    start.session_id = recording.meta.session_id;
    start.device_id = recording.meta.device_id;
    start.wall_clock_start_ns =
        static_cast<std::uint64_t>(recording.meta.wall_clock_start_ns);
    if (!send_frame(fd, make_frame(StreamKind::CONTROL, encode_control_payload(start)))) {
        ::close(fd);
        throw ConfigError("server closed the connection at session start");
    }
    ++result.frames_sent;

    const auto wall_start = std::chrono::steady_clock::now();
    auto last_heartbeat = wall_start;
    const std::int64_t t0 = events.empty() ? 0 : events.front().t_ns;
    bool peer_gone = false;
    for (const Event& ev : events) {
        const auto target =
            wall_start + std::chrono::nanoseconds(static_cast<std::int64_t>(
                             static_cast<double>(ev.t_ns - t0) / options.speed));
        std::this_thread::sleep_until(target);

        if (sync) {
            const auto now = std::chrono::steady_clock::now();
            if (std::chrono::duration<double>(now - last_heartbeat).count() >=
                options.heartbeat_period_s) {
                if (!run_heartbeat_exchange(fd, reader, result.frames_sent)) {
                    peer_gone = true;
                    break;
                }
                last_heartbeat = now;
            }
        }
        if (!send_frame(fd, ev.frame)) {
            peer_gone = true;
            break;
        }
        ++result.frames_sent;
    }

    if (!peer_gone) {
        ControlMessage stop;
        stop.type = "stop";
        stop.session_id = recording.meta.session_id;
        if (send_frame(fd, make_frame(StreamKind::CONTROL, encode_control_payload(stop)))) {
            ++result.frames_sent;
            while (const std::optional<Frame> frame = reader.next()) {
                if (frame->kind != StreamKind::CONTROL) continue;
                if (decode_control_payload(frame->payload).type == "stop_ack") {
                    result.stop_acked = true;
                    break;
                }
            }
        }
    }

    ::close(fd);
    return result;
}

} // namespace bsense::net
