#include "bsense/session.hpp"

#include <cmath>

namespace bsense {

void validate_session(const SessionRecording& s) {
    for (std::size_t a = 0; a < kAxisCount; ++a)
        if (s.imu.axes[a].size() != s.imu.t_ns.size())
            throw std::invalid_argument("session: IMU axis length mismatch");
    for (std::size_t i = 1; i < s.imu.t_ns.size(); ++i)
        if (s.imu.t_ns[i] <= s.imu.t_ns[i - 1])
            throw std::invalid_argument("session: IMU timestamps not strictly increasing");
    if (!(s.audio.sample_rate_hz > 0.0))
        throw std::invalid_argument("session: audio sample rate must be > 0");

    if (s.imu.size() == 0 || s.audio.samples.empty()) return; // empty streams are fine alone

    const std::int64_t audio_end =
        s.audio.start_ns + static_cast<std::int64_t>(std::llround(
                               static_cast<double>(s.audio.samples.size()) * 1e9 /
                               s.audio.sample_rate_hz));
    if (s.audio.start_ns >= s.imu.t_ns.back() || audio_end <= s.imu.t_ns.front())
        throw std::invalid_argument("session: IMU and audio time ranges do not overlap");
}

void validate_segment(const StrokeSegment& seg) {
    if (!(seg.imu_rate_hz > 0.0))
        throw std::invalid_argument("segment: IMU rate must be > 0");
    const std::size_t w = seg.imu[0].size();
    if (w == 0) throw std::invalid_argument("segment: empty IMU window");
    for (const auto& row : seg.imu) {
        if (row.size() != w) throw std::invalid_argument("segment: IMU rows differ in length");
        for (double v : row)
            if (!std::isfinite(v)) throw std::invalid_argument("segment: non-finite IMU sample");
    }
    const double dur_ms = static_cast<double>(w) / seg.imu_rate_hz * 1000.0;
    if (std::abs(dur_ms - kWindowMs) > 10.0 + 1000.0 / seg.imu_rate_hz)
        throw std::invalid_argument("segment: window is not 2000 ms");
    for (double v : seg.audio)
        if (!std::isfinite(v)) throw std::invalid_argument("segment: non-finite audio sample");
}

} // namespace bsense
