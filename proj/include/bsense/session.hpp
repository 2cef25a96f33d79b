#pragma once

// Recording containers: a session is one continuous 6-axis IMU stream plus a
// mono audio track, both timestamped in nanoseconds on a common clock.

#include "bsense/stroke_types.hpp"

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bsense {

inline constexpr std::array<const char*, 6> kAxisNames = {"ax", "ay", "az",
                                                          "gx", "gy", "gz"};
inline constexpr std::size_t kAxisCount = 6;
inline constexpr double kImuRateHz = 100.0;
inline constexpr double kAudioRateHz = 16000.0;
inline constexpr double kWindowMs = 2000.0;

// Accelerometer in m/s^2, gyro in rad/s; one timestamp per sample row.
struct ImuSeries {
    std::vector<std::int64_t> t_ns;
    std::array<std::vector<double>, kAxisCount> axes;

    std::size_t size() const { return t_ns.size(); }
};

struct AudioTrack {
    std::int64_t start_ns = 0;
    double sample_rate_hz = kAudioRateHz;
    std::vector<double> samples; // [-1, 1]
};

struct SessionMeta {
    std::string session_id;
    std::string device_id;
    std::int64_t wall_clock_start_ns = 0;
};

struct SessionRecording {
    SessionMeta meta;
    ImuSeries imu;
    AudioTrack audio;
};

// Throws when per-stream timestamps are not strictly increasing or the two
// streams do not overlap in time.
void validate_session(const SessionRecording& s);

// One detected stroke: a 2000 ms 6-axis IMU window with the aligned audio
// slice, centered on the impact.
struct StrokeSegment {
    std::array<std::vector<double>, kAxisCount> imu; // 6 x W
    double imu_rate_hz = kImuRateHz;
    std::vector<double> audio;
    double audio_rate_hz = kAudioRateHz;
    std::int64_t impact_time_ns = 0; // window center
    bool boundary_padded = false;    // window ran past the recording edge
    StrokeLabels labels;

    std::size_t width() const { return imu[0].size(); }
};

// Throws std::invalid_argument unless the segment is a well-formed 2000 ms
// window (equal-length finite rows at a positive rate).
void validate_segment(const StrokeSegment& seg);

struct CandidateWindow {
    std::int64_t t_start_ns = 0;
    std::int64_t t_end_ns = 0;
    double peak_value = 0.0; // squared gyro-y at the local maximum, (rad/s)^2

    std::int64_t mid_ns() const { return t_start_ns + (t_end_ns - t_start_ns) / 2; }
};

} // namespace bsense
