#pragma once

// Two-step stroke segmentation: squared gyro-y local-maximum candidates,
// verified by a co-located audio energy burst. Candidates are shifted forward
// 100 ms so the impact (which trails the motion peak) sits at the window
// center.

#include "bsense/session.hpp"
#include "bsense/signal.hpp"

#include <cstdint>
#include <vector>

namespace bsense {

struct SegmentationConfig {
    double window_ms = 2000.0;
    double threshold = 21.0;        // squared gyro-y, (rad/s)^2
    double offset_ms = 100.0;       // forward shift from motion peak to impact
    double audio_frame_ms = 10.0;   // energy envelope frame
    double audio_threshold_mult = 5.0; // adaptive threshold = mult x median envelope
    double center_tolerance_ms = 150.0;
};

// Candidate windows from the squared gyro-y signal. Times are nanoseconds
// relative to the first sample of `gyro_y`. A signal shorter than one window
// yields an empty list.
std::vector<CandidateWindow> detect_candidates(const Signal1D& gyro_y, double window_ms = 2000.0,
                                               double threshold = 21.0,
                                               double offset_ms = 100.0);

// Keeps candidates whose audio energy envelope peaks at the window midpoint:
// the envelope argmax over the window must exceed the adaptive threshold and
// lie within the center tolerance. `audio_start_ns` places the first audio
// sample on the candidates' clock. A candidate whose midpoint the audio does
// not cover raises CoverageError.
std::vector<CandidateWindow> verify_audio(const std::vector<CandidateWindow>& candidates,
                                          const Signal1D& audio,
                                          std::int64_t audio_start_ns = 0,
                                          const SegmentationConfig& config = {});

// Full pipeline on one recording: detect, verify, slice aligned IMU/audio
// windows. Windows running past the recording edge are zero-padded
// symmetrically and flagged. Results are sorted by impact time and never
// overlap.
std::vector<StrokeSegment> segment_session(const SessionRecording& session,
                                           const SegmentationConfig& config = {});

struct SegmentationOutcome {
    std::vector<StrokeSegment> segments;
    std::size_t candidates_found = 0;
    std::size_t candidates_rejected = 0; // failed audio verification
};

SegmentationOutcome segment_session_detailed(const SessionRecording& session,
                                             const SegmentationConfig& config = {});

} // namespace bsense
