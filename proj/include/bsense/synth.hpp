#pragma once

// Parametric generator of labeled synthetic strokes and sessions. This is the
// ground-truth oracle the test suite trains and evaluates against: signal
// shapes are documented constants chosen so that stroke type, quality, and
// impact location are all recoverable from the generated signals — they make
// no claim of biomechanical fidelity.
//
// Stroke anatomy (2000 ms window, impact at the center):
//   five phases — backward swing, forward swing, impact, follow-through,
//   retraction. Swing phases are sin^2 bumps with a per-type 6-axis amplitude
//   table (backhand reverses rotation signs). The gyro-y motion peak sits
//   100 ms before the impact.
//   quality q in [1,5]: peak amplitudes scale by 0.75 + 0.05q (strictly
//   increasing), the follow-through/forward amplitude ratio grows as
//   0.6 + 0.08q (immune to the per-user gain), and phase-boundary jitter
//   shrinks as (5.5 - q) * 4 ms.
//   impact point (x, y): a damped sinusoid starting at the impact with
//   f(d) = f0 (1 + 0.5 d), A(d) = A0 (1 - 0.8 d), tau(d) = tau0 (1 - 0.5 d),
//   d = normalized distance from the face sweet spot (0, 0.65), mixed into
//   the six axes with location-dependent weights so x and y are separately
//   identifiable; plus a 3 kHz audio burst whose energy tracks A(d) and q.
//   Air swings keep the motion but omit vibration and burst.

#include "bsense/session.hpp"
#include "bsense/stroke_types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace bsense {

struct StrokeSpec {
    StrokeType type = StrokeType::FOC;
    double quality = 4.0;              // [1, 5]
    ImpactPoint impact{0.0, 0.65};
    double onset_time_s = 1.0;         // impact time within the session
    bool is_air_swing = false;
};

struct SynthConfig {
    double imu_rate_hz = kImuRateHz;
    double audio_rate_hz = kAudioRateHz;
    double imu_noise_sigma = 0.05;
    double audio_noise_sigma = 0.002;
    double vib_f0_hz = 30.0;   // center-impact vibration frequency
    double vib_amp0 = 6.0;     // center-impact vibration amplitude
    double vib_tau0_s = 0.12;  // center-impact decay constant
    std::string user_id;       // non-empty: apply a per-user gain/timing style
    std::uint64_t seed = 1;
};

// One labeled 2000 ms segment, deterministic in (spec, config).
StrokeSegment gen_stroke(const StrokeSpec& spec, const SynthConfig& config);

struct SynthSession {
    SessionRecording recording;
    std::vector<StrokeSpec> truth; // one entry per spec, air swings included
};

// Continuous session with strokes placed at their onsets and background noise
// elsewhere. Onsets must be >= 2.5 s apart (windows never overlap); strokes
// running past either session edge are truncated to the recording.
SynthSession gen_session(const std::vector<StrokeSpec>& specs, const SynthConfig& config,
                         double duration_s);

// Deterministic per-stroke RNG stream key (also used to seed augmentation).
std::uint64_t stroke_key(const StrokeSpec& spec);

} // namespace bsense
