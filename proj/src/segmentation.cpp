#include "bsense/segmentation.hpp"

#include "bsense/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bsense {

namespace {

std::int64_t to_ns(double seconds) {
    return static_cast<std::int64_t>(std::llround(seconds * 1e9));
}

} // namespace

std::vector<CandidateWindow> detect_candidates(const Signal1D& gyro_y, double window_ms,
                                               double threshold, double offset_ms) {
    validate(gyro_y, "gyro_y");
    const std::size_t n = gyro_y.size();
    const auto win = static_cast<std::size_t>(
        std::llround(window_ms / 1000.0 * gyro_y.sample_rate_hz));
    if (n < win || win == 0) return {};

    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = gyro_y.samples[i] * gyro_y.samples[i];

    const std::size_t half = win / 2;
    std::vector<CandidateWindow> found;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(sq[i] > threshold)) continue;
        // local maximum within half a window on each side; ties to the earliest
        const std::size_t lo = i >= half ? i - half : 0;
        const std::size_t hi = std::min(n, i + half + 1);
        bool is_max = true;
        for (std::size_t j = lo; j < hi && is_max; ++j) {
            if (sq[j] > sq[i] || (sq[j] == sq[i] && j < i)) is_max = false;
        }
        if (!is_max) continue;

        const double peak_t = static_cast<double>(i) / gyro_y.sample_rate_hz;
        const double center = peak_t + offset_ms / 1000.0;
        CandidateWindow c;
        c.t_start_ns = to_ns(center - window_ms / 2000.0);
        c.t_end_ns = to_ns(center + window_ms / 2000.0);
        c.peak_value = sq[i];
        found.push_back(c);
    }

    // non-maximum suppression: largest squared peak wins, ties to earlier time
    std::vector<std::size_t> order(found.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (found[a].peak_value != found[b].peak_value)
            return found[a].peak_value > found[b].peak_value;
        return found[a].t_start_ns < found[b].t_start_ns;
    });
    std::vector<CandidateWindow> kept;
    for (std::size_t idx : order) {
        bool overlaps = false;
        for (const auto& k : kept) {
            if (found[idx].t_start_ns < k.t_end_ns && k.t_start_ns < found[idx].t_end_ns) {
                overlaps = true;
                break;
            }
        }
        if (!overlaps) kept.push_back(found[idx]);
    }
    std::sort(kept.begin(), kept.end(),
              [](const CandidateWindow& a, const CandidateWindow& b) {
                  return a.t_start_ns < b.t_start_ns;
              });
    return kept;
}

std::vector<CandidateWindow> verify_audio(const std::vector<CandidateWindow>& candidates,
                                          const Signal1D& audio, std::int64_t audio_start_ns,
                                          const SegmentationConfig& config) {
    if (candidates.empty()) return {};
    validate(audio, "audio");

    const Signal1D env = energy_envelope(audio, config.audio_frame_ms);
    if (env.size() == 0) throw CoverageError("verify_audio: audio too short for one frame");

    std::vector<double> sorted(env.samples);
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted.size() % 2 == 1
                              ? sorted[sorted.size() / 2]
                              : 0.5 * (sorted[sorted.size() / 2 - 1] + sorted[sorted.size() / 2]);
    const double threshold = config.audio_threshold_mult * median;

    const std::int64_t audio_end_ns =
        audio_start_ns + to_ns(static_cast<double>(audio.size()) / audio.sample_rate_hz);
    const double frame_s = 1.0 / env.sample_rate_hz;

    std::vector<CandidateWindow> kept;
    for (const auto& c : candidates) {
        const std::int64_t mid = c.mid_ns();
        if (mid < audio_start_ns || mid >= audio_end_ns)
            throw CoverageError("verify_audio: audio does not cover candidate at " +
                                std::to_string(mid) + " ns");

        // envelope argmax over the (audio-clipped) candidate window
        const double rel_start =
            static_cast<double>(std::max(c.t_start_ns, audio_start_ns) - audio_start_ns) / 1e9;
        const double rel_end =
            static_cast<double>(std::min(c.t_end_ns, audio_end_ns) - audio_start_ns) / 1e9;
        auto f0 = static_cast<std::size_t>(std::max(0.0, std::floor(rel_start / frame_s)));
        auto f1 = std::min(env.size(), static_cast<std::size_t>(
                                           std::max(0.0, std::ceil(rel_end / frame_s))));
        if (f0 >= f1) continue;

        std::size_t best = f0;
        for (std::size_t f = f0; f < f1; ++f)
            if (env.samples[f] > env.samples[best]) best = f;

        if (!(env.samples[best] > threshold)) continue; // silent window: air swing

        // frame-center time of the argmax, back on the candidates' clock
        const std::int64_t peak_ns =
            audio_start_ns + to_ns((static_cast<double>(best) + 0.5) * frame_s);
        if (std::llabs(peak_ns - mid) <= to_ns(config.center_tolerance_ms / 1000.0))
            kept.push_back(c);
    }
    return kept;
}

SegmentationOutcome segment_session_detailed(const SessionRecording& session,
                                             const SegmentationConfig& config) {
    validate_session(session);
    SegmentationOutcome out;
    if (session.imu.size() == 0) return out;

    const std::int64_t imu_t0 = session.imu.t_ns.front();
    Signal1D gy{session.imu.axes[4], kImuRateHz};

    auto candidates =
        detect_candidates(gy, config.window_ms, config.threshold, config.offset_ms);
    out.candidates_found = candidates.size();
    if (candidates.empty()) return out;

    // shift to the session clock and verify against the audio track
    for (auto& c : candidates) {
        c.t_start_ns += imu_t0;
        c.t_end_ns += imu_t0;
    }
    Signal1D audio{session.audio.samples, session.audio.sample_rate_hz};
    auto verified = verify_audio(candidates, audio, session.audio.start_ns, config);
    out.candidates_rejected = candidates.size() - verified.size();

    const auto w = static_cast<std::size_t>(
        std::llround(config.window_ms / 1000.0 * kImuRateHz));
    const auto aw = static_cast<std::size_t>(
        std::llround(config.window_ms / 1000.0 * session.audio.sample_rate_hz));

    for (const auto& c : verified) {
        StrokeSegment seg;
        seg.imu_rate_hz = kImuRateHz;
        seg.audio_rate_hz = session.audio.sample_rate_hz;
        seg.impact_time_ns = c.mid_ns();

        // IMU window centered on the impact, zero-padded at recording edges
        const auto center_idx = static_cast<std::int64_t>(std::llround(
            static_cast<double>(c.mid_ns() - imu_t0) / 1e9 * kImuRateHz));
        const std::int64_t first = center_idx - static_cast<std::int64_t>(w) / 2;
        bool padded = false;
        for (std::size_t a = 0; a < kAxisCount; ++a) {
            seg.imu[a].assign(w, 0.0);
            for (std::size_t i = 0; i < w; ++i) {
                const std::int64_t src = first + static_cast<std::int64_t>(i);
                if (src < 0 || src >= static_cast<std::int64_t>(session.imu.size())) {
                    padded = true;
                    continue;
                }
                seg.imu[a][i] = session.imu.axes[a][static_cast<std::size_t>(src)];
            }
        }

        const auto audio_first = static_cast<std::int64_t>(std::llround(
            static_cast<double>(c.mid_ns() - session.audio.start_ns) / 1e9 *
                session.audio.sample_rate_hz)) -
            static_cast<std::int64_t>(aw) / 2;
        seg.audio.assign(aw, 0.0);
        for (std::size_t i = 0; i < aw; ++i) {
            const std::int64_t src = audio_first + static_cast<std::int64_t>(i);
            if (src < 0 || src >= static_cast<std::int64_t>(session.audio.samples.size())) {
                padded = true;
                continue;
            }
            seg.audio[i] = session.audio.samples[static_cast<std::size_t>(src)];
        }
        seg.boundary_padded = padded;
        out.segments.push_back(std::move(seg));
    }

    std::sort(out.segments.begin(), out.segments.end(),
              [](const StrokeSegment& a, const StrokeSegment& b) {
                  return a.impact_time_ns < b.impact_time_ns;
              });
    return out;
}

std::vector<StrokeSegment> segment_session(const SessionRecording& session,
                                           const SegmentationConfig& config) {
    return segment_session_detailed(session, config).segments;
}

} // namespace bsense
