#include "bsense/synth.hpp"

#include "bsense/util.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace bsense {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr std::int64_t kSynthEpochNs = 1'600'000'000'000'000'000; // fixed synthetic wall clock

// Motion-phase boundaries in seconds relative to the window start (impact at
// 1.0): backward, forward, follow-through, retraction. The forward swing
// peaks at 0.9 s, i.e. the gyro motion peak leads the impact by 100 ms.
constexpr double kPhaseEdges[5] = {0.25, 0.75, 1.05, 1.50, 1.80};

// Per-type amplitude tables, rows ax..gz, columns
// [backward, forward, impact-coupling, follow-through, retraction].
// Magnitudes separate the four types; the backhand (BOC) reverses the
// rotation-dominated signs. Documented constants, not biomechanics.
constexpr double kAmpTable[4][6][5] = {
    // BOC
    {{-1.4, -3.8, 1.0, -2.0, -0.8},
     {1.0, 3.2, 1.0, 1.8, 0.6},
     {1.6, 5.0, 1.0, 2.4, 0.9},
     {-1.2, -3.4, 1.0, -1.5, -0.6},
     {-2.0, -7.6, 1.0, -2.6, -1.1},
     {-0.7, -2.4, 1.0, -1.0, -0.4}},
    // FOC
    {{1.6, 4.2, 1.0, 2.2, 0.9},
     {1.2, 3.6, 1.0, 2.0, 0.7},
     {1.8, 5.5, 1.0, 2.6, 1.0},
     {1.4, 3.8, 1.0, 1.6, 0.7},
     {2.2, 8.0, 1.0, 2.8, 1.2},
     {0.8, 2.6, 1.0, 1.2, 0.5}},
    // FOS
    {{2.0, 6.0, 1.0, 3.0, 1.0},
     {1.5, 5.0, 1.0, 2.5, 0.8},
     {2.5, 8.0, 1.0, 3.5, 1.2},
     {2.0, 5.5, 1.0, 2.0, 0.8},
     {3.0, 10.0, 1.0, 3.5, 1.5},
     {1.0, 4.0, 1.0, 1.5, 0.6}},
    // FOD
    {{1.0, 2.2, 1.0, 1.2, 0.6},
     {0.8, 1.8, 1.0, 1.0, 0.5},
     {1.1, 2.8, 1.0, 1.4, 0.6},
     {0.9, 2.0, 1.0, 0.9, 0.4},
     {1.5, 7.5, 1.0, 1.8, 0.8},
     {0.5, 1.4, 1.0, 0.7, 0.3}}};

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

struct UserStyle {
    double gain = 1.0;
    double time_offset_s = 0.0;
};

UserStyle user_style(const SynthConfig& cfg) {
    UserStyle st;
    if (cfg.user_id.empty()) return st;
    Rng rng(splitmix64(cfg.seed) ^ fnv1a64(cfg.user_id));
    st.gain = rng.uniform(0.95, 1.05);
    st.time_offset_s = rng.uniform(-0.03, 0.03);
    return st;
}

struct StrokeShape {
    double edges[5];       // jittered phase boundaries, window-relative seconds
    double amp_factor;     // quality x user gain
    double follow_gain;    // follow-through/forward ratio, pure quality cue
    double vib_amp, vib_freq, vib_tau;
    double burst_amp;
    double weights[6];     // location-dependent vibration mix per axis
};

StrokeShape make_shape(const StrokeSpec& spec, const SynthConfig& cfg, Rng& rng) {
    StrokeShape sh;
    const UserStyle st = user_style(cfg);
    const double q = clamp(spec.quality, 1.0, 5.0);
    const double sigma_t = (5.5 - q) * 0.004; // timing regularity improves with quality
    for (int k = 0; k < 5; ++k)
        sh.edges[k] = kPhaseEdges[k] + st.time_offset_s + rng.normal(0.0, sigma_t);
    for (int k = 1; k < 5; ++k) sh.edges[k] = std::max(sh.edges[k], sh.edges[k - 1] + 0.02);

    sh.amp_factor = (0.75 + 0.05 * q) * st.gain;
    // user gain cancels in the follow-through/forward amplitude ratio, so the
    // quality stays recoverable even across unseen players
    sh.follow_gain = 0.6 + 0.08 * q;

    const double xn = clamp(spec.impact.x / 0.5, -1.0, 1.0);
    const double yn = clamp((spec.impact.y - 0.65) / 0.35, -1.0, 1.0);
    const double d = clamp(std::sqrt(xn * xn + yn * yn) / std::sqrt(2.0), 0.0, 1.0);
    sh.vib_freq = cfg.vib_f0_hz * (1.0 + 0.5 * d);
    sh.vib_amp = cfg.vib_amp0 * (1.0 - 0.8 * d);
    sh.vib_tau = cfg.vib_tau0_s * (1.0 - 0.5 * d);
    sh.burst_amp = 0.35 * (sh.vib_amp / cfg.vib_amp0) * (0.75 + 0.05 * q);

    sh.weights[0] = clamp(1.0 + 0.8 * xn, 0.2, 1.8);
    sh.weights[1] = clamp(1.0 - 0.8 * xn, 0.2, 1.8);
    sh.weights[2] = clamp(1.0 + 0.8 * yn, 0.2, 1.8);
    sh.weights[3] = clamp(1.0 - 0.8 * yn, 0.2, 1.8);
    sh.weights[4] = clamp(1.0 + 0.4 * xn - 0.4 * yn, 0.2, 1.8);
    sh.weights[5] = clamp(1.0 - 0.4 * xn + 0.4 * yn, 0.2, 1.8);
    return sh;
}

double bump(double t, double t0, double t1) {
    if (t <= t0 || t >= t1) return 0.0;
    const double s = std::sin(kPi * (t - t0) / (t1 - t0));
    return s * s;
}

// IMU contribution of one stroke at absolute time t (seconds); the window
// spans [onset - 1, onset + 1].
double stroke_imu_value(const StrokeSpec& spec, const StrokeShape& sh, std::size_t axis,
                        double t) {
    const double rel = t - (spec.onset_time_s - 1.0);
    if (rel < 0.0 || rel >= 2.0) return 0.0;
    const auto& amps = kAmpTable[static_cast<int>(spec.type)][axis];
    double v = amps[0] * sh.amp_factor * bump(rel, sh.edges[0], sh.edges[1]) +
               amps[1] * sh.amp_factor * bump(rel, sh.edges[1], sh.edges[2]) +
               amps[3] * sh.amp_factor * sh.follow_gain * bump(rel, sh.edges[2], sh.edges[3]) +
               amps[4] * sh.amp_factor * bump(rel, sh.edges[3], sh.edges[4]);
    if (!spec.is_air_swing) {
        const double dt = t - spec.onset_time_s;
        if (dt >= 0.0 && dt < 6.0 * sh.vib_tau) {
            v += amps[2] * sh.weights[axis] * sh.vib_amp * std::exp(-dt / sh.vib_tau) *
                 std::sin(2.0 * kPi * sh.vib_freq * dt);
        }
    }
    return v;
}

double stroke_audio_value(const StrokeSpec& spec, const StrokeShape& sh, double t) {
    if (spec.is_air_swing) return 0.0;
    const double dt = t - spec.onset_time_s;
    if (dt < 0.0 || dt > 0.03) return 0.0;
    return sh.burst_amp * std::exp(-dt / 0.008) * std::sin(2.0 * kPi * 3000.0 * dt);
}

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

double quantize_pcm16(double v) {
    return std::llround(clamp(v, -1.0, 1.0) * 32767.0) / 32767.0;
}

void check_spec(const StrokeSpec& spec) {
    if (spec.quality < 1.0 || spec.quality > 5.0)
        throw std::invalid_argument("stroke spec: quality out of [1,5]");
    if (spec.impact.x < -0.5 || spec.impact.x > 0.5 || spec.impact.y < 0.0 ||
        spec.impact.y > 1.0)
        throw std::invalid_argument("stroke spec: impact point out of face bounds");
}

} // namespace

std::uint64_t stroke_key(const StrokeSpec& spec) {
    // hash the exact parameter bytes so every distinct spec has its own stream
    std::uint64_t h = fnv1a64("stroke");
    auto mix = [&h](const void* p, std::size_t n) {
        h = splitmix64(h ^ fnv1a64(p, n));
    };
    const int type = static_cast<int>(spec.type);
    mix(&type, sizeof type);
    mix(&spec.quality, sizeof spec.quality);
    mix(&spec.impact.x, sizeof spec.impact.x);
    mix(&spec.impact.y, sizeof spec.impact.y);
    mix(&spec.onset_time_s, sizeof spec.onset_time_s);
    const int air = spec.is_air_swing ? 1 : 0;
    mix(&air, sizeof air);
    return h;
}

StrokeSegment gen_stroke(const StrokeSpec& spec, const SynthConfig& config) {
    check_spec(spec);
    Rng rng = Rng(config.seed).fork(stroke_key(spec));
    const StrokeShape sh = make_shape(spec, config, rng);

    StrokeSegment seg;
    seg.imu_rate_hz = config.imu_rate_hz;
    seg.audio_rate_hz = config.audio_rate_hz;
    seg.impact_time_ns = kSynthEpochNs + static_cast<std::int64_t>(std::llround(spec.onset_time_s * 1e9));
    seg.labels.stroke_type = spec.type;
    seg.labels.quality = spec.quality;
    if (!spec.is_air_swing) seg.labels.impact = spec.impact;

    const auto w = static_cast<std::size_t>(std::llround(config.imu_rate_hz * 2.0));
    const double t0 = spec.onset_time_s - 1.0;
    for (std::size_t a = 0; a < kAxisCount; ++a) {
        seg.imu[a].resize(w);
        for (std::size_t i = 0; i < w; ++i) {
            const double t = t0 + static_cast<double>(i) / config.imu_rate_hz;
            seg.imu[a][i] = quantize_f32(stroke_imu_value(spec, sh, a, t) +
                                         rng.normal(0.0, config.imu_noise_sigma));
        }
    }
    const auto aw = static_cast<std::size_t>(std::llround(config.audio_rate_hz * 2.0));
    seg.audio.resize(aw);
    for (std::size_t i = 0; i < aw; ++i) {
        const double t = t0 + static_cast<double>(i) / config.audio_rate_hz;
        seg.audio[i] = quantize_pcm16(stroke_audio_value(spec, sh, t) +
                                      rng.normal(0.0, config.audio_noise_sigma));
    }
    return seg;
}

SynthSession gen_session(const std::vector<StrokeSpec>& specs, const SynthConfig& config,
                         double duration_s) {
    if (!(duration_s > 0.0)) throw std::invalid_argument("gen_session: duration must be > 0");
    for (std::size_t i = 0; i < specs.size(); ++i) {
        check_spec(specs[i]);
        if (i > 0 && specs[i].onset_time_s - specs[i - 1].onset_time_s < 2.5)
            throw std::invalid_argument("gen_session: onsets must be >= 2.5 s apart and sorted");
    }

    SynthSession out;
    SessionRecording& rec = out.recording;
    out.truth = specs;

    rec.meta.session_id = "synth-" + to_hex(splitmix64(config.seed));
    rec.meta.device_id = config.user_id.empty() ? "synth-device" : "device-" + config.user_id;
    rec.meta.wall_clock_start_ns = kSynthEpochNs;

    const auto n_imu = static_cast<std::size_t>(std::llround(duration_s * config.imu_rate_hz));
    const auto n_audio = static_cast<std::size_t>(std::llround(duration_s * config.audio_rate_hz));

    rec.imu.t_ns.resize(n_imu);
    const auto imu_step_ns = static_cast<std::int64_t>(std::llround(1e9 / config.imu_rate_hz));
    for (std::size_t i = 0; i < n_imu; ++i)
        rec.imu.t_ns[i] = kSynthEpochNs + static_cast<std::int64_t>(i) * imu_step_ns;

    // background noise first, from a dedicated stream
    Rng noise = Rng(config.seed).fork(fnv1a64("session-noise"));
    for (std::size_t a = 0; a < kAxisCount; ++a) {
        rec.imu.axes[a].resize(n_imu);
        for (std::size_t i = 0; i < n_imu; ++i)
            rec.imu.axes[a][i] = noise.normal(0.0, config.imu_noise_sigma);
    }
    rec.audio.start_ns = kSynthEpochNs;
    rec.audio.sample_rate_hz = config.audio_rate_hz;
    rec.audio.samples.resize(n_audio);
    for (std::size_t i = 0; i < n_audio; ++i)
        rec.audio.samples[i] = noise.normal(0.0, config.audio_noise_sigma);

    // add each stroke over its footprint (clipped to the recording)
    for (const auto& spec : specs) {
        Rng rng = Rng(config.seed).fork(stroke_key(spec));
        const StrokeShape sh = make_shape(spec, config, rng);
        const double lo = spec.onset_time_s - 1.0, hi = spec.onset_time_s + 1.0;

        const auto i0 = static_cast<std::size_t>(std::max(0.0, std::ceil(lo * config.imu_rate_hz)));
        const auto i1 = std::min(n_imu, static_cast<std::size_t>(
                                            std::max(0.0, std::ceil(hi * config.imu_rate_hz))));
        for (std::size_t a = 0; a < kAxisCount; ++a)
            for (std::size_t i = i0; i < i1; ++i)
                rec.imu.axes[a][i] +=
                    stroke_imu_value(spec, sh, a, static_cast<double>(i) / config.imu_rate_hz);

        const auto j0 =
            static_cast<std::size_t>(std::max(0.0, std::ceil(lo * config.audio_rate_hz)));
        const auto j1 = std::min(
            n_audio,
            static_cast<std::size_t>(std::max(0.0, std::ceil(hi * config.audio_rate_hz))));
        for (std::size_t j = j0; j < j1; ++j)
            rec.audio.samples[j] +=
                stroke_audio_value(spec, sh, static_cast<double>(j) / config.audio_rate_hz);
    }

    for (std::size_t a = 0; a < kAxisCount; ++a)
        for (auto& v : rec.imu.axes[a]) v = quantize_f32(v);
    for (auto& v : rec.audio.samples) v = quantize_pcm16(v);
    return out;
}

} // namespace bsense
