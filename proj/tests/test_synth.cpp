// Tests for the synthetic stroke/session generator: determinism, label
// fidelity (type, quality, impact location all leave recoverable traces),
// and the session-level invariants the segmenter depends on.
#include "bsense/features.hpp"
#include "bsense/session.hpp"
#include "bsense/synth.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

using namespace bsense;

namespace {

StrokeSpec make_spec(StrokeType type, double quality = 4.0, double x = 0.0, double y = 0.65,
                     double onset = 1.0, bool air = false) {
    StrokeSpec s;
    s.type = type;
    s.quality = quality;
    s.impact = ImpactPoint{x, y};
    s.onset_time_s = onset;
    s.is_air_swing = air;
    return s;
}

double max_abs(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Energy of the first difference over samples [i0, i1): a cheap high-pass
// statistic that isolates the post-impact vibration from the slow swing.
double hf_energy(const std::vector<double>& v, std::size_t i0, std::size_t i1) {
    double e = 0.0;
    for (std::size_t i = i0 + 1; i < i1 && i < v.size(); ++i) {
        const double d = v[i] - v[i - 1];
        e += d * d;
    }
    return e;
}

} // namespace

TEST_CASE("gen_stroke produces a valid centered window with labels") {
    SynthConfig cfg;
    const StrokeSegment seg = gen_stroke(make_spec(StrokeType::FOS, 5.0), cfg);

    CHECK(seg.width() == 200);
    for (std::size_t a = 0; a < kAxisCount; ++a) CHECK(seg.imu[a].size() == 200);
    CHECK(seg.audio.size() == 32000);
    CHECK(seg.imu_rate_hz == doctest::Approx(100.0));
    CHECK(seg.audio_rate_hz == doctest::Approx(16000.0));
    CHECK_NOTHROW(validate_segment(seg));

    REQUIRE(seg.labels.stroke_type.has_value());
    CHECK(*seg.labels.stroke_type == StrokeType::FOS);
    REQUIRE(seg.labels.quality.has_value());
    CHECK(*seg.labels.quality == doctest::Approx(5.0));
    REQUIRE(seg.labels.impact.has_value());
    CHECK(seg.labels.impact->x == doctest::Approx(0.0));
    CHECK(seg.labels.impact->y == doctest::Approx(0.65));
}

TEST_CASE("gen_stroke is bit-identical across calls; seeds decorrelate") {
    SynthConfig cfg;
    cfg.seed = 77;
    const StrokeSpec spec = make_spec(StrokeType::FOC, 3.0, 0.1, 0.5);
    const StrokeSegment a = gen_stroke(spec, cfg);
    const StrokeSegment b = gen_stroke(spec, cfg);
    CHECK(a.impact_time_ns == b.impact_time_ns);
    for (std::size_t ax = 0; ax < kAxisCount; ++ax) CHECK(a.imu[ax] == b.imu[ax]);
    CHECK(a.audio == b.audio);

    cfg.seed = 78;
    const StrokeSegment c = gen_stroke(spec, cfg);
    CHECK(a.imu[0] != c.imu[0]); // different noise stream
}

TEST_CASE("every stroke type at minimum quality clears the detection threshold") {
    SynthConfig cfg;
    for (StrokeType type : kAllStrokeTypes) {
        const StrokeSegment seg = gen_stroke(make_spec(type, 1.0), cfg);
        double peak_sq = 0.0;
        for (double v : seg.imu[4]) peak_sq = std::max(peak_sq, v * v);
        INFO("type ", to_string(type));
        CHECK(peak_sq > 21.0);
    }
}

TEST_CASE("contact strokes carry an audio burst; air swings do not") {
    SynthConfig cfg;
    const StrokeSegment contact = gen_stroke(make_spec(StrokeType::FOS, 4.0), cfg);
    const StrokeSegment air =
        gen_stroke(make_spec(StrokeType::FOS, 4.0, 0.0, 0.65, 1.0, /*air=*/true), cfg);

    CHECK(max_abs(contact.audio) > 0.1);
    CHECK(max_abs(air.audio) < 0.02); // noise floor only
    CHECK_FALSE(air.labels.impact.has_value());
    CHECK(air.labels.stroke_type.has_value());

    // the swing itself is still present on the gyro
    CHECK(max_abs(air.imu[4]) > 4.0);

    // ... but the high-frequency racket vibration is gone (samples 100..140
    // cover the 400 ms after the impact instant)
    CHECK(hf_energy(contact.imu[4], 100, 140) > 3.0 * hf_energy(air.imu[4], 100, 140));
}

TEST_CASE("quality scales the swing amplitude monotonically") {
    // air swings isolate the motion: no impact vibration superposed on the peak
    SynthConfig cfg;
    double prev = 0.0;
    for (int q = 1; q <= 5; ++q) {
        const StrokeSegment seg =
            gen_stroke(make_spec(StrokeType::FOC, q, 0.0, 0.65, 1.0, /*air=*/true), cfg);
        const double peak = max_abs(seg.imu[4]);
        CHECK(peak > prev);
        prev = peak;
    }
}

TEST_CASE("impact location shapes the vibration energy and its axis mix") {
    SynthConfig cfg;
    // sweet spot: strong, slow-decaying vibration; far corner: weak and brief
    const StrokeSegment sweet = gen_stroke(make_spec(StrokeType::FOC, 4.0, 0.0, 0.65), cfg);
    const StrokeSegment corner = gen_stroke(make_spec(StrokeType::FOC, 4.0, 0.45, 0.95), cfg);
    CHECK(hf_energy(sweet.imu[4], 100, 130) > 2.0 * hf_energy(corner.imu[4], 100, 130));

    // lateral offset tilts the vibration toward one accelerometer axis
    const StrokeSegment right = gen_stroke(make_spec(StrokeType::FOC, 4.0, 0.4, 0.65), cfg);
    const StrokeSegment left = gen_stroke(make_spec(StrokeType::FOC, 4.0, -0.4, 0.65), cfg);
    CHECK(hf_energy(right.imu[0], 100, 130) > 3.0 * hf_energy(right.imu[1], 100, 130));
    CHECK(hf_energy(left.imu[1], 100, 130) > 3.0 * hf_energy(left.imu[0], 100, 130));

    // and the impact feature maps tell the two locations apart
    const auto fr = flatten(extract_impact_features(right, /*include_audio=*/false));
    const auto fl = flatten(extract_impact_features(left, /*include_audio=*/false));
    double dist = 0.0;
    for (std::size_t i = 0; i < fr.size(); ++i) dist += (fr[i] - fl[i]) * (fr[i] - fl[i]);
    CHECK(std::sqrt(dist) > 1.0);
}

TEST_CASE("gen_stroke rejects out-of-range specs") {
    SynthConfig cfg;
    CHECK_THROWS_AS(gen_stroke(make_spec(StrokeType::FOC, 0.5), cfg), std::invalid_argument);
    CHECK_THROWS_AS(gen_stroke(make_spec(StrokeType::FOC, 5.5), cfg), std::invalid_argument);
    CHECK_THROWS_AS(gen_stroke(make_spec(StrokeType::FOC, 4.0, 0.7, 0.65), cfg),
                    std::invalid_argument);
    CHECK_THROWS_AS(gen_stroke(make_spec(StrokeType::FOC, 4.0, 0.0, 1.2), cfg),
                    std::invalid_argument);
}

TEST_CASE("gen_session assembles a valid continuous recording") {
    SynthConfig cfg;
    cfg.seed = 11;
    std::vector<StrokeSpec> specs;
    for (int k = 0; k < 13; ++k) {
        const bool air = (k == 2 || k == 6 || k == 10);
        specs.push_back(make_spec(kAllStrokeTypes[k % 4], 1.0 + k % 5, -0.3 + 0.1 * (k % 7),
                                  0.35 + 0.1 * (k % 6), 3.0 + 3.5 * k, air));
    }
    const SynthSession ses = gen_session(specs, cfg, 60.0);

    CHECK(ses.truth.size() == 13);
    CHECK(ses.recording.imu.size() == 6000);
    CHECK(ses.recording.audio.samples.size() == 960000);
    CHECK(ses.recording.audio.sample_rate_hz == doctest::Approx(16000.0));
    CHECK_FALSE(ses.recording.meta.session_id.empty());
    CHECK_NOTHROW(validate_session(ses.recording));

    // IMU and audio share a clock origin
    CHECK(ses.recording.imu.t_ns.front() == ses.recording.audio.start_ns);

    // reproducible, and the id is a pure function of the seed
    const SynthSession again = gen_session(specs, cfg, 60.0);
    CHECK(again.recording.meta.session_id == ses.recording.meta.session_id);
    CHECK(again.recording.imu.axes[4] == ses.recording.imu.axes[4]);
    CHECK(again.recording.audio.samples == ses.recording.audio.samples);
}

TEST_CASE("session stroke footprints land at their onsets") {
    SynthConfig cfg;
    cfg.seed = 5;
    const SynthSession ses =
        gen_session({make_spec(StrokeType::FOS, 5.0, 0.0, 0.65, 5.0)}, cfg, 30.0);
    const auto& gy = ses.recording.imu.axes[4];

    std::size_t arg = 0;
    for (std::size_t i = 0; i < gy.size(); ++i)
        if (std::abs(gy[i]) > std::abs(gy[arg])) arg = i;
    // motion peak leads the impact by ~100 ms
    CHECK(std::abs(static_cast<double>(arg) / 100.0 - 4.9) < 0.05);

    // outside the stroke footprint only the noise floor remains
    double outside = 0.0;
    for (std::size_t i = 0; i < gy.size(); ++i)
        if (i < 400 || i >= 600) outside = std::max(outside, std::abs(gy[i]));
    CHECK(outside < 0.3);
}

TEST_CASE("gen_session rejects invalid stroke layouts") {
    SynthConfig cfg;
    CHECK_THROWS_AS(gen_session({make_spec(StrokeType::FOC, 4.0, 0.0, 0.65, 3.0),
                                 make_spec(StrokeType::FOC, 4.0, 0.0, 0.65, 4.0)},
                                cfg, 30.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(gen_session({make_spec(StrokeType::FOC, 4.0, 0.0, 0.65, 8.0),
                                 make_spec(StrokeType::FOC, 4.0, 0.0, 0.65, 3.0)},
                                cfg, 30.0),
                    std::invalid_argument);
    CHECK_THROWS_AS(gen_session({}, cfg, 0.0), std::invalid_argument);
}

TEST_CASE("user styles perturb the signal but keep it deterministic") {
    SynthConfig base;
    base.seed = 9;
    SynthConfig styled = base;
    styled.user_id = "player-a";
    const StrokeSpec spec = make_spec(StrokeType::FOS, 4.0);

    const StrokeSegment plain = gen_stroke(spec, base);
    const StrokeSegment a1 = gen_stroke(spec, styled);
    const StrokeSegment a2 = gen_stroke(spec, styled);
    CHECK(a1.imu[4] == a2.imu[4]);
    CHECK(a1.imu[4] != plain.imu[4]);

    SynthConfig other = base;
    other.user_id = "player-b";
    const StrokeSegment b = gen_stroke(spec, other);
    CHECK(b.imu[4] != a1.imu[4]);

    // style never alters the labels
    CHECK(*a1.labels.stroke_type == *plain.labels.stroke_type);
    CHECK(*a1.labels.quality == doctest::Approx(*plain.labels.quality));
}

TEST_CASE("stroke types separate with a nearest-centroid probe on class features") {
    // If a trivial classifier reaches 90% on held-out strokes, the generated
    // types are comfortably learnable for the real kernel machine.
    constexpr int kPerType = 40;
    std::vector<std::vector<double>> train_x, test_x;
    std::vector<int> train_y, test_y;

    for (int t = 0; t < 4; ++t) {
        for (int k = 0; k < kPerType; ++k) {
            SynthConfig cfg;
            cfg.seed = 7000 + 100 * t + k;
            cfg.user_id = "user" + std::to_string(k % 7);
            const double q = 1.0 + (k % 5);
            const double x = -0.4 + 0.8 * (k % 9) / 8.0;
            const double y = 0.3 + 0.65 * (k % 6) / 5.0;
            const StrokeSegment seg =
                gen_stroke(make_spec(kAllStrokeTypes[t], q, x, y), cfg);
            auto feats = flatten(extract_class_features(seg));
            if (k % 2 == 0) {
                train_x.push_back(std::move(feats));
                train_y.push_back(t);
            } else {
                test_x.push_back(std::move(feats));
                test_y.push_back(t);
            }
        }
    }

    const std::size_t dim = train_x.front().size();
    std::vector<double> mean(dim, 0.0), sd(dim, 0.0);
    for (const auto& r : train_x)
        for (std::size_t i = 0; i < dim; ++i) mean[i] += r[i];
    for (auto& m : mean) m /= static_cast<double>(train_x.size());
    for (const auto& r : train_x)
        for (std::size_t i = 0; i < dim; ++i) sd[i] += (r[i] - mean[i]) * (r[i] - mean[i]);
    for (auto& s : sd) s = std::sqrt(s / static_cast<double>(train_x.size()));

    std::vector<std::vector<double>> centroid(4, std::vector<double>(dim, 0.0));
    std::vector<int> count(4, 0);
    for (std::size_t r = 0; r < train_x.size(); ++r) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double z = sd[i] > 0.0 ? (train_x[r][i] - mean[i]) / sd[i] : 0.0;
            centroid[train_y[r]][i] += z;
        }
        ++count[train_y[r]];
    }
    for (int t = 0; t < 4; ++t)
        for (auto& v : centroid[t]) v /= static_cast<double>(count[t]);

    int correct = 0;
    for (std::size_t r = 0; r < test_x.size(); ++r) {
        int best = -1;
        double best_d = 0.0;
        for (int t = 0; t < 4; ++t) {
            double d = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                const double z = sd[i] > 0.0 ? (test_x[r][i] - mean[i]) / sd[i] : 0.0;
                d += (z - centroid[t][i]) * (z - centroid[t][i]);
            }
            if (best < 0 || d < best_d) {
                best = t;
                best_d = d;
            }
        }
        if (best == test_y[r]) ++correct;
    }
    const double accuracy = static_cast<double>(correct) / static_cast<double>(test_x.size());
    INFO("nearest-centroid accuracy ", accuracy);
    CHECK(accuracy >= 0.90);
}

TEST_CASE("stroke_key distinguishes specs and ignores nothing") {
    const StrokeSpec a = make_spec(StrokeType::FOC, 4.0, 0.0, 0.65, 1.0);
    CHECK(stroke_key(a) == stroke_key(a));
    StrokeSpec b = a;
    b.quality = 4.5;
    CHECK(stroke_key(a) != stroke_key(b));
    b = a;
    b.impact.x = 0.01;
    CHECK(stroke_key(a) != stroke_key(b));
    b = a;
    b.is_air_swing = true;
    CHECK(stroke_key(a) != stroke_key(b));
    b = a;
    b.onset_time_s = 1.5;
    CHECK(stroke_key(a) != stroke_key(b));
}
