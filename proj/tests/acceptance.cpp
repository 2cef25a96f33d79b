// Release acceptance gates. Each numbered gate re-verifies one subsystem from
// the outside — independent oracles, end-to-end flows, and the documented
// numeric tolerances — and prints exactly one [PASS]/[FAIL] line. The process
// exits nonzero when any gate fails. Run with no arguments for all gates, or
// pass gate numbers to run a subset (useful when iterating on one).

#include "bsense/analytics.hpp"
#include "bsense/dataset.hpp"
#include "bsense/errors.hpp"
#include "bsense/features.hpp"
#include "bsense/models.hpp"
#include "bsense/net.hpp"
#include "bsense/pipeline.hpp"
#include "bsense/report.hpp"
#include "bsense/segmentation.hpp"
#include "bsense/server.hpp"
#include "bsense/session.hpp"
#include "bsense/signal.hpp"
#include "bsense/smo.hpp"
#include "bsense/store.hpp"
#include "bsense/stroke_types.hpp"
#include "bsense/synth.hpp"
#include "bsense/util.hpp"

#include "support/qp_oracle.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

using namespace bsense;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list args;
    va_start(args, f);
    std::vsnprintf(buf, sizeof buf, f, args);
    va_end(args);
    return buf;
}

// Failure accumulator for one gate; `detail` feeds the [PASS] line.
struct Gate {
    std::vector<std::string> failures;
    std::vector<std::string> notes;

    void require(bool ok, std::string what) {
        if (!ok) failures.push_back(std::move(what));
    }
    void note(std::string s) { notes.push_back(std::move(s)); }
};

// Fresh scratch directory, removed when the guard dies.
struct TempDir {
    fs::path path;

    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path = fs::temp_directory_path() /
               ("bsense-accept-" + tag + "-" + std::to_string(::getpid()) + "-" +
                std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::int64_t seconds_ns(double s) {
    return static_cast<std::int64_t>(std::llround(s * 1e9));
}

Signal1D make_tone(double freq_hz, double rate_hz, std::size_t n) {
    Signal1D s;
    s.sample_rate_hz = rate_hz;
    s.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        s.samples.push_back(std::sin(2.0 * kPi * freq_hz * static_cast<double>(i) / rate_hz));
    return s;
}

// Amplitude of the `freq_hz` component by projection, skipping the filter
// transient at the front.
double tone_amplitude(const Signal1D& s, double freq_hz, std::size_t skip) {
    double cs = 0.0, sn = 0.0;
    const std::size_t n = s.size();
    for (std::size_t i = skip; i < n; ++i) {
        const double ph = 2.0 * kPi * freq_hz * static_cast<double>(i) / s.sample_rate_hz;
        cs += s.samples[i] * std::cos(ph);
        sn += s.samples[i] * std::sin(ph);
    }
    return 2.0 * std::hypot(cs, sn) / static_cast<double>(n - skip);
}

StrokeSpec spec_at(double onset, StrokeType type, double quality, double x, double y,
                   bool air = false) {
    StrokeSpec s;
    s.type = type;
    s.quality = quality;
    s.impact = ImpactPoint{x, y};
    s.onset_time_s = onset;
    s.is_air_swing = air;
    return s;
}

// A varied 60 s session: 10 contact strokes and 3 air swings.
SynthSession varied_session(std::uint64_t seed) {
    std::vector<StrokeSpec> specs;
    for (int k = 0; k < 13; ++k) {
        const bool air = (k == 2 || k == 6 || k == 10);
        specs.push_back(spec_at(3.0 + 3.5 * k, kAllStrokeTypes[k % 4], 1.0 + k % 5,
                                -0.4 + 0.8 * (k % 9) / 8.0, 0.3 + 0.65 * (k % 6) / 5.0, air));
    }
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.user_id = "user" + std::to_string(seed % 5);
    return gen_session(specs, cfg, 60.0);
}

// One labeled corpus entry backed by a generated stroke.
CorpusEntry make_entry(StrokeType type, double quality, double x, double y,
                       std::uint64_t seed, const std::string& user, std::size_t source) {
    StrokeSpec spec = spec_at(1.0, type, quality, x, y);
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.user_id = user;
    CorpusEntry e;
    e.segment = gen_stroke(spec, cfg);
    e.user_id = user;
    e.source_index = source;
    return e;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename Pred>
bool wait_for(Pred pred, double timeout_s = 10.0) {
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::duration<double>(timeout_s);
    while (std::chrono::steady_clock::now() < deadline) {
        if (pred()) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    return pred();
}

// ---------------------------------------------------------------------------
// Gate 1: DSP primitives hold their documented identities.
// ---------------------------------------------------------------------------

void gate_dsp(Gate& g) {
    // Low-pass gain at the cutoff is 1/sqrt(2) within 1%, independent of order.
    double worst_gain_err = 0.0;
    for (int order : {2, 4}) {
        const Signal1D tone = make_tone(20.0, 100.0, 4000);
        const Signal1D filtered = lowpass_butterworth(tone, 20.0, order);
        const double gain = tone_amplitude(filtered, 20.0, 1000);
        const double rel = std::abs(gain * std::sqrt(2.0) - 1.0);
        worst_gain_err = std::max(worst_gain_err, rel);
        g.require(rel <= 0.01,
                  fmt("cutoff gain order %d: %.6f vs 1/sqrt(2), rel err %.4f", order, gain, rel));
    }
    g.note(fmt("cutoff gain err %.2e", worst_gain_err));

    // Energy conservation (time domain vs one-sided spectrum) to 1e-9 relative
    // on assorted lengths up to 4096, power-of-two and not.
    Rng rng(4242);
    double worst_parseval = 0.0;
    for (std::size_t n : {100u, 377u, 1024u, 2500u, 4096u}) {
        Signal1D s;
        s.sample_rate_hz = 100.0;
        double energy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s.samples.push_back(rng.normal());
            energy += s.samples.back() * s.samples.back();
        }
        const Spectrum spec = fft_magnitude(s);
        double spec_energy = spec.magnitudes[0] * spec.magnitudes[0];
        const bool even = n % 2 == 0;
        for (std::size_t k = 1; k < spec.size(); ++k) {
            const double m2 = spec.magnitudes[k] * spec.magnitudes[k];
            spec_energy += (even && k == n / 2) ? m2 : 2.0 * m2;
        }
        const double residual = std::abs(spec_energy / static_cast<double>(n) - energy) / energy;
        worst_parseval = std::max(worst_parseval, residual);
        g.require(residual < 1e-9, fmt("energy residual at n=%zu: %.3e", n, residual));
    }
    g.note(fmt("energy residual %.1e", worst_parseval));

    // Piecewise-cubic resampling reproduces a cubic polynomial at interior
    // points to 1e-9; the zero-curvature end condition only distorts the ends.
    Signal1D poly_sig;
    poly_sig.sample_rate_hz = 100.0;
    const auto poly = [](double t) { return 2.0 * t * t * t - 3.0 * t * t + 0.5 * t + 1.0; };
    for (std::size_t i = 0; i < 101; ++i)
        poly_sig.samples.push_back(poly(static_cast<double>(i) / 100.0));
    const Signal1D up = resample_cubic_spline(poly_sig, 500.0);
    double worst_spline = 0.0;
    for (std::size_t j = 0; j < up.size(); ++j) {
        const double t = static_cast<double>(j) / 500.0;
        if (t < 0.3 || t > 0.7) continue;
        worst_spline = std::max(worst_spline, std::abs(up.samples[j] - poly(t)));
    }
    g.require(worst_spline <= 1e-9, fmt("interior cubic reproduction err %.3e", worst_spline));
    g.note(fmt("spline err %.1e", worst_spline));

    // Time-frequency geometry: a 100-sample window under the analyzer's
    // standard 50-sample window / 6-sample hop yields a 9x26 map.
    Signal1D w;
    w.sample_rate_hz = 500.0;
    w.samples.assign(100, 0.0);
    const TimeFreqMap m = stft(w, 50, 6);
    g.require(m.frames == 9 && m.bins == 26,
              fmt("stft geometry: got %zux%zu, want 9x26", m.frames, m.bins));
    g.require(kImpactFrames == 9 && kImpactBins == 26, "published map shape constants changed");
    g.note("stft 9x26");
}

// ---------------------------------------------------------------------------
// Gate 2: segmentation recall / false positives across 50 seeded sessions.
// ---------------------------------------------------------------------------

void gate_segmentation(Gate& g) {
    std::size_t total_truth = 0, recalled = 0, false_pos = 0;
    const std::int64_t tolerance = seconds_ns(0.2);
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const SynthSession ses = varied_session(seed);
        const std::vector<StrokeSegment> segments = segment_session(ses.recording);
        // Greedy one-to-one matching of detections to contact truths.
        std::vector<bool> used(segments.size(), false);
        for (const StrokeSpec& spec : ses.truth) {
            if (spec.is_air_swing) continue;
            ++total_truth;
            const std::int64_t t = ses.recording.audio.start_ns + seconds_ns(spec.onset_time_s);
            for (std::size_t i = 0; i < segments.size(); ++i) {
                if (!used[i] && std::llabs(segments[i].impact_time_ns - t) <= tolerance) {
                    used[i] = true;
                    ++recalled;
                    break;
                }
            }
        }
        for (bool u : used)
            if (!u) ++false_pos;
    }
    g.require(total_truth == 500, fmt("expected 500 contact truths, got %zu", total_truth));
    const double recall = static_cast<double>(recalled) / static_cast<double>(total_truth);
    // False positives counted per true stroke, matching the recall basis.
    const double fp_rate = static_cast<double>(false_pos) / static_cast<double>(total_truth);
    g.require(recall >= 0.99, fmt("recall %.4f < 0.99", recall));
    g.require(fp_rate <= 0.01, fmt("false-positive rate %.4f > 0.01", fp_rate));
    g.note(fmt("recall %.3f, fp rate %.3f over 50 sessions", recall, fp_rate));
}

// ---------------------------------------------------------------------------
// Gate 3: the working-set solver agrees with a brute-force QP oracle on tiny
// problems, and its objective trace is monotone.
// ---------------------------------------------------------------------------

void gate_solver(Gate& g) {
    Rng rng(31337);
    int problems = 0;
    double worst_svc = 0.0, worst_svr = 0.0;

    // Classification duals: random 2-class blobs of 4..8 samples.
    for (int p = 0; p < 12; ++p) {
        const std::size_t n = 4 + static_cast<std::size_t>(p % 5);
        Matrix X;
        std::vector<int> labels;
        std::vector<double> ysign;
        for (std::size_t i = 0; i < n; ++i) {
            const bool first = i < (n + 1) / 2;
            X.push_back({rng.normal(first ? -1.0 : 1.0, 0.6), rng.normal(0.0, 0.6)});
            labels.push_back(first ? 0 : 1);
            ysign.push_back(first ? 1.0 : -1.0);
        }
        TrainConfig cfg;
        cfg.C = std::array<double, 3>{1.0, 5.0, 20.0}[p % 3];
        cfg.gamma = std::array<double, 3>{0.4, 1.0, 1.7}[(p + 1) % 3];
        cfg.tolerance = 1e-8;
        cfg.max_passes = 100000;
        const SvmModel model = train_svc(X, labels, cfg);

        // The oracle solves the same dual on the same standardized features.
        Matrix Xs;
        for (const auto& r : X) Xs.push_back(apply_scaler(model.scaler, r));
        std::vector<std::vector<double>> Q(n, std::vector<double>(n));
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                Q[i][j] = ysign[i] * ysign[j] * kernel_eval(model.kernel, Xs[i], Xs[j]);
        const auto oracle = qp_oracle::solve(Q, std::vector<double>(n, -1.0), ysign, cfg.C);

        for (int t = 0; t < 5; ++t) {
            const std::vector<double> x = {rng.uniform(-2.0, 2.0), rng.uniform(-1.5, 1.5)};
            const std::vector<double> xs = apply_scaler(model.scaler, x);
            double want = oracle.bias;
            for (std::size_t i = 0; i < n; ++i)
                want += oracle.alpha[i] * ysign[i] * kernel_eval(model.kernel, Xs[i], xs);
            const double got = predict_svc(model, x).pair_decisions[0];
            const double err = std::abs(got - want);
            worst_svc = std::max(worst_svc, err);
            g.require(err <= 1e-3 * std::max(1.0, std::abs(want)),
                      fmt("svc problem %d: decision %.6f vs oracle %.6f", p, got, want));
        }

        // Objective trace on the same dual: the minimized objective never
        // increases (equivalently, the maximized dual never decreases).
        if (p % 4 == 0) {
            std::vector<double> K(n * n);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < n; ++j) K[i * n + j] = Q[i][j];
            smo::DenseQ dq(n, std::move(K));
            const auto res =
                smo::solve(dq, std::vector<double>(n, -1.0), ysign, cfg.C, 1e-8, 100000, true);
            g.require(res.converged, fmt("svc problem %d: solver did not converge", p));
            for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
                g.require(res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-9,
                          fmt("svc problem %d: objective rose at step %zu", p, i));
        }
        ++problems;
    }

    // Regression duals: random 1-D curves of 4..8 samples, 2n-variable
    // expansion for the oracle.
    for (int p = 0; p < 12; ++p) {
        const std::size_t n = 4 + static_cast<std::size_t>((p + 2) % 5);
        Matrix X;
        std::vector<double> y;
        for (std::size_t i = 0; i < n; ++i) {
            const double x = rng.uniform(0.0, 3.0);
            X.push_back({x});
            y.push_back(std::sin(x) + 0.4 * x + rng.normal(0.0, 0.05));
        }
        TrainConfig cfg;
        cfg.C = std::array<double, 3>{2.0, 10.0, 50.0}[p % 3];
        cfg.gamma = std::array<double, 3>{0.5, 1.0, 2.0}[(p + 2) % 3];
        cfg.epsilon = std::array<double, 3>{0.02, 0.05, 0.1}[p % 3];
        cfg.tolerance = 1e-8;
        cfg.max_passes = 100000;
        const SvrModel model = train_svr(X, y, cfg);

        Matrix Xs;
        for (const auto& r : X) Xs.push_back(apply_scaler(model.scaler, r));
        std::vector<std::vector<double>> Q(2 * n, std::vector<double>(2 * n));
        std::vector<double> pvec(2 * n), ys(2 * n);
        for (std::size_t i = 0; i < n; ++i) {
            pvec[i] = cfg.epsilon - y[i];
            ys[i] = 1.0;
            pvec[n + i] = cfg.epsilon + y[i];
            ys[n + i] = -1.0;
        }
        for (std::size_t i = 0; i < 2 * n; ++i)
            for (std::size_t j = 0; j < 2 * n; ++j) {
                const double k = kernel_eval(model.kernel, Xs[i % n], Xs[j % n]);
                Q[i][j] = (i < n ? 1.0 : -1.0) * (j < n ? 1.0 : -1.0) * k;
            }
        // The expanded regression dual is flatter than the classification one,
        // so the projected-gradient reference needs a deeper iteration budget
        // to hit the 1e-3 agreement window.
        const auto oracle = qp_oracle::solve(Q, pvec, ys, cfg.C, 2'000'000);

        for (int t = 0; t < 5; ++t) {
            const std::vector<double> x = {rng.uniform(-0.2, 3.2)};
            const std::vector<double> xs = apply_scaler(model.scaler, x);
            double want = oracle.bias;
            for (std::size_t i = 0; i < n; ++i)
                want += (oracle.alpha[i] - oracle.alpha[n + i]) *
                        kernel_eval(model.kernel, Xs[i], xs);
            const double got = predict_svr(model, x);
            const double err = std::abs(got - want);
            worst_svr = std::max(worst_svr, err);
            g.require(err <= 1e-3 * std::max(1.0, std::abs(want)),
                      fmt("svr problem %d: prediction %.6f vs oracle %.6f", p, got, want));
        }

        if (p % 4 == 0) {
            std::vector<double> K(4 * n * n);
            for (std::size_t i = 0; i < 2 * n; ++i)
                for (std::size_t j = 0; j < 2 * n; ++j) K[i * 2 * n + j] = Q[i][j];
            smo::DenseQ dq(2 * n, std::move(K));
            const auto res = smo::solve(dq, pvec, ys, cfg.C, 1e-8, 100000, true);
            g.require(res.converged, fmt("svr problem %d: solver did not converge", p));
            for (std::size_t i = 1; i < res.objective_trace.size(); ++i)
                g.require(res.objective_trace[i] <= res.objective_trace[i - 1] + 1e-9,
                          fmt("svr problem %d: objective rose at step %zu", p, i));
        }
        ++problems;
    }
    g.note(fmt("%d problems, worst dec err %.2e (svc) / %.2e (svr)", problems, worst_svc,
               worst_svr));
}

// ---------------------------------------------------------------------------
// Gate 4: classifier generalization on an augmented 4-class corpus.
// ---------------------------------------------------------------------------

void gate_classifier(Gate& g) {
    Corpus corpus;
    std::size_t source = 0;
    for (int c = 0; c < 4; ++c) {
        for (int k = 0; k < 200; ++k) {
            const std::string user = "u" + std::to_string(k % 12);
            const double quality = 1.0 + 0.5 * (k % 9);
            const double x = -0.35 + 0.7 * (k % 7) / 6.0;
            const double y = 0.40 + 0.50 * ((k / 7) % 7) / 6.0;
            const std::uint64_t seed = 40000 + static_cast<std::uint64_t>(c) * 1000 + k;
            corpus.entries.push_back(
                make_entry(kAllStrokeTypes[c], quality, x, y, seed, user, source++));
        }
    }
    Rng aug_rng(777);
    augment_corpus(corpus, aug_rng);
    g.require(corpus.size() == 3200, fmt("augmented size %zu != 3200", corpus.size()));

    const EvalConfig cfg;
    const EvalResult kfold = evaluate(corpus, EvalTask::Classify, SplitKind::KFold5, cfg);
    const EvalResult users = evaluate(corpus, EvalTask::Classify, SplitKind::Leave3Users, cfg);
    g.require(kfold.mean.accuracy >= 0.95,
              fmt("5-fold accuracy %.4f < 0.95", kfold.mean.accuracy));
    g.require(users.mean.accuracy >= 0.90,
              fmt("leave-3-users-out accuracy %.4f < 0.90", users.mean.accuracy));
    g.note(fmt("3200 strokes: 5-fold acc %.3f, user-held-out acc %.3f", kfold.mean.accuracy,
               users.mean.accuracy));
}

// ---------------------------------------------------------------------------
// Gate 5: per-type quality regression on held-out strokes, and exact
// assessor-offset invariance of the rating normalizer.
// ---------------------------------------------------------------------------

void gate_rating(Gate& g) {
    const EvalConfig defaults;
    std::array<SvrModel, 4> raters;
    std::array<double, 4> mae{};

    for (int t = 0; t < 4; ++t) {
        const StrokeType type = kAllStrokeTypes[t];
        Matrix X;
        std::vector<double> y;
        for (int k = 0; k < 96; ++k) {
            const std::string user = "v" + std::to_string(k % 6);
            const double quality = 1.0 + 4.0 * (k % 16) / 15.0;
            const double x = -0.3 + 0.6 * (k % 5) / 4.0;
            const double yy = 0.45 + 0.4 * ((k / 5) % 5) / 4.0;
            const std::uint64_t seed = 50000 + static_cast<std::uint64_t>(t) * 1000 + k;
            const CorpusEntry e = make_entry(type, quality, x, yy, seed, user, 0);
            X.push_back(flatten(extract_rating_input(e.segment)));
            y.push_back(quality);
        }
        raters[t] = train_svr(X, y, defaults.rate_cfg, rating_schema_hash(), to_string(type));

        double abs_err = 0.0;
        const int probes = 20;
        for (int k = 0; k < probes; ++k) {
            const std::string user = "v" + std::to_string(k % 6);
            const double quality = 1.0 + 4.0 * ((k * 7) % 20) / 19.0;
            const double x = -0.25 + 0.5 * (k % 4) / 3.0;
            const double yy = 0.5 + 0.3 * (k % 3) / 2.0;
            const std::uint64_t seed = 60000 + static_cast<std::uint64_t>(t) * 1000 + k;
            const CorpusEntry e = make_entry(type, quality, x, yy, seed, user, 0);
            const double pred =
                clamp_quality(predict_svr(raters[t], flatten(extract_rating_input(e.segment))));
            abs_err += std::abs(pred - quality);
        }
        mae[t] = abs_err / probes;
        g.require(mae[t] <= 0.5, fmt("%s rating MAE %.3f > 0.5", to_string(type), mae[t]));
    }

    // A constant per-assessor offset must not change the normalized targets.
    Rng rng(880);
    std::vector<double> a(24);
    for (double& v : a) v = 1.0 + 3.0 * rng.uniform(); // in [1, 4] so +1 stays in range
    std::vector<double> b = a;
    for (double& v : b) v += 1.0;
    const NormalizedRatings solo = normalize_ratings({a});
    const NormalizedRatings pair = normalize_ratings({a, b});
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        worst = std::max(worst, std::abs(solo.targets[i] - pair.targets[i]));
    g.require(worst <= 1e-12, fmt("offset bias leaked into targets: max delta %.2e", worst));

    g.note(fmt("MAE BOC %.2f FOC %.2f FOS %.2f FOD %.2f; offset delta %.1e", mae[0], mae[1],
               mae[2], mae[3], worst));
}

// ---------------------------------------------------------------------------
// Gate 6: impact-point regression over a grid covering the face.
// ---------------------------------------------------------------------------

void gate_impact(Gate& g) {
    const EvalConfig defaults;
    Matrix X;
    std::vector<double> tx, ty;
    std::size_t seed = 80000;
    for (int rep = 0; rep < 2; ++rep) {
        for (int ix = 0; ix < 7; ++ix) {
            for (int iy = 0; iy < 7; ++iy) {
                const double x = -0.45 + 0.9 * ix / 6.0;
                const double y = 0.35 + 0.6 * iy / 6.0;
                const StrokeType type = kAllStrokeTypes[(ix + iy + rep) % 4];
                const double q = 2.0 + ((ix + rep) % 4);
                const CorpusEntry e = make_entry(type, q, x, y, seed++, "w0", 0);
                X.push_back(flatten(extract_impact_features(e.segment, false)));
                tx.push_back(x);
                ty.push_back(y);
            }
        }
    }
    const SvrModel mx = train_svr(X, tx, defaults.impact_cfg, impact_schema_hash(false), "x");
    const SvrModel my = train_svr(X, ty, defaults.impact_cfg, impact_schema_hash(false), "y");

    // Probe points interleave the training grid, so none coincide with it.
    double err_x = 0.0, err_y = 0.0;
    int probes = 0;
    bool in_bounds = true;
    for (int ix = 0; ix < 6; ++ix) {
        for (int iy = 0; iy < 6; ++iy) {
            const double x = -0.40 + 0.8 * ix / 5.0;
            const double y = 0.40 + 0.5 * iy / 5.0;
            const StrokeType type = kAllStrokeTypes[(ix * 2 + iy) % 4];
            const CorpusEntry e = make_entry(type, 3.0 + (iy % 3) * 0.5, x, y, seed++, "w1", 0);
            const ImpactPoint pred = estimate_impact(e.segment, mx, my, false);
            err_x += std::abs(pred.x - x);
            err_y += std::abs(pred.y - y);
            in_bounds = in_bounds && pred.x >= -0.5 && pred.x <= 0.5 && pred.y >= 0.0 &&
                        pred.y <= 1.0;
            ++probes;
        }
    }
    err_x /= probes;
    err_y /= probes;
    g.require(err_x <= 0.15, fmt("impact x MAE %.3f > 0.15", err_x));
    g.require(err_y <= 0.15, fmt("impact y MAE %.3f > 0.15", err_y));
    g.require(in_bounds, "a prediction escaped the face bounds");
    g.note(fmt("x MAE %.3f, y MAE %.3f over %d held-out points", err_x, err_y, probes));
}

// ---------------------------------------------------------------------------
// Gate 7: wire codec bit-exactness, loopback persistence, clock sync.
// ---------------------------------------------------------------------------

void gate_streaming(Gate& g) {
    using namespace bsense::net;

    // 10,000 random frames round-trip bit-exactly.
    Rng rng(20240901);
    bool frames_ok = true;
    for (int i = 0; i < 10000 && frames_ok; ++i) {
        Frame f;
        f.kind = static_cast<StreamKind>(rng.uniform_int(0, 3));
        f.device_ts_ns = rng.next_u64();
        f.payload.resize(static_cast<std::size_t>(rng.uniform_int(0, 256)));
        for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng.uniform_int(0, 255));
        const std::vector<std::uint8_t> wire = encode_frame(f);
        std::size_t consumed = 0;
        const auto back = decode_frame(wire.data(), wire.size(), consumed);
        frames_ok = back.has_value() && consumed == wire.size() && back->kind == f.kind &&
                    back->device_ts_ns == f.device_ts_ns && back->payload == f.payload;
        if (!frames_ok) g.require(false, fmt("frame %d failed to round-trip bit-exactly", i));
    }

    // Loopback replay with clock sync persists every sample value bit-identically.
    {
        TempDir tmp("loopback");
        SessionStore store(tmp.path.string());
        StreamServer server(store);
        server.start();
        g.require(server.port() != 0, "server failed to bind a loopback port");

        std::vector<StrokeSpec> specs;
        for (int k = 0; k < 4; ++k)
            specs.push_back(spec_at(2.0 + 3.0 * k, kAllStrokeTypes[k], 2.0 + k,
                                    -0.1 + 0.1 * k, 0.5 + 0.1 * k));
        SynthConfig cfg;
        cfg.seed = 2718;
        const SynthSession ses = gen_session(specs, cfg, 15.0);

        ReplayOptions opts;
        opts.speed = 4000.0;
        opts.heartbeat_period_s = 1.0;
        const ReplayResult res =
            replay_session(ses.recording, "127.0.0.1", server.port(), opts);
        g.require(res.stop_acked, "server did not acknowledge the replayed session");
        g.require(wait_for([&] { return server.stats().sessions_completed == 1; }),
                  "session never completed on the server");

        const SessionRecording back = store.load_session(ses.recording.meta.session_id);
        bool identical = back.imu.size() == ses.recording.imu.size() &&
                         back.audio.samples == ses.recording.audio.samples;
        for (std::size_t a = 0; a < kAxisCount && identical; ++a)
            identical = back.imu.axes[a] == ses.recording.imu.axes[a];
        g.require(identical, "persisted sample values differ from the source recording");
        server.stop();
    }

    // 1,000 jittered NTP-style exchanges: the offset estimate lands within
    // rtt/2 of the true offset at least 95% of the time.
    Rng jrng(555);
    const std::int64_t true_offset = 3'000'000;
    const std::uint64_t proc = 100'000;
    int within = 0;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t t1 =
            1'600'000'000'000'000'000ull + static_cast<std::uint64_t>(i) * 1'000'000'000ull;
        const auto d1 = static_cast<std::uint64_t>(jrng.uniform(0.0, 20e6));
        const auto d2 = static_cast<std::uint64_t>(jrng.uniform(0.0, 20e6));
        const std::uint64_t t2 = t1 + static_cast<std::uint64_t>(true_offset) + d1;
        const std::uint64_t t3 = t2 + proc;
        const std::uint64_t t4 = t1 + d1 + proc + d2;
        const auto s = estimate_offset(t1, t2, t3, t4);
        if (!s.has_value()) continue;
        if (static_cast<double>(std::llabs(s->offset_ns - true_offset)) <=
            static_cast<double>(s->rtt_ns) / 2.0)
            ++within;
    }
    g.require(within >= 950, fmt("offset within rtt/2 in only %d/1000 exchanges", within));
    g.note(fmt("10k frames bit-exact, loopback bit-identical, offset ok %d/1000", within));
}

// ---------------------------------------------------------------------------
// Gate 8: the advice rules fire exactly as documented over the whole
// (type, region quadrant, quality band) table.
// ---------------------------------------------------------------------------

void gate_advice(Gate& g) {
    const AdviceRuleTable& rules = default_advice_rules();
    std::set<std::string> fired;
    int cells = 0;

    for (StrokeType type : kAllStrokeTypes) {
        const OptimalRegion r = optimal_region(type);
        // Representative coordinates: below / inside / above each band.
        const std::array<double, 3> xs = {r.x_lo - 0.1, 0.5 * (r.x_lo + r.x_hi), r.x_hi + 0.1};
        const std::array<double, 3> ys = {r.y_lo - 0.1, 0.5 * (r.y_lo + r.y_hi), r.y_hi + 0.1};
        for (int xi = 0; xi < 3; ++xi) {
            for (int yi = 0; yi < 3; ++yi) {
                for (double quality : {2.0, 4.0}) {
                    // The documented firing order: vertical, lateral,
                    // technique below 3.0, praise only when nothing fired.
                    std::vector<std::string> want;
                    if (yi == 0) want.push_back(rules.contact_higher);
                    if (yi == 2) want.push_back(rules.contact_lower);
                    if (xi == 0) want.push_back(rules.shift_right);
                    if (xi == 2) want.push_back(rules.shift_left);
                    if (quality < 3.0)
                        want.push_back(rules.technique[static_cast<std::size_t>(type)]);
                    if (want.empty()) want.push_back(rules.praise);

                    const std::vector<std::string> got = generate_advice(
                        type, quality, ImpactPoint{xs[xi], ys[yi]}, r, rules);
                    g.require(got == want,
                              fmt("%s cell x=%d y=%d q=%.0f fired %zu rule(s), expected %zu",
                                  to_string(type), xi, yi, quality, got.size(), want.size()));
                    for (const std::string& s : got) fired.insert(s);
                    ++cells;
                }
            }
        }
    }
    g.require(cells == 72, fmt("covered %d cells, expected 72", cells));
    // Exhaustiveness: every rule text fired somewhere in the table.
    std::size_t distinct = 4 /* location */ + 4 /* technique */ + 1 /* praise */;
    g.require(fired.size() == distinct,
              fmt("only %zu/%zu distinct rule texts fired", fired.size(), distinct));

    // A smash striking inside the vertical band [0.50, 0.75] gets no location
    // advice anywhere across the band (laterally centered).
    const OptimalRegion fos = optimal_region(StrokeType::FOS);
    g.require(fos.y_lo == 0.50 && fos.y_hi == 0.75, "smash vertical band moved");
    bool clean = true;
    for (int k = 0; k <= 5; ++k) {
        const double y = 0.50 + 0.25 * k / 5.0; // endpoints land exactly on the band edges
        for (double quality : {2.0, 4.5}) {
            const auto advice =
                generate_advice(StrokeType::FOS, quality, ImpactPoint{0.0, y}, fos, rules);
            for (const std::string& s : advice)
                clean = clean && s != rules.contact_higher && s != rules.contact_lower &&
                        s != rules.shift_right && s != rules.shift_left;
        }
    }
    g.require(clean, "location advice fired inside the smash sweet band");
    g.note("72 cells exact, all 9 rule texts reachable, smash band clean");
}

// ---------------------------------------------------------------------------
// Gate 9: rating-agreement statistic (two-way consistency, k raters).
// ---------------------------------------------------------------------------

void gate_agreement(Gate& g) {
    // Assessors that differ by constant offsets are perfectly consistent: the
    // statistic is exactly 1.0, not merely close.
    {
        Rng rng(66);
        std::vector<std::vector<double>> m(12, std::vector<double>(4));
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double base = rng.uniform(1.0, 4.0);
            const std::array<double, 4> offsets = {0.0, 0.7, -0.3, 1.9};
            for (std::size_t j = 0; j < 4; ++j) m[i][j] = base + offsets[j];
        }
        const double icc = icc_consistency_k(m);
        g.require(icc == 1.0, fmt("perfect consistency gave %.17g, want exactly 1.0", icc));
    }
    {
        const std::vector<std::vector<double>> m = {{1.0, 2.0}, {3.0, 4.0}, {2.5, 3.5}};
        const double icc = icc_consistency_k(m);
        g.require(icc == 1.0, fmt("2-rater offset matrix gave %.17g, want 1.0", icc));
    }

    // Classic worked example: 6 subjects x 4 raters. The expected value is
    // hand-computed from the two-way mean squares (MS_rows - MS_err)/MS_rows.
    const std::vector<std::vector<double>> classic = {
        {9.0, 2.0, 5.0, 8.0}, {6.0, 1.0, 3.0, 2.0}, {8.0, 4.0, 6.0, 8.0},
        {7.0, 1.0, 2.0, 6.0}, {10.0, 5.0, 6.0, 9.0}, {6.0, 2.0, 4.0, 7.0}};
    const double got = icc_consistency_k(classic);
    const double want = 0.9093155423770697;
    g.require(std::abs(got - want) <= 1e-10,
              fmt("worked example: %.16f vs %.16f (err %.2e)", got, want, std::abs(got - want)));
    g.note(fmt("additive matrices exactly 1.0; worked example err %.1e", std::abs(got - want)));
}

// ---------------------------------------------------------------------------
// Gate 10: the full chain — generate, stream over TCP, persist, analyze,
// render — preserves the stroke count and renders deterministically.
// ---------------------------------------------------------------------------

ModelBundle train_small_bundle() {
    const EvalConfig defaults;
    ModelBundle bundle;

    Matrix Xc;
    std::vector<int> yc;
    std::uint64_t seed = 70000;
    for (int c = 0; c < 4; ++c)
        for (int k = 0; k < 12; ++k) {
            const CorpusEntry e =
                make_entry(kAllStrokeTypes[c], 1.5 + (k % 4), -0.2 + 0.1 * (k % 5),
                           0.45 + 0.1 * (k % 4), seed++, "b" + std::to_string(k % 3), 0);
            Xc.push_back(flatten(extract_class_features(e.segment)));
            yc.push_back(c);
        }
    bundle.classifier = train_svc(Xc, yc, defaults.classify_cfg, class_schema_hash());

    for (int c = 0; c < 4; ++c) {
        Matrix Xr;
        std::vector<double> yr;
        for (int k = 0; k < 12; ++k) {
            const double q = 1.0 + 4.0 * k / 11.0;
            const CorpusEntry e = make_entry(kAllStrokeTypes[c], q, -0.1 + 0.05 * (k % 5),
                                             0.5 + 0.08 * (k % 4), seed++, "b0", 0);
            Xr.push_back(flatten(extract_rating_input(e.segment)));
            yr.push_back(q);
        }
        bundle.raters[kAllStrokeTypes[c]] = train_svr(Xr, yr, defaults.rate_cfg,
                                                      rating_schema_hash(),
                                                      to_string(kAllStrokeTypes[c]));
    }

    Matrix Xi;
    std::vector<double> ix, iy;
    for (int gx = 0; gx < 5; ++gx)
        for (int gy = 0; gy < 5; ++gy) {
            const double x = -0.4 + 0.8 * gx / 4.0;
            const double y = 0.4 + 0.5 * gy / 4.0;
            const CorpusEntry e =
                make_entry(kAllStrokeTypes[(gx + gy) % 4], 3.0, x, y, seed++, "b1", 0);
            Xi.push_back(flatten(extract_impact_features(e.segment, false)));
            ix.push_back(x);
            iy.push_back(y);
        }
    bundle.impact_x = train_svr(Xi, ix, defaults.impact_cfg, impact_schema_hash(false), "x");
    bundle.impact_y = train_svr(Xi, iy, defaults.impact_cfg, impact_schema_hash(false), "y");
    bundle.audio_fusion = false;
    return bundle;
}

void gate_end_to_end(Gate& g) {
    using namespace bsense::net;
    const SynthSession ses = varied_session(9876);
    std::size_t truth_contacts = 0;
    for (const StrokeSpec& s : ses.truth)
        if (!s.is_air_swing) ++truth_contacts;

    TempDir tmp("e2e");
    SessionStore store(tmp.path.string());
    StreamServer server(store);
    server.start();
    ReplayOptions opts;
    opts.speed = 2000.0;
    opts.heartbeat_period_s = 1.0;
    const ReplayResult res = replay_session(ses.recording, "127.0.0.1", server.port(), opts);
    g.require(res.stop_acked, "server did not acknowledge the streamed session");
    g.require(wait_for([&] { return server.stats().sessions_completed == 1; }),
              "streamed session never completed");
    server.stop();

    const SessionRecording back = store.load_session(ses.recording.meta.session_id);
    const ModelBundle bundle = train_small_bundle();
    const SessionReport report = analyze_session(back, bundle);
    g.require(report.failures.empty(),
              fmt("%zu strokes failed analysis", report.failures.size()));
    g.require(report.strokes.size() == truth_contacts,
              fmt("analyzed %zu strokes, ground truth has %zu", report.strokes.size(),
                  truth_contacts));

    // Rendering is deterministic: repeated renders and a repeated analysis
    // produce byte-identical documents.
    const std::string json1 = render_report(report, "json");
    const std::string json2 = render_report(report, "json");
    const std::string html1 = render_report(report, "html");
    const std::string html2 = render_report(report, "html");
    const SessionReport again = analyze_session(back, bundle);
    const std::string json3 = render_report(again, "json");
    const std::string html3 = render_report(again, "html");
    g.require(json1 == json2 && json1 == json3, "JSON rendering is not deterministic");
    g.require(html1 == html2 && html1 == html3, "HTML rendering is not deterministic");
    g.require(!json1.empty() && !html1.empty(), "renderer produced an empty document");
    g.note(fmt("%zu/%zu strokes recovered over TCP, renders byte-identical",
               report.strokes.size(), truth_contacts));
}

// ---------------------------------------------------------------------------
// Gate 11: external-dataset harness (best effort; no dataset is bundled).
// ---------------------------------------------------------------------------

// Stand-in importer proving the adapter path end to end: it reads a manifest
// from the dataset directory and materializes a labeled corpus.
class StubImporter : public DatasetImporter {
public:
    std::string name() const override { return "acceptance-stub"; }
    Corpus import_corpus(const fs::path& dir) const override {
        std::FILE* f = std::fopen((dir / "manifest.txt").string().c_str(), "r");
        if (!f) throw ConfigError("stub dataset manifest missing under " + dir.string());
        int per_class = 0;
        const int n = std::fscanf(f, "%d", &per_class);
        std::fclose(f);
        if (n != 1 || per_class <= 0) throw ParseError("stub dataset manifest unreadable");
        Corpus corpus;
        std::size_t source = 0;
        for (int c = 0; c < 4; ++c)
            for (int k = 0; k < per_class; ++k)
                corpus.entries.push_back(make_entry(
                    kAllStrokeTypes[c], 1.0 + k % 5, -0.2 + 0.1 * (k % 5), 0.45 + 0.1 * (k % 4),
                    90000 + c * 100 + k, "d" + std::to_string(k % 4), source++));
        return corpus;
    }
};

void gate_dataset_harness(Gate& g) {
    // Unknown importer names are rejected with the available list.
    bool rejected = false;
    try {
        import_corpus("no-such-importer", "/nonexistent");
    } catch (const ConfigError&) {
        rejected = true;
    }
    g.require(rejected, "unknown importer name was not rejected");

    // The registered adapter feeds the standard evaluation harness.
    register_importer(std::make_shared<StubImporter>());
    TempDir tmp("dataset");
    std::FILE* f = std::fopen((tmp.path / "manifest.txt").string().c_str(), "w");
    g.require(f != nullptr, "could not write the stand-in manifest");
    if (f) {
        std::fputs("10\n", f);
        std::fclose(f);
    }
    const Corpus corpus = import_corpus("acceptance-stub", tmp.path);
    g.require(corpus.size() == 40, fmt("stand-in corpus has %zu entries, want 40", corpus.size()));
    const EvalResult r = evaluate(corpus, EvalTask::Classify, SplitKind::KFold5, EvalConfig{});
    g.require(r.mean.accuracy > 0.5,
              fmt("evaluation over the imported corpus degenerated (acc %.2f)", r.mean.accuracy));

    // The published external dataset is not bundled with this repository, so
    // the quantitative reproduction (accuracy within +-3 points, rating MAE
    // within +-0.1 of the reference numbers) is documented as a best-effort
    // run: wire a real importer to its download and invoke the same harness.
    g.note(fmt("adapter path verified (stand-in acc %.2f); external dataset not bundled, "
               "quantitative reproduction skipped",
               r.mean.accuracy));
}

struct GateDef {
    int id;
    const char* title;
    std::function<void(Gate&)> run;
};

} // namespace

int main(int argc, char** argv) {
    const std::vector<GateDef> gates = {
        {1, "dsp primitives", gate_dsp},
        {2, "stroke segmentation", gate_segmentation},
        {3, "solver vs brute-force oracle", gate_solver},
        {4, "classifier generalization", gate_classifier},
        {5, "quality rating", gate_rating},
        {6, "impact localization", gate_impact},
        {7, "streaming and clock sync", gate_streaming},
        {8, "advice rule table", gate_advice},
        {9, "rating agreement statistic", gate_agreement},
        {10, "capture-to-report chain", gate_end_to_end},
        {11, "external-dataset harness", gate_dataset_harness},
    };

    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

    int failed = 0, ran = 0;
    for (const GateDef& def : gates) {
        if (!only.empty() && !only.count(def.id)) continue;
        ++ran;
        Gate gate;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            def.run(gate);
        } catch (const std::exception& e) {
            gate.failures.push_back(std::string("unhandled exception: ") + e.what());
        }
        const double secs = elapsed_s(t0);
        if (gate.failures.empty()) {
            std::string detail;
            for (const std::string& n : gate.notes) detail += (detail.empty() ? "" : "; ") + n;
            std::printf("[PASS] %02d %s: %s (%.1fs)\n", def.id, def.title, detail.c_str(), secs);
        } else {
            ++failed;
            std::string why;
            for (const std::string& s : gate.failures) {
                if (!why.empty()) why += "; ";
                why += s;
                if (why.size() > 400) {
                    why += fmt("; ... %zu further failures", gate.failures.size());
                    break;
                }
            }
            std::printf("[FAIL] %02d %s: %s (%.1fs)\n", def.id, def.title, why.c_str(), secs);
        }
        std::fflush(stdout);
    }

    std::printf("acceptance: %d/%d gates passed\n", ran - failed, ran);
    return failed == 0 ? 0 : 1;
}
