#include "bsense/pipeline.hpp"

#include "bsense/errors.hpp"
#include "bsense/features.hpp"
#include "bsense/segmentation.hpp"
#include "bsense/signal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsense {

namespace {

constexpr double kDegenerateAmplitude = 1e-9;

double clamp(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

double untransform(const SvrModel& m, double pred) {
    return m.target_transform.mean + pred * m.target_transform.std;
}

double population_std(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    return std::sqrt(var / static_cast<double>(v.size()));
}

} // namespace

OptimalRegion optimal_region(StrokeType type) {
    OptimalRegion r;
    switch (type) {
        case StrokeType::BOC: r.y_lo = 0.25; r.y_hi = 0.50; break;
        case StrokeType::FOC: r.y_lo = 0.50; r.y_hi = 0.75; break;
        case StrokeType::FOS: r.y_lo = 0.50; r.y_hi = 0.75; break;
        case StrokeType::FOD: r.y_lo = 0.70; r.y_hi = 0.90; break;
    }
    return r;
}

const AdviceRuleTable& default_advice_rules() {
    static const AdviceRuleTable table;
    return table;
}

TypePrediction classify_stroke(const StrokeSegment& segment, const SvmModel& model) {
    const auto features = flatten(extract_class_features(segment));
    const ClassifyResult result = predict_svc(model, features, class_schema_hash());

    if (result.label < 0 || result.label >= static_cast<int>(kAllStrokeTypes.size()))
        throw ConfigError("classify_stroke: model labels are not stroke types");

    TypePrediction out;
    out.type = static_cast<StrokeType>(result.label);
    for (std::size_t i = 0; i < model.classes.size(); ++i) {
        const int cls = model.classes[i];
        if (cls >= 0 && cls < static_cast<int>(out.votes.size()))
            out.votes[static_cast<std::size_t>(cls)] = result.votes[i];
    }

    // vote margin between the top two classes, normalized by the maximum
    // number of wins one class can collect (k - 1 pairwise rounds)
    std::vector<int> sorted(result.votes);
    std::sort(sorted.begin(), sorted.end(), std::greater<int>());
    const double rounds = static_cast<double>(model.classes.size()) - 1.0;
    out.confidence =
        sorted.size() < 2 || rounds <= 0.0
            ? 1.0
            : static_cast<double>(sorted[0] - sorted[1]) / rounds;

    double amplitude = 0.0;
    for (const auto& axis : segment.imu)
        for (double v : axis) amplitude = std::max(amplitude, std::abs(v));
    if (amplitude < kDegenerateAmplitude) out.confidence = 0.0;
    return out;
}

double rate_stroke(const StrokeSegment& segment, StrokeType type,
                   const std::map<StrokeType, SvrModel>& raters) {
    const auto it = raters.find(type);
    if (it == raters.end())
        throw ConfigError("rate_stroke: no rating model for type " +
                          std::string(to_string(type)));
    const auto features = flatten(extract_rating_input(segment));
    const double pred = predict_svr(it->second, features, rating_schema_hash());
    return clamp(untransform(it->second, pred), 1.0, 5.0);
}

ImpactPoint estimate_impact(const StrokeSegment& segment, const SvrModel& x_model,
                            const SvrModel& y_model, bool include_audio) {
    if (x_model.schema_hash != y_model.schema_hash)
        throw ConfigError(
            "estimate_impact: axis models trained on different feature layouts (" +
            x_model.schema_hash + " vs " + y_model.schema_hash + ")");
    const auto features = flatten(extract_impact_features(segment, include_audio));
    const std::string expected = impact_schema_hash(include_audio);
    ImpactPoint p{untransform(x_model, predict_svr(x_model, features, expected)),
                  untransform(y_model, predict_svr(y_model, features, expected))};
    return clamp_to_face(p);
}

std::vector<std::string> generate_advice(StrokeType type, double quality, ImpactPoint impact,
                                         const OptimalRegion& region,
                                         const AdviceRuleTable& rules) {
    std::vector<std::string> advice;
    if (impact.y < region.y_lo)
        advice.push_back(rules.contact_higher);
    else if (impact.y > region.y_hi)
        advice.push_back(rules.contact_lower);
    if (impact.x < region.x_lo)
        advice.push_back(rules.shift_right);
    else if (impact.x > region.x_hi)
        advice.push_back(rules.shift_left);
    if (quality < 3.0)
        advice.push_back(rules.technique[static_cast<std::size_t>(type)]);
    if (advice.empty()) advice.push_back(rules.praise);
    return advice;
}

SessionReport analyze_session(const SessionRecording& session, const ModelBundle& bundle) {
    SessionReport report;
    report.session_id = session.meta.session_id;

    const SegmentationOutcome outcome = segment_session_detailed(session);
    report.candidates_found = outcome.candidates_found;
    report.candidates_rejected = outcome.candidates_rejected;

    for (const StrokeSegment& segment : outcome.segments) {
        try {
            const TypePrediction tp = classify_stroke(segment, bundle.classifier);
            StrokeResult r;
            r.stroke_type = tp.type;
            r.type_confidence = tp.confidence;
            r.low_confidence = tp.confidence < kLowConfidence;
            r.quality = rate_stroke(segment, tp.type, bundle.raters);
            r.impact =
                estimate_impact(segment, bundle.impact_x, bundle.impact_y, bundle.audio_fusion);
            r.advice = generate_advice(tp.type, r.quality, r.impact, optimal_region(tp.type));
            r.impact_time_ns = segment.impact_time_ns;
            report.strokes.push_back(std::move(r));
        } catch (const std::exception& e) {
            report.failures.push_back({segment.impact_time_ns, e.what()});
        }
    }

    std::array<double, 4> sums{};
    double total = 0.0;
    for (const StrokeResult& r : report.strokes) {
        const auto t = static_cast<std::size_t>(r.stroke_type);
        ++report.type_counts[t];
        sums[t] += r.quality;
        total += r.quality;
    }
    if (!report.strokes.empty())
        report.mean_rating = total / static_cast<double>(report.strokes.size());
    for (std::size_t t = 0; t < sums.size(); ++t)
        if (report.type_counts[t] > 0)
            report.mean_rating_by_type[t] = sums[t] / static_cast<double>(report.type_counts[t]);
    return report;
}

NormalizedRatings normalize_ratings(const std::vector<std::vector<double>>& assessor_by_stroke) {
    if (assessor_by_stroke.empty())
        throw std::invalid_argument("normalize_ratings: no assessors");
    const std::size_t n_strokes = assessor_by_stroke.front().size();
    if (n_strokes == 0) throw std::invalid_argument("normalize_ratings: no strokes");
    for (const auto& row : assessor_by_stroke)
        if (row.size() != n_strokes)
            throw std::invalid_argument("normalize_ratings: ragged rating matrix");

    const std::size_t n_assessors = assessor_by_stroke.size();
    std::vector<double> mean(n_assessors, 0.0), var(n_assessors, 0.0);
    std::vector<std::size_t> count(n_assessors, 0);
    for (std::size_t j = 0; j < n_assessors; ++j) {
        for (double r : assessor_by_stroke[j]) {
            if (std::isnan(r)) continue;
            if (r < 1.0 || r > 5.0)
                throw std::invalid_argument("normalize_ratings: score outside [1, 5]");
            mean[j] += r;
            ++count[j];
        }
        if (count[j] == 0)
            throw std::invalid_argument("normalize_ratings: assessor with no ratings");
        mean[j] /= static_cast<double>(count[j]);
        for (double r : assessor_by_stroke[j])
            if (!std::isnan(r)) var[j] += (r - mean[j]) * (r - mean[j]);
        var[j] /= static_cast<double>(count[j]);
    }

    // pooled within-assessor spread; assessors who never vary carry no scale
    double pooled_num = 0.0, pooled_den = 0.0;
    for (std::size_t j = 0; j < n_assessors; ++j) {
        if (var[j] > 0.0) {
            pooled_num += static_cast<double>(count[j]) * var[j];
            pooled_den += static_cast<double>(count[j]);
        }
    }
    const double pooled_std = pooled_den > 0.0 ? std::sqrt(pooled_num / pooled_den) : 1.0;

    NormalizedRatings out;
    out.transform.mean = 3.0; // fixed scale midpoint: offset-invariant anchor
    out.transform.std = pooled_std;
    out.z.resize(n_strokes);
    out.targets.resize(n_strokes);
    for (std::size_t i = 0; i < n_strokes; ++i) {
        double zsum = 0.0;
        std::size_t zcount = 0;
        for (std::size_t j = 0; j < n_assessors; ++j) {
            const double r = assessor_by_stroke[j][i];
            if (std::isnan(r)) continue;
            zsum += var[j] > 0.0 ? (r - mean[j]) / std::sqrt(var[j]) : 0.0;
            ++zcount;
        }
        if (zcount == 0)
            throw std::invalid_argument("normalize_ratings: stroke with no ratings");
        out.z[i] = zsum / static_cast<double>(zcount);
        out.targets[i] = clamp(out.transform.mean + out.z[i] * out.transform.std, 1.0, 5.0);
    }
    return out;
}

std::vector<StrokeSegment> augment_segment(const StrokeSegment& segment, Rng& rng,
                                           const AugmentParams& params) {
    const std::size_t n = segment.width();
    std::vector<StrokeSegment> variants;
    variants.reserve(3);

    // 1. temporal shift by an integer number of samples, edge-hold padding
    {
        const double shift_ms = rng.uniform(-params.shift_ms, params.shift_ms);
        const auto k = static_cast<long long>(
            std::llround(shift_ms / 1000.0 * segment.imu_rate_hz));
        StrokeSegment v = segment;
        if (k != 0 && n > 0) {
            for (std::size_t a = 0; a < kAxisCount; ++a) {
                const auto& src = segment.imu[a];
                for (std::size_t i = 0; i < n; ++i) {
                    long long s = static_cast<long long>(i) - k;
                    s = std::max(0LL, std::min(static_cast<long long>(n) - 1, s));
                    v.imu[a][i] = src[static_cast<std::size_t>(s)];
                }
            }
        }
        variants.push_back(std::move(v));
    }

    // 2. time scale about the window center, spline-resampled to length
    {
        const double scale = rng.uniform(params.scale_lo, params.scale_hi);
        StrokeSegment v = segment;
        if (n >= 2) {
            const double c = static_cast<double>(n - 1) / 2.0;
            std::vector<double> positions(n);
            for (std::size_t i = 0; i < n; ++i)
                positions[i] = c + (static_cast<double>(i) - c) / scale;
            for (std::size_t a = 0; a < kAxisCount; ++a)
                v.imu[a] = spline_sample(segment.imu[a], positions);
        }
        variants.push_back(std::move(v));
    }

    // 3. additive Gaussian noise, sigma proportional to each axis's spread
    {
        StrokeSegment v = segment;
        for (std::size_t a = 0; a < kAxisCount; ++a) {
            const double sigma = params.noise_frac * population_std(segment.imu[a]);
            for (double& x : v.imu[a]) x += rng.normal(0.0, sigma);
        }
        variants.push_back(std::move(v));
    }
    return variants;
}

} // namespace bsense
