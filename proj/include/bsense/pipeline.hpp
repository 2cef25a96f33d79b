#pragma once

// Per-stroke analysis on top of the trained models: type classification with
// a vote-margin confidence, per-type quality rating, impact-point regression,
// rule-based advice, whole-session reports, assessor rating normalization,
// and training-set augmentation.

#include "bsense/models.hpp"
#include "bsense/session.hpp"
#include "bsense/stroke_types.hpp"
#include "bsense/util.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace bsense {

// Results with a classification vote margin below this are flagged as
// unreliable (possible out-of-vocabulary stroke or degenerate input).
inline constexpr double kLowConfidence = 0.3;

// Target contact region on the string face, normalized coordinates.
struct OptimalRegion {
    double x_lo = -0.25, x_hi = 0.25;
    double y_lo = 0.0, y_hi = 1.0;
};

// Per-type sweet regions: clears want mid-face contact, backhand clears
// slightly lower, drops high on the face; all want laterally centered hits.
OptimalRegion optimal_region(StrokeType type);

// Editable advice texts; the firing logic is fixed, the prose is data.
struct AdviceRuleTable {
    std::string contact_higher =
        "Contact is low on the string face: meet the shuttle higher.";
    std::string contact_lower =
        "Contact is high on the string face: let the shuttle drop a little "
        "before impact.";
    std::string shift_right =
        "Impact is left of the sweet region: line the shuttle up closer to "
        "the face center.";
    std::string shift_left =
        "Impact is right of the sweet region: line the shuttle up closer to "
        "the face center.";
    // technique advice per stroke type, fired when quality < 3.0
    std::array<std::string, kAllStrokeTypes.size()> technique = {
        "Backhand clears need a fuller swing: rotate the forearm through the "
        "hit and lengthen the follow-through.",
        "Drive the clear with a relaxed, full arm swing and accelerate "
        "through contact.",
        "For smashes, snap the wrist at contact and transfer weight forward "
        "to steepen the shot.",
        "Drop shots reward touch: slow the forward swing and shorten the "
        "follow-through for control.",
    };
    std::string praise =
        "Well struck: clean contact in the optimal zone and solid form.";
};

const AdviceRuleTable& default_advice_rules();

struct TypePrediction {
    StrokeType type = StrokeType::BOC;
    double confidence = 0.0;     // normalized vote margin in [0, 1]
    std::array<int, 4> votes{};  // per type, one-vs-one tally
};

// Classify one segment. A degenerate (all-zero) segment still yields a label
// but its confidence is forced to 0 so it gets flagged downstream.
TypePrediction classify_stroke(const StrokeSegment& segment, const SvmModel& model);

// Quality score in [1, 5] from the stroke type's dedicated regressor: the raw
// prediction is mapped through the model's target transform, then clamped.
// Missing per-type model -> ConfigError.
double rate_stroke(const StrokeSegment& segment, StrokeType type,
                   const std::map<StrokeType, SvrModel>& raters);

// Impact point from two independent per-axis regressors, clamped to the face.
// The two models must share one feature layout -> ConfigError otherwise.
ImpactPoint estimate_impact(const StrokeSegment& segment, const SvrModel& x_model,
                            const SvrModel& y_model, bool include_audio = false);

// Deterministic rule firing, fixed order: location (vertical, then lateral),
// technique when quality < 3.0, praise only when nothing else fired. Never
// empty.
std::vector<std::string> generate_advice(StrokeType type, double quality, ImpactPoint impact,
                                         const OptimalRegion& region,
                                         const AdviceRuleTable& rules = default_advice_rules());

struct StrokeResult {
    StrokeType stroke_type = StrokeType::BOC;
    double type_confidence = 0.0;
    bool low_confidence = false;
    double quality = 0.0; // [1, 5]
    ImpactPoint impact{0.0, 0.0};
    std::vector<std::string> advice;
    std::int64_t impact_time_ns = 0;
};

// A stroke whose analysis threw; recorded instead of aborting the session.
struct FlaggedFailure {
    std::int64_t impact_time_ns = 0;
    std::string reason;
};

struct ModelBundle {
    SvmModel classifier;
    std::map<StrokeType, SvrModel> raters;
    SvrModel impact_x;
    SvrModel impact_y;
    bool audio_fusion = false; // impact models consume the audio map too
};

struct SessionReport {
    std::string session_id;
    std::size_t candidates_found = 0;
    std::size_t candidates_rejected = 0;
    std::vector<StrokeResult> strokes; // sorted by impact time
    std::vector<FlaggedFailure> failures;
    std::array<std::size_t, 4> type_counts{};
    double mean_rating = 0.0;                  // 0 when no strokes
    std::array<double, 4> mean_rating_by_type{}; // 0 where the type is absent
};

// Segment the recording and run the full per-stroke analysis. Per-stroke
// exceptions become FlaggedFailure entries; the session always completes.
SessionReport analyze_session(const SessionRecording& session, const ModelBundle& bundle);

// Assessor-bias removal for rating targets. Input is an assessor x stroke
// matrix with NaN for missing entries; every present score must lie in
// [1, 5] and every stroke needs at least one rating (else invalid_argument).
// Each assessor's scores become z-scores against their own mean/std (std 0:
// centered only), z-scores are averaged per stroke, and mapped back to the
// 1-5 scale as clamp(3.0 + z * pooled_std, 1, 5). The fixed midpoint anchor
// makes the result exactly invariant to any per-assessor constant offset.
struct NormalizedRatings {
    std::vector<double> z;       // per-stroke mean assessor z-score
    std::vector<double> targets; // clamp(transform.mean + z * transform.std, 1, 5)
    TargetTransform transform;   // mean = 3.0 anchor, std = pooled assessor std
};

NormalizedRatings normalize_ratings(const std::vector<std::vector<double>>& assessor_by_stroke);

// Training-set expansion: three label-preserving variants per segment
// (temporal shift, temporal scale about the center, additive noise), IMU
// channels only. Deterministic given the rng state. Zeroed parameters make
// every variant an exact copy.
struct AugmentParams {
    double shift_ms = 100.0;  // shift drawn from [-shift_ms, +shift_ms]
    double scale_lo = 0.9;    // time-scale factor range
    double scale_hi = 1.1;
    double noise_frac = 0.02; // noise sigma as a fraction of per-axis std
};

std::vector<StrokeSegment> augment_segment(const StrokeSegment& segment, Rng& rng,
                                           const AugmentParams& params = {});

} // namespace bsense
