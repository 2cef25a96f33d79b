#pragma once

// Deterministic per-stroke feature extraction for the three analysis tasks:
// a 6x23 statistics matrix for classification, a 6x800 resampled window for
// quality rating, and a 6x9x26 time-frequency tensor (optionally with an
// audio map) for impact location.

#include "bsense/session.hpp"
#include "bsense/signal.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace bsense {

inline constexpr std::size_t kClassFeatureCount = 23;
inline constexpr std::size_t kRatingColumns = 800;
inline constexpr std::size_t kImpactFrames = 9;
inline constexpr std::size_t kImpactBins = 26;
inline constexpr std::size_t kAudioFrames = 24;
inline constexpr std::size_t kAudioBins = 129;

// Per-axis feature slots, in frozen schema order. Time-domain statistics of
// the trimmed + 20 Hz low-passed window, then first-difference statistics,
// then spectral statistics.
enum ClassFeatureSlot : std::size_t {
    kSum = 0,
    kMean,
    kVariance,
    kStd,
    kSkewness,
    kKurtosis, // excess
    kMin,
    kMax,
    kP25,
    kP75,
    kPeakCount,
    kDerivMean,
    kDerivStd,
    kDerivSkewness,
    kDerivKurtosis,
    kDerivMaxAbs,
    kDerivPeakCount,
    kSpecEnergy,
    kSpecMean,
    kSpecStd,
    kSpecCentroid,
    kPsdMax,
    kPsdMean,
};

struct ClassFeatures {
    std::array<std::array<double, kClassFeatureCount>, kAxisCount> values;
};

struct RatingInput {
    std::array<std::vector<double>, kAxisCount> values; // 6 x 800 at 500 Hz
};

struct ImpactFeatureMap {
    std::array<TimeFreqMap, kAxisCount> imu_map;  // each 9 frames x 26 bins
    std::optional<TimeFreqMap> audio_map;         // 24 frames x 129 bins
};

ClassFeatures extract_class_features(const StrokeSegment& segment);
RatingInput extract_rating_input(const StrokeSegment& segment);
ImpactFeatureMap extract_impact_features(const StrokeSegment& segment, bool include_audio);

// Row-major flattening (axis, then slot/frame/bin); audio map appended after
// the IMU tensor when present. Lengths: 138 / 4800 / 1404 or 4500.
std::vector<double> flatten(const ClassFeatures& f);
std::vector<double> flatten(const RatingInput& f);
std::vector<double> flatten(const ImpactFeatureMap& f);

ClassFeatures unflatten_class(const std::vector<double>& v);
RatingInput unflatten_rating(const std::vector<double>& v);
ImpactFeatureMap unflatten_impact(const std::vector<double>& v); // audio inferred from length

// Versioned layout descriptions and their hashes. The hash is embedded in
// trained models so a train/infer layout mismatch is caught at predict time.
std::string schema_description(const std::string& kind); // class | rating | impact | impact_audio
const std::string& class_schema_hash();
const std::string& rating_schema_hash();
const std::string& impact_schema_hash(bool include_audio);

} // namespace bsense
