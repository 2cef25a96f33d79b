#pragma once

// Core stroke vocabulary shared by segmentation, features, models, and the
// pipeline.

#include <algorithm>
#include <array>
#include <optional>
#include <stdexcept>
#include <string>

namespace bsense {

// Backhand overhead clear, forehand overhead clear, forehand overhead smash,
// forehand overhead drop.
enum class StrokeType : int { BOC = 0, FOC = 1, FOS = 2, FOD = 3 };

inline constexpr std::array<StrokeType, 4> kAllStrokeTypes = {
    StrokeType::BOC, StrokeType::FOC, StrokeType::FOS, StrokeType::FOD};

inline const char* to_string(StrokeType t) {
    switch (t) {
    case StrokeType::BOC: return "BOC";
    case StrokeType::FOC: return "FOC";
    case StrokeType::FOS: return "FOS";
    case StrokeType::FOD: return "FOD";
    }
    return "?";
}

inline StrokeType stroke_type_from_string(const std::string& s) {
    if (s == "BOC") return StrokeType::BOC;
    if (s == "FOC") return StrokeType::FOC;
    if (s == "FOS") return StrokeType::FOS;
    if (s == "FOD") return StrokeType::FOD;
    throw std::invalid_argument("unknown stroke type: " + s);
}

// Normalized racket-face coordinates, origin at the throat: x spans the face
// width in [-0.5, 0.5], y runs from throat (0) to tip (1).
struct ImpactPoint {
    double x = 0.0;
    double y = 0.0;
};

inline ImpactPoint clamp_to_face(ImpactPoint p) {
    p.x = std::min(0.5, std::max(-0.5, p.x));
    p.y = std::min(1.0, std::max(0.0, p.y));
    return p;
}

// Five-point rating, continuous after normalization, clamped to [1, 5].
inline double clamp_quality(double q) { return std::min(5.0, std::max(1.0, q)); }

struct StrokeLabels {
    std::optional<StrokeType> stroke_type;
    std::optional<double> quality; // [1, 5]
    std::optional<ImpactPoint> impact;
};

} // namespace bsense
