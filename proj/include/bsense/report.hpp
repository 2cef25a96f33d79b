#ifndef BSENSE_REPORT_HPP
#define BSENSE_REPORT_HPP

// Session report serialization (versioned JSON, lossless round-trip) and
// static document rendering (JSON / single-file HTML).

#include <string>

#include "json.hpp"

#include "bsense/pipeline.hpp"

namespace bsense {

inline constexpr int kReportSchemaVersion = 1;

// Versioned JSON form of a report. Numbers use shortest-round-trip printing,
// so to_json followed by from_json reproduces the report bit for bit.
nlohmann::ordered_json report_to_json(const SessionReport& report);
SessionReport report_from_json(const nlohmann::ordered_json& j); // ParseError on mismatch

// `format` is "json" or "html" (anything else -> ConfigError). Both renderings
// are deterministic functions of the report. The HTML document is a single
// self-contained file (inline styles and SVG, no external assets) with a
// summary section, a session timeline, and a per-stroke detail view showing
// the impact point on a racket-face outline plus the advice text.
std::string render_report(const SessionReport& report, const std::string& format);

} // namespace bsense

#endif
