#include "bsense/report.hpp"

#include "bsense/errors.hpp"
#include "bsense/stroke_types.hpp"

#include <cstdio>
#include <sstream>
#include <string>

namespace bsense {

namespace {

using ojson = nlohmann::ordered_json;

constexpr std::size_t kTypeCount = kAllStrokeTypes.size();

} // namespace

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

ojson report_to_json(const SessionReport& report) {
    ojson j;
    j["schema_version"] = kReportSchemaVersion;
    j["session_id"] = report.session_id;
    j["candidates_found"] = report.candidates_found;
    j["candidates_rejected"] = report.candidates_rejected;
    j["stroke_count"] = report.strokes.size();
    ojson counts;
    ojson means;
    for (std::size_t t = 0; t < kTypeCount; ++t) {
        const char* name = to_string(static_cast<StrokeType>(t));
        counts[name] = report.type_counts[t];
        means[name] = report.mean_rating_by_type[t];
    }
    j["type_counts"] = std::move(counts);
    j["mean_rating"] = report.mean_rating;
    j["mean_rating_by_type"] = std::move(means);

    ojson strokes = ojson::array();
    for (const StrokeResult& s : report.strokes) {
        ojson rec;
        rec["impact_time_ns"] = s.impact_time_ns;
        rec["stroke_type"] = to_string(s.stroke_type);
        rec["type_confidence"] = s.type_confidence;
        rec["low_confidence"] = s.low_confidence;
        rec["quality"] = s.quality;
        rec["impact"] = ojson{{"x", s.impact.x}, {"y", s.impact.y}};
        rec["advice"] = s.advice;
        strokes.push_back(std::move(rec));
    }
    j["strokes"] = std::move(strokes);

    ojson failures = ojson::array();
    for (const FlaggedFailure& f : report.failures) {
        failures.push_back(ojson{{"impact_time_ns", f.impact_time_ns}, {"reason", f.reason}});
    }
    j["failures"] = std::move(failures);
    return j;
}

SessionReport report_from_json(const ojson& j) {
    try {
        if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer() ||
            j.at("schema_version").get<int>() != kReportSchemaVersion) {
            throw ParseError("report: unsupported schema version");
        }
        SessionReport report;
        report.session_id = j.at("session_id").get<std::string>();
        report.candidates_found = j.at("candidates_found").get<std::size_t>();
        report.candidates_rejected = j.at("candidates_rejected").get<std::size_t>();
        report.mean_rating = j.at("mean_rating").get<double>();
        for (std::size_t t = 0; t < kTypeCount; ++t) {
            const char* name = to_string(static_cast<StrokeType>(t));
            report.type_counts[t] = j.at("type_counts").at(name).get<std::size_t>();
            report.mean_rating_by_type[t] = j.at("mean_rating_by_type").at(name).get<double>();
        }
        for (const ojson& rec : j.at("strokes")) {
            StrokeResult s;
            s.impact_time_ns = rec.at("impact_time_ns").get<std::int64_t>();
            s.stroke_type = stroke_type_from_string(rec.at("stroke_type").get<std::string>());
            s.type_confidence = rec.at("type_confidence").get<double>();
            s.low_confidence = rec.at("low_confidence").get<bool>();
            s.quality = rec.at("quality").get<double>();
            s.impact.x = rec.at("impact").at("x").get<double>();
            s.impact.y = rec.at("impact").at("y").get<double>();
            s.advice = rec.at("advice").get<std::vector<std::string>>();
            report.strokes.push_back(std::move(s));
        }
        if (report.strokes.size() != j.at("stroke_count").get<std::size_t>()) {
            throw ParseError("report: stroke_count does not match the stroke list");
        }
        for (const ojson& rec : j.at("failures")) {
            FlaggedFailure f;
            f.impact_time_ns = rec.at("impact_time_ns").get<std::int64_t>();
            f.reason = rec.at("reason").get<std::string>();
            report.failures.push_back(std::move(f));
        }
        return report;
    } catch (const ParseError&) {
        throw;
    } catch (const std::exception& e) {
        throw ParseError(std::string("report: malformed JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::string escape_html(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        case '\'': out += "&#39;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

// Stroke time rendered relative to the first stroke of the session.
std::string relative_seconds(std::int64_t t_ns, std::int64_t t0_ns) {
    return "t+" + fixed(static_cast<double>(t_ns - t0_ns) / 1e9, 2) + "s";
}

// Racket face outline with the impact point marked. Face coordinates map
// x in [-0.5, 0.5] across the ellipse width and y from throat (0) to tip (1).
std::string face_svg(ImpactPoint p) {
    const double cx = 60.0 + p.x * 90.0;
    const double cy = 130.0 - p.y * 120.0;
    std::string svg;
    svg += "<svg class=\"face\" viewBox=\"0 0 120 172\" width=\"120\" height=\"172\" "
           "role=\"img\" aria-label=\"impact point on the string face\">";
    svg += "<ellipse cx=\"60\" cy=\"70\" rx=\"45\" ry=\"60\" class=\"face-outline\"/>";
    svg += "<line x1=\"60\" y1=\"130\" x2=\"60\" y2=\"168\" class=\"face-shaft\"/>";
    svg += "<circle cx=\"" + fixed(cx, 1) + "\" cy=\"" + fixed(cy, 1) +
           "\" r=\"4\" class=\"impact-dot\"/>";
    svg += "</svg>";
    return svg;
}

const char* kStyle =
    "body{font-family:system-ui,sans-serif;margin:2em auto;max-width:60em;color:#222}"
    "h1{font-size:1.5em}h2{font-size:1.2em;border-bottom:1px solid #ccc;padding-bottom:.2em}"
    "table.summary{border-collapse:collapse}table.summary td,table.summary th"
    "{border:1px solid #ccc;padding:.3em .8em;text-align:right}"
    "table.summary th{background:#f4f4f4}"
    "ol.timeline{list-style:none;padding-left:0}"
    "ol.timeline li{padding:.35em .6em;border-left:4px solid #4a7dbd;margin:.25em 0;"
    "background:#f8f9fb}"
    "ol.timeline li.flagged{border-left-color:#c0392b}"
    ".stroke-card{display:flex;gap:1.5em;border:1px solid #ddd;border-radius:6px;"
    "padding:1em;margin:1em 0;align-items:flex-start}"
    ".stroke-card .detail{flex:1}"
    ".face-outline{fill:#fdfdf2;stroke:#444;stroke-width:2}"
    ".face-shaft{stroke:#444;stroke-width:4}"
    ".impact-dot{fill:#c0392b}"
    "ul.advice{margin:.4em 0 .2em 1.2em}"
    ".muted{color:#777}.quality{font-weight:600}";

std::string render_html(const SessionReport& report) {
    const std::string sid = escape_html(report.session_id);
    std::ostringstream out;
    out << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
        << "<title>Stroke session " << sid << "</title>\n<style>" << kStyle
        << "</style>\n</head>\n<body>\n";
    out << "<h1>Stroke session " << sid << "</h1>\n";

    // --- summary view ---
    out << "<section id=\"summary\">\n<h2>Summary</h2>\n";
    if (report.strokes.empty()) {
        out << "<p>No strokes recorded in this session.</p>\n";
    } else {
        out << "<p>" << report.strokes.size() << " strokes, mean rating <span class=\"quality\">"
            << fixed(report.mean_rating, 2) << "</span> / 5.</p>\n";
        out << "<table class=\"summary\">\n<tr><th>Type</th><th>Count</th><th>Mean rating</th>"
            << "</tr>\n";
        for (std::size_t t = 0; t < kTypeCount; ++t) {
            if (report.type_counts[t] == 0) continue;
            out << "<tr><td>" << to_string(static_cast<StrokeType>(t)) << "</td><td>"
                << report.type_counts[t] << "</td><td>" << fixed(report.mean_rating_by_type[t], 2)
                << "</td></tr>\n";
        }
        out << "</table>\n";
    }
    out << "<p class=\"muted\">" << report.candidates_found << " candidate events, "
        << report.candidates_rejected << " rejected, " << report.failures.size()
        << " analysis failures.</p>\n</section>\n";

    // --- timeline view ---
    out << "<section id=\"timeline\">\n<h2>Timeline</h2>\n";
    if (report.strokes.empty()) {
        out << "<p>Empty timeline: zero strokes.</p>\n";
    } else {
        const std::int64_t t0 = report.strokes.front().impact_time_ns;
        out << "<ol class=\"timeline\">\n";
        std::size_t index = 0;
        for (const StrokeResult& s : report.strokes) {
            ++index;
            out << "<li class=\"timeline-entry" << (s.low_confidence ? " flagged" : "")
                << "\"><a href=\"#stroke-" << index << "\">#" << index << "</a> "
                << relative_seconds(s.impact_time_ns, t0) << " &mdash; "
                << to_string(s.stroke_type) << ", rated <span class=\"quality\">"
                << fixed(s.quality, 2) << "</span>"
                << (s.low_confidence ? " <span class=\"muted\">(low confidence)</span>" : "")
                << "</li>\n";
        }
        out << "</ol>\n";
    }
    out << "</section>\n";

    // --- per-stroke detail view ---
    out << "<section id=\"strokes\">\n<h2>Strokes</h2>\n";
    if (report.strokes.empty()) {
        out << "<p>No strokes to show.</p>\n";
    }
    {
        const std::int64_t t0 =
            report.strokes.empty() ? 0 : report.strokes.front().impact_time_ns;
        std::size_t index = 0;
        for (const StrokeResult& s : report.strokes) {
            ++index;
            out << "<article class=\"stroke-card\" id=\"stroke-" << index << "\">\n"
                << face_svg(s.impact) << "\n<div class=\"detail\">\n<h3>#" << index << " "
                << to_string(s.stroke_type) << " at " << relative_seconds(s.impact_time_ns, t0)
                << "</h3>\n";
            out << "<p>Quality <span class=\"quality\">" << fixed(s.quality, 2)
                << "</span> / 5 &middot; impact (" << fixed(s.impact.x, 3) << ", "
                << fixed(s.impact.y, 3) << ") &middot; type confidence "
                << fixed(s.type_confidence, 2)
                << (s.low_confidence ? " <span class=\"muted\">(low)</span>" : "") << "</p>\n";
            out << "<ul class=\"advice\">\n";
            for (const std::string& a : s.advice) {
                out << "<li>" << escape_html(a) << "</li>\n";
            }
            out << "</ul>\n</div>\n</article>\n";
        }
    }
    out << "</section>\n";

    // --- failures ---
    if (!report.failures.empty()) {
        out << "<section id=\"failures\">\n<h2>Analysis failures</h2>\n<ul>\n";
        for (const FlaggedFailure& f : report.failures) {
            out << "<li>at " << f.impact_time_ns << " ns: " << escape_html(f.reason)
                << "</li>\n";
        }
        out << "</ul>\n</section>\n";
    }

    out << "</body>\n</html>\n";
    return out.str();
}

} // namespace

std::string render_report(const SessionReport& report, const std::string& format) {
    if (format == "json") return report_to_json(report).dump(2) + "\n";
    if (format == "html") return render_html(report);
    throw ConfigError("unknown report format '" + format + "' (expected json|html)");
}

} // namespace bsense
