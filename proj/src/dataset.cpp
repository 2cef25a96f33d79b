#include "bsense/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

#include "bsense/errors.hpp"
#include "bsense/segmentation.hpp"

namespace bsense {

std::vector<std::string> Corpus::users() const {
    std::vector<std::string> out;
    for (const CorpusEntry& e : entries)
        if (std::find(out.begin(), out.end(), e.user_id) == out.end())
            out.push_back(e.user_id);
    return out;
}

std::vector<std::size_t> Corpus::sources() const {
    std::vector<std::size_t> out;
    for (const CorpusEntry& e : entries) out.push_back(e.source_index);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

nlohmann::ordered_json truth_to_json(const std::vector<StrokeSpec>& specs,
                                     const std::string& user_id) {
    nlohmann::ordered_json j;
    j["user_id"] = user_id;
    nlohmann::ordered_json strokes = nlohmann::ordered_json::array();
    for (const StrokeSpec& s : specs) {
        nlohmann::ordered_json rec;
        rec["type"] = to_string(s.type);
        rec["quality"] = s.quality;
        rec["impact_x"] = s.impact.x;
        rec["impact_y"] = s.impact.y;
        rec["onset_time_s"] = s.onset_time_s;
        rec["is_air_swing"] = s.is_air_swing;
        strokes.push_back(std::move(rec));
    }
    j["strokes"] = std::move(strokes);
    return j;
}

SessionTruth truth_from_json(const nlohmann::json& j) {
    SessionTruth truth;
    try {
        truth.user_id = j.value("user_id", std::string());
        for (const auto& rec : j.at("strokes")) {
            StrokeSpec s;
            s.type = stroke_type_from_string(rec.at("type").get<std::string>());
            s.quality = rec.at("quality").get<double>();
            s.impact.x = rec.at("impact_x").get<double>();
            s.impact.y = rec.at("impact_y").get<double>();
            s.onset_time_s = rec.at("onset_time_s").get<double>();
            s.is_air_swing = rec.value("is_air_swing", false);
            truth.specs.push_back(s);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("truth record: ") + e.what());
    }
    return truth;
}

Corpus load_corpus(const SessionStore& store, double match_tolerance_ms) {
    Corpus corpus;
    std::size_t next_source = 0;
    for (const std::string& id : store.list_sessions()) {
        if (!store.has_truth(id)) continue;
        const SessionRecording recording = store.load_session(id);
        const SessionTruth truth = truth_from_json(store.load_truth(id));

        const std::vector<StrokeSegment> segments = segment_session(recording);
        const std::int64_t tol_ns =
            static_cast<std::int64_t>(std::llround(match_tolerance_ms * 1e6));
        for (const StrokeSegment& seg : segments) {
            // nearest contact stroke within tolerance
            const StrokeSpec* best = nullptr;
            std::int64_t best_err = tol_ns + 1;
            for (const StrokeSpec& spec : truth.specs) {
                if (spec.is_air_swing) continue;
                const std::int64_t truth_ns =
                    recording.audio.start_ns +
                    static_cast<std::int64_t>(std::llround(spec.onset_time_s * 1e9));
                const std::int64_t err = std::llabs(seg.impact_time_ns - truth_ns);
                if (err <= tol_ns && err < best_err) {
                    best = &spec;
                    best_err = err;
                }
            }
            if (best == nullptr) continue;

            CorpusEntry entry;
            entry.segment = seg;
            entry.segment.labels.stroke_type = best->type;
            entry.segment.labels.quality = best->quality;
            entry.segment.labels.impact = best->impact;
            entry.user_id = truth.user_id;
            entry.source_index = next_source++;
            corpus.entries.push_back(std::move(entry));
        }
    }
    return corpus;
}

void augment_corpus(Corpus& corpus, Rng& rng, const AugmentParams& params) {
    const std::size_t original = corpus.entries.size();
    corpus.entries.reserve(original * 4);
    for (std::size_t i = 0; i < original; ++i) {
        // note: entries may reallocate, so copy the fields needed up front
        const std::string user = corpus.entries[i].user_id;
        const std::size_t source = corpus.entries[i].source_index;
        std::vector<StrokeSegment> variants =
            augment_segment(corpus.entries[i].segment, rng, params);
        for (StrokeSegment& v : variants) {
            CorpusEntry entry;
            entry.segment = std::move(v);
            entry.user_id = user;
            entry.source_index = source;
            corpus.entries.push_back(std::move(entry));
        }
    }
}

// ---------------------------------------------------------------------------
// Importer registry
// ---------------------------------------------------------------------------

namespace {

std::mutex& registry_mutex() {
    static std::mutex mu;
    return mu;
}

std::map<std::string, std::shared_ptr<DatasetImporter>>& registry() {
    static std::map<std::string, std::shared_ptr<DatasetImporter>> importers;
    return importers;
}

} // namespace

void register_importer(std::shared_ptr<DatasetImporter> importer) {
    if (!importer) throw ConfigError("cannot register a null dataset importer");
    std::lock_guard<std::mutex> lock(registry_mutex());
    registry()[importer->name()] = std::move(importer);
}

std::vector<std::string> importer_names() {
    std::lock_guard<std::mutex> lock(registry_mutex());
    std::vector<std::string> names;
    for (const auto& [name, _] : registry()) names.push_back(name);
    return names;
}

Corpus import_corpus(const std::string& importer_name, const std::filesystem::path& dir) {
    std::shared_ptr<DatasetImporter> importer;
    {
        std::lock_guard<std::mutex> lock(registry_mutex());
        auto it = registry().find(importer_name);
        if (it != registry().end()) importer = it->second;
    }
    if (!importer)
        throw ConfigError("no dataset importer registered under \"" + importer_name +
                          "\"; available: " +
                          (importer_names().empty() ? std::string("none")
                                                    : [] {
                                                          std::string s;
                                                          for (const auto& n : importer_names())
                                                              s += (s.empty() ? "" : ", ") + n;
                                                          return s;
                                                      }()));
    return importer->import_corpus(dir);
}

} // namespace bsense
