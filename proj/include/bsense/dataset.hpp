#ifndef BSENSE_DATASET_HPP
#define BSENSE_DATASET_HPP

// Labeled stroke corpora: assembled from stored sessions with ground truth,
// optionally expanded with augmented variants, or imported from an external
// dataset through the adapter registry.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "bsense/pipeline.hpp"
#include "bsense/session.hpp"
#include "bsense/store.hpp"
#include "bsense/synth.hpp"
#include "bsense/util.hpp"

namespace bsense {

struct CorpusEntry {
    StrokeSegment segment; // labels carry the ground truth
    std::string user_id;
    // Variants produced by augmentation share their source's index so split
    // logic can keep them on the same side as the original stroke.
    std::size_t source_index = 0;
};

struct Corpus {
    std::vector<CorpusEntry> entries;

    std::size_t size() const { return entries.size(); }
    // Distinct user ids in first-seen order.
    std::vector<std::string> users() const;
    // Distinct source indices in ascending order.
    std::vector<std::size_t> sources() const;
};

// Ground-truth sidecar for generated sessions: the user id plus one record
// per stroke spec.
nlohmann::ordered_json truth_to_json(const std::vector<StrokeSpec>& specs,
                                     const std::string& user_id);
struct SessionTruth {
    std::string user_id;
    std::vector<StrokeSpec> specs;
};
SessionTruth truth_from_json(const nlohmann::json& j);

// Builds a corpus from every stored session that has a truth sidecar:
// sessions are segmented, and each segment is labeled from the truth stroke
// whose impact time lies within `match_tolerance_ms`. Unmatched segments are
// dropped. Each matched stroke gets a fresh source index.
Corpus load_corpus(const SessionStore& store, double match_tolerance_ms = 200.0);

// Appends the three standard augmentation variants (time shift, time scale,
// noise) for every entry present when the call starts.
void augment_corpus(Corpus& corpus, Rng& rng, const AugmentParams& params = {});

// ---------------------------------------------------------------------------
// External dataset adapter
// ---------------------------------------------------------------------------
// The on-disk format of public stroke datasets varies, so importers plug in
// behind this interface instead of the loader guessing at layouts. Register
// an importer (e.g. in a downstream tool) and `import_corpus` dispatches on
// its name.

class DatasetImporter {
public:
    virtual ~DatasetImporter() = default;
    virtual std::string name() const = 0;
    virtual Corpus import_corpus(const std::filesystem::path& dir) const = 0;
};

void register_importer(std::shared_ptr<DatasetImporter> importer);
std::vector<std::string> importer_names();
// Throws ConfigError when no importer with that name is registered.
Corpus import_corpus(const std::string& importer_name, const std::filesystem::path& dir);

} // namespace bsense

#endif
