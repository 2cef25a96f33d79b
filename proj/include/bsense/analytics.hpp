#ifndef BSENSE_ANALYTICS_HPP
#define BSENSE_ANALYTICS_HPP

// Cross-session aggregation, inter-rater reliability, and the model
// evaluation harness (k-fold and user-held-out splits).

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "bsense/dataset.hpp"
#include "bsense/models.hpp"
#include "bsense/pipeline.hpp"

namespace bsense {

// ---------------------------------------------------------------------------
// Cumulative statistics
// ---------------------------------------------------------------------------

struct CumulativeStats {
    std::size_t sessions = 0;
    std::size_t strokes = 0;
    double mean_rating = 0.0; // over all strokes, 0 when none
    std::array<std::size_t, 4> type_counts{};
    std::array<double, 4> type_proportion{};  // 0 for absent types; sums to 1
    std::array<double, 4> type_mean_rating{}; // 0 for absent types
};

// Exact aggregation over the reports' stroke lists.
CumulativeStats summarize(const std::vector<SessionReport>& reports);

// ---------------------------------------------------------------------------
// Inter-rater reliability
// ---------------------------------------------------------------------------

// ICC(C,k): two-way consistency of the k-assessor MEAN rating, from the
// row/column mean-squares decomposition: (MS_rows - MS_error) / MS_rows.
// `scores` is strokes x assessors and must be complete (no NaN), at least
// 2 x 2, and rectangular; otherwise std::invalid_argument.
double icc_consistency_k(const std::vector<std::vector<double>>& scores);

// Ratings CSV: header row of assessor ids, one row per stroke, empty cells
// mark missing entries (NaN).
struct RatingsTable {
    std::vector<std::string> assessors;
    std::vector<std::vector<double>> scores; // [stroke][assessor]
};
RatingsTable load_ratings_csv(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

enum class EvalTask { Classify, Rate, Impact };
enum class SplitKind { KFold5, Leave3Users };

EvalTask eval_task_from_string(const std::string& s);
SplitKind split_kind_from_string(const std::string& s);

struct EvalConfig {
    std::uint64_t seed = 1;
    TrainConfig classify_cfg;
    TrainConfig rate_cfg;
    TrainConfig impact_cfg;
    bool audio_fusion = false; // impact task: append the audio spectrogram

    EvalConfig() {
        // Rating inputs are long standardized waveforms; the narrower
        // bandwidth tracks the quality scale instead of reverting to the
        // target mean (see rate-model training notes).
        rate_cfg.gamma = 1e-4;
    }
};

struct FoldMetrics {
    std::size_t fold = 0;
    std::size_t train_count = 0;
    std::size_t test_count = 0;
    // classify
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    // rate / impact
    double mae = 0.0;
    std::array<double, 4> mae_by_type{}; // rate: per stroke type, 0 if absent
    double mae_x = 0.0;                  // impact
    double mae_y = 0.0;                  // impact
};

struct EvalResult {
    EvalTask task = EvalTask::Classify;
    SplitKind split = SplitKind::KFold5;
    std::vector<FoldMetrics> folds;
    FoldMetrics mean; // field-wise average over folds (counts are totals)
    std::vector<std::string> warnings;
};

// Trains on each fold's complement and scores the fold. Split assignment is
// deterministic given the seed. Source strokes and their augmented variants
// always land on the same side. Leave3Users partitions the user set into
// groups of three (needs >= 4 users, else ConfigError); KFold5 partitions
// source strokes into five folds (needs >= 5 sources).
EvalResult evaluate(const Corpus& corpus, EvalTask task, SplitKind split,
                    const EvalConfig& config = {});

// The exact fold assignment evaluate() uses, exposed so the no-leakage
// contracts are observable: entry_index lists the corpus entries that carry
// the labels `task` needs; fold holds each one's test fold (-1 = always in
// the training split, only under Leave3Users for leftover users).
struct SplitAssignment {
    std::vector<std::size_t> entry_index;
    std::vector<int> fold; // parallel to entry_index
    std::size_t fold_count = 0;
};

SplitAssignment eval_split_assignment(const Corpus& corpus, EvalTask task, SplitKind split,
                                      std::uint64_t seed);

} // namespace bsense

#endif
