#include "bsense/analytics.hpp"

#include "bsense/errors.hpp"
#include "bsense/features.hpp"
#include "bsense/util.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <future>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <utility>

namespace bsense {

namespace {

constexpr std::size_t kTypeCount = kAllStrokeTypes.size();

} // namespace

// ---------------------------------------------------------------------------
// Cumulative statistics
// ---------------------------------------------------------------------------

CumulativeStats summarize(const std::vector<SessionReport>& reports) {
    CumulativeStats out;
    out.sessions = reports.size();
    double rating_sum = 0.0;
    std::array<double, kTypeCount> type_rating_sum{};
    for (const SessionReport& report : reports) {
        for (const StrokeResult& stroke : report.strokes) {
            const auto t = static_cast<std::size_t>(stroke.stroke_type);
            ++out.strokes;
            ++out.type_counts[t];
            rating_sum += stroke.quality;
            type_rating_sum[t] += stroke.quality;
        }
    }
    if (out.strokes == 0) return out;
    out.mean_rating = rating_sum / static_cast<double>(out.strokes);
    for (std::size_t t = 0; t < kTypeCount; ++t) {
        out.type_proportion[t] =
            static_cast<double>(out.type_counts[t]) / static_cast<double>(out.strokes);
        if (out.type_counts[t] > 0) {
            out.type_mean_rating[t] =
                type_rating_sum[t] / static_cast<double>(out.type_counts[t]);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ICC(C,k)
// ---------------------------------------------------------------------------

double icc_consistency_k(const std::vector<std::vector<double>>& scores) {
    const std::size_t n = scores.size();
    if (n < 2) {
        throw std::invalid_argument("icc_consistency_k: need at least 2 strokes (rows)");
    }
    const std::size_t k = scores.front().size();
    if (k < 2) {
        throw std::invalid_argument("icc_consistency_k: need at least 2 assessors (columns)");
    }
    for (const std::vector<double>& row : scores) {
        if (row.size() != k) {
            throw std::invalid_argument("icc_consistency_k: ragged matrix");
        }
        for (double v : row) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("icc_consistency_k: matrix has missing entries");
            }
        }
    }

    std::vector<double> row_mean(n, 0.0);
    std::vector<double> col_mean(k, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            row_mean[i] += scores[i][j];
            col_mean[j] += scores[i][j];
            grand += scores[i][j];
        }
        row_mean[i] /= static_cast<double>(k);
    }
    for (std::size_t j = 0; j < k; ++j) col_mean[j] /= static_cast<double>(n);
    grand /= static_cast<double>(n * k);

    double ss_rows = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = row_mean[i] - grand;
        ss_rows += d * d;
    }
    ss_rows *= static_cast<double>(k);

    // Residual sum of squares of the two-way additive decomposition, summed
    // directly (never negative, unlike the subtraction form).
    double ss_error = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < k; ++j) {
            const double e = scores[i][j] - row_mean[i] - col_mean[j] + grand;
            ss_error += e * e;
        }
    }

    const double ms_rows = ss_rows / static_cast<double>(n - 1);
    const double ms_error = ss_error / static_cast<double>((n - 1) * (k - 1));
    if (ms_rows <= 0.0) {
        throw std::invalid_argument(
            "icc_consistency_k: no between-stroke variance, ICC undefined");
    }
    // A residual at double-precision roundoff level (it scales with the square
    // of the data magnitude) is perfect consistency; snap it so the exact
    // invariance "column B = column A + constant -> 1.0" survives rounding.
    if (ms_error <= 1e-12 * ms_rows) return 1.0;
    return (ms_rows - ms_error) / ms_rows;
}

// ---------------------------------------------------------------------------
// Ratings CSV
// ---------------------------------------------------------------------------

namespace {

std::string trim_copy(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(trim_copy(cell));
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

} // namespace

RatingsTable load_ratings_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open ratings file: " + path.string());

    RatingsTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim_copy(line).empty()) continue;
        const std::string where = path.string() + ":" + std::to_string(line_no);
        std::vector<std::string> cells = split_csv_line(line);
        if (table.assessors.empty()) {
            for (const std::string& c : cells) {
                if (c.empty()) throw ParseError(where + ": empty assessor id in header");
            }
            table.assessors = std::move(cells);
            continue;
        }
        if (cells.size() != table.assessors.size()) {
            throw ParseError(where + ": expected " + std::to_string(table.assessors.size()) +
                             " cells, got " + std::to_string(cells.size()));
        }
        std::vector<double> row;
        row.reserve(cells.size());
        for (const std::string& c : cells) {
            if (c.empty()) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            try {
                std::size_t pos = 0;
                const double v = std::stod(c, &pos);
                if (pos != c.size()) throw std::invalid_argument(c);
                row.push_back(v);
            } catch (const std::exception&) {
                throw ParseError(where + ": not a number: '" + c + "'");
            }
        }
        table.scores.push_back(std::move(row));
    }
    if (table.assessors.empty()) {
        throw ParseError(path.string() + ": missing header row");
    }
    return table;
}

// ---------------------------------------------------------------------------
// Evaluation harness
// ---------------------------------------------------------------------------

EvalTask eval_task_from_string(const std::string& s) {
    if (s == "classify") return EvalTask::Classify;
    if (s == "rate") return EvalTask::Rate;
    if (s == "impact") return EvalTask::Impact;
    throw ConfigError("unknown task '" + s + "' (expected classify|rate|impact)");
}

SplitKind split_kind_from_string(const std::string& s) {
    if (s == "kfold5") return SplitKind::KFold5;
    if (s == "leave3users") return SplitKind::Leave3Users;
    throw ConfigError("unknown split '" + s + "' (expected kfold5|leave3users)");
}

namespace {

bool entry_has_label(const CorpusEntry& e, EvalTask task) {
    const StrokeLabels& lab = e.segment.labels;
    switch (task) {
    case EvalTask::Classify: return lab.stroke_type.has_value();
    case EvalTask::Rate: return lab.stroke_type.has_value() && lab.quality.has_value();
    case EvalTask::Impact: return lab.impact.has_value();
    }
    return false;
}

template <typename T> void seeded_shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(v[i - 1], v[j]);
    }
}

// Fold id per kept entry (-1 = always in the training split) and fold count.
// Assignment is at source-stroke / user granularity so augmented variants can
// never leak across the split.
std::pair<std::vector<int>, std::size_t> assign_folds(const Corpus& corpus,
                                                      const std::vector<std::size_t>& keep,
                                                      SplitKind split, std::uint64_t seed) {
    std::vector<int> fold(keep.size(), -1);
    Rng rng(seed);
    if (split == SplitKind::KFold5) {
        std::vector<std::size_t> sources;
        sources.reserve(keep.size());
        for (std::size_t idx : keep) sources.push_back(corpus.entries[idx].source_index);
        std::sort(sources.begin(), sources.end());
        sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
        if (sources.size() < 5) {
            throw ConfigError("kfold5 needs at least 5 distinct source strokes, have " +
                              std::to_string(sources.size()));
        }
        seeded_shuffle(sources, rng);
        std::map<std::size_t, int> fold_of_source;
        for (std::size_t i = 0; i < sources.size(); ++i) {
            fold_of_source[sources[i]] = static_cast<int>(i % 5);
        }
        for (std::size_t k = 0; k < keep.size(); ++k) {
            fold[k] = fold_of_source.at(corpus.entries[keep[k]].source_index);
        }
        return {std::move(fold), 5};
    }

    std::vector<std::string> users;
    users.reserve(keep.size());
    for (std::size_t idx : keep) users.push_back(corpus.entries[idx].user_id);
    std::sort(users.begin(), users.end());
    users.erase(std::unique(users.begin(), users.end()), users.end());
    if (users.size() < 4) {
        throw ConfigError("leave3users needs at least 4 distinct users, have " +
                          std::to_string(users.size()));
    }
    seeded_shuffle(users, rng);
    const std::size_t nfolds = users.size() / 3;
    std::map<std::string, int> fold_of_user;
    for (std::size_t i = 0; i < nfolds * 3; ++i) {
        fold_of_user[users[i]] = static_cast<int>(i / 3);
    }
    for (std::size_t k = 0; k < keep.size(); ++k) {
        const auto it = fold_of_user.find(corpus.entries[keep[k]].user_id);
        fold[k] = it == fold_of_user.end() ? -1 : it->second;
    }
    return {std::move(fold), nfolds};
}

struct TaskData {
    Matrix X;                    // one feature row per kept entry
    std::vector<int> type_of;    // stroke type as int (classify / rate)
    std::vector<double> quality; // rate
    std::vector<double> ix, iy;  // impact
    std::string schema;
};

TaskData build_task_data(const Corpus& corpus, const std::vector<std::size_t>& keep,
                         EvalTask task, bool audio_fusion) {
    TaskData data;
    data.X.reserve(keep.size());
    for (std::size_t idx : keep) {
        const CorpusEntry& e = corpus.entries[idx];
        const StrokeLabels& lab = e.segment.labels;
        switch (task) {
        case EvalTask::Classify:
            data.X.push_back(flatten(extract_class_features(e.segment)));
            data.type_of.push_back(static_cast<int>(*lab.stroke_type));
            break;
        case EvalTask::Rate:
            data.X.push_back(flatten(extract_rating_input(e.segment)));
            data.type_of.push_back(static_cast<int>(*lab.stroke_type));
            data.quality.push_back(*lab.quality);
            break;
        case EvalTask::Impact:
            data.X.push_back(flatten(extract_impact_features(e.segment, audio_fusion)));
            data.ix.push_back(lab.impact->x);
            data.iy.push_back(lab.impact->y);
            break;
        }
    }
    switch (task) {
    case EvalTask::Classify: data.schema = class_schema_hash(); break;
    case EvalTask::Rate: data.schema = rating_schema_hash(); break;
    case EvalTask::Impact: data.schema = impact_schema_hash(audio_fusion); break;
    }
    return data;
}

struct FoldOutcome {
    FoldMetrics m;
    std::vector<std::string> warnings;
    // Pooled accumulators for the cross-fold aggregate.
    std::array<double, kTypeCount> abs_err_by_type{};
    std::array<std::size_t, kTypeCount> n_by_type{};
};

std::string fold_tag(std::size_t f) { return "fold " + std::to_string(f) + ": "; }

FoldOutcome run_classify_fold(std::size_t f, const TaskData& data, const std::vector<int>& fold,
                              const EvalConfig& cfg) {
    FoldOutcome out;
    out.m.fold = f;
    Matrix Xtr;
    std::vector<int> ytr;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < data.X.size(); ++i) {
        if (fold[i] == static_cast<int>(f)) {
            test_idx.push_back(i);
        } else {
            Xtr.push_back(data.X[i]);
            ytr.push_back(data.type_of[i]);
        }
    }
    out.m.train_count = Xtr.size();
    out.m.test_count = test_idx.size();

    const std::set<int> train_classes(ytr.begin(), ytr.end());
    std::vector<int> pred;
    pred.reserve(test_idx.size());
    if (train_classes.size() < 2) {
        const int only = *train_classes.begin();
        pred.assign(test_idx.size(), only);
        out.warnings.push_back(fold_tag(f) +
                               "single class in training split; predicting it everywhere");
    } else {
        const SvmModel model = train_svc(Xtr, ytr, cfg.classify_cfg, data.schema);
        for (std::size_t idx : test_idx) pred.push_back(predict_svc(model, data.X[idx]).label);
    }

    std::array<std::array<std::size_t, kTypeCount>, kTypeCount> conf{}; // [truth][pred]
    std::size_t correct = 0;
    std::set<int> present;
    for (std::size_t j = 0; j < test_idx.size(); ++j) {
        const int truth = data.type_of[test_idx[j]];
        conf[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred[j])]++;
        if (truth == pred[j]) ++correct;
        present.insert(truth);
        present.insert(pred[j]);
    }
    if (!test_idx.empty()) {
        out.m.accuracy = static_cast<double>(correct) / static_cast<double>(test_idx.size());
    }

    double psum = 0.0, rsum = 0.0, fsum = 0.0;
    for (const int c : present) {
        const auto ci = static_cast<std::size_t>(c);
        const std::size_t tp = conf[ci][ci];
        std::size_t fp = 0, fn = 0;
        for (std::size_t o = 0; o < kTypeCount; ++o) {
            if (o == ci) continue;
            fp += conf[o][ci];
            fn += conf[ci][o];
        }
        const char* name = to_string(static_cast<StrokeType>(c));
        double prec = 0.0, rec = 0.0, f1 = 0.0;
        if (tp + fp == 0) {
            out.warnings.push_back(fold_tag(f) + std::string("precision undefined for ") + name +
                                   " (never predicted); using 0");
        } else {
            prec = static_cast<double>(tp) / static_cast<double>(tp + fp);
        }
        if (tp + fn == 0) {
            out.warnings.push_back(fold_tag(f) + std::string("recall undefined for ") + name +
                                   " (absent from truth); using 0");
        } else {
            rec = static_cast<double>(tp) / static_cast<double>(tp + fn);
        }
        if (prec + rec == 0.0) {
            f1 = 0.0;
        } else {
            f1 = 2.0 * prec * rec / (prec + rec);
        }
        psum += prec;
        rsum += rec;
        fsum += f1;
    }
    if (!present.empty()) {
        const auto np = static_cast<double>(present.size());
        out.m.macro_precision = psum / np;
        out.m.macro_recall = rsum / np;
        out.m.macro_f1 = fsum / np;
    }
    return out;
}

FoldOutcome run_rate_fold(std::size_t f, const TaskData& data, const std::vector<int>& fold,
                          const EvalConfig& cfg) {
    FoldOutcome out;
    out.m.fold = f;
    std::array<Matrix, kTypeCount> Xtr;
    std::array<std::vector<double>, kTypeCount> ytr;
    std::vector<std::size_t> test_idx;
    std::size_t train_total = 0;
    for (std::size_t i = 0; i < data.X.size(); ++i) {
        if (fold[i] == static_cast<int>(f)) {
            test_idx.push_back(i);
        } else {
            const auto t = static_cast<std::size_t>(data.type_of[i]);
            Xtr[t].push_back(data.X[i]);
            ytr[t].push_back(data.quality[i]);
            ++train_total;
        }
    }
    out.m.train_count = train_total;
    out.m.test_count = test_idx.size();

    std::array<std::optional<SvrModel>, kTypeCount> models;
    for (std::size_t t = 0; t < kTypeCount; ++t) {
        if (Xtr[t].size() < 2) continue; // below the regressor's minimum
        models[t] = train_svr(Xtr[t], ytr[t], cfg.rate_cfg, data.schema,
                              to_string(static_cast<StrokeType>(t)));
    }

    double abs_sum = 0.0;
    std::size_t scored = 0;
    std::array<std::size_t, kTypeCount> skipped{};
    for (std::size_t idx : test_idx) {
        const auto t = static_cast<std::size_t>(data.type_of[idx]);
        if (!models[t]) {
            ++skipped[t];
            continue;
        }
        const double pred = clamp_quality(predict_svr(*models[t], data.X[idx]));
        const double err = std::abs(pred - data.quality[idx]);
        abs_sum += err;
        out.abs_err_by_type[t] += err;
        ++out.n_by_type[t];
        ++scored;
    }
    for (std::size_t t = 0; t < kTypeCount; ++t) {
        if (skipped[t] > 0) {
            out.warnings.push_back(fold_tag(f) + "under 2 " +
                                   std::string(to_string(static_cast<StrokeType>(t))) +
                                   " strokes in training split; skipped " +
                                   std::to_string(skipped[t]) + " test strokes");
        }
        if (out.n_by_type[t] > 0) {
            out.m.mae_by_type[t] =
                out.abs_err_by_type[t] / static_cast<double>(out.n_by_type[t]);
        }
    }
    if (scored > 0) out.m.mae = abs_sum / static_cast<double>(scored);
    return out;
}

FoldOutcome run_impact_fold(std::size_t f, const TaskData& data, const std::vector<int>& fold,
                            const EvalConfig& cfg) {
    FoldOutcome out;
    out.m.fold = f;
    Matrix Xtr;
    std::vector<double> yx, yy;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < data.X.size(); ++i) {
        if (fold[i] == static_cast<int>(f)) {
            test_idx.push_back(i);
        } else {
            Xtr.push_back(data.X[i]);
            yx.push_back(data.ix[i]);
            yy.push_back(data.iy[i]);
        }
    }
    out.m.train_count = Xtr.size();
    out.m.test_count = test_idx.size();

    const SvrModel mx = train_svr(Xtr, yx, cfg.impact_cfg, data.schema, "x");
    const SvrModel my = train_svr(Xtr, yy, cfg.impact_cfg, data.schema, "y");

    double ax = 0.0, ay = 0.0;
    for (std::size_t idx : test_idx) {
        const ImpactPoint p = clamp_to_face(
            ImpactPoint{predict_svr(mx, data.X[idx]), predict_svr(my, data.X[idx])});
        ax += std::abs(p.x - data.ix[idx]);
        ay += std::abs(p.y - data.iy[idx]);
    }
    if (!test_idx.empty()) {
        out.m.mae_x = ax / static_cast<double>(test_idx.size());
        out.m.mae_y = ay / static_cast<double>(test_idx.size());
        out.m.mae = 0.5 * (out.m.mae_x + out.m.mae_y);
    }
    return out;
}

} // namespace

SplitAssignment eval_split_assignment(const Corpus& corpus, EvalTask task, SplitKind split,
                                      std::uint64_t seed) {
    SplitAssignment sa;
    sa.entry_index.reserve(corpus.entries.size());
    for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
        if (entry_has_label(corpus.entries[i], task)) sa.entry_index.push_back(i);
    }
    if (sa.entry_index.empty()) {
        throw ConfigError("evaluate: corpus has no labeled strokes for this task");
    }
    auto [fold, nfolds] = assign_folds(corpus, sa.entry_index, split, seed);
    sa.fold = std::move(fold);
    sa.fold_count = nfolds;
    return sa;
}

EvalResult evaluate(const Corpus& corpus, EvalTask task, SplitKind split,
                    const EvalConfig& config) {
    SplitAssignment sa = eval_split_assignment(corpus, task, split, config.seed);
    const std::vector<std::size_t>& keep = sa.entry_index;
    const std::vector<int>& fold = sa.fold;
    const std::size_t nfolds = sa.fold_count;
    const TaskData data = build_task_data(corpus, keep, task, config.audio_fusion);

    std::vector<std::future<FoldOutcome>> jobs;
    jobs.reserve(nfolds);
    for (std::size_t f = 0; f < nfolds; ++f) {
        jobs.push_back(std::async(std::launch::async, [&, f]() {
            switch (task) {
            case EvalTask::Classify: return run_classify_fold(f, data, fold, config);
            case EvalTask::Rate: return run_rate_fold(f, data, fold, config);
            case EvalTask::Impact: return run_impact_fold(f, data, fold, config);
            }
            throw std::logic_error("unreachable");
        }));
    }

    EvalResult result;
    result.task = task;
    result.split = split;
    std::array<double, kTypeCount> pooled_abs{};
    std::array<std::size_t, kTypeCount> pooled_n{};
    for (auto& job : jobs) {
        FoldOutcome out = job.get();
        result.folds.push_back(out.m);
        for (const std::string& w : out.warnings) result.warnings.push_back(w);
        for (std::size_t t = 0; t < kTypeCount; ++t) {
            pooled_abs[t] += out.abs_err_by_type[t];
            pooled_n[t] += out.n_by_type[t];
        }
    }

    FoldMetrics& mean = result.mean;
    const auto nf = static_cast<double>(result.folds.size());
    for (const FoldMetrics& m : result.folds) {
        mean.train_count += m.train_count;
        mean.test_count += m.test_count;
        mean.accuracy += m.accuracy / nf;
        mean.macro_precision += m.macro_precision / nf;
        mean.macro_recall += m.macro_recall / nf;
        mean.macro_f1 += m.macro_f1 / nf;
        mean.mae += m.mae / nf;
        mean.mae_x += m.mae_x / nf;
        mean.mae_y += m.mae_y / nf;
    }
    // Per-type MAE pools every held-out prediction so types absent from some
    // fold are still averaged over their own prediction count.
    for (std::size_t t = 0; t < kTypeCount; ++t) {
        if (pooled_n[t] > 0) {
            mean.mae_by_type[t] = pooled_abs[t] / static_cast<double>(pooled_n[t]);
        }
    }
    return result;
}

} // namespace bsense
