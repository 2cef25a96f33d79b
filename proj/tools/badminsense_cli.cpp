// Command-line surface for the stroke analysis toolkit: streaming ingest
// server, session replay, per-session analysis, model training and
// evaluation, synthetic data generation, report rendering, and rating
// reliability statistics.

#include "CLI11.hpp"

#include "bsense/analytics.hpp"
#include "bsense/dataset.hpp"
#include "bsense/errors.hpp"
#include "bsense/features.hpp"
#include "bsense/pipeline.hpp"
#include "bsense/report.hpp"
#include "bsense/server.hpp"
#include "bsense/store.hpp"
#include "bsense/synth.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

using namespace bsense;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

std::string single_line(std::string s) {
    for (char& c : s) {
        if (c == '\n' || c == '\r') c = ' ';
    }
    return s;
}

std::pair<std::string, std::uint16_t> parse_addr(const std::string& addr) {
    const std::size_t colon = addr.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == addr.size()) {
        throw ConfigError("address must be host:port, got '" + addr + "'");
    }
    const std::string host = addr.substr(0, colon);
    const std::string port_str = addr.substr(colon + 1);
    int port = -1;
    try {
        std::size_t pos = 0;
        port = std::stoi(port_str, &pos);
        if (pos != port_str.size()) port = -1;
    } catch (const std::exception&) {
        port = -1;
    }
    if (port < 0 || port > 65535) {
        throw ConfigError("invalid port in address '" + addr + "'");
    }
    return {host, static_cast<std::uint16_t>(port)};
}

struct SessionRef {
    SessionStore store;
    std::string id;
};

// A --session argument names one session directory: <store>/sessions/<id>.
SessionRef open_session_dir(const fs::path& dir) {
    std::error_code ec;
    fs::path base = fs::weakly_canonical(dir, ec);
    if (ec) base = dir;
    if (!fs::exists(base / "meta.json")) {
        throw ConfigError("not a session directory (missing meta.json): " + dir.string());
    }
    if (base.parent_path().filename() != "sessions") {
        throw ConfigError("expected a <store>/sessions/<id> directory, got " + dir.string());
    }
    return {SessionStore(base.parent_path().parent_path()), base.filename().string()};
}

// ---------------------------------------------------------------------------
// Model bundle layout
// ---------------------------------------------------------------------------

constexpr const char* kClassifyFile = "classify.json";
constexpr const char* kImpactXFile = "impact_x.json";
constexpr const char* kImpactYFile = "impact_y.json";

std::string rate_file(StrokeType t) { return std::string("rate_") + to_string(t) + ".json"; }

std::string need_file(const fs::path& dir, const std::string& name) {
    const fs::path p = dir / name;
    if (!fs::exists(p)) {
        throw ConfigError("model bundle is missing " + name + " under " + dir.string());
    }
    return p.string();
}

ModelBundle load_bundle(const fs::path& dir, bool audio_fusion) {
    ModelBundle bundle;
    bundle.classifier = load_svc(need_file(dir, kClassifyFile), class_schema_hash());
    for (const StrokeType t : kAllStrokeTypes) {
        bundle.raters[t] = load_svr(need_file(dir, rate_file(t)), rating_schema_hash());
    }
    bundle.impact_x = load_svr(need_file(dir, kImpactXFile), impact_schema_hash(audio_fusion));
    bundle.impact_y = load_svr(need_file(dir, kImpactYFile), impact_schema_hash(audio_fusion));
    bundle.audio_fusion = audio_fusion;
    return bundle;
}

// ---------------------------------------------------------------------------
// serve
// ---------------------------------------------------------------------------

std::atomic<bool> g_stop_requested{false};
void handle_stop_signal(int) { g_stop_requested.store(true); }

void run_serve(const std::string& listen, const fs::path& store_dir) {
    const auto [host, port] = parse_addr(listen);
    SessionStore store(store_dir);
    net::StreamServer server(store, host, port);
    server.start();
    std::signal(SIGINT, handle_stop_signal);
    std::signal(SIGTERM, handle_stop_signal);
    std::printf("listening on %s:%u store %s\n", host.c_str(), server.port(),
                store.root().string().c_str());
    std::fflush(stdout);
    while (!g_stop_requested.load()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    server.stop();
    const net::ServerStats st = server.stats();
    std::printf("connections %llu sessions_completed %llu sessions_incomplete %llu "
                "protocol_errors %llu heartbeats_accepted %llu heartbeats_discarded %llu\n",
                static_cast<unsigned long long>(st.connections),
                static_cast<unsigned long long>(st.sessions_completed),
                static_cast<unsigned long long>(st.sessions_incomplete),
                static_cast<unsigned long long>(st.protocol_errors),
                static_cast<unsigned long long>(st.heartbeats_accepted),
                static_cast<unsigned long long>(st.heartbeats_discarded));
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

void run_replay(const fs::path& session_dir, const std::string& to, double speed) {
    const SessionRef ref = open_session_dir(session_dir);
    const SessionRecording recording = ref.store.load_session(ref.id);
    const auto [host, port] = parse_addr(to);
    net::ReplayOptions options;
    options.speed = speed;
    const net::ReplayResult result = net::replay_session(recording, host, port, options);
    if (!result.stop_acked) {
        throw ConfigError("server did not acknowledge the session (duplicate id or protocol "
                          "error); sent " +
                          std::to_string(result.frames_sent) + " frames");
    }
    std::printf("replayed %s: %zu frames to %s:%u\n", ref.id.c_str(), result.frames_sent,
                host.c_str(), port);
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

void run_analyze(const fs::path& session_dir, const fs::path& models_dir, bool audio_fusion) {
    const SessionRef ref = open_session_dir(session_dir);
    const SessionRecording recording = ref.store.load_session(ref.id);
    const ModelBundle bundle = load_bundle(models_dir, audio_fusion);
    const SessionReport report = analyze_session(recording, bundle);
    ref.store.save_results(ref.id, report_to_json(report));
    std::printf("analyzed %s: %zu strokes, %zu failures, mean rating %.2f\n", ref.id.c_str(),
                report.strokes.size(), report.failures.size(), report.mean_rating);
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

void run_train(const fs::path& data_dir, const std::string& task_name, const fs::path& out_dir,
               bool grid_search, bool audio_fusion) {
    const EvalTask task = eval_task_from_string(task_name);
    const SessionStore store(data_dir);
    const Corpus corpus = load_corpus(store);
    if (corpus.size() == 0) {
        throw ConfigError("no labeled strokes found under " + data_dir.string() +
                          " (sessions need truth sidecars)");
    }
    fs::create_directories(out_dir);
    const EvalConfig defaults; // carries the per-task TrainConfig defaults

    switch (task) {
    case EvalTask::Classify: {
        Matrix X;
        std::vector<int> y;
        for (const CorpusEntry& e : corpus.entries) {
            if (!e.segment.labels.stroke_type) continue;
            X.push_back(flatten(extract_class_features(e.segment)));
            y.push_back(static_cast<int>(*e.segment.labels.stroke_type));
        }
        TrainConfig cfg = defaults.classify_cfg;
        if (grid_search) cfg = grid_search_svc(X, y, cfg);
        const SvmModel model = train_svc(X, y, cfg, class_schema_hash());
        save_model(model, (out_dir / kClassifyFile).string());
        std::printf("trained classifier on %zu strokes -> %s\n", X.size(),
                    (out_dir / kClassifyFile).string().c_str());
        break;
    }
    case EvalTask::Rate: {
        std::array<Matrix, 4> X;
        std::array<std::vector<double>, 4> y;
        for (const CorpusEntry& e : corpus.entries) {
            if (!e.segment.labels.stroke_type || !e.segment.labels.quality) continue;
            const auto t = static_cast<std::size_t>(*e.segment.labels.stroke_type);
            X[t].push_back(flatten(extract_rating_input(e.segment)));
            y[t].push_back(*e.segment.labels.quality);
        }
        for (std::size_t t = 0; t < 4; ++t) {
            const StrokeType type = kAllStrokeTypes[t];
            if (X[t].size() < 2) {
                throw ConfigError(std::string("need at least 2 rated ") + to_string(type) +
                                  " strokes, have " + std::to_string(X[t].size()));
            }
            TrainConfig cfg = defaults.rate_cfg;
            if (grid_search) cfg = grid_search_svr(X[t], y[t], cfg);
            const SvrModel model =
                train_svr(X[t], y[t], cfg, rating_schema_hash(), to_string(type));
            save_model(model, (out_dir / rate_file(type)).string());
            std::printf("trained %s rater on %zu strokes -> %s\n", to_string(type), X[t].size(),
                        (out_dir / rate_file(type)).string().c_str());
        }
        break;
    }
    case EvalTask::Impact: {
        Matrix X;
        std::vector<double> yx, yy;
        for (const CorpusEntry& e : corpus.entries) {
            if (!e.segment.labels.impact) continue;
            X.push_back(flatten(extract_impact_features(e.segment, audio_fusion)));
            yx.push_back(e.segment.labels.impact->x);
            yy.push_back(e.segment.labels.impact->y);
        }
        TrainConfig cfg_x = defaults.impact_cfg;
        TrainConfig cfg_y = defaults.impact_cfg;
        if (grid_search) {
            cfg_x = grid_search_svr(X, yx, cfg_x);
            cfg_y = grid_search_svr(X, yy, cfg_y);
        }
        const std::string schema = impact_schema_hash(audio_fusion);
        save_model(train_svr(X, yx, cfg_x, schema, "x"), (out_dir / kImpactXFile).string());
        save_model(train_svr(X, yy, cfg_y, schema, "y"), (out_dir / kImpactYFile).string());
        std::printf("trained impact regressors on %zu strokes -> %s, %s\n", X.size(),
                    (out_dir / kImpactXFile).string().c_str(),
                    (out_dir / kImpactYFile).string().c_str());
        break;
    }
    }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

void print_fold_row(EvalTask task, const char* tag, const FoldMetrics& m) {
    switch (task) {
    case EvalTask::Classify:
        std::printf("%s\t%zu\t%zu\t%.4f\t%.4f\t%.4f\t%.4f\n", tag, m.train_count, m.test_count,
                    m.accuracy, m.macro_precision, m.macro_recall, m.macro_f1);
        break;
    case EvalTask::Rate:
        std::printf("%s\t%zu\t%zu\t%.4f\t%.4f\t%.4f\t%.4f\t%.4f\n", tag, m.train_count,
                    m.test_count, m.mae, m.mae_by_type[0], m.mae_by_type[1], m.mae_by_type[2],
                    m.mae_by_type[3]);
        break;
    case EvalTask::Impact:
        std::printf("%s\t%zu\t%zu\t%.4f\t%.4f\t%.4f\n", tag, m.train_count, m.test_count, m.mae,
                    m.mae_x, m.mae_y);
        break;
    }
}

void run_eval(const fs::path& data_dir, const std::string& task_name,
              const std::string& split_name, std::uint64_t seed, bool augment,
              bool audio_fusion) {
    const EvalTask task = eval_task_from_string(task_name);
    const SplitKind split = split_kind_from_string(split_name);
    const SessionStore store(data_dir);
    Corpus corpus = load_corpus(store);
    if (augment) {
        Rng rng(seed);
        augment_corpus(corpus, rng);
    }
    EvalConfig cfg;
    cfg.seed = seed;
    cfg.audio_fusion = audio_fusion;
    const EvalResult result = evaluate(corpus, task, split, cfg);

    std::printf("task %s split %s seed %llu strokes %zu\n", task_name.c_str(),
                split_name.c_str(), static_cast<unsigned long long>(seed), corpus.size());
    switch (task) {
    case EvalTask::Classify:
        std::printf("fold\ttrain\ttest\taccuracy\tmacro_precision\tmacro_recall\tmacro_f1\n");
        break;
    case EvalTask::Rate:
        std::printf("fold\ttrain\ttest\tmae\tmae_BOC\tmae_FOC\tmae_FOS\tmae_FOD\n");
        break;
    case EvalTask::Impact:
        std::printf("fold\ttrain\ttest\tmae\tmae_x\tmae_y\n");
        break;
    }
    for (const FoldMetrics& m : result.folds) {
        print_fold_row(task, std::to_string(m.fold).c_str(), m);
    }
    print_fold_row(task, "mean", result.mean);
    for (const std::string& w : result.warnings) {
        std::fprintf(stderr, "warning: %s\n", w.c_str());
    }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

void run_synth(std::size_t strokes, std::size_t air_swings, const fs::path& out_dir,
               std::uint64_t seed, std::string user_id, std::string session_id) {
    if (strokes == 0) throw ConfigError("--strokes must be at least 1");
    if (user_id.empty()) user_id = "user" + std::to_string(seed);
    if (session_id.empty()) session_id = "synth-" + std::to_string(seed);

    SessionStore store(out_dir);
    Rng rng(seed);

    // Contact strokes round-robin the four types so small corpora still cover
    // every per-type model; air swings are interleaved by seeded shuffle.
    std::vector<StrokeSpec> specs;
    for (std::size_t k = 0; k < strokes; ++k) {
        StrokeSpec s;
        s.type = kAllStrokeTypes[k % kAllStrokeTypes.size()];
        s.quality = rng.uniform(1.0, 5.0);
        s.impact.x = rng.uniform(-0.35, 0.35);
        s.impact.y = rng.uniform(0.45, 0.85);
        specs.push_back(s);
    }
    for (std::size_t k = 0; k < air_swings; ++k) {
        StrokeSpec s;
        s.type = kAllStrokeTypes[rng.uniform_int(0, 3)];
        s.quality = rng.uniform(2.0, 5.0);
        s.is_air_swing = true;
        specs.push_back(s);
    }
    for (std::size_t i = specs.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1));
        std::swap(specs[i - 1], specs[j]);
    }
    double onset_s = 2.0;
    for (StrokeSpec& s : specs) {
        s.onset_time_s = onset_s;
        onset_s += 3.0;
    }

    SynthConfig cfg;
    cfg.seed = seed;
    cfg.user_id = user_id;
    SynthSession session = gen_session(specs, cfg, onset_s);
    session.recording.meta.session_id = session_id;
    session.recording.meta.device_id = "synth";
    if (session.recording.meta.wall_clock_start_ns == 0 &&
        !session.recording.imu.t_ns.empty()) {
        session.recording.meta.wall_clock_start_ns = session.recording.imu.t_ns.front();
    }
    store.save_recording(session.recording);
    store.save_truth(session_id, truth_to_json(session.truth, user_id));
    std::printf("wrote session %s (%zu contact strokes, %zu air swings, user %s) under %s\n",
                session_id.c_str(), strokes, air_swings, user_id.c_str(),
                store.session_dir(session_id).string().c_str());
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

void run_report(const fs::path& session_dir, const std::string& format, const fs::path& out) {
    const SessionRef ref = open_session_dir(session_dir);
    if (!fs::exists(ref.store.session_dir(ref.id) / "results.json")) {
        throw ConfigError("session " + ref.id + " has no analysis results yet; run analyze first");
    }
    const SessionReport report = report_from_json(ref.store.load_results(ref.id));
    const std::string document = render_report(report, format);
    if (out == "-") {
        std::fwrite(document.data(), 1, document.size(), stdout);
        return;
    }
    std::ofstream file(out, std::ios::binary);
    if (!file) throw ConfigError("cannot write report to " + out.string());
    file << document;
    file.close();
    std::printf("wrote %s report for %s to %s\n", format.c_str(), ref.id.c_str(),
                out.string().c_str());
}

// ---------------------------------------------------------------------------
// icc
// ---------------------------------------------------------------------------

void run_icc(const fs::path& csv) {
    const RatingsTable table = load_ratings_csv(csv);
    for (const std::vector<double>& row : table.scores) {
        for (const double v : row) {
            if (std::isnan(v)) {
                throw ConfigError("ratings matrix has missing entries; ICC needs a complete "
                                  "strokes x assessors grid");
            }
        }
    }
    try {
        std::printf("%.17g\n", icc_consistency_k(table.scores));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

int fail(const char* category, const std::exception& e) {
    std::fprintf(stderr, "error: %s: %s\n", category, single_line(e.what()).c_str());
    return 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"badminton stroke capture and analysis toolkit"};
    app.require_subcommand(1);

    // serve
    auto* serve = app.add_subcommand("serve", "accept live device streams and persist sessions");
    std::string serve_listen = "127.0.0.1:7060";
    fs::path serve_store;
    serve->add_option("--listen", serve_listen, "listen address host:port")
        ->capture_default_str();
    serve->add_option("--store", serve_store, "session store root directory")->required();

    // replay
    auto* replay = app.add_subcommand("replay", "stream a stored session to a server");
    fs::path replay_session_dir;
    std::string replay_to;
    double replay_speed = 1.0;
    replay->add_option("--session", replay_session_dir, "session directory")->required();
    replay->add_option("--to", replay_to, "server address host:port")->required();
    replay->add_option("--speed", replay_speed, "pacing multiple of real time")
        ->capture_default_str();

    // analyze
    auto* analyze = app.add_subcommand("analyze", "run stroke analysis over a stored session");
    fs::path analyze_session_dir, analyze_models;
    bool analyze_audio_fusion = false;
    analyze->add_option("--session", analyze_session_dir, "session directory")->required();
    analyze->add_option("--models", analyze_models, "model bundle directory")->required();
    analyze->add_flag("--audio-fusion", analyze_audio_fusion,
                      "impact models that also consume the audio spectrogram");

    // train
    auto* train = app.add_subcommand("train", "train task models from stored sessions");
    fs::path train_data, train_out;
    std::string train_task;
    bool train_grid = false, train_audio_fusion = false;
    train->add_option("--data", train_data, "store root with truth sidecars")->required();
    train->add_option("--task", train_task, "classify|rate|impact")->required();
    train->add_option("--out", train_out, "output model bundle directory")->required();
    train->add_flag("--grid-search", train_grid, "cross-validated C x gamma search first");
    train->add_flag("--audio-fusion", train_audio_fusion,
                    "impact task: include the audio spectrogram features");

    // eval
    auto* eval = app.add_subcommand("eval", "cross-validated evaluation on stored sessions");
    fs::path eval_data;
    std::string eval_task_name, eval_split = "kfold5";
    std::uint64_t eval_seed = 1;
    bool eval_augment = false, eval_audio_fusion = false;
    eval->add_option("--data", eval_data, "store root with truth sidecars")->required();
    eval->add_option("--task", eval_task_name, "classify|rate|impact")->required();
    eval->add_option("--split", eval_split, "kfold5|leave3users")->capture_default_str();
    eval->add_option("--seed", eval_seed, "split seed")->capture_default_str();
    eval->add_flag("--augment", eval_augment, "expand the corpus with augmented variants");
    eval->add_flag("--audio-fusion", eval_audio_fusion,
                   "impact task: include the audio spectrogram features");

    // synth
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic session");
    std::size_t synth_strokes = 0, synth_air = 0;
    fs::path synth_out;
    std::uint64_t synth_seed = 1;
    std::string synth_user, synth_id;
    synth->add_option("--strokes", synth_strokes, "number of contact strokes")->required();
    synth->add_option("--air-swings", synth_air, "additional air swings (no shuttle contact)")
        ->capture_default_str();
    synth->add_option("--out", synth_out, "session store root directory")->required();
    synth->add_option("--seed", synth_seed, "generator seed")->capture_default_str();
    synth->add_option("--user", synth_user, "user id (default userSEED)");
    synth->add_option("--id", synth_id, "session id (default synth-SEED)");

    // report
    auto* report = app.add_subcommand("report", "render an analyzed session as a document");
    fs::path report_session_dir, report_out;
    std::string report_format;
    report->add_option("--session", report_session_dir, "session directory")->required();
    report->add_option("--format", report_format, "json|html")->required();
    report->add_option("--out", report_out, "output file ('-' for stdout)")->required();

    // icc
    auto* icc = app.add_subcommand("icc", "inter-rater consistency ICC(C,k) from a ratings CSV");
    fs::path icc_csv;
    icc->add_option("--ratings", icc_csv,
                    "CSV: header row of assessor ids, one row per stroke")
        ->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::fprintf(stderr, "error: usage: %s\n", single_line(e.what()).c_str());
        return 2;
    }

    try {
        if (app.got_subcommand(serve)) {
            run_serve(serve_listen, serve_store);
        } else if (app.got_subcommand(replay)) {
            run_replay(replay_session_dir, replay_to, replay_speed);
        } else if (app.got_subcommand(analyze)) {
            run_analyze(analyze_session_dir, analyze_models, analyze_audio_fusion);
        } else if (app.got_subcommand(train)) {
            run_train(train_data, train_task, train_out, train_grid, train_audio_fusion);
        } else if (app.got_subcommand(eval)) {
            run_eval(eval_data, eval_task_name, eval_split, eval_seed, eval_augment,
                     eval_audio_fusion);
        } else if (app.got_subcommand(synth)) {
            run_synth(synth_strokes, synth_air, synth_out, synth_seed, synth_user, synth_id);
        } else if (app.got_subcommand(report)) {
            run_report(report_session_dir, report_format, report_out);
        } else if (app.got_subcommand(icc)) {
            run_icc(icc_csv);
        }
        return 0;
    } catch (const ConfigError& e) {
        return fail("config", e);
    } catch (const ParseError& e) {
        return fail("parse", e);
    } catch (const SchemaError& e) {
        return fail("schema", e);
    } catch (const CoverageError& e) {
        return fail("coverage", e);
    } catch (const std::invalid_argument& e) {
        return fail("invalid-argument", e);
    } catch (const std::exception& e) {
        return fail("internal", e);
    }
}
