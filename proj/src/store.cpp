#include "bsense/store.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "bsense/errors.hpp"
#include "bsense/util.hpp"

namespace bsense {

namespace fs = std::filesystem;

namespace {

constexpr int kMetaSchemaVersion = 1;

void put_le16(std::ostream& out, std::uint16_t v) {
    char b[2] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff)};
    out.write(b, 2);
}

void put_le32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    out.write(b, 4);
}

std::uint16_t get_le16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t get_le32(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) |
           (static_cast<std::uint32_t>(p[3]) << 24);
}

std::int16_t sample_to_pcm16(double x) {
    const double clamped = std::clamp(x, -1.0, 1.0);
    return static_cast<std::int16_t>(std::llround(clamped * 32767.0));
}

// 44-byte canonical PCM WAV header; sizes may be patched later in place.
void write_wav_header(std::ostream& out, int sample_rate_hz, std::uint32_t data_bytes) {
    out.write("RIFF", 4);
    put_le32(out, 36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put_le32(out, 16);
    put_le16(out, 1); // PCM
    put_le16(out, 1); // mono
    put_le32(out, static_cast<std::uint32_t>(sample_rate_hz));
    put_le32(out, static_cast<std::uint32_t>(sample_rate_hz * 2));
    put_le16(out, 2);  // block align
    put_le16(out, 16); // bits per sample
    out.write("data", 4);
    put_le32(out, data_bytes);
}

std::string hash_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open for hashing: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string bytes = buf.str();
    return "fnv1a64:" + to_hex(fnv1a64(bytes.data(), bytes.size()));
}

void write_json_file(const fs::path& path, const nlohmann::ordered_json& j) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path.string());
    out << j.dump(2) << '\n';
    if (!out) throw ParseError("write failed: " + path.string());
}

nlohmann::ordered_json read_json_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    try {
        return nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

void check_session_id(const std::string& id) {
    if (id.empty()) throw ConfigError("session id must not be empty");
    if (id.find('/') != std::string::npos || id.find('\\') != std::string::npos ||
        id.find("..") != std::string::npos)
        throw ConfigError("session id must not contain path separators: " + id);
}

// Keeps meta.json's file->hash map current when a sidecar file is added
// after the streams were closed.
void patch_meta_hash(const fs::path& dir, const std::string& filename) {
    const fs::path meta_path = dir / "meta.json";
    if (!fs::exists(meta_path)) return;
    nlohmann::ordered_json meta = read_json_file(meta_path);
    meta["files"][filename] = hash_file(dir / filename);
    write_json_file(meta_path, meta);
}

} // namespace

void write_wav_pcm16(const fs::path& path, const std::vector<double>& samples,
                     int sample_rate_hz) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write " + path.string());
    write_wav_header(out, sample_rate_hz,
                     static_cast<std::uint32_t>(samples.size() * 2));
    for (double x : samples) put_le16(out, static_cast<std::uint16_t>(sample_to_pcm16(x)));
    if (!out) throw ParseError("write failed: " + path.string());
}

std::vector<double> read_wav_pcm16(const fs::path& path, int& sample_rate_hz) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        throw ParseError("not a WAV file: " + path.string());

    // Walk the chunk list for "fmt " and "data".
    std::size_t pos = 12;
    int rate = 0;
    std::uint16_t channels = 0, bits = 0;
    const unsigned char* data = nullptr;
    std::uint32_t data_len = 0;
    while (pos + 8 <= bytes.size()) {
        const std::uint32_t len = get_le32(bytes.data() + pos + 4);
        if (pos + 8 + len > bytes.size())
            throw ParseError("truncated WAV chunk in " + path.string());
        if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0 && len >= 16) {
            const unsigned char* f = bytes.data() + pos + 8;
            if (get_le16(f) != 1)
                throw ParseError("WAV is not integer PCM: " + path.string());
            channels = get_le16(f + 2);
            rate = static_cast<int>(get_le32(f + 4));
            bits = get_le16(f + 14);
        } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
            data = bytes.data() + pos + 8;
            data_len = len;
        }
        pos += 8 + len + (len % 2); // chunks are word-aligned
    }
    if (rate == 0 || data == nullptr)
        throw ParseError("WAV missing fmt or data chunk: " + path.string());
    if (channels != 1 || bits != 16)
        throw ParseError("expected mono 16-bit PCM: " + path.string());

    sample_rate_hz = rate;
    std::vector<double> samples(data_len / 2);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto u = get_le16(data + 2 * i);
        samples[i] = static_cast<double>(static_cast<std::int16_t>(u)) / 32767.0;
    }
    return samples;
}

// ---------------------------------------------------------------------------
// SessionWriter
// ---------------------------------------------------------------------------

struct SessionWriter::Impl {
    std::ofstream imu;
    std::ofstream wav;
    int audio_rate_hz = static_cast<int>(kAudioRateHz);
    std::int64_t audio_start_ns = 0;
    bool have_audio = false;
    std::int64_t last_imu_ns = 0;
    bool have_imu = false;
    std::int64_t last_chunk_ns = 0;
};

SessionWriter::SessionWriter(fs::path dir, std::string session_id, std::string device_id,
                             std::int64_t wall_clock_start_ns)
    : dir_(std::move(dir)),
      session_id_(std::move(session_id)),
      device_id_(std::move(device_id)),
      wall_clock_start_ns_(wall_clock_start_ns),
      impl_(std::make_unique<Impl>()) {
    fs::create_directories(dir_);
    impl_->imu.open(dir_ / "imu.jsonl", std::ios::binary | std::ios::trunc);
    impl_->wav.open(dir_ / "audio.wav", std::ios::binary | std::ios::trunc);
    if (!impl_->imu || !impl_->wav)
        throw ParseError("cannot create stream files in " + dir_.string());
    write_wav_header(impl_->wav, impl_->audio_rate_hz, 0);
}

SessionWriter::~SessionWriter() {
    if (!finalized_) {
        try {
            finalize(false);
        } catch (...) {
            // Destructor cleanup: the session stays flagged incomplete.
        }
    }
}

void SessionWriter::append_imu(std::int64_t t_ns, const std::array<double, 6>& values) {
    if (finalized_) throw ConfigError("session already finalized: " + session_id_);
    if (impl_->have_imu && t_ns <= impl_->last_imu_ns) {
        t_ns = impl_->last_imu_ns + 1;
        ++clamped_;
    }
    impl_->last_imu_ns = t_ns;
    impl_->have_imu = true;

    nlohmann::ordered_json rec;
    rec["t_ns"] = t_ns;
    for (std::size_t a = 0; a < kAxisCount; ++a) rec[kAxisNames[a]] = values[a];
    impl_->imu << rec.dump() << '\n';
    ++imu_count_;
}

void SessionWriter::append_audio(std::int64_t t_ns, const std::vector<std::int16_t>& pcm) {
    if (finalized_) throw ConfigError("session already finalized: " + session_id_);
    if (!impl_->have_audio) {
        impl_->audio_start_ns = t_ns;
        impl_->have_audio = true;
    } else if (t_ns <= impl_->last_chunk_ns) {
        t_ns = impl_->last_chunk_ns + 1;
        ++clamped_;
    }
    impl_->last_chunk_ns = t_ns;
    for (std::int16_t s : pcm) put_le16(impl_->wav, static_cast<std::uint16_t>(s));
    audio_count_ += pcm.size();
}

void SessionWriter::finalize(bool complete) {
    if (finalized_) return;
    finalized_ = true;

    impl_->imu.flush();
    impl_->imu.close();
    // Patch the RIFF and data chunk sizes now that the sample count is known.
    const auto data_bytes = static_cast<std::uint32_t>(audio_count_ * 2);
    impl_->wav.seekp(4);
    put_le32(impl_->wav, 36 + data_bytes);
    impl_->wav.seekp(40);
    put_le32(impl_->wav, data_bytes);
    impl_->wav.flush();
    impl_->wav.close();

    nlohmann::ordered_json meta;
    meta["schema_version"] = kMetaSchemaVersion;
    meta["session_id"] = session_id_;
    meta["device_id"] = device_id_;
    meta["status"] = complete ? "complete" : "incomplete";
    meta["wall_clock_start_ns"] = wall_clock_start_ns_;
    meta["imu_rate_hz"] = static_cast<int>(kImuRateHz);
    meta["audio_rate_hz"] = impl_->audio_rate_hz;
    meta["audio_start_ns"] = impl_->audio_start_ns;
    meta["imu_samples"] = imu_count_;
    meta["audio_samples"] = audio_count_;
    meta["clamped_timestamps"] = clamped_;
    nlohmann::ordered_json files;
    files["imu.jsonl"] = hash_file(dir_ / "imu.jsonl");
    files["audio.wav"] = hash_file(dir_ / "audio.wav");
    if (fs::exists(dir_ / "truth.json")) files["truth.json"] = hash_file(dir_ / "truth.json");
    meta["files"] = files;
    write_json_file(dir_ / "meta.json", meta);
}

// ---------------------------------------------------------------------------
// SessionStore
// ---------------------------------------------------------------------------

SessionStore::SessionStore(fs::path root) : root_(std::move(root)) {
    fs::create_directories(root_ / "sessions");
}

SessionStore SessionStore::from_env_or(const fs::path& fallback) {
    if (const char* env = std::getenv(kStoreRootEnvVar); env != nullptr && *env != '\0')
        return SessionStore(fs::path(env));
    return SessionStore(fallback);
}

fs::path SessionStore::session_dir(const std::string& session_id) const {
    return root_ / "sessions" / session_id;
}

bool SessionStore::has_session(const std::string& session_id) const {
    return fs::exists(session_dir(session_id) / "meta.json") ||
           fs::exists(session_dir(session_id) / "imu.jsonl");
}

std::vector<std::string> SessionStore::list_sessions() const {
    std::vector<std::string> ids;
    const fs::path dir = root_ / "sessions";
    if (!fs::exists(dir)) return ids;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_directory()) ids.push_back(entry.path().filename().string());
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::unique_ptr<SessionWriter> SessionStore::create_session(
    const std::string& session_id, const std::string& device_id,
    std::int64_t wall_clock_start_ns) {
    check_session_id(session_id);
    if (fs::exists(session_dir(session_id)))
        throw ConfigError("session id already exists in the store: " + session_id);
    return std::unique_ptr<SessionWriter>(new SessionWriter(
        session_dir(session_id), session_id, device_id, wall_clock_start_ns));
}

void SessionStore::save_recording(const SessionRecording& recording) {
    validate_session(recording);
    auto writer = create_session(recording.meta.session_id, recording.meta.device_id,
                                 recording.meta.wall_clock_start_ns);
    writer->impl_->audio_rate_hz =
        static_cast<int>(std::llround(recording.audio.sample_rate_hz));
    for (std::size_t i = 0; i < recording.imu.size(); ++i) {
        std::array<double, 6> v;
        for (std::size_t a = 0; a < kAxisCount; ++a) v[a] = recording.imu.axes[a][i];
        writer->append_imu(recording.imu.t_ns[i], v);
    }
    if (!recording.audio.samples.empty()) {
        std::vector<std::int16_t> pcm(recording.audio.samples.size());
        for (std::size_t i = 0; i < pcm.size(); ++i)
            pcm[i] = sample_to_pcm16(recording.audio.samples[i]);
        writer->append_audio(recording.audio.start_ns, pcm);
    }
    writer->finalize(true);
}

SessionRecording SessionStore::load_session(const std::string& session_id) const {
    const fs::path dir = session_dir(session_id);
    const nlohmann::ordered_json meta = read_json_file(dir / "meta.json");

    SessionRecording rec;
    rec.meta.session_id = meta.value("session_id", session_id);
    rec.meta.device_id = meta.value("device_id", std::string());
    rec.meta.wall_clock_start_ns = meta.value("wall_clock_start_ns", std::int64_t{0});

    std::ifstream imu(dir / "imu.jsonl", std::ios::binary);
    if (!imu) throw ParseError("cannot open " + (dir / "imu.jsonl").string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(imu, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json recj;
        try {
            recj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("imu.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        if (!recj.contains("t_ns"))
            throw ParseError("imu.jsonl line " + std::to_string(line_no) + ": missing t_ns");
        rec.imu.t_ns.push_back(recj["t_ns"].get<std::int64_t>());
        for (std::size_t a = 0; a < kAxisCount; ++a) {
            if (!recj.contains(kAxisNames[a]))
                throw ParseError("imu.jsonl line " + std::to_string(line_no) +
                                 ": missing axis " + kAxisNames[a]);
            rec.imu.axes[a].push_back(recj[kAxisNames[a]].get<double>());
        }
    }

    int rate = 0;
    rec.audio.samples = read_wav_pcm16(dir / "audio.wav", rate);
    rec.audio.sample_rate_hz = rate;
    rec.audio.start_ns = meta.value("audio_start_ns", std::int64_t{0});
    validate_session(rec);
    return rec;
}

nlohmann::ordered_json SessionStore::load_meta(const std::string& session_id) const {
    return read_json_file(session_dir(session_id) / "meta.json");
}

void SessionStore::save_results(const std::string& session_id,
                                const nlohmann::ordered_json& results) const {
    if (!fs::exists(session_dir(session_id)))
        throw ConfigError("unknown session: " + session_id);
    write_json_file(session_dir(session_id) / "results.json", results);
    patch_meta_hash(session_dir(session_id), "results.json");
}

nlohmann::ordered_json SessionStore::load_results(const std::string& session_id) const {
    return read_json_file(session_dir(session_id) / "results.json");
}

void SessionStore::save_truth(const std::string& session_id,
                              const nlohmann::ordered_json& truth) const {
    if (!fs::exists(session_dir(session_id)))
        throw ConfigError("unknown session: " + session_id);
    write_json_file(session_dir(session_id) / "truth.json", truth);
    patch_meta_hash(session_dir(session_id), "truth.json");
}

bool SessionStore::has_truth(const std::string& session_id) const {
    return fs::exists(session_dir(session_id) / "truth.json");
}

nlohmann::ordered_json SessionStore::load_truth(const std::string& session_id) const {
    return read_json_file(session_dir(session_id) / "truth.json");
}

} // namespace bsense
