#ifndef BSENSE_STORE_HPP
#define BSENSE_STORE_HPP

// On-disk session persistence. Layout under the store root:
//   sessions/<id>/meta.json     identity, sample counts, status, file hashes
//   sessions/<id>/imu.jsonl     one {"t_ns","ax",...,"gz"} record per line
//   sessions/<id>/audio.wav     16 kHz mono 16-bit PCM
//   sessions/<id>/results.json  analysis output (written later, optional)
//   sessions/<id>/truth.json    generator ground truth (optional)
// A finalized session's recorded streams are immutable; meta.json carries a
// content hash for each stream file.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "bsense/session.hpp"

namespace bsense {

// Environment variable that overrides the default store root.
inline constexpr const char* kStoreRootEnvVar = "BADMINSENSE_STORE";

// Incremental writer for one session, used by the ingest server. IMU records
// stream straight to imu.jsonl; audio PCM is appended to audio.wav whose
// header is patched when the session closes.
class SessionWriter {
public:
    ~SessionWriter();
    SessionWriter(const SessionWriter&) = delete;
    SessionWriter& operator=(const SessionWriter&) = delete;

    const std::string& session_id() const { return session_id_; }

    // Appends one IMU sample with a server-aligned timestamp. Non-increasing
    // timestamps are nudged to (previous + 1 ns) and counted.
    void append_imu(std::int64_t t_ns, const std::array<double, 6>& values);

    // Appends a PCM chunk; the first chunk's timestamp becomes the track
    // start. Chunk timestamps must not run backwards (same nudge rule).
    void append_audio(std::int64_t t_ns, const std::vector<std::int16_t>& pcm);

    // Closes the stream files, writes meta.json (status "complete" when
    // `complete`, else "incomplete") with per-file content hashes.
    void finalize(bool complete);
    bool finalized() const { return finalized_; }

    std::size_t imu_samples() const { return imu_count_; }
    std::size_t audio_samples() const { return audio_count_; }
    std::size_t clamped_timestamps() const { return clamped_; }

private:
    friend class SessionStore;
    SessionWriter(std::filesystem::path dir, std::string session_id,
                  std::string device_id, std::int64_t wall_clock_start_ns);

    std::filesystem::path dir_;
    std::string session_id_;
    std::string device_id_;
    std::int64_t wall_clock_start_ns_ = 0;

    struct Impl;
    std::unique_ptr<Impl> impl_;

    std::size_t imu_count_ = 0;
    std::size_t audio_count_ = 0;
    std::size_t clamped_ = 0;
    bool finalized_ = false;
};

class SessionStore {
public:
    explicit SessionStore(std::filesystem::path root);

    // Store rooted at $BADMINSENSE_STORE when set, else at `fallback`.
    static SessionStore from_env_or(const std::filesystem::path& fallback);

    const std::filesystem::path& root() const { return root_; }
    std::filesystem::path session_dir(const std::string& session_id) const;
    bool has_session(const std::string& session_id) const;
    std::vector<std::string> list_sessions() const;

    // Opens an incremental writer. Throws ConfigError when the id is empty,
    // contains path separators, or already exists in the store.
    std::unique_ptr<SessionWriter> create_session(const std::string& session_id,
                                                  const std::string& device_id,
                                                  std::int64_t wall_clock_start_ns);

    // Persists a complete in-memory recording (used by the generator and by
    // tests). Same collision rule as create_session.
    void save_recording(const SessionRecording& recording);

    // Loads the recorded streams back into memory. Throws ParseError on a
    // missing or malformed session.
    SessionRecording load_session(const std::string& session_id) const;

    nlohmann::ordered_json load_meta(const std::string& session_id) const;

    // Analysis results and generator ground truth ride alongside the streams.
    void save_results(const std::string& session_id, const nlohmann::ordered_json& results) const;
    nlohmann::ordered_json load_results(const std::string& session_id) const;
    void save_truth(const std::string& session_id, const nlohmann::ordered_json& truth) const;
    bool has_truth(const std::string& session_id) const;
    nlohmann::ordered_json load_truth(const std::string& session_id) const;

private:
    std::filesystem::path root_;
};

// WAV helpers shared by the store and tests: 16 kHz mono PCM16.
// Samples are mapped as llround(clamp(x, -1, 1) * 32767) on write and
// k / 32767.0 on read, so values quantized to that grid round-trip exactly.
void write_wav_pcm16(const std::filesystem::path& path,
                     const std::vector<double>& samples, int sample_rate_hz);
std::vector<double> read_wav_pcm16(const std::filesystem::path& path,
                                   int& sample_rate_hz);

} // namespace bsense

#endif
