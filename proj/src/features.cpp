#include "bsense/features.hpp"

#include "bsense/util.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace bsense {

namespace {

constexpr std::size_t kClassTrim = 20;      // samples removed from each end at 100 Hz
constexpr double kClassLowpassHz = 20.0;
constexpr int kClassLowpassOrder = 2;
constexpr std::size_t kRatingTrim = 100;    // samples removed from each end at 500 Hz
constexpr double kResampleRateHz = 500.0;
constexpr std::size_t kImpactCrop = 100;    // central samples at 500 Hz (200 ms)
constexpr std::size_t kImpactWin = 50, kImpactHop = 6;
constexpr std::size_t kAudioWin = 256, kAudioHop = 128;
constexpr double kAudioCropMs = 200.0;

double population_moment(const std::vector<double>& x, double mean, int k) {
    double acc = 0.0;
    for (double v : x) acc += std::pow(v - mean, k);
    return acc / static_cast<double>(x.size());
}

// zero-variance guard: skewness/kurtosis are defined as 0 when the signal is
// (numerically) constant
bool effectively_constant(double m2, double mean) {
    return m2 <= 1e-24 * (1.0 + mean * mean);
}

double percentile(std::vector<double> sorted, double q) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

// Count strict local maxima whose prominence (height above the higher of the
// two surrounding bases, walking outward until a strictly taller sample)
// reaches min_prominence.
std::size_t count_peaks(const std::vector<double>& x, double min_prominence) {
    const std::size_t n = x.size();
    std::size_t count = 0;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(x[i] > x[i - 1] && x[i] > x[i + 1])) continue;
        double left_min = x[i];
        for (std::size_t j = i; j-- > 0;) {
            if (x[j] > x[i]) break;
            left_min = std::min(left_min, x[j]);
        }
        double right_min = x[i];
        for (std::size_t j = i + 1; j < n; ++j) {
            if (x[j] > x[i]) break;
            right_min = std::min(right_min, x[j]);
        }
        if (x[i] - std::max(left_min, right_min) >= min_prominence) ++count;
    }
    return count;
}

void time_stats(const std::vector<double>& x, std::array<double, kClassFeatureCount>& out) {
    const double n = static_cast<double>(x.size());
    double sum = 0.0;
    for (double v : x) sum += v;
    const double mean = sum / n;
    const double m2 = population_moment(x, mean, 2);
    out[kSum] = sum;
    out[kMean] = mean;
    out[kVariance] = m2;
    out[kStd] = std::sqrt(m2);
    if (effectively_constant(m2, mean)) {
        out[kSkewness] = 0.0;
        out[kKurtosis] = 0.0;
    } else {
        out[kSkewness] = population_moment(x, mean, 3) / std::pow(m2, 1.5);
        out[kKurtosis] = population_moment(x, mean, 4) / (m2 * m2) - 3.0;
    }
    const auto [mn, mx] = std::minmax_element(x.begin(), x.end());
    out[kMin] = *mn;
    out[kMax] = *mx;
    std::vector<double> sorted(x);
    std::sort(sorted.begin(), sorted.end());
    out[kP25] = percentile(sorted, 0.25);
    out[kP75] = percentile(sorted, 0.75);
    out[kPeakCount] = static_cast<double>(count_peaks(x, 0.1 * (*mx - *mn)));
}

void deriv_stats(const std::vector<double>& x, std::array<double, kClassFeatureCount>& out) {
    std::vector<double> d(x.size() - 1);
    for (std::size_t i = 0; i + 1 < x.size(); ++i) d[i] = x[i + 1] - x[i];
    const double n = static_cast<double>(d.size());
    double sum = 0.0, max_abs = 0.0;
    for (double v : d) {
        sum += v;
        max_abs = std::max(max_abs, std::abs(v));
    }
    const double mean = sum / n;
    const double m2 = population_moment(d, mean, 2);
    out[kDerivMean] = mean;
    out[kDerivStd] = std::sqrt(m2);
    if (effectively_constant(m2, mean)) {
        out[kDerivSkewness] = 0.0;
        out[kDerivKurtosis] = 0.0;
    } else {
        out[kDerivSkewness] = population_moment(d, mean, 3) / std::pow(m2, 1.5);
        out[kDerivKurtosis] = population_moment(d, mean, 4) / (m2 * m2) - 3.0;
    }
    out[kDerivMaxAbs] = max_abs;
    const auto [mn, mx] = std::minmax_element(d.begin(), d.end());
    out[kDerivPeakCount] = static_cast<double>(count_peaks(d, 0.1 * (*mx - *mn)));
}

void spectral_stats(const Signal1D& s, std::array<double, kClassFeatureCount>& out) {
    // Hann-windowed so filter edge transients do not leak across the spectrum
    Signal1D windowed = s;
    const double len = static_cast<double>(windowed.size());
    for (std::size_t i = 0; i < windowed.size(); ++i)
        windowed.samples[i] *= 0.5 - 0.5 * std::cos(2.0 * 3.14159265358979323846 *
                                                    static_cast<double>(i) / len);
    const auto spec = fft_magnitude(windowed);
    double energy = 0.0, sum = 0.0, weighted = 0.0;
    for (std::size_t k = 0; k < spec.size(); ++k) {
        const double m = spec.magnitudes[k];
        energy += m * m;
        sum += m;
        weighted += m * static_cast<double>(k) * spec.bin_hz;
    }
    const double n = static_cast<double>(spec.size());
    const double mean = sum / n;
    double var = 0.0;
    for (double m : spec.magnitudes) var += (m - mean) * (m - mean);
    var /= n;
    out[kSpecEnergy] = energy;
    out[kSpecMean] = mean;
    out[kSpecStd] = std::sqrt(var);
    out[kSpecCentroid] = sum > 1e-300 ? weighted / sum : 0.0;

    const auto psd = welch_psd(s, std::min<std::size_t>(64, s.size()), 0.5);
    double pmax = 0.0, psum = 0.0;
    for (double v : psd.magnitudes) {
        pmax = std::max(pmax, v);
        psum += v;
    }
    out[kPsdMax] = pmax;
    out[kPsdMean] = psum / static_cast<double>(psd.size());
}

Signal1D axis_signal(const StrokeSegment& seg, std::size_t axis) {
    return Signal1D{seg.imu[axis], seg.imu_rate_hz};
}

Signal1D resample_axis(const StrokeSegment& seg, std::size_t axis) {
    return resample_cubic_spline(axis_signal(seg, axis), kResampleRateHz);
}

} // namespace

ClassFeatures extract_class_features(const StrokeSegment& segment) {
    validate_segment(segment);
    const std::size_t w = segment.width();
    if (w <= 2 * kClassTrim + 16)
        throw std::invalid_argument("extract_class_features: window too short after trim");

    ClassFeatures out;
    for (std::size_t a = 0; a < kAxisCount; ++a) {
        Signal1D trimmed;
        trimmed.sample_rate_hz = segment.imu_rate_hz;
        trimmed.samples.assign(segment.imu[a].begin() + static_cast<std::ptrdiff_t>(kClassTrim),
                               segment.imu[a].end() - static_cast<std::ptrdiff_t>(kClassTrim));
        const Signal1D filtered =
            lowpass_butterworth(trimmed, kClassLowpassHz, kClassLowpassOrder);

        auto& row = out.values[a];
        time_stats(filtered.samples, row);
        deriv_stats(filtered.samples, row);
        spectral_stats(filtered, row);
    }
    return out;
}

RatingInput extract_rating_input(const StrokeSegment& segment) {
    validate_segment(segment);
    RatingInput out;
    for (std::size_t a = 0; a < kAxisCount; ++a) {
        const Signal1D up = resample_axis(segment, a);
        if (up.size() < 2 * kRatingTrim + kRatingColumns)
            throw std::invalid_argument("extract_rating_input: window too short after trim");
        const std::size_t take =
            std::min(kRatingColumns, up.size() - 2 * kRatingTrim); // == 800 for 2000 ms
        out.values[a].assign(up.samples.begin() + static_cast<std::ptrdiff_t>(kRatingTrim),
                             up.samples.begin() + static_cast<std::ptrdiff_t>(kRatingTrim + take));
        if (out.values[a].size() != kRatingColumns)
            throw std::invalid_argument("extract_rating_input: expected 800 columns");
    }
    return out;
}

ImpactFeatureMap extract_impact_features(const StrokeSegment& segment, bool include_audio) {
    validate_segment(segment);
    ImpactFeatureMap out;
    for (std::size_t a = 0; a < kAxisCount; ++a) {
        const Signal1D up = resample_axis(segment, a);
        if (up.size() < kImpactCrop)
            throw std::invalid_argument("extract_impact_features: window too short to crop");
        const std::size_t start = (up.size() - kImpactCrop) / 2;
        Signal1D crop;
        crop.sample_rate_hz = kResampleRateHz;
        crop.samples.assign(up.samples.begin() + static_cast<std::ptrdiff_t>(start),
                            up.samples.begin() + static_cast<std::ptrdiff_t>(start + kImpactCrop));
        out.imu_map[a] = stft(crop, kImpactWin, kImpactHop);
        if (out.imu_map[a].frames != kImpactFrames || out.imu_map[a].bins != kImpactBins)
            throw std::invalid_argument("extract_impact_features: unexpected map shape");
    }

    if (include_audio) {
        const auto need = static_cast<std::size_t>(
            std::llround(kAudioCropMs / 1000.0 * segment.audio_rate_hz));
        if (segment.audio.size() < need || need < kAudioWin)
            throw std::invalid_argument(
                "extract_impact_features: audio window too short for the audio map");
        const std::size_t start = (segment.audio.size() - need) / 2;
        Signal1D crop;
        crop.sample_rate_hz = segment.audio_rate_hz;
        crop.samples.assign(segment.audio.begin() + static_cast<std::ptrdiff_t>(start),
                            segment.audio.begin() + static_cast<std::ptrdiff_t>(start + need));
        out.audio_map = stft(crop, kAudioWin, kAudioHop);
    }
    return out;
}

std::vector<double> flatten(const ClassFeatures& f) {
    std::vector<double> v;
    v.reserve(kAxisCount * kClassFeatureCount);
    for (const auto& row : f.values) v.insert(v.end(), row.begin(), row.end());
    return v;
}

std::vector<double> flatten(const RatingInput& f) {
    std::vector<double> v;
    v.reserve(kAxisCount * kRatingColumns);
    for (const auto& row : f.values) v.insert(v.end(), row.begin(), row.end());
    return v;
}

std::vector<double> flatten(const ImpactFeatureMap& f) {
    std::vector<double> v;
    v.reserve(kAxisCount * kImpactFrames * kImpactBins +
              (f.audio_map ? kAudioFrames * kAudioBins : 0));
    for (const auto& m : f.imu_map) v.insert(v.end(), m.values.begin(), m.values.end());
    if (f.audio_map) v.insert(v.end(), f.audio_map->values.begin(), f.audio_map->values.end());
    return v;
}

ClassFeatures unflatten_class(const std::vector<double>& v) {
    if (v.size() != kAxisCount * kClassFeatureCount)
        throw std::invalid_argument("unflatten_class: wrong length");
    ClassFeatures f;
    for (std::size_t a = 0; a < kAxisCount; ++a)
        for (std::size_t j = 0; j < kClassFeatureCount; ++j)
            f.values[a][j] = v[a * kClassFeatureCount + j];
    return f;
}

RatingInput unflatten_rating(const std::vector<double>& v) {
    if (v.size() != kAxisCount * kRatingColumns)
        throw std::invalid_argument("unflatten_rating: wrong length");
    RatingInput f;
    for (std::size_t a = 0; a < kAxisCount; ++a)
        f.values[a].assign(v.begin() + static_cast<std::ptrdiff_t>(a * kRatingColumns),
                           v.begin() + static_cast<std::ptrdiff_t>((a + 1) * kRatingColumns));
    return f;
}

ImpactFeatureMap unflatten_impact(const std::vector<double>& v) {
    const std::size_t imu_len = kAxisCount * kImpactFrames * kImpactBins;
    const std::size_t audio_len = kAudioFrames * kAudioBins;
    if (v.size() != imu_len && v.size() != imu_len + audio_len)
        throw std::invalid_argument("unflatten_impact: wrong length");
    ImpactFeatureMap f;
    for (std::size_t a = 0; a < kAxisCount; ++a) {
        TimeFreqMap& m = f.imu_map[a];
        m.frames = kImpactFrames;
        m.bins = kImpactBins;
        m.frame_hop_s = static_cast<double>(kImpactHop) / kResampleRateHz;
        m.bin_hz = kResampleRateHz / static_cast<double>(kImpactWin);
        const std::size_t off = a * kImpactFrames * kImpactBins;
        m.values.assign(v.begin() + static_cast<std::ptrdiff_t>(off),
                        v.begin() + static_cast<std::ptrdiff_t>(off + kImpactFrames * kImpactBins));
    }
    if (v.size() == imu_len + audio_len) {
        TimeFreqMap m;
        m.frames = kAudioFrames;
        m.bins = kAudioBins;
        m.frame_hop_s = static_cast<double>(kAudioHop) / kAudioRateHz;
        m.bin_hz = kAudioRateHz / static_cast<double>(kAudioWin);
        m.values.assign(v.begin() + static_cast<std::ptrdiff_t>(imu_len), v.end());
        f.audio_map = std::move(m);
    }
    return f;
}

std::string schema_description(const std::string& kind) {
    const std::string axes = "axes=ax,ay,az,gx,gy,gz";
    if (kind == "class")
        return "stroke-features/class/v1;" + axes +
               ";slots=sum,mean,var,std,skew,kurt,min,max,p25,p75,npeaks,"
               "d.mean,d.std,d.skew,d.kurt,d.maxabs,d.npeaks,"
               "f.energy,f.mean,f.std,f.centroid,psd.max,psd.mean"
               ";trim=20;lowpass=20Hz/order2;deriv=first-difference;"
               "peaks=prominence>=0.1*range;percentile=linear;fft=one-sided-hann;welch=64@0.5";
    if (kind == "rating")
        return "stroke-features/rating/v1;" + axes + ";resample=500Hz/cubic-spline;trim=100;cols=800";
    if (kind == "impact")
        return "stroke-features/impact/v1;" + axes +
               ";resample=500Hz/cubic-spline;crop=central100;stft=50/6;shape=6x9x26";
    if (kind == "impact_audio")
        return schema_description("impact") + ";audio=stft256/128@16kHz;audio_shape=24x129";
    throw std::invalid_argument("schema_description: unknown kind " + kind);
}

namespace {
std::string hash_of(const std::string& kind) { return to_hex(fnv1a64(schema_description(kind))); }
} // namespace

const std::string& class_schema_hash() {
    static const std::string h = hash_of("class");
    return h;
}

const std::string& rating_schema_hash() {
    static const std::string h = hash_of("rating");
    return h;
}

const std::string& impact_schema_hash(bool include_audio) {
    static const std::string imu = hash_of("impact");
    static const std::string fused = hash_of("impact_audio");
    return include_audio ? fused : imu;
}

} // namespace bsense
