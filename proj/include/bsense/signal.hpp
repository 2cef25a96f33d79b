#ifndef BSENSE_SIGNAL_HPP
#define BSENSE_SIGNAL_HPP

#include <cstddef>
#include <vector>

namespace bsense {

// A uniformly sampled real-valued channel. Units depend on the source:
// m/s^2 for accelerometer axes, rad/s for gyro axes, [-1, 1] for audio.
struct Signal1D {
    std::vector<double> samples;
    double sample_rate_hz = 0.0;

    std::size_t size() const { return samples.size(); }
    double duration_s() const {
        return sample_rate_hz > 0.0 ? static_cast<double>(samples.size()) / sample_rate_hz : 0.0;
    }
};

// One-sided magnitude (or power, for welch_psd) spectrum.
struct Spectrum {
    std::vector<double> magnitudes;
    double bin_hz = 0.0;

    std::size_t size() const { return magnitudes.size(); }
    // index of the largest bin
    std::size_t argmax() const;
};

// STFT magnitudes, frames x bins, row-major.
struct TimeFreqMap {
    std::vector<double> values;
    std::size_t frames = 0;
    std::size_t bins = 0;
    double frame_hop_s = 0.0;
    double bin_hz = 0.0;

    double at(std::size_t frame, std::size_t bin) const { return values[frame * bins + bin]; }
    double& at(std::size_t frame, std::size_t bin) { return values[frame * bins + bin]; }
};

// throws std::invalid_argument on rate <= 0 or non-finite samples
void validate(const Signal1D& s, const char* what = "signal");

// Cascaded-biquad Butterworth low-pass (bilinear transform, causal single
// pass). States start at the first sample's steady state, so constant
// signals pass through unchanged. Gain at cutoff is 1/sqrt(2) for any order.
Signal1D lowpass_butterworth(const Signal1D& signal, double cutoff_hz, int order);

// Natural cubic spline resampling. The output grid is anchored at the first
// sample's time and has round(n * target / source) samples, so each sample
// keeps its 1/rate footprint; output times past the last input sample are
// evaluated by extending the last spline segment.
Signal1D resample_cubic_spline(const Signal1D& signal, double target_rate_hz);

// Natural cubic spline through unit-spaced samples y[0..n-1], evaluated at
// arbitrary positions; positions are clamped to [0, n-1] (edge hold).
std::vector<double> spline_sample(const std::vector<double>& y,
                                  const std::vector<double>& positions);

// One-sided magnitude spectrum of the whole signal (no window). Exact-length
// DFT for any n (radix-2 plus Bluestein), so Parseval holds to ~1e-12.
Spectrum fft_magnitude(const Signal1D& signal);

// Welch power spectral density, periodic Hann window, density scaling,
// one-sided with doubled interior bins.
Spectrum welch_psd(const Signal1D& signal, std::size_t seg_len, double overlap);

// Short-time Fourier transform magnitudes with a periodic Hann window.
// frames = floor((n - win_len)/hop) + 1, bins = floor(win_len/2) + 1.
TimeFreqMap stft(const Signal1D& signal, std::size_t win_len, std::size_t hop);

// Per-frame sum of squared samples over non-overlapping frames of frame_ms.
Signal1D energy_envelope(const Signal1D& audio, double frame_ms);

} // namespace bsense

#endif
