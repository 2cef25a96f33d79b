#include "bsense/signal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace bsense {

namespace {

constexpr double kPi = 3.14159265358979323846;

using cplx = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey, n must be a power of two.
void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k];
                const cplx v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

// Bluestein chirp-z: exact-length DFT for arbitrary n via a power-of-two
// cyclic convolution.
std::vector<cplx> dft_bluestein(const std::vector<cplx>& x) {
    const std::size_t n = x.size();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;

    // chirp[k] = exp(-i*pi*k^2/n); k^2 reduced mod 2n to keep the angle accurate
    std::vector<cplx> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t k2 = (static_cast<std::uint64_t>(k) * k) % (2 * n);
        const double ang = -kPi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cplx(std::cos(ang), std::sin(ang));
    }

    std::vector<cplx> a(m, cplx(0.0, 0.0)), b(m, cplx(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) a[k] = x[k] * chirp[k];
    b[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        b[k] = std::conj(chirp[k]);
        b[m - k] = b[k];
    }
    fft_pow2(a, false);
    fft_pow2(b, false);
    for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
    fft_pow2(a, true);

    std::vector<cplx> out(n);
    for (std::size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
    return out;
}

std::vector<cplx> dft(const std::vector<double>& x) {
    std::vector<cplx> a(x.begin(), x.end());
    if (is_pow2(a.size())) {
        fft_pow2(a, false);
        return a;
    }
    return dft_bluestein(a);
}

std::vector<double> hann_periodic(std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

struct Biquad {
    double b0, b1, b2, a1, a2;
};

// One second-order low-pass section from the bilinear transform of
// wc^2 / (s^2 + (wc/q) s + wc^2), wc pre-warped.
Biquad lowpass_section(double wc, double q) {
    const double d = 1.0 + wc / q + wc * wc;
    Biquad s;
    s.b0 = wc * wc / d;
    s.b1 = 2.0 * s.b0;
    s.b2 = s.b0;
    s.a1 = 2.0 * (wc * wc - 1.0) / d;
    s.a2 = (1.0 - wc / q + wc * wc) / d;
    return s;
}

} // namespace

std::size_t Spectrum::argmax() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < magnitudes.size(); ++i)
        if (magnitudes[i] > magnitudes[best]) best = i;
    return best;
}

void validate(const Signal1D& s, const char* what) {
    if (!(s.sample_rate_hz > 0.0))
        throw std::invalid_argument(std::string(what) + ": sample rate must be > 0");
    for (double v : s.samples)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": non-finite sample");
}

Signal1D lowpass_butterworth(const Signal1D& signal, double cutoff_hz, int order) {
    validate(signal);
    if (order < 1) throw std::invalid_argument("lowpass_butterworth: order must be >= 1");
    if (!(cutoff_hz > 0.0) || cutoff_hz >= signal.sample_rate_hz / 2.0)
        throw std::invalid_argument("lowpass_butterworth: cutoff must be in (0, nyquist)");

    const double wc = std::tan(kPi * cutoff_hz / signal.sample_rate_hz);

    std::vector<Biquad> sections;
    const int pairs = order / 2;
    for (int k = 1; k <= pairs; ++k) {
        // pole angle of the k-th conjugate pair of the analog prototype
        const double theta = kPi * static_cast<double>(2 * k + order - 1) / static_cast<double>(2 * order);
        const double q = -1.0 / (2.0 * std::cos(theta));
        sections.push_back(lowpass_section(wc, q));
    }

    Signal1D out;
    out.sample_rate_hz = signal.sample_rate_hz;
    out.samples = signal.samples;

    // Sections start in steady state for x[0] (DC gain is exactly 1), so a
    // constant input passes through unchanged instead of showing a startup
    // transient.
    const double x0_init = out.samples.empty() ? 0.0 : out.samples.front();

    // odd order: single real pole
    if (order % 2 == 1) {
        const double d = 1.0 + wc;
        const double b0 = wc / d, b1 = wc / d, a1 = (wc - 1.0) / d;
        double x1 = x0_init, y1 = x0_init;
        for (double& v : out.samples) {
            const double x0 = v;
            const double y0 = b0 * x0 + b1 * x1 - a1 * y1;
            x1 = x0;
            y1 = y0;
            v = y0;
        }
    }

    for (const Biquad& s : sections) {
        double x1 = x0_init, x2 = x0_init, y1 = x0_init, y2 = x0_init;
        for (double& v : out.samples) {
            const double x0 = v;
            const double y0 = s.b0 * x0 + s.b1 * x1 + s.b2 * x2 - s.a1 * y1 - s.a2 * y2;
            x2 = x1;
            x1 = x0;
            y2 = y1;
            y1 = y0;
            v = y0;
        }
    }
    return out;
}

namespace {

// Natural cubic spline on a uniform grid: second derivatives via the Thomas
// algorithm, then piecewise evaluation. Evaluation outside [0, n-1] extends
// the first/last segment polynomial.
class UniformNaturalSpline {
public:
    UniformNaturalSpline(const std::vector<double>& y, double h) : y_(y), h_(h), m_(y.size(), 0.0) {
        const std::size_t n = y.size();
        if (n < 3) return; // m stays zero: linear interpolation
        const std::size_t k = n - 2;
        // tridiagonal system: (h/6) m[i-1] + (2h/3) m[i] + (h/6) m[i+1] = d2[i]
        std::vector<double> diag(k, 2.0 * h / 3.0), rhs(k);
        const double off = h / 6.0;
        for (std::size_t i = 0; i < k; ++i)
            rhs[i] = (y[i + 2] - 2.0 * y[i + 1] + y[i]) / h;
        for (std::size_t i = 1; i < k; ++i) {
            const double w = off / diag[i - 1];
            diag[i] -= w * off;
            rhs[i] -= w * rhs[i - 1];
        }
        m_[k] = rhs[k - 1] / diag[k - 1];
        for (std::size_t i = k - 1; i >= 1; --i)
            m_[i] = (rhs[i - 1] - off * m_[i + 1]) / diag[i - 1];
        // m_[0] = m_[n-1] = 0 (natural boundary)
    }

    // t in units of the input sample index (t = 0 is the first sample)
    double eval(double t) const {
        const std::size_t n = y_.size();
        double seg = std::floor(t);
        if (seg < 0.0) seg = 0.0;
        if (seg > static_cast<double>(n - 2)) seg = static_cast<double>(n - 2);
        const std::size_t j = static_cast<std::size_t>(seg);
        const double a = t - seg; // may lie outside [0,1] at the ends
        const double b = 1.0 - a;
        const double h2 = h_ * h_;
        return b * y_[j] + a * y_[j + 1] +
               ((b * b * b - b) * m_[j] + (a * a * a - a) * m_[j + 1]) * h2 / 6.0;
    }

private:
    std::vector<double> y_;
    double h_;
    std::vector<double> m_;
};

} // namespace

Signal1D resample_cubic_spline(const Signal1D& signal, double target_rate_hz) {
    validate(signal);
    if (signal.size() < 4)
        throw std::invalid_argument("resample_cubic_spline: need at least 4 samples");
    if (!(target_rate_hz > 0.0))
        throw std::invalid_argument("resample_cubic_spline: target rate must be > 0");

    const double ratio = target_rate_hz / signal.sample_rate_hz;
    const auto out_n = static_cast<std::size_t>(std::max<long long>(
        1, std::llround(static_cast<double>(signal.size()) * ratio)));

    UniformNaturalSpline spline(signal.samples, 1.0 / signal.sample_rate_hz);

    Signal1D out;
    out.sample_rate_hz = target_rate_hz;
    out.samples.resize(out_n);
    for (std::size_t j = 0; j < out_n; ++j)
        out.samples[j] = spline.eval(static_cast<double>(j) / ratio);
    return out;
}

std::vector<double> spline_sample(const std::vector<double>& y,
                                  const std::vector<double>& positions) {
    if (y.size() < 2) throw std::invalid_argument("spline_sample: need at least 2 samples");
    const UniformNaturalSpline spline(y, 1.0);
    const double last = static_cast<double>(y.size() - 1);
    std::vector<double> out(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        const double u = std::min(last, std::max(0.0, positions[i]));
        out[i] = spline.eval(u);
    }
    return out;
}

Spectrum fft_magnitude(const Signal1D& signal) {
    validate(signal);
    if (signal.size() < 2) throw std::invalid_argument("fft_magnitude: need at least 2 samples");
    const std::size_t n = signal.size();
    const auto spec = dft(signal.samples);
    Spectrum out;
    out.bin_hz = signal.sample_rate_hz / static_cast<double>(n);
    out.magnitudes.resize(n / 2 + 1);
    for (std::size_t k = 0; k < out.magnitudes.size(); ++k) out.magnitudes[k] = std::abs(spec[k]);
    return out;
}

Spectrum welch_psd(const Signal1D& signal, std::size_t seg_len, double overlap) {
    validate(signal);
    if (seg_len < 2 || seg_len > signal.size())
        throw std::invalid_argument("welch_psd: segment length must be in [2, n]");
    if (!(overlap >= 0.0 && overlap < 1.0))
        throw std::invalid_argument("welch_psd: overlap must be in [0, 1)");

    const auto win = hann_periodic(seg_len);
    double u = 0.0;
    for (double w : win) u += w * w;

    const std::size_t step = std::max<std::size_t>(
        1, seg_len - static_cast<std::size_t>(std::floor(overlap * static_cast<double>(seg_len))));

    Spectrum out;
    out.bin_hz = signal.sample_rate_hz / static_cast<double>(seg_len);
    out.magnitudes.assign(seg_len / 2 + 1, 0.0);

    std::size_t count = 0;
    std::vector<double> buf(seg_len);
    for (std::size_t start = 0; start + seg_len <= signal.size(); start += step) {
        for (std::size_t i = 0; i < seg_len; ++i) buf[i] = signal.samples[start + i] * win[i];
        const auto spec = dft(buf);
        for (std::size_t k = 0; k < out.magnitudes.size(); ++k) {
            double p = std::norm(spec[k]) / (u * signal.sample_rate_hz);
            const bool interior = k != 0 && !(seg_len % 2 == 0 && k == seg_len / 2);
            if (interior) p *= 2.0;
            out.magnitudes[k] += p;
        }
        ++count;
    }
    for (double& v : out.magnitudes) v /= static_cast<double>(count);
    return out;
}

TimeFreqMap stft(const Signal1D& signal, std::size_t win_len, std::size_t hop) {
    validate(signal);
    if (win_len < 2 || win_len > signal.size())
        throw std::invalid_argument("stft: window must be in [2, n]");
    if (hop < 1) throw std::invalid_argument("stft: hop must be >= 1");

    const auto win = hann_periodic(win_len);
    TimeFreqMap out;
    out.frames = (signal.size() - win_len) / hop + 1;
    out.bins = win_len / 2 + 1;
    out.frame_hop_s = static_cast<double>(hop) / signal.sample_rate_hz;
    out.bin_hz = signal.sample_rate_hz / static_cast<double>(win_len);
    out.values.resize(out.frames * out.bins);

    std::vector<double> buf(win_len);
    for (std::size_t f = 0; f < out.frames; ++f) {
        const std::size_t start = f * hop;
        for (std::size_t i = 0; i < win_len; ++i) buf[i] = signal.samples[start + i] * win[i];
        const auto spec = dft(buf);
        for (std::size_t k = 0; k < out.bins; ++k) out.at(f, k) = std::abs(spec[k]);
    }
    return out;
}

Signal1D energy_envelope(const Signal1D& audio, double frame_ms) {
    validate(audio, "audio");
    if (!(frame_ms > 0.0)) throw std::invalid_argument("energy_envelope: frame_ms must be > 0");
    const auto frame_len = static_cast<std::size_t>(
        std::max<long long>(1, std::llround(frame_ms / 1000.0 * audio.sample_rate_hz)));

    Signal1D out;
    out.sample_rate_hz = audio.sample_rate_hz / static_cast<double>(frame_len);
    const std::size_t frames = audio.size() / frame_len;
    out.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double e = 0.0;
        for (std::size_t i = 0; i < frame_len; ++i) {
            const double v = audio.samples[f * frame_len + i];
            e += v * v;
        }
        out.samples[f] = e;
    }
    return out;
}

} // namespace bsense
