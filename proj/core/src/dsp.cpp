#include "c2f/dsp.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace c2f::dsp {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

// In-place iterative radix-2 FFT; falls back to a naive DFT for sizes that
// are not a power of two.
bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
}

std::vector<std::complex<double>> dft_naive(const std::vector<std::complex<double>>& a) {
    const std::size_t n = a.size();
    std::vector<std::complex<double>> out(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::complex<double> s(0.0, 0.0);
        for (std::size_t t = 0; t < n; ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k * t) /
                               static_cast<double>(n);
            s += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = s;
    }
    return out;
}

// Triangular filters computed in the mel domain, peak 1, spanning 0 Hz to
// Nyquist: (n_mels x (fft_size/2 + 1)).
Matrix build_filterbank(int n_mels, int fft_size, int sample_rate_hz) {
    const int n_bins = fft_size / 2 + 1;
    const double mel_hi = hz_to_mel(sample_rate_hz / 2.0);
    std::vector<double> edges(static_cast<std::size_t>(n_mels) + 2);
    for (int j = 0; j < n_mels + 2; ++j)
        edges[j] = static_cast<double>(j) * mel_hi / static_cast<double>(n_mels + 1);

    Matrix fb(n_mels, n_bins);
    for (int k = 0; k < n_mels; ++k) {
        const double left = edges[k], center = edges[k + 1], right = edges[k + 2];
        for (int b = 0; b < n_bins; ++b) {
            const double mb = hz_to_mel(static_cast<double>(b) * sample_rate_hz /
                                        static_cast<double>(fft_size));
            double w = 0.0;
            if (mb > left && mb < right)
                w = (mb <= center) ? (mb - left) / (center - left)
                                   : (right - mb) / (right - center);
            fb.at(k, b) = w;
        }
    }
    return fb;
}

void validate_framing(const FramingParams& f, int sample_rate_hz) {
    if (sample_rate_hz <= 0) throw std::invalid_argument("sample rate must be positive");
    if (f.frame_size_ms <= 0 || f.frame_shift_ms <= 0)
        throw std::invalid_argument("frame size and shift must be positive");
    if (f.frame_size_ms < f.frame_shift_ms)
        throw std::invalid_argument("frame size must be >= frame shift");
    if (f.n_mels <= 0 || f.fft_size <= 0 || f.target_time_frames <= 0)
        throw std::invalid_argument("n_mels, fft_size and target_time_frames must be positive");
    if (f.fft_size < f.frame_samples(sample_rate_hz))
        throw std::invalid_argument("fft_size smaller than frame length in samples");
    if (f.n_mels > f.fft_size / 2)
        throw std::invalid_argument("n_mels exceeds fft_size/2");
}

MelSpectrogram compute_mel(const Waveform& w, const FramingParams& f, int compression) {
    validate_framing(f, w.sample_rate_hz);
    if (compression < 1) throw std::invalid_argument("compression factor must be >= 1");
    if (f.target_time_frames % compression != 0)
        throw std::invalid_argument("target_time_frames not divisible by compression factor " +
                                    std::to_string(compression));
    if (w.samples.empty()) throw std::invalid_argument("empty waveform");

    const int frame = f.frame_samples(w.sample_rate_hz);
    const int shift = static_cast<int>(
        std::lround(f.frame_shift_ms * compression * w.sample_rate_hz / 1000.0));
    const std::size_t available = frame_count(w.samples.size(), frame, shift);
    if (available == 0) throw std::invalid_argument("waveform shorter than one frame");

    const int target = f.target_time_frames / compression;
    const int n_real = static_cast<int>(std::min<std::size_t>(available, target));

    std::vector<double> window(frame);
    for (int n = 0; n < frame; ++n)
        window[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / frame);

    const Matrix fb = build_filterbank(f.n_mels, f.fft_size, w.sample_rate_hz);
    const int n_bins = f.fft_size / 2 + 1;
    const double log_floor = std::log(kLogFloor);

    MelSpectrogram out;
    out.bins = Matrix(f.n_mels, target, log_floor);
    out.framing = f;
    out.compression_factor = compression;

    std::vector<std::complex<double>> buf(f.fft_size);
    std::vector<double> power(n_bins);
    for (int t = 0; t < n_real; ++t) {
        const double* src = w.samples.data() + static_cast<std::size_t>(t) * shift;
        for (int n = 0; n < frame; ++n) buf[n] = std::complex<double>(src[n] * window[n], 0.0);
        for (int n = frame; n < f.fft_size; ++n) buf[n] = {0.0, 0.0};

        if (is_pow2(buf.size())) {
            fft_radix2(buf);
        } else {
            buf = dft_naive(buf);
        }
        for (int b = 0; b < n_bins; ++b) power[b] = std::norm(buf[b]);

        for (int m = 0; m < f.n_mels; ++m) {
            const double* frow = fb.row(m);
            double e = 0.0;
            for (int b = 0; b < n_bins; ++b) e += frow[b] * power[b];
            out.bins.at(m, t) = std::log(std::max(e, kLogFloor));
        }
    }
    return out;
}

}  // namespace

int FramingParams::frame_samples(int sample_rate_hz) const {
    return static_cast<int>(std::lround(frame_size_ms * sample_rate_hz / 1000.0));
}

int FramingParams::shift_samples(int sample_rate_hz) const {
    return static_cast<int>(std::lround(frame_shift_ms * sample_rate_hz / 1000.0));
}

std::size_t frame_count(std::size_t num_samples, std::size_t frame_samples,
                        std::size_t shift_samples) {
    if (frame_samples == 0 || shift_samples == 0)
        throw std::invalid_argument("frame and shift must be positive");
    if (num_samples < frame_samples) return 0;
    return 1 + (num_samples - frame_samples) / shift_samples;
}

MelSpectrogram log_mel(const Waveform& w, const FramingParams& f) {
    return compute_mel(w, f, 1);
}

MelSpectrogram fshift_mel(const Waveform& w, const FramingParams& f, int compression) {
    return compute_mel(w, f, compression);
}

}  // namespace c2f::dsp
