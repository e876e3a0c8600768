#pragma once

#include <cstddef>
#include <vector>

#include "c2f/matrix.hpp"

namespace c2f::dsp {

/// Mono waveform, amplitudes in [-1, 1].
struct Waveform {
    std::vector<double> samples;
    int sample_rate_hz = 16000;
};

/// STFT/mel framing configuration. Defaults give a (128 x 1024) grid for
/// 10 s of 16 kHz audio.
struct FramingParams {
    double frame_size_ms = 25.0;
    double frame_shift_ms = 10.0;
    int n_mels = 128;
    int fft_size = 512;
    int target_time_frames = 1024;

    int frame_samples(int sample_rate_hz) const;
    int shift_samples(int sample_rate_hz) const;
};

/// Log-mel grid (n_mels x time). compression_factor records the temporal
/// compression applied at creation (1 = none); the grid always has exactly
/// framing.target_time_frames / compression_factor columns.
struct MelSpectrogram {
    Matrix bins;
    FramingParams framing;
    int compression_factor = 1;
};

/// Floor applied to mel energies before the natural log. Every output entry
/// is >= std::log(kLogFloor); silent and padded columns sit exactly on it.
inline constexpr double kLogFloor = 1e-10;

/// Number of full frames that fit in num_samples. Total function: 0 when the
/// signal is shorter than one frame.
std::size_t frame_count(std::size_t num_samples, std::size_t frame_samples,
                        std::size_t shift_samples);

/// Hann-windowed power STFT -> triangular mel filterbank (HTK scale, 0 Hz to
/// Nyquist) -> natural log. Time axis padded/truncated to target_time_frames.
MelSpectrogram log_mel(const Waveform& w, const FramingParams& f);

/// log_mel with the frame shift multiplied by `compression` and the target
/// length divided by it; the grid comes out (n_mels x target/compression).
MelSpectrogram fshift_mel(const Waveform& w, const FramingParams& f, int compression);

}  // namespace c2f::dsp
