#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "c2f/dsp.hpp"

namespace c2f::data {

/// One synthetic class: a parametric signal generator.
struct ClassSpec {
    enum class Kind { Tone, Chirp, AmNoise, Harmonic };
    Kind kind = Kind::Tone;
    double freq = 440.0;  // tone frequency / harmonic fundamental
    double f0 = 300.0;    // chirp start
    double f1 = 2400.0;   // chirp end
    double rate = 8.0;    // AM envelope rate in Hz
};

struct SyntheticSpec {
    std::vector<ClassSpec> classes;
    int samples_per_class = 50;
    double duration_s = 1.3;
    double snr_db = 20.0;
    bool multi_label = false;  // mixtures of 2 distinct classes
    int sample_rate_hz = 16000;
    dsp::FramingParams framing;  // used for the manifest's mel statistics
};

struct ManifestRecord {
    std::string relative_path;
    std::vector<int> labels;
    bool is_eval = false;
};

/// Corpus index: one record per WAV plus the train-split mel normalization
/// statistics. Line format documented in the README.
struct Manifest {
    std::vector<ManifestRecord> records;
    std::uint64_t seed = 0;
    int num_classes = 0;
    bool multi_label = false;
    int sample_rate_hz = 16000;
    double duration_s = 0.0;
    dsp::FramingParams framing;
    double mel_mean = 0.0;
    double mel_std = 1.0;
};

/// The default desk-scale corpus: 4 classes x 50 clips of 1.3 s at 16 kHz,
/// framed to a 128x128 grid. Two of the classes differ mainly in AM envelope
/// rate, so fine temporal structure carries real label information.
SyntheticSpec default_synthetic_spec();

/// 16-bit PCM mono RIFF reader; rejects anything else with a descriptive
/// error rather than guessing.
dsp::Waveform read_wav(const std::string& path);

/// Canonical 44-byte-header PCM16 mono writer; amplitudes must be in [-1, 1].
void write_wav(const std::string& path, const dsp::Waveform& w);

/// Deterministic single-class clip synthesis (no background noise).
dsp::Waveform synthesize_clip(const ClassSpec& cls, double duration_s, int sample_rate_hz,
                              std::mt19937_64& rng);

/// Full sample: mix of the given classes plus background noise at snr_db,
/// peak-normalized into [-1, 1].
dsp::Waveform render_sample(const SyntheticSpec& spec, const std::vector<int>& labels,
                            std::mt19937_64& rng);

/// Writes one WAV per sample and a manifest.tsv with an 80/20 train/eval
/// split; deterministic given the seed.
Manifest generate_corpus(const SyntheticSpec& spec, std::uint64_t seed,
                         const std::string& out_dir);

void write_manifest(const std::string& path, const Manifest& m);
Manifest read_manifest(const std::string& path);

}  // namespace c2f::data
