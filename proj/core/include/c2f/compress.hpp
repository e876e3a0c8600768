#pragma once

#include <string>

#include "c2f/dsp.hpp"

namespace c2f::compress {

/// Temporal compression families. The Patch variants leave the spectrogram
/// untouched; their compression happens at tokenization via wider patches.
enum class Method { None, Fshift, AvgPool, MaxPool, PatchBL, PatchPI };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

/// True for AvgPool/MaxPool/Fshift, i.e. methods that shrink the grid itself.
bool shrinks_spectrogram(Method m);

/// Average pooling along time with kernel and stride (1 x factor).
dsp::MelSpectrogram avg_pool_time(const dsp::MelSpectrogram& x, int factor);

/// Max pooling along time with kernel and stride (1 x factor).
dsp::MelSpectrogram max_pool_time(const dsp::MelSpectrogram& x, int factor);

/// Waveform -> mel grid for one phase: Fshift regenerates the mel with a
/// scaled frame shift, pooling methods pool the full-resolution log-mel, and
/// None/Patch* pass the full-resolution grid through.
dsp::MelSpectrogram apply_compression(const dsp::Waveform& w, Method method, int factor,
                                      const dsp::FramingParams& f);

}  // namespace c2f::compress
