#include "c2f/compress.hpp"

#include <algorithm>
#include <stdexcept>

namespace c2f::compress {

namespace {

void check_factor(const dsp::MelSpectrogram& x, int factor) {
    if (factor < 1) throw std::invalid_argument("pooling factor must be >= 1");
    if (x.bins.cols % factor != 0)
        throw std::invalid_argument("time length " + std::to_string(x.bins.cols) +
                                    " not divisible by pooling factor " + std::to_string(factor));
}

}  // namespace

std::string method_name(Method m) {
    switch (m) {
        case Method::None: return "none";
        case Method::Fshift: return "fshift";
        case Method::AvgPool: return "avg_pool";
        case Method::MaxPool: return "max_pool";
        case Method::PatchBL: return "patch_bl";
        case Method::PatchPI: return "patch_pi";
    }
    throw std::logic_error("unreachable");
}

Method method_from_name(const std::string& name) {
    if (name == "none") return Method::None;
    if (name == "fshift") return Method::Fshift;
    if (name == "avg_pool") return Method::AvgPool;
    if (name == "max_pool") return Method::MaxPool;
    if (name == "patch_bl") return Method::PatchBL;
    if (name == "patch_pi") return Method::PatchPI;
    throw std::invalid_argument("unknown compression method '" + name + "'");
}

bool shrinks_spectrogram(Method m) {
    return m == Method::Fshift || m == Method::AvgPool || m == Method::MaxPool;
}

dsp::MelSpectrogram avg_pool_time(const dsp::MelSpectrogram& x, int factor) {
    check_factor(x, factor);
    if (factor == 1) return x;
    dsp::MelSpectrogram out;
    out.framing = x.framing;
    out.compression_factor = x.compression_factor * factor;
    out.bins = Matrix(x.bins.rows, x.bins.cols / factor);
    const double inv = 1.0 / factor;
    for (int i = 0; i < x.bins.rows; ++i) {
        const double* src = x.bins.row(i);
        double* dst = out.bins.row(i);
        for (int j = 0; j < out.bins.cols; ++j) {
            double s = 0.0;
            for (int n = 0; n < factor; ++n) s += src[factor * j + n];
            dst[j] = s * inv;
        }
    }
    return out;
}

dsp::MelSpectrogram max_pool_time(const dsp::MelSpectrogram& x, int factor) {
    check_factor(x, factor);
    if (factor == 1) return x;
    dsp::MelSpectrogram out;
    out.framing = x.framing;
    out.compression_factor = x.compression_factor * factor;
    out.bins = Matrix(x.bins.rows, x.bins.cols / factor);
    for (int i = 0; i < x.bins.rows; ++i) {
        const double* src = x.bins.row(i);
        double* dst = out.bins.row(i);
        for (int j = 0; j < out.bins.cols; ++j) {
            double m = src[factor * j];
            for (int n = 1; n < factor; ++n) m = std::max(m, src[factor * j + n]);
            dst[j] = m;
        }
    }
    return out;
}

dsp::MelSpectrogram apply_compression(const dsp::Waveform& w, Method method, int factor,
                                      const dsp::FramingParams& f) {
    if (factor < 1) throw std::invalid_argument("compression factor must be >= 1");
    switch (method) {
        case Method::None:
            if (factor != 1)
                throw std::invalid_argument("method 'none' requires compression factor 1");
            return dsp::log_mel(w, f);
        case Method::Fshift:
            return dsp::fshift_mel(w, f, factor);
        case Method::AvgPool:
            return avg_pool_time(dsp::log_mel(w, f), factor);
        case Method::MaxPool:
            return max_pool_time(dsp::log_mel(w, f), factor);
        case Method::PatchBL:
        case Method::PatchPI:
            // Full-resolution grid; the tokenizer applies (p x C*p) patches.
            return dsp::log_mel(w, f);
    }
    throw std::logic_error("unreachable");
}

}  // namespace c2f::compress
