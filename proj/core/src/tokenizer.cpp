#include "c2f/tokenizer.hpp"

#include <stdexcept>
#include <string>

namespace c2f::tok {

GridDims token_grid_dims(int n_freq_bins, int n_time_frames, const PatchSpec& patch) {
    if (patch.height_bins <= 0 || patch.width_frames <= 0)
        throw std::invalid_argument("patch dimensions must be positive");
    if (n_freq_bins % patch.height_bins != 0)
        throw std::invalid_argument("frequency bins " + std::to_string(n_freq_bins) +
                                    " not divisible by patch height " +
                                    std::to_string(patch.height_bins));
    if (n_time_frames % patch.width_frames != 0)
        throw std::invalid_argument("time frames " + std::to_string(n_time_frames) +
                                    " not divisible by patch width " +
                                    std::to_string(patch.width_frames));
    return {n_freq_bins / patch.height_bins, n_time_frames / patch.width_frames};
}

PatchGrid patchify(const dsp::MelSpectrogram& x, const PatchSpec& patch) {
    const GridDims dims = token_grid_dims(x.bins.rows, x.bins.cols, patch);
    PatchGrid out;
    out.grid_f = dims.f;
    out.grid_t = dims.t;
    out.patch_h = patch.height_bins;
    out.patch_w = patch.width_frames;
    out.patches = Matrix(dims.count(), patch.height_bins * patch.width_frames);
    for (int a = 0; a < dims.f; ++a) {
        for (int b = 0; b < dims.t; ++b) {
            double* dst = out.patches.row(a * dims.t + b);
            for (int u = 0; u < patch.height_bins; ++u) {
                const double* src = x.bins.row(a * patch.height_bins + u);
                for (int v = 0; v < patch.width_frames; ++v)
                    dst[u * patch.width_frames + v] = src[b * patch.width_frames + v];
            }
        }
    }
    return out;
}

TokenSequence embed(const PatchGrid& patches, const Matrix& kernel,
                    const std::vector<double>& bias, const PosEmbedGrid& posemb,
                    const std::vector<double>& cls_token) {
    const int d = kernel.cols;
    if (kernel.rows != patches.patch_h * patches.patch_w)
        throw std::invalid_argument("kernel rows do not match patch cell count");
    if (static_cast<int>(bias.size()) != d || static_cast<int>(cls_token.size()) != d ||
        static_cast<int>(posemb.cls_slot.size()) != d || posemb.dim != d)
        throw std::invalid_argument("embedding width mismatch");
    if (posemb.grid_f != patches.grid_f || posemb.grid_t != patches.grid_t)
        throw std::invalid_argument("positional grid does not match patch grid");

    TokenSequence out;
    out.grid_f = patches.grid_f;
    out.grid_t = patches.grid_t;
    const int n = patches.grid_f * patches.grid_t;
    out.tokens = Matrix(n + 1, d);

    double* cls_row = out.tokens.row(0);
    for (int c = 0; c < d; ++c) cls_row[c] = cls_token[c] + posemb.cls_slot[c];

    const int cells = kernel.rows;
    for (int k = 0; k < n; ++k) {
        const double* p = patches.patches.row(k);
        const double* pe = posemb.grid.row(k);
        double* dst = out.tokens.row(k + 1);
        for (int c = 0; c < d; ++c) dst[c] = bias[c] + pe[c];
        for (int cell = 0; cell < cells; ++cell) {
            const double pv = p[cell];
            if (pv == 0.0) continue;
            const double* krow = kernel.row(cell);
            for (int c = 0; c < d; ++c) dst[c] += pv * krow[c];
        }
    }
    return out;
}

PatchSpec phase_patch(const PatchSpec& base, compress::Method method, int factor) {
    if (factor < 1) throw std::invalid_argument("compression factor must be >= 1");
    PatchSpec p = base;
    if (method == compress::Method::PatchBL || method == compress::Method::PatchPI)
        p.width_frames = base.width_frames * factor;
    return p;
}

GridDims phase_grid(const dsp::FramingParams& f, const PatchSpec& base, compress::Method method,
                    int factor) {
    const PatchSpec p = phase_patch(base, method, factor);
    const int frames = compress::shrinks_spectrogram(method) ? f.target_time_frames / factor
                                                             : f.target_time_frames;
    if (compress::shrinks_spectrogram(method) && f.target_time_frames % factor != 0)
        throw std::invalid_argument("target_time_frames not divisible by compression factor");
    return token_grid_dims(f.n_mels, frames, p);
}

}  // namespace c2f::tok
