#pragma once

#include <vector>

#include "c2f/compress.hpp"
#include "c2f/dsp.hpp"
#include "c2f/matrix.hpp"

namespace c2f::tok {

/// Non-overlapping patch geometry. width_frames is C*16 in Patch-compressed
/// phases, 16 otherwise.
struct PatchSpec {
    int height_bins = 16;
    int width_frames = 16;
};

struct GridDims {
    int f = 0;
    int t = 0;
    int count() const { return f * t; }
};

/// Flattened patches in raster order, frequency-major then time: patch (a, b)
/// sits at row a*grid_t + b, its cells row-major over (patch_h, patch_w).
struct PatchGrid {
    int grid_f = 0, grid_t = 0;
    int patch_h = 0, patch_w = 0;
    Matrix patches;  // (grid_f*grid_t) x (patch_h*patch_w)
};

/// Learned positional embeddings, one d-vector per (f, t) patch slot plus a
/// dedicated CLS slot. Row a*grid_t + b of `grid` belongs to slot (a, b).
struct PosEmbedGrid {
    int grid_f = 0, grid_t = 0, dim = 0;
    Matrix grid;  // (grid_f*grid_t) x dim
    std::vector<double> cls_slot;
};

/// Embedded tokens, row 0 = CLS, rows 1..f*t in patch raster order.
struct TokenSequence {
    Matrix tokens;  // (grid_f*grid_t + 1) x dim
    int grid_f = 0, grid_t = 0;
};

/// (F/p_f, T/p_t); rejects non-divisible geometry.
GridDims token_grid_dims(int n_freq_bins, int n_time_frames, const PatchSpec& patch);

PatchGrid patchify(const dsp::MelSpectrogram& x, const PatchSpec& patch);

/// token_k = <flatten(patch_k), kernel> + bias + posemb_k, with
/// CLS = cls_token + cls_slot prepended. kernel is (patch_h*patch_w) x d.
TokenSequence embed(const PatchGrid& patches, const Matrix& kernel,
                    const std::vector<double>& bias, const PosEmbedGrid& posemb,
                    const std::vector<double>& cls_token);

/// Patch geometry for one phase: Patch* methods widen the patch to C*width,
/// every other method keeps the base patch.
PatchSpec phase_patch(const PatchSpec& base, compress::Method method, int factor);

/// Token grid for one phase of the given framing. All three compression
/// families land on (F/p_f, T/(C*p_t)).
GridDims phase_grid(const dsp::FramingParams& f, const PatchSpec& base, compress::Method method,
                    int factor);

}  // namespace c2f::tok
