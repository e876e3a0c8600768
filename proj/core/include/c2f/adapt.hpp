#pragma once

#include "c2f/checkpoint.hpp"
#include "c2f/matrix.hpp"
#include "c2f/tokenizer.hpp"

namespace c2f::adapt {

enum class ResizeMethod { Bilinear, PIResize };

/// Align-corners 1-D linear interpolation operator as a (len_new x len_old)
/// weight matrix: endpoints map to endpoints; a single output samples
/// position 0.
Matrix time_interp_matrix(int len_old, int len_new);

/// Per-channel bilinear resize of the positional grid along both axes.
tok::PosEmbedGrid resize_posemb_2d(const tok::PosEmbedGrid& grid, tok::GridDims new_dims);

/// Positional-embedding migration: time-axis bilinear interpolation with the
/// frequency axis (and the CLS slot) unchanged. Equal dims return the input
/// bit-for-bit.
tok::PosEmbedGrid interp_posemb(const tok::PosEmbedGrid& grid, tok::GridDims new_dims);

/// Patch-kernel resize along the width axis by align-corners bilinear
/// interpolation, per output channel. kernel is (patch_h*width) x d.
Matrix resize_kernel_bilinear(const Matrix& kernel, int patch_h, int new_width);

/// Pseudo-inverse patch-kernel resize: with B the bilinear patch-resize map
/// from the old patch shape to the new one, returns per channel the
/// minimum-norm least-squares solution of B^T w_new = w_old. Upsampling
/// preserves <x, w> = <Bx, w_new> for every patch x.
Matrix pi_resize(const Matrix& kernel, int patch_h, int new_width);

struct PhaseGeometry {
    compress::Method method = compress::Method::None;
    int factor = 1;
    tok::GridDims grid;
    tok::PatchSpec patch;
};

struct PhaseTransition {
    PhaseGeometry from, to;
    ResizeMethod resize = ResizeMethod::Bilinear;
};

/// Carry trained weights into the next phase: the patch kernel is resized
/// when the phase patch width changes (Patch* schedules), the positional grid
/// is interpolated when the token grid changes, every other tensor is copied
/// verbatim, and the optimizer state is dropped.
model::Checkpoint migrate(const model::Checkpoint& ckpt, const PhaseTransition& trans);

}  // namespace c2f::adapt
