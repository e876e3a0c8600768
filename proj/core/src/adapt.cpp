#include "c2f/adapt.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace c2f::adapt {

namespace {

constexpr double kRidge = 1e-12;

// Dense Cholesky, lower triangular. Throws when a pivot is not positive,
// which signals a pseudo-inverse conditioning breach.
Matrix cholesky(const Matrix& a) {
    const int n = a.rows;
    Matrix l(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j <= i; ++j) {
            double s = a.at(i, j);
            for (int k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            if (i == j) {
                if (s <= 0.0)
                    throw std::runtime_error(
                        "pi_resize: normal equations not positive definite (pivot " +
                        std::to_string(s) + ")");
                l.at(i, i) = std::sqrt(s);
            } else {
                l.at(i, j) = s / l.at(j, j);
            }
        }
    }
    return l;
}

std::vector<double> cholesky_solve(const Matrix& l, const std::vector<double>& b) {
    const int n = l.rows;
    std::vector<double> y(n), x(n);
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
        y[i] = s / l.at(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = y[i];
        for (int k = i + 1; k < n; ++k) s -= l.at(k, i) * x[k];
        x[i] = s / l.at(i, i);
    }
    return x;
}

// Applies a (new x old) interpolation matrix along one axis of a channel
// vector laid out with stride/extent bookkeeping handled by the caller.
void check_kernel_shape(const Matrix& kernel, int patch_h) {
    if (patch_h <= 0 || kernel.rows <= 0 || kernel.rows % patch_h != 0)
        throw std::invalid_argument("kernel rows not divisible by patch height");
}

}  // namespace

Matrix time_interp_matrix(int len_old, int len_new) {
    if (len_old <= 0 || len_new <= 0)
        throw std::invalid_argument("interpolation lengths must be positive");
    Matrix w(len_new, len_old);
    if (len_old == 1) {
        for (int j = 0; j < len_new; ++j) w.at(j, 0) = 1.0;
        return w;
    }
    for (int j = 0; j < len_new; ++j) {
        double pos = (len_new == 1)
                         ? 0.0
                         : static_cast<double>(j) * (len_old - 1) / (len_new - 1);
        int i0 = static_cast<int>(std::floor(pos));
        if (i0 >= len_old - 1) i0 = len_old - 1;
        const double frac = pos - i0;
        if (frac == 0.0) {
            w.at(j, i0) = 1.0;
        } else {
            w.at(j, i0) = 1.0 - frac;
            w.at(j, i0 + 1) = frac;
        }
    }
    return w;
}

tok::PosEmbedGrid resize_posemb_2d(const tok::PosEmbedGrid& grid, tok::GridDims new_dims) {
    if (grid.grid_f <= 0 || grid.grid_t <= 0)
        throw std::invalid_argument("positional grid is empty");
    if (new_dims.f <= 0 || new_dims.t <= 0)
        throw std::invalid_argument("target grid dims must be positive");
    if (new_dims.f == grid.grid_f && new_dims.t == grid.grid_t) return grid;

    const int d = grid.dim;
    tok::PosEmbedGrid out;
    out.grid_f = new_dims.f;
    out.grid_t = new_dims.t;
    out.dim = d;
    out.cls_slot = grid.cls_slot;
    out.grid = Matrix(new_dims.f * new_dims.t, d);

    // Separable: interpolate time first, then frequency.
    Matrix mid(grid.grid_f * new_dims.t, d);
    if (new_dims.t == grid.grid_t) {
        mid = grid.grid;
    } else {
        const Matrix wt = time_interp_matrix(grid.grid_t, new_dims.t);
        for (int a = 0; a < grid.grid_f; ++a) {
            for (int j = 0; j < new_dims.t; ++j) {
                double* dst = mid.row(a * new_dims.t + j);
                const double* wrow = wt.row(j);
                for (int b = 0; b < grid.grid_t; ++b) {
                    const double wv = wrow[b];
                    if (wv == 0.0) continue;
                    const double* src = grid.grid.row(a * grid.grid_t + b);
                    if (wv == 1.0) {
                        for (int c = 0; c < d; ++c) dst[c] = src[c];
                    } else {
                        for (int c = 0; c < d; ++c) dst[c] += wv * src[c];
                    }
                }
            }
        }
    }
    if (new_dims.f == grid.grid_f) {
        out.grid = mid;
    } else {
        const Matrix wf = time_interp_matrix(grid.grid_f, new_dims.f);
        for (int a = 0; a < new_dims.f; ++a) {
            const double* wrow = wf.row(a);
            for (int j = 0; j < new_dims.t; ++j) {
                double* dst = out.grid.row(a * new_dims.t + j);
                for (int b = 0; b < grid.grid_f; ++b) {
                    const double wv = wrow[b];
                    if (wv == 0.0) continue;
                    const double* src = mid.row(b * new_dims.t + j);
                    if (wv == 1.0) {
                        for (int c = 0; c < d; ++c) dst[c] = src[c];
                    } else {
                        for (int c = 0; c < d; ++c) dst[c] += wv * src[c];
                    }
                }
            }
        }
    }
    return out;
}

tok::PosEmbedGrid interp_posemb(const tok::PosEmbedGrid& grid, tok::GridDims new_dims) {
    if (new_dims.f != grid.grid_f)
        throw std::invalid_argument("interp_posemb: frequency axis must stay fixed (" +
                                    std::to_string(grid.grid_f) + " -> " +
                                    std::to_string(new_dims.f) + ")");
    return resize_posemb_2d(grid, new_dims);
}

Matrix resize_kernel_bilinear(const Matrix& kernel, int patch_h, int new_width) {
    check_kernel_shape(kernel, patch_h);
    if (new_width <= 0) throw std::invalid_argument("new kernel width must be positive");
    const int old_width = kernel.rows / patch_h;
    if (new_width == old_width) return kernel;

    const int d = kernel.cols;
    const Matrix w = time_interp_matrix(old_width, new_width);
    Matrix out(patch_h * new_width, d);
    for (int u = 0; u < patch_h; ++u) {
        for (int j = 0; j < new_width; ++j) {
            double* dst = out.row(u * new_width + j);
            const double* wrow = w.row(j);
            for (int v = 0; v < old_width; ++v) {
                const double wv = wrow[v];
                if (wv == 0.0) continue;
                const double* src = kernel.row(u * old_width + v);
                for (int c = 0; c < d; ++c) dst[c] += wv * src[c];
            }
        }
    }
    return out;
}

Matrix pi_resize(const Matrix& kernel, int patch_h, int new_width) {
    check_kernel_shape(kernel, patch_h);
    if (new_width <= 0) throw std::invalid_argument("new kernel width must be positive");
    const int old_width = kernel.rows / patch_h;
    if (new_width == old_width) return kernel;

    const int d = kernel.cols;
    // B is the full patch-resize map (patch_h*new_width x patch_h*old_width);
    // it factors as identity-over-rows times the 1-D time operator, so the
    // pseudo-inverse splits into independent per-row systems.
    const Matrix bt = time_interp_matrix(old_width, new_width);  // new x old
    Matrix out(patch_h * new_width, d);

    if (new_width > old_width) {
        // Underdetermined B^T w_new = w_old: minimum-norm w_new = B (B^T B)^-1 w_old.
        Matrix g = matmul_tn(bt, bt);  // old x old
        for (int i = 0; i < old_width; ++i) g.at(i, i) += kRidge;
        const Matrix l = cholesky(g);
        std::vector<double> rhs(old_width), y;
        for (int u = 0; u < patch_h; ++u) {
            for (int c = 0; c < d; ++c) {
                for (int v = 0; v < old_width; ++v) rhs[v] = kernel.at(u * old_width + v, c);
                y = cholesky_solve(l, rhs);
                for (int j = 0; j < new_width; ++j) {
                    const double* brow = bt.row(j);
                    double s = 0.0;
                    for (int v = 0; v < old_width; ++v) s += brow[v] * y[v];
                    out.at(u * new_width + j, c) = s;
                }
            }
        }
    } else {
        // Overdetermined: normal equations (B B^T) w_new = B w_old.
        Matrix h = matmul_nt(bt, bt);  // new x new
        for (int i = 0; i < new_width; ++i) h.at(i, i) += kRidge;
        const Matrix l = cholesky(h);
        std::vector<double> rhs(new_width), sol;
        for (int u = 0; u < patch_h; ++u) {
            for (int c = 0; c < d; ++c) {
                for (int j = 0; j < new_width; ++j) {
                    const double* brow = bt.row(j);
                    double s = 0.0;
                    for (int v = 0; v < old_width; ++v)
                        s += brow[v] * kernel.at(u * old_width + v, c);
                    rhs[j] = s;
                }
                sol = cholesky_solve(l, rhs);
                for (int j = 0; j < new_width; ++j) out.at(u * new_width + j, c) = sol[j];
            }
        }
    }
    return out;
}

model::Checkpoint migrate(const model::Checkpoint& ckpt, const PhaseTransition& trans) {
    if (ckpt.phase.method != trans.from.method || ckpt.phase.factor != trans.from.factor)
        throw std::invalid_argument("checkpoint provenance does not match transition source");
    if (trans.to.factor > trans.from.factor)
        throw std::invalid_argument("invalid transition: compression factor must not increase");
    if (trans.from.patch.height_bins != trans.to.patch.height_bins)
        throw std::invalid_argument("patch height must not change across phases");
    if (trans.from.grid.f != trans.to.grid.f)
        throw std::invalid_argument("frequency token count must not change across phases");
    if (ckpt.params.posemb.grid_f != trans.from.grid.f ||
        ckpt.params.posemb.grid_t != trans.from.grid.t)
        throw std::invalid_argument("checkpoint grid does not match transition source");
    if (ckpt.params.patch_kernel.rows !=
        trans.from.patch.height_bins * trans.from.patch.width_frames)
        throw std::invalid_argument("checkpoint kernel does not match transition source");

    model::Checkpoint out;
    out.cfg = ckpt.cfg;
    out.seed = ckpt.seed;
    out.params = ckpt.params;
    out.phase = {trans.to.method, trans.to.factor};
    out.has_opt_state = false;  // training settings reset at every transition
    out.opt = model::AdamState{};

    if (trans.to.patch.width_frames != trans.from.patch.width_frames) {
        out.params.patch_kernel =
            (trans.resize == ResizeMethod::PIResize)
                ? pi_resize(ckpt.params.patch_kernel, trans.from.patch.height_bins,
                            trans.to.patch.width_frames)
                : resize_kernel_bilinear(ckpt.params.patch_kernel,
                                         trans.from.patch.height_bins,
                                         trans.to.patch.width_frames);
    }
    if (trans.to.grid.t != trans.from.grid.t)
        out.params.posemb = interp_posemb(ckpt.params.posemb, trans.to.grid);
    return out;
}

}  // namespace c2f::adapt
