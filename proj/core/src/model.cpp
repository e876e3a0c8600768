#include "c2f/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace c2f::model {

namespace {

constexpr double kLnEps = 1e-5;

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u / std::numbers::sqrt2)); }

double gelu_grad(double u) {
    const double cdf = 0.5 * (1.0 + std::erf(u / std::numbers::sqrt2));
    const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
    return cdf + u * pdf;
}

std::vector<double> column_sums(const Matrix& m) {
    std::vector<double> out(m.cols, 0.0);
    for (int i = 0; i < m.rows; ++i) {
        const double* r = m.row(i);
        for (int j = 0; j < m.cols; ++j) out[j] += r[j];
    }
    return out;
}

void add_to(std::vector<double>& dst, const std::vector<double>& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void add_to(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// Row-wise LayerNorm; keeps xhat and 1/std for the backward pass.
void layer_norm(const Matrix& x, const std::vector<double>& gamma,
                const std::vector<double>& beta, Matrix& xhat, std::vector<double>& inv_std,
                Matrix& out) {
    const int n = x.rows, d = x.cols;
    xhat = Matrix(n, d);
    out = Matrix(n, d);
    inv_std.assign(n, 0.0);
    for (int i = 0; i < n; ++i) {
        const double* r = x.row(i);
        double mu = 0.0;
        for (int j = 0; j < d; ++j) mu += r[j];
        mu /= d;
        double var = 0.0;
        for (int j = 0; j < d; ++j) var += (r[j] - mu) * (r[j] - mu);
        var /= d;
        const double is = 1.0 / std::sqrt(var + kLnEps);
        inv_std[i] = is;
        double* xh = xhat.row(i);
        double* o = out.row(i);
        for (int j = 0; j < d; ++j) {
            xh[j] = (r[j] - mu) * is;
            o[j] = gamma[j] * xh[j] + beta[j];
        }
    }
}

Matrix layer_norm_backward(const Matrix& dout, const Matrix& xhat,
                           const std::vector<double>& inv_std, const std::vector<double>& gamma,
                           std::vector<double>& dgamma, std::vector<double>& dbeta) {
    const int n = dout.rows, d = dout.cols;
    Matrix dx(n, d);
    for (int i = 0; i < n; ++i) {
        const double* dr = dout.row(i);
        const double* xh = xhat.row(i);
        double* dxr = dx.row(i);
        double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
        for (int j = 0; j < d; ++j) {
            dgamma[j] += dr[j] * xh[j];
            dbeta[j] += dr[j];
            const double dxh = dr[j] * gamma[j];
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xh[j];
        }
        const double m1 = sum_dxhat / d;
        const double m2 = sum_dxhat_xhat / d;
        for (int j = 0; j < d; ++j)
            dxr[j] = inv_std[i] * (dr[j] * gamma[j] - m1 - xh[j] * m2);
    }
    return dx;
}

struct LayerCache {
    Matrix x_in;
    Matrix ln1_xhat, h1;
    std::vector<double> ln1_inv_std;
    Matrix qkv;  // n x 3d
    std::vector<Matrix> attn;  // per head, n x n
    Matrix ctx;
    std::vector<double> drop_mask1;
    Matrix x_mid;
    Matrix ln2_xhat, h2;
    std::vector<double> ln2_inv_std;
    Matrix mlp_pre, mlp_act;
    std::vector<double> drop_mask2;
};

struct ForwardCache {
    Matrix tokens;
    std::vector<LayerCache> layers;
    Matrix final_xhat, xf;
    std::vector<double> final_inv_std;
    std::vector<double> cls_repr;
    std::vector<double> logits;
};

std::vector<double> make_dropout_mask(std::size_t len, double rate, std::mt19937_64& rng) {
    std::vector<double> mask(len);
    const double keep = 1.0 - rate;
    const double scale = 1.0 / keep;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& m : mask) m = (u(rng) < keep) ? scale : 0.0;
    return mask;
}

void apply_mask(Matrix& m, const std::vector<double>& mask) {
    for (std::size_t i = 0; i < m.data.size(); ++i) m.data[i] *= mask[i];
}

void encode_forward(const Parameters& p, const ModelConfig& cfg, const Matrix& tokens,
                    bool training, std::mt19937_64* rng, ForwardCache& cache) {
    const int d = cfg.embed_dim;
    const int n = tokens.rows;
    const int heads = cfg.num_heads;
    const int dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
    const bool use_dropout = training && cfg.dropout > 0.0;

    cache.tokens = tokens;
    cache.layers.resize(cfg.num_layers);
    Matrix x = tokens;

    for (int l = 0; l < cfg.num_layers; ++l) {
        const LayerParams& lp = p.layers[l];
        LayerCache& lc = cache.layers[l];
        lc.x_in = x;

        layer_norm(x, lp.ln1_gamma, lp.ln1_beta, lc.ln1_xhat, lc.ln1_inv_std, lc.h1);

        lc.qkv = matmul(lc.h1, lp.w_qkv);
        for (int i = 0; i < n; ++i) {
            double* r = lc.qkv.row(i);
            for (int j = 0; j < 3 * d; ++j) r[j] += lp.b_qkv[j];
        }

        lc.attn.assign(heads, Matrix());
        lc.ctx = Matrix(n, d);
        for (int h = 0; h < heads; ++h) {
            const int qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
            Matrix& a = lc.attn[h];
            a = Matrix(n, n);
            for (int i = 0; i < n; ++i) {
                const double* qi = lc.qkv.row(i) + qo;
                double* arow = a.row(i);
                double mx = -1e300;
                for (int j = 0; j < n; ++j) {
                    const double* kj = lc.qkv.row(j) + ko;
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
                    arow[j] = s * inv_sqrt_dh;
                    mx = std::max(mx, arow[j]);
                }
                double denom = 0.0;
                for (int j = 0; j < n; ++j) {
                    arow[j] = std::exp(arow[j] - mx);
                    denom += arow[j];
                }
                for (int j = 0; j < n; ++j) arow[j] /= denom;

                double* ctxi = lc.ctx.row(i) + h * dh;
                for (int j = 0; j < n; ++j) {
                    const double aij = arow[j];
                    const double* vj = lc.qkv.row(j) + vo;
                    for (int c = 0; c < dh; ++c) ctxi[c] += aij * vj[c];
                }
            }
        }

        Matrix attn_out = matmul(lc.ctx, lp.w_out);
        for (int i = 0; i < n; ++i) {
            double* r = attn_out.row(i);
            for (int j = 0; j < d; ++j) r[j] += lp.b_out[j];
        }
        if (use_dropout) {
            lc.drop_mask1 = make_dropout_mask(attn_out.data.size(), cfg.dropout, *rng);
            apply_mask(attn_out, lc.drop_mask1);
        }
        lc.x_mid = x;
        add_to(lc.x_mid, attn_out);

        layer_norm(lc.x_mid, lp.ln2_gamma, lp.ln2_beta, lc.ln2_xhat, lc.ln2_inv_std, lc.h2);

        lc.mlp_pre = matmul(lc.h2, lp.w_fc1);
        for (int i = 0; i < n; ++i) {
            double* r = lc.mlp_pre.row(i);
            for (int j = 0; j < cfg.mlp_hidden(); ++j) r[j] += lp.b_fc1[j];
        }
        lc.mlp_act = lc.mlp_pre;
        for (auto& v : lc.mlp_act.data) v = gelu(v);

        Matrix mlp_out = matmul(lc.mlp_act, lp.w_fc2);
        for (int i = 0; i < n; ++i) {
            double* r = mlp_out.row(i);
            for (int j = 0; j < d; ++j) r[j] += lp.b_fc2[j];
        }
        if (use_dropout) {
            lc.drop_mask2 = make_dropout_mask(mlp_out.data.size(), cfg.dropout, *rng);
            apply_mask(mlp_out, lc.drop_mask2);
        }
        x = lc.x_mid;
        add_to(x, mlp_out);
    }

    layer_norm(x, p.norm_gamma, p.norm_beta, cache.final_xhat, cache.final_inv_std, cache.xf);

    cache.cls_repr.assign(cache.xf.row(0), cache.xf.row(0) + d);
    cache.logits.assign(cfg.num_classes, 0.0);
    for (int j = 0; j < cfg.num_classes; ++j) cache.logits[j] = p.head_b[j];
    for (int c = 0; c < d; ++c) {
        const double xc = cache.cls_repr[c];
        const double* hw = p.head_w.row(c);
        for (int j = 0; j < cfg.num_classes; ++j) cache.logits[j] += xc * hw[j];
    }
}

// Backward through the encoder given d(loss)/d(logits); accumulates into g.
void encode_backward(const Parameters& p, const ModelConfig& cfg, const ForwardCache& cache,
                     const std::vector<double>& dlogits, Parameters& g, Matrix& dtokens) {
    const int d = cfg.embed_dim;
    const int n = cache.tokens.rows;
    const int heads = cfg.num_heads;
    const int dh = d / heads;
    const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));

    for (int c = 0; c < d; ++c) {
        double* gw = g.head_w.row(c);
        for (int j = 0; j < cfg.num_classes; ++j) gw[j] += cache.cls_repr[c] * dlogits[j];
    }
    add_to(g.head_b, dlogits);

    Matrix dxf(n, d);
    {
        double* r = dxf.row(0);
        for (int c = 0; c < d; ++c) {
            const double* hw = p.head_w.row(c);
            double s = 0.0;
            for (int j = 0; j < cfg.num_classes; ++j) s += hw[j] * dlogits[j];
            r[c] = s;
        }
    }

    Matrix dx = layer_norm_backward(dxf, cache.final_xhat, cache.final_inv_std, p.norm_gamma,
                                    g.norm_gamma, g.norm_beta);

    for (int l = cfg.num_layers - 1; l >= 0; --l) {
        const LayerParams& lp = p.layers[l];
        const LayerCache& lc = cache.layers[l];
        LayerParams& gl = g.layers[l];

        // MLP block
        Matrix d_mlp_out = dx;
        if (!lc.drop_mask2.empty()) apply_mask(d_mlp_out, lc.drop_mask2);
        add_to(gl.w_fc2, matmul_tn(lc.mlp_act, d_mlp_out));
        add_to(gl.b_fc2, column_sums(d_mlp_out));
        Matrix dact = matmul_nt(d_mlp_out, lp.w_fc2);
        for (std::size_t i = 0; i < dact.data.size(); ++i)
            dact.data[i] *= gelu_grad(lc.mlp_pre.data[i]);
        add_to(gl.w_fc1, matmul_tn(lc.h2, dact));
        add_to(gl.b_fc1, column_sums(dact));
        Matrix dh2 = matmul_nt(dact, lp.w_fc1);
        Matrix dfrom_ln2 = layer_norm_backward(dh2, lc.ln2_xhat, lc.ln2_inv_std, lp.ln2_gamma,
                                               gl.ln2_gamma, gl.ln2_beta);
        add_to(dx, dfrom_ln2);

        // Attention block
        Matrix d_attn_out = dx;
        if (!lc.drop_mask1.empty()) apply_mask(d_attn_out, lc.drop_mask1);
        add_to(gl.w_out, matmul_tn(lc.ctx, d_attn_out));
        add_to(gl.b_out, column_sums(d_attn_out));
        Matrix dctx = matmul_nt(d_attn_out, lp.w_out);

        Matrix dqkv(n, 3 * d);
        for (int h = 0; h < heads; ++h) {
            const int qo = h * dh, ko = d + h * dh, vo = 2 * d + h * dh;
            const Matrix& a = lc.attn[h];

            Matrix da(n, n);
            for (int i = 0; i < n; ++i) {
                const double* dctxi = dctx.row(i) + h * dh;
                double* dai = da.row(i);
                for (int j = 0; j < n; ++j) {
                    const double* vj = lc.qkv.row(j) + vo;
                    double s = 0.0;
                    for (int c = 0; c < dh; ++c) s += dctxi[c] * vj[c];
                    dai[j] = s;
                }
            }
            // dV
            for (int j = 0; j < n; ++j) {
                double* dvj = dqkv.row(j) + vo;
                for (int i = 0; i < n; ++i) {
                    const double aij = a.at(i, j);
                    if (aij == 0.0) continue;
                    const double* dctxi = dctx.row(i) + h * dh;
                    for (int c = 0; c < dh; ++c) dvj[c] += aij * dctxi[c];
                }
            }
            // Softmax backward, then scores -> Q, K
            for (int i = 0; i < n; ++i) {
                const double* ai = a.row(i);
                double* dai = da.row(i);
                double dot = 0.0;
                for (int j = 0; j < n; ++j) dot += dai[j] * ai[j];
                for (int j = 0; j < n; ++j) dai[j] = ai[j] * (dai[j] - dot);
            }
            for (int i = 0; i < n; ++i) {
                const double* dai = da.row(i);
                double* dqi = dqkv.row(i) + qo;
                for (int j = 0; j < n; ++j) {
                    const double ds = dai[j] * inv_sqrt_dh;
                    if (ds == 0.0) continue;
                    const double* kj = lc.qkv.row(j) + ko;
                    for (int c = 0; c < dh; ++c) dqi[c] += ds * kj[c];
                }
            }
            for (int j = 0; j < n; ++j) {
                double* dkj = dqkv.row(j) + ko;
                for (int i = 0; i < n; ++i) {
                    const double ds = da.at(i, j) * inv_sqrt_dh;
                    if (ds == 0.0) continue;
                    const double* qi = lc.qkv.row(i) + qo;
                    for (int c = 0; c < dh; ++c) dkj[c] += ds * qi[c];
                }
            }
        }

        add_to(gl.w_qkv, matmul_tn(lc.h1, dqkv));
        add_to(gl.b_qkv, column_sums(dqkv));
        Matrix dh1 = matmul_nt(dqkv, lp.w_qkv);
        Matrix dfrom_ln1 = layer_norm_backward(dh1, lc.ln1_xhat, lc.ln1_inv_std, lp.ln1_gamma,
                                               gl.ln1_gamma, gl.ln1_beta);
        add_to(dx, dfrom_ln1);
    }
    dtokens = dx;
}

void check_target(const std::vector<double>& target, const ModelConfig& cfg) {
    if (static_cast<int>(target.size()) != cfg.num_classes)
        throw std::invalid_argument("target size does not match num_classes");
    if (cfg.task_kind == TaskKind::SingleLabel) {
        int ones = 0;
        for (double t : target) {
            if (t == 1.0)
                ++ones;
            else if (t != 0.0)
                throw std::invalid_argument("single-label target must be one-hot");
        }
        if (ones != 1) throw std::invalid_argument("single-label target must be one-hot");
    } else {
        for (double t : target)
            if (t != 0.0 && t != 1.0)
                throw std::invalid_argument("multi-label target entries must be 0 or 1");
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (embed_dim <= 0 || num_layers <= 0 || num_heads <= 0 || mlp_ratio <= 0)
        throw std::invalid_argument("model dimensions must be positive");
    if (embed_dim % num_heads != 0)
        throw std::invalid_argument("embed_dim must be divisible by num_heads");
    if (num_classes < 2) throw std::invalid_argument("num_classes must be >= 2");
    if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must be in [0, 1)");
    if (patch.height_bins <= 0 || patch.width_frames <= 0)
        throw std::invalid_argument("patch dimensions must be positive");
}

namespace {

template <typename Params, typename Ref, typename Vec>
std::vector<Ref> build_refs(Params& p) {
    std::vector<Ref> refs;
    auto mat = [&](const std::string& name, auto& m) {
        refs.push_back(Ref{name, &m.data, {m.rows, m.cols}});
    };
    auto vec = [&](const std::string& name, Vec& v) {
        refs.push_back(Ref{name, &v, {static_cast<int>(v.size())}});
    };
    mat("patch_kernel", p.patch_kernel);
    vec("patch_bias", p.patch_bias);
    vec("cls_token", p.cls_token);
    refs.push_back(Ref{"posemb_grid", &p.posemb.grid.data,
                       {p.posemb.grid_f, p.posemb.grid_t, p.posemb.dim}});
    vec("posemb_cls", p.posemb.cls_slot);
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
        auto& lp = p.layers[l];
        const std::string pre = "layers." + std::to_string(l) + ".";
        vec(pre + "ln1_gamma", lp.ln1_gamma);
        vec(pre + "ln1_beta", lp.ln1_beta);
        mat(pre + "w_qkv", lp.w_qkv);
        vec(pre + "b_qkv", lp.b_qkv);
        mat(pre + "w_out", lp.w_out);
        vec(pre + "b_out", lp.b_out);
        vec(pre + "ln2_gamma", lp.ln2_gamma);
        vec(pre + "ln2_beta", lp.ln2_beta);
        mat(pre + "w_fc1", lp.w_fc1);
        vec(pre + "b_fc1", lp.b_fc1);
        mat(pre + "w_fc2", lp.w_fc2);
        vec(pre + "b_fc2", lp.b_fc2);
    }
    vec("final_norm_gamma", p.norm_gamma);
    vec("final_norm_beta", p.norm_beta);
    mat("head_w", p.head_w);
    vec("head_b", p.head_b);
    return refs;
}

}  // namespace

std::vector<TensorRef> tensor_refs(Parameters& p) {
    return build_refs<Parameters, TensorRef, std::vector<double>>(p);
}

std::vector<ConstTensorRef> tensor_refs(const Parameters& p) {
    return build_refs<const Parameters, ConstTensorRef, const std::vector<double>>(p);
}

AdamState make_adam_state(const Parameters& p) {
    AdamState s;
    for (const auto& ref : tensor_refs(p)) {
        s.m.emplace_back(ref.data->size(), 0.0);
        s.v.emplace_back(ref.data->size(), 0.0);
    }
    return s;
}

Parameters zeros_like(const Parameters& p) {
    Parameters g = p;
    for (auto& ref : tensor_refs(g)) std::fill(ref.data->begin(), ref.data->end(), 0.0);
    return g;
}

Parameters allocate_parameters(const ModelConfig& cfg, tok::GridDims grid, int patch_width) {
    cfg.validate();
    if (grid.f <= 0 || grid.t <= 0) throw std::invalid_argument("token grid must be non-empty");
    if (patch_width <= 0) throw std::invalid_argument("patch width must be positive");

    const int d = cfg.embed_dim;
    const int hidden = cfg.mlp_hidden();
    const int cells = cfg.patch.height_bins * patch_width;

    Parameters p;
    p.patch_kernel = Matrix(cells, d);
    p.patch_bias.assign(d, 0.0);
    p.cls_token.assign(d, 0.0);
    p.posemb.grid_f = grid.f;
    p.posemb.grid_t = grid.t;
    p.posemb.dim = d;
    p.posemb.grid = Matrix(grid.count(), d);
    p.posemb.cls_slot.assign(d, 0.0);
    p.layers.resize(cfg.num_layers);
    for (auto& lp : p.layers) {
        lp.ln1_gamma.assign(d, 1.0);
        lp.ln1_beta.assign(d, 0.0);
        lp.w_qkv = Matrix(d, 3 * d);
        lp.b_qkv.assign(3 * d, 0.0);
        lp.w_out = Matrix(d, d);
        lp.b_out.assign(d, 0.0);
        lp.ln2_gamma.assign(d, 1.0);
        lp.ln2_beta.assign(d, 0.0);
        lp.w_fc1 = Matrix(d, hidden);
        lp.b_fc1.assign(hidden, 0.0);
        lp.w_fc2 = Matrix(hidden, d);
        lp.b_fc2.assign(d, 0.0);
    }
    p.norm_gamma.assign(d, 1.0);
    p.norm_beta.assign(d, 0.0);
    p.head_w = Matrix(d, cfg.num_classes);
    p.head_b.assign(cfg.num_classes, 0.0);
    return p;
}

Parameters init_parameters(const ModelConfig& cfg, tok::GridDims grid, int patch_width,
                           std::uint64_t seed) {
    Parameters p = allocate_parameters(cfg, grid, patch_width);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 0.02);
    auto fill = [&](std::vector<double>& v) {
        for (auto& x : v) x = nd(rng);
    };
    fill(p.patch_kernel.data);
    fill(p.cls_token);
    fill(p.posemb.grid.data);
    fill(p.posemb.cls_slot);
    for (auto& lp : p.layers) {
        fill(lp.w_qkv.data);
        fill(lp.w_out.data);
        fill(lp.w_fc1.data);
        fill(lp.w_fc2.data);
    }
    fill(p.head_w.data);
    return p;
}

std::vector<double> softmax(const std::vector<double>& z) {
    std::vector<double> out(z.size());
    double mx = *std::max_element(z.begin(), z.end());
    double denom = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(z[i] - mx);
        denom += out[i];
    }
    for (auto& v : out) v /= denom;
    return out;
}

std::vector<double> forward(const Parameters& p, const ModelConfig& cfg,
                            const tok::TokenSequence& seq) {
    cfg.validate();
    if (seq.tokens.cols != cfg.embed_dim)
        throw std::invalid_argument("token width does not match embed_dim");
    if (seq.tokens.rows != p.posemb.grid_f * p.posemb.grid_t + 1)
        throw std::invalid_argument("sequence length does not match positional grid");
    ForwardCache cache;
    encode_forward(p, cfg, seq.tokens, false, nullptr, cache);
    return cache.logits;
}

std::vector<double> predict(const Parameters& p, const ModelConfig& cfg,
                            const tok::PatchGrid& patches) {
    tok::TokenSequence seq =
        tok::embed(patches, p.patch_kernel, p.patch_bias, p.posemb, p.cls_token);
    return forward(p, cfg, seq);
}

double loss(const std::vector<double>& logits, const std::vector<double>& target, TaskKind kind) {
    if (logits.size() != target.size())
        throw std::invalid_argument("logits/target size mismatch");
    const int k = static_cast<int>(logits.size());
    if (kind == TaskKind::SingleLabel) {
        double mx = *std::max_element(logits.begin(), logits.end());
        double lse = 0.0;
        for (double z : logits) lse += std::exp(z - mx);
        lse = mx + std::log(lse);
        double zy = 0.0;
        int ones = 0;
        for (int j = 0; j < k; ++j) {
            if (target[j] == 1.0) {
                zy = logits[j];
                ++ones;
            } else if (target[j] != 0.0) {
                throw std::invalid_argument("single-label target must be one-hot");
            }
        }
        if (ones != 1) throw std::invalid_argument("single-label target must be one-hot");
        return lse - zy;
    }
    double total = 0.0;
    for (int j = 0; j < k; ++j) {
        if (target[j] != 0.0 && target[j] != 1.0)
            throw std::invalid_argument("multi-label target entries must be 0 or 1");
        const double z = logits[j];
        total += std::max(z, 0.0) - z * target[j] + std::log1p(std::exp(-std::abs(z)));
    }
    return total / k;
}

GradResult gradients(const Parameters& p, const ModelConfig& cfg,
                     const std::vector<Example>& batch, std::mt19937_64* dropout_rng) {
    cfg.validate();
    if (batch.empty()) throw std::invalid_argument("empty batch");
    if (cfg.dropout > 0.0 && dropout_rng == nullptr)
        throw std::invalid_argument("dropout enabled but no rng supplied");

    GradResult result;
    result.grads = zeros_like(p);
    const double inv_b = 1.0 / static_cast<double>(batch.size());

    for (const Example& ex : batch) {
        check_target(ex.target, cfg);
        tok::TokenSequence seq =
            tok::embed(ex.patches, p.patch_kernel, p.patch_bias, p.posemb, p.cls_token);

        ForwardCache cache;
        encode_forward(p, cfg, seq.tokens, true, dropout_rng, cache);
        result.loss += loss(cache.logits, ex.target, cfg.task_kind);

        std::vector<double> dlogits(cfg.num_classes);
        if (cfg.task_kind == TaskKind::SingleLabel) {
            dlogits = softmax(cache.logits);
            for (int j = 0; j < cfg.num_classes; ++j) dlogits[j] -= ex.target[j];
        } else {
            for (int j = 0; j < cfg.num_classes; ++j) {
                const double sig = 1.0 / (1.0 + std::exp(-cache.logits[j]));
                dlogits[j] = (sig - ex.target[j]) / cfg.num_classes;
            }
        }

        Matrix dtokens;
        encode_backward(p, cfg, cache, dlogits, result.grads, dtokens);

        // Embedding backward: CLS row feeds the class token and its
        // positional slot; patch rows feed kernel, bias and grid slots.
        const int d = cfg.embed_dim;
        {
            const double* r0 = dtokens.row(0);
            for (int c = 0; c < d; ++c) {
                result.grads.cls_token[c] += r0[c];
                result.grads.posemb.cls_slot[c] += r0[c];
            }
        }
        const int n = ex.patches.grid_f * ex.patches.grid_t;
        const int cells = ex.patches.patch_h * ex.patches.patch_w;
        for (int k = 0; k < n; ++k) {
            const double* dr = dtokens.row(k + 1);
            double* dpe = result.grads.posemb.grid.row(k);
            for (int c = 0; c < d; ++c) {
                dpe[c] += dr[c];
                result.grads.patch_bias[c] += dr[c];
            }
            const double* patch = ex.patches.patches.row(k);
            for (int cell = 0; cell < cells; ++cell) {
                const double pv = patch[cell];
                if (pv == 0.0) continue;
                double* gk = result.grads.patch_kernel.row(cell);
                for (int c = 0; c < d; ++c) gk[c] += pv * dr[c];
            }
        }
    }

    result.loss *= inv_b;
    for (auto& ref : tensor_refs(result.grads))
        for (auto& v : *ref.data) v *= inv_b;
    return result;
}

void optimizer_step(Parameters& p, const Parameters& grads, AdamState& state, double lr) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    auto prefs = tensor_refs(p);
    auto grefs = tensor_refs(grads);
    if (prefs.size() != grefs.size() || state.m.size() != prefs.size())
        throw std::invalid_argument("optimizer state/gradient shape mismatch");

    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step_count));

    for (std::size_t i = 0; i < prefs.size(); ++i) {
        auto& theta = *prefs[i].data;
        const auto& g = *grefs[i].data;
        auto& m = state.m[i];
        auto& v = state.v[i];
        if (theta.size() != g.size() || m.size() != theta.size())
            throw std::invalid_argument("optimizer tensor size mismatch");
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            const double mhat = m[j] / bc1;
            const double vhat = v[j] / bc2;
            theta[j] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

}  // namespace c2f::model
