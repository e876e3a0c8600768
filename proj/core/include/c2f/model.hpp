#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "c2f/matrix.hpp"
#include "c2f/tokenizer.hpp"

namespace c2f::model {

enum class TaskKind { SingleLabel, MultiLabel };

struct ModelConfig {
    int embed_dim = 64;
    int num_layers = 2;
    int num_heads = 4;
    int mlp_ratio = 4;
    int num_classes = 2;
    TaskKind task_kind = TaskKind::SingleLabel;
    tok::PatchSpec patch;  // base (square) geometry; phases may widen it
    double dropout = 0.0;  // disabled by default so runs are fully deterministic

    int mlp_hidden() const { return embed_dim * mlp_ratio; }
    void validate() const;
};

/// One pre-norm encoder block: LN -> multi-head attention -> residual,
/// LN -> GELU MLP -> residual.
struct LayerParams {
    std::vector<double> ln1_gamma, ln1_beta;
    Matrix w_qkv;  // d x 3d
    std::vector<double> b_qkv;
    Matrix w_out;  // d x d
    std::vector<double> b_out;
    std::vector<double> ln2_gamma, ln2_beta;
    Matrix w_fc1;  // d x hidden
    std::vector<double> b_fc1;
    Matrix w_fc2;  // hidden x d
    std::vector<double> b_fc2;
};

struct Parameters {
    Matrix patch_kernel;             // (patch_h*patch_w) x d
    std::vector<double> patch_bias;  // d
    std::vector<double> cls_token;   // d
    tok::PosEmbedGrid posemb;
    std::vector<LayerParams> layers;
    std::vector<double> norm_gamma, norm_beta;  // final pre-head LayerNorm
    Matrix head_w;  // d x K
    std::vector<double> head_b;
};

/// Stable, named view over every parameter tensor; the traversal order is the
/// canonical one used by the optimizer state and the checkpoint format.
struct TensorRef {
    std::string name;
    std::vector<double>* data;
    std::vector<int> shape;
};
struct ConstTensorRef {
    std::string name;
    const std::vector<double>* data;
    std::vector<int> shape;
};
std::vector<TensorRef> tensor_refs(Parameters& p);
std::vector<ConstTensorRef> tensor_refs(const Parameters& p);

/// Adam moments aligned with tensor_refs(params) order. A fresh state has
/// zeroed moments and step_count 0.
struct AdamState {
    long long step_count = 0;
    std::vector<std::vector<double>> m, v;
};
AdamState make_adam_state(const Parameters& p);

Parameters zeros_like(const Parameters& p);

/// Zero-valued parameter set with every tensor shaped for the given phase
/// geometry. patch_width is the phase patch width in frames.
Parameters allocate_parameters(const ModelConfig& cfg, tok::GridDims grid, int patch_width);

/// Random init (N(0, 0.02^2) weights, zero biases, unit LayerNorm scales) for
/// the given phase geometry.
Parameters init_parameters(const ModelConfig& cfg, tok::GridDims grid, int patch_width,
                           std::uint64_t seed);

/// One labeled training example; target is one-hot for single-label tasks and
/// multi-hot for multi-label tasks.
struct Example {
    tok::PatchGrid patches;
    std::vector<double> target;
};

/// Encoder + CLS head on an already-embedded sequence. Deterministic;
/// dropout is inference-disabled here.
std::vector<double> forward(const Parameters& p, const ModelConfig& cfg,
                            const tok::TokenSequence& seq);

/// Convenience: embed patches with the model's own tokenizer weights, then
/// run forward.
std::vector<double> predict(const Parameters& p, const ModelConfig& cfg,
                            const tok::PatchGrid& patches);

double loss(const std::vector<double>& logits, const std::vector<double>& target, TaskKind kind);

struct GradResult {
    Parameters grads;  // d(mean batch loss)/d(theta)
    double loss = 0.0;
};

/// Exact analytic gradients of the mean batch loss. dropout_rng must be
/// supplied when cfg.dropout > 0; masks are drawn from it deterministically.
GradResult gradients(const Parameters& p, const ModelConfig& cfg,
                     const std::vector<Example>& batch, std::mt19937_64* dropout_rng = nullptr);

/// Adam update (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction.
void optimizer_step(Parameters& p, const Parameters& grads, AdamState& state, double lr);

std::vector<double> softmax(const std::vector<double>& z);

}  // namespace c2f::model
