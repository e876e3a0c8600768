#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "c2f/model.hpp"

namespace c2f::flops {

/// A training step is charged as 3 forward passes (forward + backward).
inline constexpr std::uint64_t kTrainStepForwardEquivalents = 3;

/// Analytic cost of one forward pass over n_tokens tokens (CLS included):
/// per layer 12*n*d^2 + 2*n^2*d, plus the patch embedding 2*n*cells*d where
/// cells is taken from cfg.patch.
std::uint64_t step_flops(int n_tokens, const model::ModelConfig& cfg);

/// One schedule phase as the cost model sees it. A "step" processes one
/// training sample, so steps_per_epoch below is the training-set size.
struct PhaseTokens {
    std::string label;
    int n_tokens = 0;
    int patch_cells = 0;
    long long epochs = 0;
};

struct PhaseCost {
    std::string label;
    int n_tokens = 0;
    long long epochs = 0;
    std::uint64_t per_step = 0;    // training FLOPs per sample
    std::uint64_t cumulative = 0;  // running total through this phase
};

struct FlopsReport {
    std::vector<PhaseCost> phases;
    std::uint64_t cumulative = 0;
    std::uint64_t baseline_cumulative = 0;
    double savings_percent = 0.0;  // 100 * (1 - cumulative/baseline_cumulative)
};

FlopsReport schedule_flops(const std::vector<PhaseTokens>& phases, const model::ModelConfig& cfg,
                           long long steps_per_epoch, long long baseline_epochs,
                           int baseline_n_tokens, int baseline_patch_cells);

}  // namespace c2f::flops
