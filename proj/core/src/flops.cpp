#include "c2f/flops.hpp"

#include <stdexcept>

namespace c2f::flops {

namespace {

std::uint64_t forward_flops(std::uint64_t n, std::uint64_t d, std::uint64_t layers,
                            std::uint64_t patch_cells) {
    const std::uint64_t per_layer = 12 * n * d * d + 2 * n * n * d;
    return layers * per_layer + 2 * n * patch_cells * d;
}

}  // namespace

std::uint64_t step_flops(int n_tokens, const model::ModelConfig& cfg) {
    if (n_tokens < 1) throw std::invalid_argument("n_tokens must be >= 1");
    return forward_flops(static_cast<std::uint64_t>(n_tokens),
                         static_cast<std::uint64_t>(cfg.embed_dim),
                         static_cast<std::uint64_t>(cfg.num_layers),
                         static_cast<std::uint64_t>(cfg.patch.height_bins) *
                             static_cast<std::uint64_t>(cfg.patch.width_frames));
}

FlopsReport schedule_flops(const std::vector<PhaseTokens>& phases, const model::ModelConfig& cfg,
                           long long steps_per_epoch, long long baseline_epochs,
                           int baseline_n_tokens, int baseline_patch_cells) {
    if (phases.empty()) throw std::invalid_argument("empty schedule");
    if (steps_per_epoch <= 0) throw std::invalid_argument("steps_per_epoch must be positive");
    if (baseline_epochs <= 0) throw std::invalid_argument("baseline_epochs must be positive");
    if (baseline_n_tokens < 1 || baseline_patch_cells < 1)
        throw std::invalid_argument("baseline geometry must be positive");

    const std::uint64_t d = static_cast<std::uint64_t>(cfg.embed_dim);
    const std::uint64_t layers = static_cast<std::uint64_t>(cfg.num_layers);

    FlopsReport report;
    std::uint64_t running = 0;
    for (const auto& ph : phases) {
        if (ph.n_tokens < 1 || ph.patch_cells < 1)
            throw std::invalid_argument("phase geometry must be positive");
        if (ph.epochs < 0) throw std::invalid_argument("phase epochs must be >= 0");
        PhaseCost cost;
        cost.label = ph.label;
        cost.n_tokens = ph.n_tokens;
        cost.epochs = ph.epochs;
        cost.per_step = kTrainStepForwardEquivalents *
                        forward_flops(static_cast<std::uint64_t>(ph.n_tokens), d, layers,
                                      static_cast<std::uint64_t>(ph.patch_cells));
        running += cost.per_step * static_cast<std::uint64_t>(steps_per_epoch) *
                   static_cast<std::uint64_t>(ph.epochs);
        cost.cumulative = running;
        report.phases.push_back(cost);
    }
    report.cumulative = running;
    report.baseline_cumulative =
        kTrainStepForwardEquivalents *
        forward_flops(static_cast<std::uint64_t>(baseline_n_tokens), d, layers,
                      static_cast<std::uint64_t>(baseline_patch_cells)) *
        static_cast<std::uint64_t>(steps_per_epoch) * static_cast<std::uint64_t>(baseline_epochs);
    report.savings_percent =
        100.0 * (1.0 - static_cast<double>(report.cumulative) /
                           static_cast<double>(report.baseline_cumulative));
    return report;
}

}  // namespace c2f::flops
