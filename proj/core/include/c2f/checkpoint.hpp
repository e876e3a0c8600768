#pragma once

#include <cstdint>
#include <string>

#include "c2f/compress.hpp"
#include "c2f/model.hpp"

namespace c2f::model {

/// Which compression phase produced these weights; the unit of validation
/// when migrating across phases.
struct PhaseProvenance {
    compress::Method method = compress::Method::None;
    int factor = 1;

    bool operator==(const PhaseProvenance&) const = default;
};

/// Everything needed to resume or migrate a training run: config, named
/// parameter tensors, optional optimizer moments, phase provenance, RNG seed.
/// Serialized in the versioned binary layout documented in the README.
struct Checkpoint {
    ModelConfig cfg;
    Parameters params;
    PhaseProvenance phase;
    std::uint64_t seed = 0;
    bool has_opt_state = false;
    AdamState opt;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace c2f::model
