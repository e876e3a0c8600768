#pragma once

#include <string>
#include <vector>

#include "c2f/config.hpp"
#include "c2f/flops.hpp"
#include "c2f/train.hpp"

namespace c2f::cli {

/// Report CSV: columns phase,n_tokens,epochs,per_step,cumulative,
/// savings_percent; savings is running relative to the full baseline, so the
/// last row carries the schedule total.
std::string flops_report_csv(const flops::FlopsReport& report);

/// Joined per-epoch comparison: epoch,baseline_metric,curriculum_metric,
/// baseline_cumulative_flops,curriculum_cumulative_flops; rows out to the
/// longer run, shorter side left empty.
std::string compare_csv(const train::RunLog& baseline, const train::RunLog& curriculum);

/// Entry point behind the c2fast binary: gen-data / train / compare / flops.
/// Returns the process exit status (0 only when every module succeeded).
int run_command(const std::vector<std::string>& args);

}  // namespace c2f::cli
