#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "c2f/adapt.hpp"
#include "c2f/checkpoint.hpp"
#include "c2f/compress.hpp"
#include "c2f/data.hpp"
#include "c2f/flops.hpp"
#include "c2f/model.hpp"

namespace c2f::train {

struct PhaseConfig {
    compress::Method method = compress::Method::None;
    int factor = 1;
    long long epochs = 0;
    double lr = 1e-3;
    adapt::ResizeMethod resize = adapt::ResizeMethod::Bilinear;

    std::string label() const;
};

struct StopCriterion {
    enum class Kind { FixedEpochs, SurpassBaseline, Convergence };
    Kind kind = Kind::FixedEpochs;
    double target_metric = 0.0;  // SurpassBaseline
    long long patience = 1;      // Convergence
};

/// Ordered multi-phase curriculum. Compression factors never increase across
/// phases; the final phase runs at original resolution (C = 1).
struct Schedule {
    std::vector<PhaseConfig> phases;
    long long baseline_epochs = 0;
    StopCriterion stop;
    std::uint64_t seed = 0;
    int batch_size = 16;

    void validate() const;
};

struct RunRecord {
    int phase_index = 0;
    long long epoch = 0;  // global epoch index across the schedule
    int n_tokens = 0;
    double train_loss = 0.0;
    double eval_metric = 0.0;
    std::uint64_t cumulative_flops = 0;
};

struct RunLog {
    std::vector<RunRecord> records;
};

/// CSV with columns phase_index,epoch,n_tokens,train_loss,eval_metric,
/// cumulative_flops (one row per epoch).
std::string runlog_csv(const RunLog& log);
void write_runlog_csv(const std::string& path, const RunLog& log);

/// In-memory corpus: raw waveforms so every phase can re-derive its own
/// compressed view (Fshift needs the waveform, not the mel).
struct Dataset {
    std::vector<dsp::Waveform> train_wavs, eval_wavs;
    std::vector<std::vector<int>> train_labels, eval_labels;
    dsp::FramingParams framing;
    double mel_mean = 0.0;
    double mel_std = 1.0;
    int num_classes = 0;
    bool multi_label = false;
};

/// Reads the manifest plus every referenced WAV (paths relative to the
/// manifest's directory).
Dataset load_dataset(const std::string& manifest_path);

/// Compress + normalize + patchify one split for a phase. cfg carries the
/// base (square) patch; Patch-method widening happens here.
std::vector<model::Example> compile_examples(const Dataset& data, bool eval_split,
                                             compress::Method method, int factor,
                                             const model::ModelConfig& cfg);

/// Fraction of rows whose first arg-max logit equals the label; ties resolve
/// to the lowest class index.
double top1_accuracy(const Matrix& logits, const std::vector<int>& labels);

/// Macro-averaged AP: per class, mean precision at every positive in
/// descending-score order (stable on ties); classes without positives are
/// excluded. Throws when no class has a positive.
double mean_average_precision(const Matrix& scores, const Matrix& targets);

struct PhaseObserver {
    std::function<void(int phase_index, const model::Checkpoint&, const model::AdamState&)>
        on_phase_start;
    std::function<void(const RunRecord&)> on_epoch;
    std::function<void(int phase_index, const model::Checkpoint&)> on_phase_end;
};

/// Runs one phase of seeded minibatch training in place, appending one log
/// record per epoch. stop (optional) terminates the phase early.
std::vector<RunRecord> run_phase(model::Checkpoint& ckpt, model::AdamState& opt,
                                 const PhaseConfig& phase, int phase_index,
                                 const Schedule& sched, const Dataset& data,
                                 std::uint64_t& cumulative_flops, long long& global_epoch,
                                 const StopCriterion* stop = nullptr,
                                 const PhaseObserver* obs = nullptr);

struct RunResult {
    model::Checkpoint ckpt;
    model::AdamState opt;
    RunLog log;
};

/// Executes a full schedule: migrates weights at every phase boundary, resets
/// the optimizer and learning rate, and applies the stop criterion to the
/// final phase only.
RunResult run_schedule(const Schedule& sched, const model::ModelConfig& cfg, const Dataset& data,
                       const PhaseObserver* obs = nullptr);

/// Plain single-resolution reference trainer (the comparison baseline). Uses
/// the same seeding discipline as a single-phase schedule.
RunResult baseline_train(const model::ModelConfig& cfg, const Dataset& data, long long epochs,
                         double lr, std::uint64_t seed, int batch_size);

/// Cost-model view of a schedule for flops::schedule_flops.
std::vector<flops::PhaseTokens> flops_phases(const Schedule& sched,
                                             const model::ModelConfig& cfg,
                                             const dsp::FramingParams& framing);

/// Token count (CLS included) for one phase of the given geometry.
int phase_token_count(const dsp::FramingParams& framing, const model::ModelConfig& cfg,
                      compress::Method method, int factor);

}  // namespace c2f::train
