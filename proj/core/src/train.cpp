#include "c2f/train.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <random>
#include <stdexcept>

#include "c2f/csv.hpp"

namespace c2f::train {

namespace fs = std::filesystem;

namespace {

// Per-epoch RNG stream: schedule seed + phase_index * 10^6 + global epoch.
std::uint64_t epoch_seed(std::uint64_t seed, int phase_index, long long global_epoch) {
    return seed + static_cast<std::uint64_t>(phase_index) * 1000000ULL +
           static_cast<std::uint64_t>(global_epoch);
}

model::ModelConfig phase_model_cfg(const model::ModelConfig& cfg, compress::Method method,
                                   int factor) {
    model::ModelConfig out = cfg;
    out.patch = tok::phase_patch(cfg.patch, method, factor);
    return out;
}

std::vector<double> target_vector(const std::vector<int>& labels, int num_classes) {
    std::vector<double> t(num_classes, 0.0);
    for (int label : labels) {
        if (label < 0 || label >= num_classes)
            throw std::invalid_argument("label out of range");
        t[label] = 1.0;
    }
    return t;
}

double evaluate(const model::Parameters& params, const model::ModelConfig& phase_cfg,
                const std::vector<model::Example>& eval_examples, bool multi_label) {
    const int n = static_cast<int>(eval_examples.size());
    const int k = phase_cfg.num_classes;
    Matrix logits(n, k), targets(n, k);
    std::vector<int> labels(n, -1);
    for (int i = 0; i < n; ++i) {
        const auto out = model::predict(params, phase_cfg, eval_examples[i].patches);
        for (int j = 0; j < k; ++j) {
            logits.at(i, j) = out[j];
            targets.at(i, j) = eval_examples[i].target[j];
            if (eval_examples[i].target[j] == 1.0 && labels[i] < 0) labels[i] = j;
        }
    }
    return multi_label ? mean_average_precision(logits, targets) : top1_accuracy(logits, labels);
}

adapt::PhaseGeometry phase_geometry(const dsp::FramingParams& framing,
                                    const model::ModelConfig& cfg, compress::Method method,
                                    int factor) {
    adapt::PhaseGeometry g;
    g.method = method;
    g.factor = factor;
    g.patch = tok::phase_patch(cfg.patch, method, factor);
    g.grid = tok::phase_grid(framing, cfg.patch, method, factor);
    return g;
}

}  // namespace

std::string PhaseConfig::label() const {
    return compress::method_name(method) + " C=" + std::to_string(factor);
}

void Schedule::validate() const {
    if (phases.empty()) throw std::invalid_argument("schedule needs at least one phase");
    if (baseline_epochs < 1) throw std::invalid_argument("baseline_epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    int prev = 0;
    for (std::size_t i = 0; i < phases.size(); ++i) {
        const auto& ph = phases[i];
        if (ph.factor < 1)
            throw std::invalid_argument("phase " + std::to_string(i) + ": factor must be >= 1");
        if (i > 0 && ph.factor > prev)
            throw std::invalid_argument("phase " + std::to_string(i) +
                                        ": compression factors must be non-increasing");
        if (ph.epochs < 0)
            throw std::invalid_argument("phase " + std::to_string(i) + ": epochs must be >= 0");
        if (ph.lr <= 0)
            throw std::invalid_argument("phase " + std::to_string(i) + ": lr must be positive");
        if (ph.method == compress::Method::None && ph.factor != 1)
            throw std::invalid_argument("phase " + std::to_string(i) +
                                        ": method 'none' requires C=1");
        prev = ph.factor;
    }
    if (phases.back().factor != 1)
        throw std::invalid_argument("final phase must run at original resolution (C=1)");
    if (stop.kind == StopCriterion::Kind::Convergence && stop.patience < 1)
        throw std::invalid_argument("convergence patience must be >= 1");
}

std::string runlog_csv(const RunLog& log) {
    std::string out = csv::format_row(
        {"phase_index", "epoch", "n_tokens", "train_loss", "eval_metric", "cumulative_flops"});
    for (const auto& r : log.records) {
        out += csv::format_row({std::to_string(r.phase_index), std::to_string(r.epoch),
                                std::to_string(r.n_tokens), csv::format_double(r.train_loss),
                                csv::format_double(r.eval_metric),
                                std::to_string(r.cumulative_flops)});
    }
    return out;
}

void write_runlog_csv(const std::string& path, const RunLog& log) {
    csv::write_file(path, runlog_csv(log));
}

Dataset load_dataset(const std::string& manifest_path) {
    const data::Manifest m = data::read_manifest(manifest_path);
    const fs::path base = fs::path(manifest_path).parent_path();

    Dataset d;
    d.framing = m.framing;
    d.mel_mean = m.mel_mean;
    d.mel_std = m.mel_std;
    d.num_classes = m.num_classes;
    d.multi_label = m.multi_label;
    for (const auto& r : m.records) {
        dsp::Waveform w = data::read_wav((base / r.relative_path).string());
        if (w.sample_rate_hz != m.sample_rate_hz)
            throw std::runtime_error("sample rate mismatch for " + r.relative_path);
        if (r.is_eval) {
            d.eval_wavs.push_back(std::move(w));
            d.eval_labels.push_back(r.labels);
        } else {
            d.train_wavs.push_back(std::move(w));
            d.train_labels.push_back(r.labels);
        }
    }
    return d;
}

std::vector<model::Example> compile_examples(const Dataset& data, bool eval_split,
                                             compress::Method method, int factor,
                                             const model::ModelConfig& cfg) {
    const auto& wavs = eval_split ? data.eval_wavs : data.train_wavs;
    const auto& labels = eval_split ? data.eval_labels : data.train_labels;
    const tok::PatchSpec patch = tok::phase_patch(cfg.patch, method, factor);
    const double inv_std = 1.0 / data.mel_std;

    std::vector<model::Example> out;
    out.reserve(wavs.size());
    for (std::size_t i = 0; i < wavs.size(); ++i) {
        dsp::MelSpectrogram mel =
            compress::apply_compression(wavs[i], method, factor, data.framing);
        for (auto& v : mel.bins.data) v = (v - data.mel_mean) * inv_std;
        model::Example ex;
        ex.patches = tok::patchify(mel, patch);
        ex.target = target_vector(labels[i], cfg.num_classes);
        out.push_back(std::move(ex));
    }
    return out;
}

double top1_accuracy(const Matrix& logits, const std::vector<int>& labels) {
    if (logits.rows == 0) throw std::invalid_argument("empty batch");
    if (static_cast<int>(labels.size()) != logits.rows)
        throw std::invalid_argument("labels do not match logits rows");
    int correct = 0;
    for (int i = 0; i < logits.rows; ++i) {
        const double* r = logits.row(i);
        int best = 0;
        for (int j = 1; j < logits.cols; ++j)
            if (r[j] > r[best]) best = j;  // first max wins ties
        if (best == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / logits.rows;
}

double mean_average_precision(const Matrix& scores, const Matrix& targets) {
    if (scores.rows == 0 || !scores.same_shape(targets))
        throw std::invalid_argument("scores/targets shape mismatch");
    double ap_sum = 0.0;
    int classes_with_positives = 0;
    std::vector<int> order(scores.rows);
    for (int k = 0; k < scores.cols; ++k) {
        int positives = 0;
        for (int i = 0; i < scores.rows; ++i)
            if (targets.at(i, k) == 1.0) ++positives;
        if (positives == 0) continue;

        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return scores.at(a, k) > scores.at(b, k); });
        double ap = 0.0;
        int hits = 0;
        for (int rank = 0; rank < scores.rows; ++rank) {
            if (targets.at(order[rank], k) == 1.0) {
                ++hits;
                ap += static_cast<double>(hits) / (rank + 1);
            }
        }
        ap_sum += ap / positives;
        ++classes_with_positives;
    }
    if (classes_with_positives == 0)
        throw std::invalid_argument("no positive targets in any class");
    return ap_sum / classes_with_positives;
}

std::vector<RunRecord> run_phase(model::Checkpoint& ckpt, model::AdamState& opt,
                                 const PhaseConfig& phase, int phase_index,
                                 const Schedule& sched, const Dataset& data,
                                 std::uint64_t& cumulative_flops, long long& global_epoch,
                                 const StopCriterion* stop, const PhaseObserver* obs) {
    if (data.train_wavs.empty() || data.eval_wavs.empty())
        throw std::invalid_argument("dataset must have non-empty train and eval splits");
    if (ckpt.phase.method != phase.method || ckpt.phase.factor != phase.factor)
        throw std::invalid_argument("checkpoint provenance does not match phase");

    const model::ModelConfig phase_cfg = phase_model_cfg(ckpt.cfg, phase.method, phase.factor);
    const tok::GridDims grid =
        tok::phase_grid(data.framing, ckpt.cfg.patch, phase.method, phase.factor);
    if (ckpt.params.posemb.grid_f != grid.f || ckpt.params.posemb.grid_t != grid.t)
        throw std::invalid_argument("checkpoint grid does not match phase geometry");
    if (ckpt.params.patch_kernel.rows !=
        phase_cfg.patch.height_bins * phase_cfg.patch.width_frames)
        throw std::invalid_argument("checkpoint kernel does not match phase geometry");

    // compile_examples widens the patch itself, so it gets the base config.
    const auto train_set = compile_examples(data, false, phase.method, phase.factor, ckpt.cfg);
    const auto eval_set = compile_examples(data, true, phase.method, phase.factor, ckpt.cfg);
    const int n_train = static_cast<int>(train_set.size());
    const int n_tokens = grid.count() + 1;
    const std::uint64_t flops_per_sample =
        flops::kTrainStepForwardEquivalents * flops::step_flops(n_tokens, phase_cfg);

    std::vector<RunRecord> slice;
    double best_metric = -1.0;
    long long epochs_since_best = 0;

    std::vector<int> indices(n_train);
    for (long long e = 0; e < phase.epochs; ++e) {
        std::mt19937_64 rng(epoch_seed(sched.seed, phase_index, global_epoch));
        std::iota(indices.begin(), indices.end(), 0);
        std::shuffle(indices.begin(), indices.end(), rng);

        double loss_sum = 0.0;
        for (int start = 0; start < n_train; start += sched.batch_size) {
            const int end = std::min(start + sched.batch_size, n_train);
            std::vector<model::Example> batch;
            batch.reserve(end - start);
            for (int i = start; i < end; ++i) batch.push_back(train_set[indices[i]]);
            auto res = model::gradients(ckpt.params, phase_cfg, batch,
                                        phase_cfg.dropout > 0.0 ? &rng : nullptr);
            model::optimizer_step(ckpt.params, res.grads, opt, phase.lr);
            loss_sum += res.loss * (end - start);
        }

        RunRecord rec;
        rec.phase_index = phase_index;
        rec.epoch = global_epoch;
        rec.n_tokens = n_tokens;
        rec.train_loss = loss_sum / n_train;
        rec.eval_metric = evaluate(ckpt.params, phase_cfg, eval_set, data.multi_label);
        cumulative_flops += flops_per_sample * static_cast<std::uint64_t>(n_train);
        rec.cumulative_flops = cumulative_flops;
        slice.push_back(rec);
        if (obs && obs->on_epoch) obs->on_epoch(rec);
        ++global_epoch;

        if (stop != nullptr) {
            if (stop->kind == StopCriterion::Kind::SurpassBaseline &&
                rec.eval_metric >= stop->target_metric)
                break;
            if (stop->kind == StopCriterion::Kind::Convergence) {
                if (rec.eval_metric > best_metric) {
                    best_metric = rec.eval_metric;
                    epochs_since_best = 0;
                } else if (++epochs_since_best >= stop->patience) {
                    break;
                }
            }
        }
    }
    return slice;
}

RunResult run_schedule(const Schedule& sched, const model::ModelConfig& cfg, const Dataset& data,
                       const PhaseObserver* obs) {
    sched.validate();
    cfg.validate();

    RunResult result;
    const auto& first = sched.phases.front();
    const adapt::PhaseGeometry geo0 = phase_geometry(data.framing, cfg, first.method, first.factor);
    result.ckpt.cfg = cfg;
    result.ckpt.seed = sched.seed;
    result.ckpt.phase = {first.method, first.factor};
    result.ckpt.params =
        model::init_parameters(cfg, geo0.grid, geo0.patch.width_frames, sched.seed);
    result.opt = model::make_adam_state(result.ckpt.params);

    std::uint64_t cumulative_flops = 0;
    long long global_epoch = 0;

    for (std::size_t i = 0; i < sched.phases.size(); ++i) {
        const PhaseConfig& phase = sched.phases[i];
        if (i > 0) {
            const PhaseConfig& prev = sched.phases[i - 1];
            adapt::PhaseTransition trans;
            trans.from = phase_geometry(data.framing, cfg, prev.method, prev.factor);
            trans.to = phase_geometry(data.framing, cfg, phase.method, phase.factor);
            trans.resize = phase.resize;
            result.ckpt = adapt::migrate(result.ckpt, trans);
            result.opt = model::make_adam_state(result.ckpt.params);  // optimizer reset
        }
        if (obs && obs->on_phase_start) obs->on_phase_start(static_cast<int>(i), result.ckpt, result.opt);

        const bool is_final = (i + 1 == sched.phases.size());
        auto slice = run_phase(result.ckpt, result.opt, phase, static_cast<int>(i), sched, data,
                               cumulative_flops, global_epoch, is_final ? &sched.stop : nullptr,
                               obs);
        result.log.records.insert(result.log.records.end(), slice.begin(), slice.end());
        if (obs && obs->on_phase_end) obs->on_phase_end(static_cast<int>(i), result.ckpt);
    }
    return result;
}

RunResult baseline_train(const model::ModelConfig& cfg, const Dataset& data, long long epochs,
                         double lr, std::uint64_t seed, int batch_size) {
    cfg.validate();
    if (epochs < 1) throw std::invalid_argument("baseline epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (data.train_wavs.empty() || data.eval_wavs.empty())
        throw std::invalid_argument("dataset must have non-empty train and eval splits");

    RunResult result;
    const tok::GridDims grid =
        tok::phase_grid(data.framing, cfg.patch, compress::Method::None, 1);
    result.ckpt.cfg = cfg;
    result.ckpt.seed = seed;
    result.ckpt.phase = {compress::Method::None, 1};
    result.ckpt.params = model::init_parameters(cfg, grid, cfg.patch.width_frames, seed);
    result.opt = model::make_adam_state(result.ckpt.params);

    const auto train_set = compile_examples(data, false, compress::Method::None, 1, cfg);
    const auto eval_set = compile_examples(data, true, compress::Method::None, 1, cfg);
    const int n_train = static_cast<int>(train_set.size());
    const int n_tokens = grid.count() + 1;
    const std::uint64_t flops_per_sample =
        flops::kTrainStepForwardEquivalents * flops::step_flops(n_tokens, cfg);

    std::uint64_t cumulative_flops = 0;
    std::vector<int> indices(n_train);
    for (long long e = 0; e < epochs; ++e) {
        std::mt19937_64 rng(epoch_seed(seed, 0, e));
        std::iota(indices.begin(), indices.end(), 0);
        std::shuffle(indices.begin(), indices.end(), rng);

        double loss_sum = 0.0;
        for (int start = 0; start < n_train; start += batch_size) {
            const int end = std::min(start + batch_size, n_train);
            std::vector<model::Example> batch;
            batch.reserve(end - start);
            for (int i = start; i < end; ++i) batch.push_back(train_set[indices[i]]);
            auto res = model::gradients(result.ckpt.params, cfg, batch,
                                        cfg.dropout > 0.0 ? &rng : nullptr);
            model::optimizer_step(result.ckpt.params, res.grads, result.opt, lr);
            loss_sum += res.loss * (end - start);
        }

        RunRecord rec;
        rec.phase_index = 0;
        rec.epoch = e;
        rec.n_tokens = n_tokens;
        rec.train_loss = loss_sum / n_train;
        rec.eval_metric = evaluate(result.ckpt.params, cfg, eval_set, data.multi_label);
        cumulative_flops += flops_per_sample * static_cast<std::uint64_t>(n_train);
        rec.cumulative_flops = cumulative_flops;
        result.log.records.push_back(rec);
    }
    return result;
}

std::vector<flops::PhaseTokens> flops_phases(const Schedule& sched,
                                             const model::ModelConfig& cfg,
                                             const dsp::FramingParams& framing) {
    std::vector<flops::PhaseTokens> out;
    for (const auto& ph : sched.phases) {
        const tok::PatchSpec patch = tok::phase_patch(cfg.patch, ph.method, ph.factor);
        flops::PhaseTokens pt;
        pt.label = ph.label();
        pt.n_tokens = tok::phase_grid(framing, cfg.patch, ph.method, ph.factor).count() + 1;
        pt.patch_cells = patch.height_bins * patch.width_frames;
        pt.epochs = ph.epochs;
        out.push_back(pt);
    }
    return out;
}

int phase_token_count(const dsp::FramingParams& framing, const model::ModelConfig& cfg,
                      compress::Method method, int factor) {
    return tok::phase_grid(framing, cfg.patch, method, factor).count() + 1;
}

}  // namespace c2f::train
