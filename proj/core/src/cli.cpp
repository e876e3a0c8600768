#include "c2f/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "c2f/csv.hpp"

namespace c2f::cli {

namespace fs = std::filesystem;

namespace {

RunConfig load_run_config(const std::string& path) {
    const ConfigResult parsed = parse_config(csv::read_file(path));
    if (!parsed.ok()) {
        std::string msg = "invalid configuration " + path + ":";
        for (const auto& e : parsed.errors)
            msg += "\n  line " + std::to_string(e.line) + ": " + e.message;
        throw std::runtime_error(msg);
    }
    return *parsed.config;
}

// C2F_SEED overrides the configured schedule seed.
void apply_seed_override(RunConfig& cfg) {
    const char* env = std::getenv("C2F_SEED");
    if (env == nullptr) return;
    try {
        std::size_t pos = 0;
        const std::uint64_t seed = std::stoull(env, &pos);
        if (pos != std::string(env).size()) throw std::invalid_argument("");
        cfg.schedule.seed = seed;
    } catch (...) {
        throw std::runtime_error("C2F_SEED is not a valid non-negative integer");
    }
}

train::Dataset load_dataset_for(const RunConfig& cfg) {
    if (cfg.manifest_path.empty())
        throw std::runtime_error("configuration has no [data] manifest path");
    train::Dataset data = train::load_dataset(cfg.manifest_path);
    if (data.num_classes != cfg.model.num_classes)
        throw std::runtime_error("manifest classes (" + std::to_string(data.num_classes) +
                                 ") do not match [model] num_classes (" +
                                 std::to_string(cfg.model.num_classes) + ")");
    if (data.framing.target_time_frames != cfg.framing.target_time_frames ||
        data.framing.n_mels != cfg.framing.n_mels)
        throw std::runtime_error("manifest framing does not match [data] geometry");
    const bool wants_multi = cfg.model.task_kind == model::TaskKind::MultiLabel;
    if (data.multi_label != wants_multi)
        throw std::runtime_error("manifest multi_label flag does not match [model] task");
    return data;
}

int cmd_gen_data(const std::string& spec_path, std::uint64_t seed, const std::string& out_dir) {
    const SpecResult parsed = parse_synthetic_spec(csv::read_file(spec_path));
    if (!parsed.ok()) {
        std::cerr << "invalid corpus spec " << spec_path << ":\n";
        for (const auto& e : parsed.errors)
            std::cerr << "  line " << e.line << ": " << e.message << "\n";
        return 1;
    }
    const data::Manifest m = data::generate_corpus(*parsed.spec, seed, out_dir);
    std::size_t n_train = 0, n_eval = 0;
    for (const auto& r : m.records) (r.is_eval ? n_eval : n_train)++;
    std::cout << "wrote " << m.records.size() << " clips (" << n_train << " train, " << n_eval
              << " eval) to " << out_dir << "\n"
              << "manifest: " << (fs::path(out_dir) / "manifest.tsv").string() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg = load_run_config(config_path);
    apply_seed_override(cfg);
    const train::Dataset data = load_dataset_for(cfg);
    fs::create_directories(out_dir);

    train::PhaseObserver obs;
    obs.on_phase_end = [&](int phase_index, const model::Checkpoint& ckpt) {
        model::save_checkpoint(
            (fs::path(out_dir) / ("phase_" + std::to_string(phase_index) + ".ckpt")).string(),
            ckpt);
    };
    train::RunResult result = train::run_schedule(cfg.schedule, cfg.model, data, &obs);

    model::Checkpoint final_ckpt = result.ckpt;
    final_ckpt.has_opt_state = true;
    final_ckpt.opt = result.opt;
    model::save_checkpoint((fs::path(out_dir) / "final.ckpt").string(), final_ckpt);
    train::write_runlog_csv((fs::path(out_dir) / "runlog.csv").string(), result.log);

    const auto& last = result.log.records;
    std::cout << "schedule finished after " << last.size() << " epochs";
    if (!last.empty())
        std::cout << "; final eval metric " << csv::format_double(last.back().eval_metric);
    std::cout << "\nrun log: " << (fs::path(out_dir) / "runlog.csv").string() << "\n";
    return 0;
}

int cmd_compare(const std::string& config_path, const std::string& out_dir) {
    RunConfig cfg = load_run_config(config_path);
    apply_seed_override(cfg);
    const train::Dataset data = load_dataset_for(cfg);
    fs::create_directories(out_dir);

    // Baseline: plain trainer at full resolution, sharing the schedule seed
    // and the final phase's learning rate.
    const double baseline_lr = cfg.schedule.phases.back().lr;
    train::RunResult baseline =
        train::baseline_train(cfg.model, data, cfg.schedule.baseline_epochs, baseline_lr,
                              cfg.schedule.seed, cfg.schedule.batch_size);
    train::RunResult curriculum = train::run_schedule(cfg.schedule, cfg.model, data, nullptr);

    train::write_runlog_csv((fs::path(out_dir) / "baseline_runlog.csv").string(), baseline.log);
    train::write_runlog_csv((fs::path(out_dir) / "schedule_runlog.csv").string(),
                            curriculum.log);
    csv::write_file((fs::path(out_dir) / "compare.csv").string(),
                    compare_csv(baseline.log, curriculum.log));

    std::cout << "baseline final metric "
              << csv::format_double(baseline.log.records.back().eval_metric) << " ("
              << baseline.log.records.back().cumulative_flops << " FLOPs)\n"
              << "curriculum final metric "
              << csv::format_double(curriculum.log.records.back().eval_metric) << " ("
              << curriculum.log.records.back().cumulative_flops << " FLOPs)\n"
              << "comparison: " << (fs::path(out_dir) / "compare.csv").string() << "\n";
    return 0;
}

int cmd_flops(const std::string& config_path) {
    RunConfig cfg = load_run_config(config_path);

    // The report is a pure cost model; it needs the training-set size only
    // for absolute numbers, and ratios are invariant to it. Use the manifest
    // when available, otherwise one step per epoch.
    long long steps_per_epoch = 1;
    if (!cfg.manifest_path.empty()) {
        const data::Manifest m = data::read_manifest(cfg.manifest_path);
        long long n_train = 0;
        for (const auto& r : m.records)
            if (!r.is_eval) ++n_train;
        steps_per_epoch = std::max(1LL, n_train);
    }

    const auto phases = train::flops_phases(cfg.schedule, cfg.model, cfg.framing);
    const int baseline_tokens =
        train::phase_token_count(cfg.framing, cfg.model, compress::Method::None, 1);
    const int baseline_cells = cfg.model.patch.height_bins * cfg.model.patch.width_frames;
    const flops::FlopsReport report =
        flops::schedule_flops(phases, cfg.model, steps_per_epoch, cfg.schedule.baseline_epochs,
                              baseline_tokens, baseline_cells);
    std::cout << flops_report_csv(report);
    return 0;
}

}  // namespace

std::string flops_report_csv(const flops::FlopsReport& report) {
    std::string out = csv::format_row(
        {"phase", "n_tokens", "epochs", "per_step", "cumulative", "savings_percent"});
    for (const auto& ph : report.phases) {
        const double savings =
            100.0 * (1.0 - static_cast<double>(ph.cumulative) /
                               static_cast<double>(report.baseline_cumulative));
        out += csv::format_row({ph.label, std::to_string(ph.n_tokens),
                                std::to_string(ph.epochs), std::to_string(ph.per_step),
                                std::to_string(ph.cumulative), csv::format_double(savings)});
    }
    return out;
}

std::string compare_csv(const train::RunLog& baseline, const train::RunLog& curriculum) {
    std::string out = csv::format_row({"epoch", "baseline_metric", "curriculum_metric",
                                       "baseline_cumulative_flops",
                                       "curriculum_cumulative_flops"});
    const std::size_t rows = std::max(baseline.records.size(), curriculum.records.size());
    for (std::size_t i = 0; i < rows; ++i) {
        std::vector<std::string> fields(5);
        fields[0] = std::to_string(i);
        if (i < baseline.records.size()) {
            fields[1] = csv::format_double(baseline.records[i].eval_metric);
            fields[3] = std::to_string(baseline.records[i].cumulative_flops);
        }
        if (i < curriculum.records.size()) {
            fields[2] = csv::format_double(curriculum.records[i].eval_metric);
            fields[4] = std::to_string(curriculum.records[i].cumulative_flops);
        }
        out += csv::format_row(fields);
    }
    return out;
}

int run_command(const std::vector<std::string>& args) {
    CLI::App app{"coarse-to-fine curriculum training lab for spectrogram transformers"};
    app.require_subcommand(1);

    std::string spec_path, config_path, out_dir;
    std::uint64_t seed = 0;

    auto* gen = app.add_subcommand("gen-data", "generate a synthetic labeled corpus");
    gen->add_option("--spec", spec_path, "corpus spec file")->required();
    gen->add_option("--seed", seed, "generator seed")->required();
    gen->add_option("--out", out_dir, "output directory")->required();

    auto* tr = app.add_subcommand("train", "run a multi-phase schedule");
    tr->add_option("--config", config_path, "run configuration")->required();
    tr->add_option("--out", out_dir, "output directory")->required();

    auto* cmp = app.add_subcommand("compare", "run baseline and schedule with a shared seed");
    cmp->add_option("--config", config_path, "run configuration")->required();
    cmp->add_option("--out", out_dir, "output directory")->required();

    auto* fl = app.add_subcommand("flops", "emit the schedule cost report as CSV");
    fl->add_option("--config", config_path, "run configuration")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) return cmd_gen_data(spec_path, seed, out_dir);
        if (tr->parsed()) return cmd_train(config_path, out_dir);
        if (cmp->parsed()) return cmd_compare(config_path, out_dir);
        if (fl->parsed()) return cmd_flops(config_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

}  // namespace c2f::cli
