#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include "c2f/cli.hpp"
#include "c2f/csv.hpp"

using namespace c2f;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
    auto dir = fs::temp_directory_path() / ("c2f_cli_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) { csv::write_file(p.string(), text); }

const char* kSpecText = R"(
[corpus]
sample_rate = 16000
duration_s = 0.7
samples_per_class = 5
snr_db = 15
n_mels = 32
target_frames = 64

[class]
kind = tone
freq = 520

[class]
kind = chirp
f0 = 300
f1 = 2800

[class]
kind = am_noise
rate = 7

[class]
kind = am_noise
rate = 28
)";

std::string run_config_text(const fs::path& manifest, std::uint64_t seed) {
    std::ostringstream os;
    os << "[model]\nembed_dim = 16\nnum_layers = 1\nnum_heads = 2\nmlp_ratio = 2\n"
       << "num_classes = 4\npatch_f = 16\npatch_t = 16\n\n"
       << "[data]\nmanifest = " << manifest.string() << "\nn_mels = 32\ntarget_frames = 64\n\n"
       << "[schedule]\nbaseline_epochs = 2\nseed = " << seed << "\nbatch_size = 8\n\n"
       << "[phase]\nmethod = avg_pool\nC = 2\nepochs = 1\nlr = 1e-3\n\n"
       << "[phase]\nmethod = none\nC = 1\nepochs = 1\nlr = 1e-3\n";
    return os.str();
}

struct CoutCapture {
    std::ostringstream out;
    std::streambuf* saved;
    CoutCapture() : saved(std::cout.rdbuf(out.rdbuf())) {}
    ~CoutCapture() { std::cout.rdbuf(saved); }
};

}  // namespace

TEST_CASE("csv quoting round-trips") {
    const std::vector<std::vector<std::string>> rows = {
        {"plain", "with,comma", "with\"quote"},
        {"multi\nline", "", "tabs\tkeep"},
        {"trailing", "fields", "here"},
    };
    std::string text;
    for (const auto& r : rows) text += csv::format_row(r);
    const auto parsed = csv::parse(text);
    REQUIRE(parsed.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(parsed[i] == rows[i]);
}

TEST_CASE("csv doubles round-trip exactly") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g(0.0, 1e6);
    for (int i = 0; i < 200; ++i) {
        const double v = g(rng);
        CHECK(std::strtod(csv::format_double(v).c_str(), nullptr) == v);
    }
}

TEST_CASE("checkpoint round-trip is exact") {
    const auto dir = temp_dir("ckpt");
    model::ModelConfig cfg;
    cfg.embed_dim = 16;
    cfg.num_layers = 2;
    cfg.num_heads = 2;
    cfg.num_classes = 3;
    cfg.patch = {16, 16};
    model::Checkpoint ckpt;
    ckpt.cfg = cfg;
    ckpt.seed = 77;
    ckpt.phase = {compress::Method::MaxPool, 2};
    ckpt.params = model::init_parameters(cfg, {2, 4}, 16, 5);
    ckpt.has_opt_state = true;
    ckpt.opt = model::make_adam_state(ckpt.params);
    ckpt.opt.step_count = 9;
    ckpt.opt.m[0][0] = 0.125;
    ckpt.opt.v[0][0] = 0.5;

    const auto path = (dir / "model.ckpt").string();
    model::save_checkpoint(path, ckpt);
    const auto back = model::load_checkpoint(path);

    CHECK(back.cfg.embed_dim == 16);
    CHECK(back.cfg.num_layers == 2);
    CHECK(back.phase.method == compress::Method::MaxPool);
    CHECK(back.phase.factor == 2);
    CHECK(back.seed == 77);
    REQUIRE(back.has_opt_state);
    CHECK(back.opt.step_count == 9);
    CHECK(back.opt.m[0][0] == 0.125);
    CHECK(back.opt.v[0][0] == 0.5);

    auto ra = model::tensor_refs(ckpt.params);
    auto rb = model::tensor_refs(back.params);
    REQUIRE(ra.size() == rb.size());
    for (std::size_t t = 0; t < ra.size(); ++t) {
        REQUIRE(ra[t].data->size() == rb[t].data->size());
        for (std::size_t j = 0; j < ra[t].data->size(); ++j)
            CHECK((*ra[t].data)[j] == (*rb[t].data)[j]);
    }
}

TEST_CASE("checkpoint corruption is rejected") {
    const auto dir = temp_dir("ckpt_bad");
    const auto path = (dir / "bad.ckpt").string();
    write(path, "definitely not a checkpoint");
    CHECK_THROWS_AS(model::load_checkpoint(path), std::runtime_error);
    CHECK_THROWS_AS(model::load_checkpoint((dir / "missing.ckpt").string()),
                    std::runtime_error);
}

TEST_CASE("gen-data then train then flops then compare") {
    const auto dir = temp_dir("e2e");
    const auto spec_path = dir / "corpus.ini";
    const auto corpus_dir = dir / "corpus";
    write(spec_path, kSpecText);

    {
        CoutCapture cap;
        const int rc = cli::run_command({"gen-data", "--spec", spec_path.string(), "--seed",
                                         "42", "--out", corpus_dir.string()});
        REQUIRE(rc == 0);
    }
    CHECK(fs::exists(corpus_dir / "manifest.tsv"));

    const auto config_path = dir / "run.ini";
    write(config_path, run_config_text(corpus_dir / "manifest.tsv", 7));

    const auto out1 = dir / "run1";
    const auto out2 = dir / "run2";
    {
        CoutCapture cap;
        REQUIRE(cli::run_command({"train", "--config", config_path.string(), "--out",
                                  out1.string()}) == 0);
        REQUIRE(cli::run_command({"train", "--config", config_path.string(), "--out",
                                  out2.string()}) == 0);
    }
    CHECK(fs::exists(out1 / "runlog.csv"));
    CHECK(fs::exists(out1 / "final.ckpt"));
    CHECK(fs::exists(out1 / "phase_0.ckpt"));
    CHECK(fs::exists(out1 / "phase_1.ckpt"));

    // Determinism: identical RunLog bytes for identical config+seed.
    CHECK(csv::read_file((out1 / "runlog.csv").string()) ==
          csv::read_file((out2 / "runlog.csv").string()));

    // The run log is re-parseable by the repo's own reader and field-exact.
    const auto text = csv::read_file((out1 / "runlog.csv").string());
    const auto rows = csv::parse(text);
    REQUIRE(rows.size() == 3);  // header + 2 epochs
    CHECK(rows[0][0] == "phase_index");
    std::string rebuilt;
    for (const auto& r : rows) rebuilt += csv::format_row(r);
    CHECK(rebuilt == text);

    // Final checkpoint reloads.
    const auto ckpt = model::load_checkpoint((out1 / "final.ckpt").string());
    CHECK(ckpt.phase.factor == 1);
    CHECK(ckpt.has_opt_state);

    // flops subcommand emits the cost model's numbers.
    std::string flops_text;
    {
        CoutCapture cap;
        REQUIRE(cli::run_command({"flops", "--config", config_path.string()}) == 0);
        flops_text = cap.out.str();
    }
    const auto flops_rows = csv::parse(flops_text);
    REQUIRE(flops_rows.size() == 3);
    CHECK(flops_rows[0] ==
          std::vector<std::string>{"phase", "n_tokens", "epochs", "per_step", "cumulative",
                                   "savings_percent"});
    // Independent recomputation of the final savings figure.
    model::ModelConfig cfg;
    cfg.embed_dim = 16;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.mlp_ratio = 2;
    cfg.num_classes = 4;
    dsp::FramingParams framing;
    framing.n_mels = 32;
    framing.target_time_frames = 64;
    train::Schedule sched;
    train::PhaseConfig p0, p1;
    p0.method = compress::Method::AvgPool;
    p0.factor = 2;
    p0.epochs = 1;
    p1.method = compress::Method::None;
    p1.factor = 1;
    p1.epochs = 1;
    sched.phases = {p0, p1};
    sched.baseline_epochs = 2;
    const auto report = flops::schedule_flops(train::flops_phases(sched, cfg, framing), cfg, 16,
                                              2, 9, 256);
    CHECK(std::stod(flops_rows[2][5]) == doctest::Approx(report.savings_percent).epsilon(1e-12));

    // compare writes the joined CSV with one row per epoch of the longer run.
    const auto cmp_dir = dir / "cmp";
    {
        CoutCapture cap;
        REQUIRE(cli::run_command({"compare", "--config", config_path.string(), "--out",
                                  cmp_dir.string()}) == 0);
    }
    const auto cmp_rows = csv::parse(csv::read_file((cmp_dir / "compare.csv").string()));
    REQUIRE(cmp_rows.size() == 3);  // header + max(2 baseline, 2 schedule)
    CHECK(cmp_rows[0][0] == "epoch");
    for (std::size_t i = 1; i < cmp_rows.size(); ++i) REQUIRE(cmp_rows[i].size() == 5);
}

TEST_CASE("C2F_SEED overrides the config seed") {
    const auto dir = temp_dir("seed_env");
    const auto spec_path = dir / "corpus.ini";
    const auto corpus_dir = dir / "corpus";
    write(spec_path, kSpecText);
    {
        CoutCapture cap;
        REQUIRE(cli::run_command({"gen-data", "--spec", spec_path.string(), "--seed", "42",
                                  "--out", corpus_dir.string()}) == 0);
    }
    const auto config_path = dir / "run.ini";
    write(config_path, run_config_text(corpus_dir / "manifest.tsv", 7));

    const auto out_a = dir / "a";
    const auto out_b = dir / "b";
    const auto out_c = dir / "c";
    {
        CoutCapture cap;
        REQUIRE(cli::run_command({"train", "--config", config_path.string(), "--out",
                                  out_a.string()}) == 0);
        setenv("C2F_SEED", "12345", 1);
        REQUIRE(cli::run_command({"train", "--config", config_path.string(), "--out",
                                  out_b.string()}) == 0);
        unsetenv("C2F_SEED");
        REQUIRE(cli::run_command({"train", "--config", config_path.string(), "--out",
                                  out_c.string()}) == 0);
    }
    const auto a = csv::read_file((out_a / "runlog.csv").string());
    const auto b = csv::read_file((out_b / "runlog.csv").string());
    const auto c = csv::read_file((out_c / "runlog.csv").string());
    CHECK(a != b);  // different seed, different run
    CHECK(a == c);  // env cleared, config seed again
}

TEST_CASE("failures exit nonzero with messages") {
    const auto dir = temp_dir("fail");
    CHECK(cli::run_command({"train", "--config", (dir / "absent.ini").string(), "--out",
                            (dir / "out").string()}) != 0);
    write(dir / "bad.ini", "[model]\nnum_classes = 4\n");  // no phases
    CHECK(cli::run_command({"train", "--config", (dir / "bad.ini").string(), "--out",
                            (dir / "out").string()}) != 0);
    CHECK(cli::run_command({"no-such-subcommand"}) != 0);
    CHECK(cli::run_command({}) != 0);
}
