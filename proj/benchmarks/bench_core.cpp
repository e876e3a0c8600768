#include <benchmark/benchmark.h>

#include <cmath>
#include <numbers>
#include <random>

#include "c2f/adapt.hpp"
#include "c2f/compress.hpp"
#include "c2f/dsp.hpp"
#include "c2f/model.hpp"
#include "c2f/tokenizer.hpp"

namespace {

using namespace c2f;

dsp::Waveform make_sine(double seconds) {
    dsp::Waveform w;
    w.sample_rate_hz = 16000;
    const auto n = static_cast<std::size_t>(seconds * 16000);
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        w.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * 700.0 * i / 16000.0);
    return w;
}

void BM_LogMel(benchmark::State& state) {
    const auto w = make_sine(1.3);
    dsp::FramingParams f;
    f.target_time_frames = 128;
    for (auto _ : state) {
        auto mel = dsp::log_mel(w, f);
        benchmark::DoNotOptimize(mel.bins.data.data());
    }
}
BENCHMARK(BM_LogMel);

void BM_AvgPool(benchmark::State& state) {
    dsp::MelSpectrogram m;
    m.bins = Matrix(128, 1024);
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    for (auto& v : m.bins.data) v = g(rng);
    m.framing.target_time_frames = 1024;
    const int factor = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto pooled = compress::avg_pool_time(m, factor);
        benchmark::DoNotOptimize(pooled.bins.data.data());
    }
}
BENCHMARK(BM_AvgPool)->Arg(2)->Arg(4);

model::ModelConfig bench_cfg() {
    model::ModelConfig cfg;
    cfg.embed_dim = 64;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.num_classes = 4;
    cfg.patch = {16, 16};
    return cfg;
}

tok::PatchGrid bench_patches(tok::GridDims grid, std::mt19937_64& rng) {
    tok::PatchGrid p;
    p.grid_f = grid.f;
    p.grid_t = grid.t;
    p.patch_h = 16;
    p.patch_w = 16;
    p.patches = Matrix(grid.count(), 256);
    std::normal_distribution<double> g;
    for (auto& v : p.patches.data) v = g(rng);
    return p;
}

void BM_Forward(benchmark::State& state) {
    const auto cfg = bench_cfg();
    const tok::GridDims grid{8, static_cast<int>(state.range(0))};
    const auto params = model::init_parameters(cfg, grid, 16, 3);
    std::mt19937_64 rng(4);
    const auto patches = bench_patches(grid, rng);
    for (auto _ : state) {
        auto logits = model::predict(params, cfg, patches);
        benchmark::DoNotOptimize(logits.data());
    }
    state.SetLabel(std::to_string(grid.count() + 1) + " tokens");
}
BENCHMARK(BM_Forward)->Arg(4)->Arg(8);

void BM_Gradients(benchmark::State& state) {
    const auto cfg = bench_cfg();
    const tok::GridDims grid{8, static_cast<int>(state.range(0))};
    const auto params = model::init_parameters(cfg, grid, 16, 3);
    std::mt19937_64 rng(4);
    std::vector<model::Example> batch(1);
    batch[0].patches = bench_patches(grid, rng);
    batch[0].target = {1, 0, 0, 0};
    for (auto _ : state) {
        auto res = model::gradients(params, cfg, batch);
        benchmark::DoNotOptimize(res.loss);
    }
}
BENCHMARK(BM_Gradients)->Arg(4)->Arg(8);

void BM_PiResize(benchmark::State& state) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    Matrix kernel(16 * 64, 64);
    for (auto& v : kernel.data) v = g(rng);
    for (auto _ : state) {
        auto out = adapt::pi_resize(kernel, 16, 16);
        benchmark::DoNotOptimize(out.data.data());
    }
}
BENCHMARK(BM_PiResize);

}  // namespace

BENCHMARK_MAIN();
