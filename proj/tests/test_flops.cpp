#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "c2f/flops.hpp"

using namespace c2f;

namespace {

model::ModelConfig cfg_with(int d, int layers, int patch_w = 16) {
    model::ModelConfig cfg;
    cfg.embed_dim = d;
    cfg.num_layers = layers;
    cfg.num_heads = 2;
    cfg.num_classes = 4;
    cfg.patch = {16, patch_w};
    return cfg;
}

}  // namespace

TEST_CASE("closed form matches hand-evaluated values") {
    // layers*(12 n d^2 + 2 n^2 d) + 2 n cells d, evaluated by hand and
    // cross-checked term by term.
    CHECK(flops::step_flops(129, cfg_with(64, 2)) == 21168384ULL);
    CHECK(flops::step_flops(513, cfg_with(64, 2)) == 134611200ULL);
    CHECK(flops::step_flops(1, cfg_with(8, 1)) == 4880ULL);  // 12d^2 + 2d + 2*256*d
    // Patch-widened embedding (16x64 cells) keeps the full-resolution embed cost.
    CHECK(flops::step_flops(129, cfg_with(64, 2, 64)) == 33849600ULL);
}

TEST_CASE("attention term scales quadratically") {
    const auto cfg = cfg_with(64, 2);
    // Subtracting the linear terms isolates layers*2n^2d, which quarters
    // when n halves.
    auto attn = [&](std::uint64_t n) {
        return flops::step_flops(static_cast<int>(n), cfg) -
               2ULL * (12ULL * n * 64 * 64) - 2ULL * n * 256 * 64;
    };
    for (std::uint64_t n : {4ULL, 16ULL, 128ULL, 512ULL}) CHECK(attn(2 * n) == 4 * attn(n));
}

TEST_CASE("step_flops is superlinear") {
    const auto cfg = cfg_with(64, 2);
    for (int n : {1, 2, 5, 17, 64, 129, 256}) {
        CHECK(flops::step_flops(2 * n, cfg) > 2 * flops::step_flops(n, cfg));
        CHECK(flops::step_flops(n + 1, cfg) > flops::step_flops(n, cfg));
    }
    CHECK_THROWS_AS(flops::step_flops(0, cfg), std::invalid_argument);
}

TEST_CASE("compressed phases cost strictly less per step") {
    const auto cfg = cfg_with(64, 2);
    // Default geometry F=128, T=1024, p=16: n = 513, 257, 129 for C = 1, 2, 4.
    CHECK(flops::step_flops(129, cfg) < flops::step_flops(257, cfg));
    CHECK(flops::step_flops(257, cfg) < flops::step_flops(513, cfg));
}

TEST_CASE("schedule identical to baseline saves nothing") {
    const auto cfg = cfg_with(64, 2);
    auto report = flops::schedule_flops({{"none C=1", 513, 256, 20}}, cfg, 100, 20, 513, 256);
    CHECK(report.savings_percent == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(report.cumulative == report.baseline_cumulative);
}

TEST_CASE("25%/75% pooling schedule reproduces the hand-computed savings") {
    const auto cfg = cfg_with(64, 2);
    // phase1: 5 epochs at n=129; phase2: 15 epochs at n=513; baseline 20 at 513.
    // savings = 100*(1 - (5*f129 + 15*f513)/(20*f513)) = 147712/7011 exactly.
    auto report = flops::schedule_flops(
        {{"avg_pool C=4", 129, 256, 5}, {"none C=1", 513, 256, 15}}, cfg, 100, 20, 513, 256);
    CHECK(std::abs(report.savings_percent - 147712.0 / 7011.0) <= 1e-9);
}

TEST_CASE("phase order does not change the cumulative total") {
    const auto cfg = cfg_with(32, 2);
    auto a = flops::schedule_flops({{"p1", 65, 256, 3}, {"p2", 129, 256, 7}}, cfg, 50, 10, 129,
                                   256);
    auto b = flops::schedule_flops({{"p2", 129, 256, 7}, {"p1", 65, 256, 3}}, cfg, 50, 10, 129,
                                   256);
    CHECK(a.cumulative == b.cumulative);
    CHECK(a.savings_percent == b.savings_percent);
}

TEST_CASE("savings are invariant to rescaling steps_per_epoch") {
    const auto cfg = cfg_with(64, 2);
    const std::vector<flops::PhaseTokens> phases = {{"c4", 129, 256, 5}, {"c1", 513, 256, 15}};
    auto a = flops::schedule_flops(phases, cfg, 1, 20, 513, 256);
    auto b = flops::schedule_flops(phases, cfg, 1000, 20, 513, 256);
    CHECK(a.savings_percent == doctest::Approx(b.savings_percent).epsilon(1e-12));
}

TEST_CASE("training step is charged as 3 forwards") {
    const auto cfg = cfg_with(64, 2);
    auto report = flops::schedule_flops({{"p", 129, 256, 1}}, cfg, 1, 1, 129, 256);
    CHECK(report.phases[0].per_step == 3 * flops::step_flops(129, cfg));
}

TEST_CASE("degenerate inputs are rejected") {
    const auto cfg = cfg_with(64, 2);
    CHECK_THROWS_AS(flops::schedule_flops({}, cfg, 1, 1, 513, 256), std::invalid_argument);
    CHECK_THROWS_AS(flops::schedule_flops({{"p", 0, 256, 1}}, cfg, 1, 1, 513, 256),
                    std::invalid_argument);
}
