#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "c2f/model.hpp"
#include "oracles.hpp"

using namespace c2f;

namespace {

model::ModelConfig tiny_cfg(int patch_w = 16, model::TaskKind task = model::TaskKind::SingleLabel) {
    model::ModelConfig cfg;
    cfg.embed_dim = 8;
    cfg.num_layers = 1;
    cfg.num_heads = 2;
    cfg.mlp_ratio = 2;
    cfg.num_classes = 3;
    cfg.task_kind = task;
    cfg.patch = {16, patch_w};
    return cfg;
}

tok::PatchGrid random_patches(tok::GridDims grid, int patch_h, int patch_w, std::mt19937_64& rng,
                              double scale = 1.0) {
    tok::PatchGrid p;
    p.grid_f = grid.f;
    p.grid_t = grid.t;
    p.patch_h = patch_h;
    p.patch_w = patch_w;
    p.patches = Matrix(grid.count(), patch_h * patch_w);
    std::normal_distribution<double> g(0.0, scale);
    for (auto& v : p.patches.data) v = g(rng);
    return p;
}

std::vector<model::Example> random_batch(const model::ModelConfig& cfg, tok::GridDims grid,
                                         int n, std::mt19937_64& rng, double scale = 1.0) {
    std::vector<model::Example> batch;
    std::uniform_int_distribution<int> cls(0, cfg.num_classes - 1);
    std::bernoulli_distribution coin(0.5);
    for (int i = 0; i < n; ++i) {
        model::Example ex;
        ex.patches =
            random_patches(grid, cfg.patch.height_bins, cfg.patch.width_frames, rng, scale);
        ex.target.assign(cfg.num_classes, 0.0);
        if (cfg.task_kind == model::TaskKind::SingleLabel) {
            ex.target[cls(rng)] = 1.0;
        } else {
            for (auto& t : ex.target) t = coin(rng) ? 1.0 : 0.0;
            ex.target[cls(rng)] = 1.0;  // at least one positive
        }
        batch.push_back(std::move(ex));
    }
    return batch;
}

// Parameter point for derivative checks: O(1) activations keep the LayerNorm
// curvature mild, so the h^2 truncation of the finite-difference oracle stays
// far below the 1e-4 budget at h=1e-3.
model::Parameters rich_init(const model::ModelConfig& cfg, tok::GridDims grid, int patch_w,
                            std::uint64_t seed) {
    auto p = model::init_parameters(cfg, grid, patch_w, seed);
    std::mt19937_64 rng(seed ^ 0xabcdefULL);
    std::normal_distribution<double> g(0.0, 0.3);
    for (auto& ref : model::tensor_refs(p)) {
        const bool is_gamma = ref.name.find("gamma") != std::string::npos;
        for (auto& v : *ref.data) v = is_gamma ? 1.0 + 0.1 * g(rng) : g(rng);
    }
    return p;
}

bool grads_match(const model::Parameters& analytic, const model::Parameters& numeric,
                 double tol) {
    auto arefs = model::tensor_refs(analytic);
    auto nrefs = model::tensor_refs(numeric);
    bool ok = true;
    for (std::size_t t = 0; t < arefs.size(); ++t) {
        for (std::size_t j = 0; j < arefs[t].data->size(); ++j) {
            const double a = (*arefs[t].data)[j];
            const double n = (*nrefs[t].data)[j];
            const double scale = std::max({1.0, std::abs(a), std::abs(n)});
            if (std::abs(a - n) > tol * scale) {
                MESSAGE("mismatch in ", arefs[t].name, "[", j, "]: analytic ", a, " numeric ", n);
                ok = false;
            }
        }
    }
    return ok;
}

}  // namespace

TEST_CASE("zero network forwards the head bias") {
    auto cfg = tiny_cfg();
    tok::GridDims grid{2, 4};
    auto p = model::allocate_parameters(cfg, grid, 16);
    p.head_b = {0.3, -1.2, 4.0};
    std::mt19937_64 rng(3);
    auto patches = random_patches(grid, 16, 16, rng);
    const auto logits = model::predict(p, cfg, patches);
    CHECK(logits[0] == doctest::Approx(0.3));
    CHECK(logits[1] == doctest::Approx(-1.2));
    CHECK(logits[2] == doctest::Approx(4.0));
}

TEST_CASE("softmax of single-label logits sums to one") {
    auto cfg = tiny_cfg();
    tok::GridDims grid{2, 4};
    auto p = model::init_parameters(cfg, grid, 16, 99);
    std::mt19937_64 rng(4);
    auto logits = model::predict(p, cfg, random_patches(grid, 16, 16, rng));
    double s = 0.0;
    for (double v : model::softmax(logits)) s += v;
    CHECK(std::abs(s - 1.0) < 1e-6);
}

TEST_CASE("forward is deterministic") {
    auto cfg = tiny_cfg();
    tok::GridDims grid{2, 4};
    auto p = model::init_parameters(cfg, grid, 16, 1);
    std::mt19937_64 rng(5);
    auto patches = random_patches(grid, 16, 16, rng);
    auto a = model::predict(p, cfg, patches);
    auto b = model::predict(p, cfg, patches);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("swapping tokens together with their positional slots is a no-op") {
    auto cfg = tiny_cfg();
    tok::GridDims grid{2, 4};
    auto p = model::init_parameters(cfg, grid, 16, 7);
    std::mt19937_64 rng(8);
    auto patches = random_patches(grid, 16, 16, rng);
    auto seq = tok::embed(patches, p.patch_kernel, p.patch_bias, p.posemb, p.cls_token);
    const auto base = model::forward(p, cfg, seq);

    // Swap two embedded non-CLS rows (token + its positional slot together).
    for (int c = 0; c < cfg.embed_dim; ++c)
        std::swap(seq.tokens.at(2, c), seq.tokens.at(5, c));
    const auto swapped = model::forward(p, cfg, seq);
    for (std::size_t i = 0; i < base.size(); ++i)
        CHECK(swapped[i] == doctest::Approx(base[i]).epsilon(1e-9));
}

TEST_CASE("loss worked examples") {
    SUBCASE("uniform logits, K=4") {
        CHECK(model::loss({1.0, 1.0, 1.0, 1.0}, {0, 1, 0, 0}, model::TaskKind::SingleLabel) ==
              doctest::Approx(std::log(4.0)).epsilon(1e-12));
    }
    SUBCASE("saturated correct class") {
        CHECK(model::loss({1000.0, 0.0, 0.0}, {1, 0, 0}, model::TaskKind::SingleLabel) < 1e-3);
    }
    SUBCASE("multi-label at zero logits") {
        CHECK(model::loss({0.0, 0.0}, {1, 1}, model::TaskKind::MultiLabel) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("invalid encodings rejected") {
        CHECK_THROWS_AS(model::loss({0, 0}, {1, 1}, model::TaskKind::SingleLabel),
                        std::invalid_argument);
        CHECK_THROWS_AS(model::loss({0, 0}, {0.5, 0}, model::TaskKind::MultiLabel),
                        std::invalid_argument);
    }
}

TEST_CASE("zero-input head-bias gradient is softmax(b) - onehot(y)") {
    auto cfg = tiny_cfg();
    tok::GridDims grid{2, 4};
    auto p = model::allocate_parameters(cfg, grid, 16);
    p.head_b = {0.7, -0.1, 0.4};

    model::Example ex;
    ex.patches.grid_f = 2;
    ex.patches.grid_t = 4;
    ex.patches.patch_h = 16;
    ex.patches.patch_w = 16;
    ex.patches.patches = Matrix(8, 256);  // zeros
    ex.target = {0.0, 1.0, 0.0};

    const auto res = model::gradients(p, cfg, {ex});
    const auto want = model::softmax(p.head_b);
    CHECK(res.grads.head_b[0] == doctest::Approx(want[0]).epsilon(1e-12));
    CHECK(res.grads.head_b[1] == doctest::Approx(want[1] - 1.0).epsilon(1e-12));
    CHECK(res.grads.head_b[2] == doctest::Approx(want[2]).epsilon(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
    // Every parameter group, both patch geometries, both task kinds.
    for (int patch_w : {16, 32}) {
        for (auto task : {model::TaskKind::SingleLabel, model::TaskKind::MultiLabel}) {
            CAPTURE(patch_w);
            auto cfg = tiny_cfg(patch_w, task);
            const tok::GridDims grid{2, 64 / patch_w / 2};  // keeps n small
            auto p = rich_init(cfg, grid, patch_w, 42);
            std::mt19937_64 rng(43);
            const auto batch = random_batch(cfg, grid, 2, rng, 0.5);

            const auto analytic = model::gradients(p, cfg, batch);
            auto loss_at = [&](const model::Parameters& q) {
                double total = 0.0;
                for (const auto& ex : batch)
                    total += model::loss(model::predict(q, cfg, ex.patches), ex.target,
                                         cfg.task_kind);
                return total / batch.size();
            };
            const auto numeric = oracle::numeric_gradients(loss_at, p, 1e-3);
            CHECK(grads_match(analytic.grads, numeric, 1e-4));
        }
    }
}

TEST_CASE("gradients with dropout match finite differences under a fixed mask stream") {
    auto cfg = tiny_cfg();
    cfg.dropout = 0.5;
    const tok::GridDims grid{2, 2};
    auto p = rich_init(cfg, grid, 16, 11);
    std::mt19937_64 rng(12);
    const auto batch = random_batch(cfg, grid, 2, rng, 0.5);

    std::mt19937_64 grad_rng(777);
    const auto analytic = model::gradients(p, cfg, batch, &grad_rng);
    auto loss_at = [&](const model::Parameters& q) {
        std::mt19937_64 r(777);  // same mask stream every evaluation
        return model::gradients(q, cfg, batch, &r).loss;
    };
    const auto numeric = oracle::numeric_gradients(loss_at, p, 1e-3);
    CHECK(grads_match(analytic.grads, numeric, 1e-4));

    // Dropout must be seed-deterministic and actually do something.
    std::mt19937_64 r1(5), r2(5), r3(6);
    const double l1 = model::gradients(p, cfg, batch, &r1).loss;
    const double l2 = model::gradients(p, cfg, batch, &r2).loss;
    const double l3 = model::gradients(p, cfg, batch, &r3).loss;
    CHECK(l1 == l2);
    CHECK(l1 != l3);
    CHECK_THROWS_AS(model::gradients(p, cfg, batch, nullptr), std::invalid_argument);
}

TEST_CASE("duplicating a sample leaves mean gradients unchanged") {
    auto cfg = tiny_cfg();
    tok::GridDims grid{2, 4};
    auto p = model::init_parameters(cfg, grid, 16, 21);
    std::mt19937_64 rng(22);
    auto batch = random_batch(cfg, grid, 1, rng);
    const auto once = model::gradients(p, cfg, batch);
    batch.push_back(batch[0]);
    const auto twice = model::gradients(p, cfg, batch);
    auto r1 = model::tensor_refs(once.grads);
    auto r2 = model::tensor_refs(twice.grads);
    // Accumulation order differs between the two batch sizes, so equality is
    // up to rounding, not bitwise.
    for (std::size_t t = 0; t < r1.size(); ++t)
        for (std::size_t j = 0; j < r1[t].data->size(); ++j) {
            const double a = (*r1[t].data)[j], b = (*r2[t].data)[j];
            CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
        }
}

TEST_CASE("batch loss is the mean of per-sample losses") {
    auto cfg = tiny_cfg();
    tok::GridDims grid{2, 4};
    auto p = model::init_parameters(cfg, grid, 16, 31);
    std::mt19937_64 rng(32);
    const auto batch = random_batch(cfg, grid, 3, rng);
    const auto res = model::gradients(p, cfg, batch);
    double manual = 0.0;
    for (const auto& ex : batch)
        manual += model::loss(model::predict(p, cfg, ex.patches), ex.target, cfg.task_kind);
    CHECK(res.loss == doctest::Approx(manual / 3.0).epsilon(1e-12));
}

TEST_CASE("adam worked example and determinism") {
    auto cfg = tiny_cfg();
    tok::GridDims grid{2, 4};
    auto p = model::allocate_parameters(cfg, grid, 16);
    p.head_b[0] = 1.0;
    auto grads = model::zeros_like(p);
    grads.head_b[0] = 1.0;

    SUBCASE("first bias-corrected step of size lr") {
        auto state = model::make_adam_state(p);
        model::optimizer_step(p, grads, state, 0.1);
        CHECK(std::abs(p.head_b[0] - 0.9) < 1e-6);
        CHECK(state.step_count == 1);
    }
    SUBCASE("zero gradient leaves parameters unchanged") {
        auto state = model::make_adam_state(p);
        auto before = p;
        model::optimizer_step(p, model::zeros_like(p), state, 0.1);
        auto ra = model::tensor_refs(before);
        auto rb = model::tensor_refs(p);
        for (std::size_t t = 0; t < ra.size(); ++t)
            for (std::size_t j = 0; j < ra[t].data->size(); ++j)
                CHECK((*ra[t].data)[j] == (*rb[t].data)[j]);
    }
    SUBCASE("identical steps from identical states are bitwise identical") {
        auto p2 = p;
        auto s1 = model::make_adam_state(p);
        auto s2 = model::make_adam_state(p2);
        model::optimizer_step(p, grads, s1, 0.01);
        model::optimizer_step(p2, grads, s2, 0.01);
        auto ra = model::tensor_refs(p);
        auto rb = model::tensor_refs(p2);
        for (std::size_t t = 0; t < ra.size(); ++t)
            for (std::size_t j = 0; j < ra[t].data->size(); ++j)
                CHECK((*ra[t].data)[j] == (*rb[t].data)[j]);
    }
}

TEST_CASE("200 optimizer steps overfit one fixed batch") {
    model::ModelConfig cfg;
    cfg.embed_dim = 64;
    cfg.num_layers = 2;
    cfg.num_heads = 4;
    cfg.num_classes = 4;
    cfg.patch = {16, 16};
    const tok::GridDims grid{2, 4};
    auto p = model::init_parameters(cfg, grid, 16, 123);
    std::mt19937_64 rng(124);
    const auto batch = random_batch(cfg, grid, 4, rng);

    auto state = model::make_adam_state(p);
    const double initial = model::gradients(p, cfg, batch).loss;
    for (int step = 0; step < 200; ++step) {
        auto res = model::gradients(p, cfg, batch);
        model::optimizer_step(p, res.grads, state, 1e-3);
    }
    const double final_loss = model::gradients(p, cfg, batch).loss;
    CHECK(final_loss < 0.1 * initial);
}

TEST_CASE("geometry mismatches are rejected") {
    auto cfg = tiny_cfg();
    auto p = model::init_parameters(cfg, {2, 4}, 16, 1);
    std::mt19937_64 rng(2);
    auto patches = random_patches({2, 2}, 16, 16, rng);  // wrong grid
    CHECK_THROWS_AS(model::predict(p, cfg, patches), std::invalid_argument);
}
