#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "c2f/compress.hpp"
#include "oracles.hpp"

using namespace c2f;

namespace {

dsp::MelSpectrogram grid_of(std::vector<std::vector<double>> rows) {
    dsp::MelSpectrogram m;
    m.bins = Matrix(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (int i = 0; i < m.bins.rows; ++i)
        for (int j = 0; j < m.bins.cols; ++j) m.bins.at(i, j) = rows[i][j];
    m.framing.n_mels = m.bins.rows;
    m.framing.target_time_frames = m.bins.cols;
    return m;
}

dsp::MelSpectrogram random_grid(int rows, int cols, std::mt19937_64& rng) {
    dsp::MelSpectrogram m;
    m.bins = Matrix(rows, cols);
    std::normal_distribution<double> g(0.0, 3.0);
    for (auto& v : m.bins.data) v = g(rng);
    m.framing.n_mels = rows;
    m.framing.target_time_frames = cols;
    return m;
}

}  // namespace

TEST_CASE("avg pooling worked rows") {
    auto m = grid_of({{1, 3, 5, 7}});
    auto p2 = compress::avg_pool_time(m, 2);
    CHECK(p2.bins.at(0, 0) == 2.0);
    CHECK(p2.bins.at(0, 1) == 6.0);
    CHECK(p2.compression_factor == 2);
    auto p4 = compress::avg_pool_time(m, 4);
    CHECK(p4.bins.at(0, 0) == 4.0);
    auto p1 = compress::avg_pool_time(m, 1);
    for (std::size_t i = 0; i < m.bins.data.size(); ++i)
        CHECK(p1.bins.data[i] == m.bins.data[i]);
}

TEST_CASE("max pooling worked rows") {
    auto m = grid_of({{1, 3, 5, 7}});
    auto p2 = compress::max_pool_time(m, 2);
    CHECK(p2.bins.at(0, 0) == 3.0);
    CHECK(p2.bins.at(0, 1) == 7.0);

    auto constant = grid_of({{4.5, 4.5, 4.5, 4.5}});
    for (int c : {1, 2, 4}) {
        auto pooled = compress::max_pool_time(constant, c);
        for (double v : pooled.bins.data) CHECK(v == 4.5);
    }

    auto neg = grid_of({{-2, -5}});
    CHECK(compress::max_pool_time(neg, 2).bins.at(0, 0) == -2.0);
}

TEST_CASE("non-divisible time length is rejected") {
    auto m = grid_of({{1, 2, 3}});
    CHECK_THROWS_AS(compress::avg_pool_time(m, 2), std::invalid_argument);
    CHECK_THROWS_AS(compress::max_pool_time(m, 2), std::invalid_argument);
}

TEST_CASE("pooling equals the brute-force oracle on random grids") {
    std::mt19937_64 rng(29);
    std::uniform_int_distribution<int> rows(1, 8), blocks(1, 12);
    for (int it = 0; it < 200; ++it) {
        const int c = (it % 2 == 0) ? 2 : 4;
        auto m = random_grid(rows(rng), c * blocks(rng), rng);
        auto avg = compress::avg_pool_time(m, c);
        auto mx = compress::max_pool_time(m, c);
        auto avg_ref = oracle::brute_avg_pool(m.bins, c);
        auto max_ref = oracle::brute_max_pool(m.bins, c);
        for (std::size_t i = 0; i < avg_ref.data.size(); ++i) {
            CHECK(std::abs(avg.bins.data[i] - avg_ref.data[i]) <= 1e-12);
            CHECK(mx.bins.data[i] == max_ref.data[i]);
        }
    }
}

TEST_CASE("max pooling dominates avg pooling") {
    std::mt19937_64 rng(31);
    for (int it = 0; it < 50; ++it) {
        auto m = random_grid(4, 16, rng);
        for (int c : {2, 4}) {
            auto avg = compress::avg_pool_time(m, c);
            auto mx = compress::max_pool_time(m, c);
            for (std::size_t i = 0; i < avg.bins.data.size(); ++i)
                CHECK(mx.bins.data[i] >= avg.bins.data[i]);
        }
    }
}

TEST_CASE("avg pooling preserves each row's mean") {
    std::mt19937_64 rng(37);
    auto m = random_grid(6, 24, rng);
    for (int c : {2, 4}) {
        auto pooled = compress::avg_pool_time(m, c);
        for (int i = 0; i < m.bins.rows; ++i) {
            double before = 0.0, after = 0.0;
            for (int j = 0; j < m.bins.cols; ++j) before += m.bins.at(i, j);
            for (int j = 0; j < pooled.bins.cols; ++j) after += pooled.bins.at(i, j);
            CHECK(std::abs(before / m.bins.cols - after / pooled.bins.cols) <= 1e-12);
        }
    }
}

TEST_CASE("pooling twice by 2 composes to pooling by 4") {
    std::mt19937_64 rng(41);
    auto m = random_grid(5, 32, rng);
    auto avg22 = compress::avg_pool_time(compress::avg_pool_time(m, 2), 2);
    auto avg4 = compress::avg_pool_time(m, 4);
    auto max22 = compress::max_pool_time(compress::max_pool_time(m, 2), 2);
    auto max4 = compress::max_pool_time(m, 4);
    CHECK(avg22.compression_factor == 4);
    for (std::size_t i = 0; i < avg4.bins.data.size(); ++i) {
        CHECK(std::abs(avg22.bins.data[i] - avg4.bins.data[i]) <= 1e-12);
        CHECK(max22.bins.data[i] == max4.bins.data[i]);
    }
}

TEST_CASE("apply_compression dispatch") {
    dsp::Waveform w;
    w.sample_rate_hz = 16000;
    w.samples.resize(16000);
    for (std::size_t i = 0; i < w.samples.size(); ++i)
        w.samples[i] = 0.4 * std::sin(2.0 * std::numbers::pi * 500.0 * i / 16000.0);
    dsp::FramingParams f;
    f.target_time_frames = 96;

    const auto plain = dsp::log_mel(w, f);

    SUBCASE("none is the identity dispatch") {
        auto out = compress::apply_compression(w, compress::Method::None, 1, f);
        for (std::size_t i = 0; i < plain.bins.data.size(); ++i)
            CHECK(out.bins.data[i] == plain.bins.data[i]);
    }
    SUBCASE("pooling halves the grid") {
        auto out = compress::apply_compression(w, compress::Method::AvgPool, 2, f);
        CHECK(out.bins.rows == 128);
        CHECK(out.bins.cols == 48);
    }
    SUBCASE("patch methods keep the full-resolution grid") {
        for (auto m : {compress::Method::PatchBL, compress::Method::PatchPI}) {
            auto out = compress::apply_compression(w, m, 4, f);
            CHECK(out.bins.cols == 96);
            CHECK(out.compression_factor == 1);
        }
    }
    SUBCASE("fshift shrinks the grid itself") {
        auto out = compress::apply_compression(w, compress::Method::Fshift, 4, f);
        CHECK(out.bins.cols == 24);
        CHECK(out.compression_factor == 4);
    }
    SUBCASE("none with C>1 is invalid") {
        CHECK_THROWS_AS(compress::apply_compression(w, compress::Method::None, 2, f),
                        std::invalid_argument);
    }
}

TEST_CASE("method names round-trip") {
    for (auto m : {compress::Method::None, compress::Method::Fshift, compress::Method::AvgPool,
                   compress::Method::MaxPool, compress::Method::PatchBL,
                   compress::Method::PatchPI})
        CHECK(compress::method_from_name(compress::method_name(m)) == m);
    CHECK_THROWS_AS(compress::method_from_name("bogus"), std::invalid_argument);
}
