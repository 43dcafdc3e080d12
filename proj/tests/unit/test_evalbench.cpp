#include <doctest.h>

#include <memory>
#include <thread>

#include "fdia/evalbench.hpp"
#include "fdia/nn/train.hpp"
#include "oracles.hpp"

using namespace fdia;
using namespace fdia::eval;

TEST_CASE("confusion counts") {
    const std::vector<std::uint8_t> y{1, 1, 0, 0, 1, 0};
    SUBCASE("all positive") {
        const auto m = compute_metrics(std::vector<double>(6, 0.9), y);
        CHECK(*m.dr == 1.0);
        CHECK(*m.fa == 1.0);
        CHECK(m.total() == 6);
    }
    SUBCASE("perfect") {
        const auto m = compute_metrics(std::vector<double>{0.9, 0.8, 0.1, 0.2, 0.7, 0.0}, y);
        CHECK(*m.dr == 1.0);
        CHECK(*m.fa == 0.0);
        CHECK(m.accuracy() == 1.0);
    }
    SUBCASE("threshold is inclusive") {
        const auto m = compute_metrics(std::vector<double>(6, 0.5), y, 0.5);
        CHECK(m.tp == 3);
        CHECK(m.fp == 3);
    }
    SUBCASE("ratios") {
        // 55.06% detection rate reads as tp / (tp + fn).
        std::vector<double> p(10000, 0.0);
        std::vector<std::uint8_t> labels(10000, 1);
        for (std::size_t i = 0; i < 5506; ++i) p[i] = 1.0;
        const auto m = compute_metrics(p, labels);
        CHECK(*m.dr == doctest::Approx(0.5506));
        CHECK(!m.fa.has_value());
        const auto j = to_json(m);
        CHECK(j.at("fa").is_null());
        CHECK(j.at("dr").get<double>() == doctest::Approx(0.5506));
    }
    CHECK_THROWS(compute_metrics(std::vector<double>{}, std::vector<std::uint8_t>{}));
    CHECK_THROWS(compute_metrics(std::vector<double>{0.1}, std::vector<std::uint8_t>{}));
}

TEST_CASE("tp and fp never grow with the threshold") {
    Rng rng(1);
    std::vector<double> p(500);
    std::vector<std::uint8_t> y(500);
    for (std::size_t i = 0; i < 500; ++i) {
        p[i] = rng.uniform();
        y[i] = static_cast<std::uint8_t>(rng.below(2));
    }
    Metrics prev = compute_metrics(p, y, -0.01);
    for (int t = 0; t <= 110; ++t) {
        const Metrics m = compute_metrics(p, y, t / 100.0);
        CHECK(m.tp <= prev.tp);
        CHECK(m.fp <= prev.fp);
        CHECK(m.total() == 500);
        prev = m;
    }
    CHECK(prev.tp + prev.fp == 0);
}

TEST_CASE("latency summary") {
    const auto r = summarize_latencies({9.0, 9.0, 1.0, 4.0, 2.0, 3.0}, 2);
    CHECK(r.n == 4);
    CHECK(r.warmup == 2);
    CHECK(r.mean_ms == doctest::Approx(2.5));
    CHECK(r.median_ms == doctest::Approx(2.5));
    CHECK(r.min_ms == 1.0);
    CHECK(r.max_ms == 4.0);
    CHECK(r.p95_ms == 4.0);

    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> ms(1 + rng.below(40));
        for (double& v : ms) v = rng.uniform(0.0, 10.0);
        const auto s = summarize_latencies(ms);
        CHECK(s.min_ms <= s.median_ms);
        CHECK(s.median_ms <= s.p95_ms);
        CHECK(s.p95_ms <= s.max_ms);
        CHECK(s.mean_ms >= s.min_ms);
        CHECK(s.mean_ms <= s.max_ms);
    }
    const auto j = to_json(r);
    for (const char* key : {"mean_ms", "median_ms", "p95_ms", "min_ms", "max_ms", "n"}) CHECK(j.contains(key));
}

TEST_CASE("benchmark loop") {
    data::Sample s;
    s.n = 1;
    s.features = {0.0f, 0.0f};
    int calls = 0;
    const auto one = benchmark_inference([&](const data::Sample&) { ++calls; }, {s}, 1);
    CHECK(calls == 1);
    CHECK(one.n == 1);
    CHECK(one.mean_ms == one.min_ms);
    CHECK(one.mean_ms == one.max_ms);
    CHECK(one.mean_ms == one.median_ms);

    const auto slow = benchmark_inference(
        [](const data::Sample&) { std::this_thread::sleep_for(std::chrono::milliseconds(2)); }, {s, s}, 3, 1);
    CHECK(slow.n == 5);
    CHECK(slow.min_ms >= 2.0);
    CHECK(!host_description().empty());
    CHECK_THROWS(benchmark_inference([](const data::Sample&) {}, {}, 1));
}

TEST_CASE("latency grows with filter order") {
    Rng rng(3);
    const std::size_t n = 400;
    const auto g = oracle::random_connected_graph(n, n / 3, rng);
    const spectral::NormalizedLaplacian lap(g.to_weighted());
    const auto scaled = std::make_shared<const spectral::ScaledLaplacian>(lap, spectral::estimate_lambda_max(lap).value);

    std::vector<data::Sample> samples(4);
    for (auto& s : samples) {
        s.n = n;
        s.features.resize(2 * n);
        for (auto& f : s.features) f = static_cast<float>(rng.normal());
    }
    data::Scaler scaler;
    scaler.n = n;
    scaler.mean.assign(2 * n, 0.0);
    scaler.std.assign(2 * n, 1.0);

    const auto k2 = nn::init_model<float>(nn::Architecture::cgcn(n, 4, 32, 2), scaled, 1);
    const auto k10 = nn::init_model<float>(nn::Architecture::cgcn(n, 4, 32, 10), scaled, 1);
    spectral::reset_laplacian_matvec_count();
    const auto r2 = benchmark_inference(k2, scaler, samples, 3, 2);
    const auto work2 = spectral::laplacian_matvec_count();
    spectral::reset_laplacian_matvec_count();
    const auto r10 = benchmark_inference(k10, scaler, samples, 3, 2);
    const auto work10 = spectral::laplacian_matvec_count();
    CHECK(work2 == 12 * (2 + 3 * 32) * 1);
    CHECK(work10 == 12 * (2 + 3 * 32) * 9);
    CHECK(r10.mean_ms >= r2.mean_ms);
}

TEST_CASE("evaluate a stub model") {
    // Zero-initialised model outputs exactly 0.5 for everything.
    Rng rng(4);
    const auto g = oracle::ring(5);
    const spectral::NormalizedLaplacian lap(g.to_weighted());
    const auto scaled = std::make_shared<const spectral::ScaledLaplacian>(lap, 2.0);
    const auto model = nn::init_model<double>(nn::Architecture::cgcn(5, 2, 4, 2), scaled, 1, nn::InitMode::zero);
    std::vector<data::Sample> split(6);
    for (std::size_t i = 0; i < split.size(); ++i) {
        split[i].n = 5;
        split[i].features.assign(10, static_cast<float>(i));
        split[i].label = static_cast<std::uint8_t>(i % 2);
    }
    const auto scaler = data::fit_scaler(split);
    const auto at_half = evaluate(model, scaler, split, 0.5);
    CHECK(*at_half.dr == 1.0);
    CHECK(*at_half.fa == 1.0);
    const auto above = evaluate(model, scaler, split, 0.51);
    CHECK(*above.dr == 0.0);
    CHECK(*above.fa == 0.0);
    CHECK_THROWS(evaluate(model, scaler, std::vector<data::Sample>{}, 0.5));

    const auto doc = report_json(at_half, std::nullopt);
    CHECK(doc.at("tp") == 3);
    CHECK(!doc.contains("latency"));
    CHECK(report_json(at_half, summarize_latencies({1.0})).contains("latency"));
}
