// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Usage: acceptance [work_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "fdia/case_ingest.hpp"
#include "fdia/cli.hpp"
#include "fdia/digest.hpp"
#include "fdia/evalbench.hpp"
#include "fdia/nn/train.hpp"
#include "fdia/power_flow.hpp"
#include "fdia/spectral.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fdia;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* pattern, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, pattern, args...);
    return buf;
}

Eigen::MatrixXd to_dense(const CsrMatrix<double>& m) {
    const auto d = m.dense();
    const auto n = static_cast<Eigen::Index>(m.size());
    Eigen::MatrixXd out(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) out(i, j) = d[static_cast<std::size_t>(i * n + j)];
    return out;
}

int cli(std::vector<std::string> args) {
    try {
        return cli::run_cli(args);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "cli threw: %s\n", e.what());
        return 1;
    }
}

json read_json(const fs::path& p) { return json::parse(read_text_file(p)); }

const fs::path case14 = fs::path(FDIA_DATA_DIR) / "case14.m";

// 1 -------------------------------------------------------------------------
Outcome spectral_oracle() {
    const auto start = Clock::now();
    Rng rng(101);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 2 + rng.below(15);
        const auto g = oracle::random_connected_graph(n, rng.below(2 * n), rng);
        const spectral::NormalizedLaplacian lap(g.to_weighted());
        const Eigen::MatrixXd l = to_dense(lap.matrix());
        const double lmax = oracle::lambda_max(l);
        const spectral::ScaledLaplacian scaled(lap, lmax);
        spectral::ChebCoeffs theta;
        const std::size_t order = 2 + rng.below(5);
        for (std::size_t k = 0; k < order; ++k) theta.theta.push_back(rng.normal());
        std::vector<double> x(n);
        for (double& v : x) v = rng.normal();
        const auto y = spectral::cheb_filter_apply(scaled, theta, x);
        const Eigen::VectorXd ref = oracle::spectral_filter_reference(
            l, lmax, theta.theta, Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n)));
        for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(y[i] - ref(static_cast<Eigen::Index>(i))));
    }
    const double elapsed = seconds_since(start);
    return {worst < 1e-9 && elapsed < 30.0, fmt("200 graphs, max abs error %.3g, %.2f s", worst, elapsed)};
}

// 2 -------------------------------------------------------------------------
Outcome chebyshev_identities() {
    Rng rng(102);
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
        const double phi = rng.uniform(0.0, std::numbers::pi);
        for (int k = 0; k <= 10; ++k) {
            worst = std::max(worst, std::abs(spectral::cheb_eval_scalar(k, std::cos(phi)) - std::cos(k * phi)));
        }
    }
    std::size_t leaks = 0, checked = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 10 + rng.below(30);
        const auto g = oracle::random_connected_graph(n, rng.below(4), rng);
        const spectral::NormalizedLaplacian lap(g.to_weighted());
        const spectral::ScaledLaplacian scaled(lap, spectral::estimate_lambda_max(lap).value);
        const std::size_t source = rng.below(n);
        const std::size_t order = 1 + rng.below(6);
        spectral::ChebCoeffs theta;
        for (std::size_t k = 0; k < order; ++k) theta.theta.push_back(rng.normal());
        std::vector<double> x(n, 0.0);
        x[source] = 1.0;
        const auto y = spectral::cheb_filter_apply(scaled, theta, x);
        const auto hops = oracle::hop_distances(g, source);
        for (std::size_t i = 0; i < n; ++i) {
            if (hops[i] > order - 1) {
                ++checked;
                leaks += y[i] != 0.0;
            }
        }
    }
    return {worst < 1e-12 && leaks == 0 && checked > 0,
            fmt("max |T_k(cos phi) - cos(k phi)| %.3g; %zu of %zu entries outside the ball nonzero", worst, leaks,
                checked)};
}

// 3 -------------------------------------------------------------------------
Outcome laplacian_spectrum() {
    Rng rng(103);
    double lo = 1e9, hi = -1e9, worst_min = 0.0, worst_rel = 0.0;
    for (int t = 0; t < 100; ++t) {
        const std::size_t n = 2 + rng.below(40);
        const auto g = oracle::random_connected_graph(n, rng.below(2 * n), rng);
        const spectral::NormalizedLaplacian lap(g.to_weighted());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_dense(lap.matrix()));
        const auto& ev = es.eigenvalues();
        lo = std::min(lo, ev.minCoeff());
        hi = std::max(hi, ev.maxCoeff());
        worst_min = std::max(worst_min, std::abs(ev.minCoeff()));
        const double exact = ev.maxCoeff();
        worst_rel = std::max(worst_rel, std::abs(spectral::estimate_lambda_max(lap).value - exact) / exact);
    }
    return {lo >= -1e-10 && hi <= 2.0 + 1e-10 && worst_min < 1e-10 && worst_rel <= 1e-5,
            fmt("eigenvalues in [%.3g, %.12g], |lambda_min| <= %.3g, lambda_max rel. error %.3g", lo, hi, worst_min,
                worst_rel)};
}

// 4 -------------------------------------------------------------------------
double gradient_error(nn::Model<double>& model, const std::vector<double>& x, std::size_t batch,
                      const std::vector<std::uint8_t>& y) {
    nn::ForwardCache<double> cache;
    const auto logits = model.forward(x, batch, &cache);
    const auto loss = nn::bce_with_logits(logits, y);
    std::vector<double> analytic(model.parameters().size());
    model.backward(cache, loss.gradient, analytic);
    const std::vector<double> saved(model.parameters().begin(), model.parameters().end());
    const auto numeric = oracle::numeric_gradient(
        [&](const std::vector<double>& p) {
            model.set_parameters(p);
            return nn::bce_with_logits(model.forward(x, batch), y).value;
        },
        saved, 1e-6);
    model.set_parameters(saved);
    return oracle::max_relative_error(analytic, numeric, 1e-4);
}

Outcome gradient_fidelity() {
    const auto start = Clock::now();
    Rng rng(104);
    double worst = 0.0;
    int models = 0;
    auto data = [&](std::size_t width, std::size_t batch) {
        std::vector<double> x(width * batch);
        for (double& v : x) v = rng.normal();
        std::vector<std::uint8_t> y(batch);
        for (auto& v : y) v = static_cast<std::uint8_t>(rng.below(2));
        return std::pair{x, y};
    };
    for (std::size_t layers = 2; layers <= 4; ++layers) {
        for (std::size_t order = 3; order <= 5; ++order) {
            const std::size_t n = 4 + rng.below(7);
            const auto g = oracle::random_connected_graph(n, rng.below(n), rng);
            const spectral::NormalizedLaplacian lap(g.to_weighted());
            auto scaled = std::make_shared<const spectral::ScaledLaplacian>(lap, spectral::estimate_lambda_max(lap).value);
            auto model = nn::init_model<double>(nn::Architecture::cgcn(n, layers, 3, order), scaled, 7 + models);
            for (auto& p : model.parameters()) p += 0.05 * rng.normal();
            const auto [x, y] = data(2 * n, 3);
            worst = std::max(worst, gradient_error(model, x, 3, y));
            ++models;
        }
    }
    for (std::size_t layers = 2; layers <= 4; ++layers) {
        const std::size_t n = 4 + rng.below(7);
        auto model = nn::build_fcn_baseline<double>(nn::Architecture::fcn(n, layers, 6), 50 + layers);
        for (auto& p : model.parameters()) p += 0.05 * rng.normal();
        const auto [x, y] = data(2 * n, 3);
        worst = std::max(worst, gradient_error(model, x, 3, y));
        ++models;
    }
    const double elapsed = seconds_since(start);
    return {worst < 1e-5 && elapsed < 60.0,
            fmt("%d models (CGCN L=2..4, K=3..5, n<=10; FCN L=2..4), max rel. error %.3g, %.2f s", models, worst,
                elapsed)};
}

// 5 -------------------------------------------------------------------------
Outcome power_flow() {
    using namespace fdia::grid;
    const Grid g = ingest::parse_case(ingest::load_case_file(case14.string()));
    const auto ybus = build_ybus(g);
    const auto sol = pf::solve_ac_power_flow(g, ybus);
    const auto inj = pf::compute_injections(sol.v, sol.theta, ybus);
    const auto sched = pf::scheduled_injections(g);
    double closure = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.buses[i].kind != BusKind::slack) closure = std::max(closure, std::abs(inj.p[i] - sched.p[i]));
        if (g.buses[i].kind == BusKind::pq) closure = std::max(closure, std::abs(inj.q[i] - sched.q[i]));
    }

    // Jacobian against central differences at a perturbed state.
    const pf::MismatchModel model(g, ybus);
    Rng rng(105);
    std::vector<double> v(g.size()), theta(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        v[i] = rng.uniform(0.9, 1.1);
        theta[i] = rng.uniform(-0.3, 0.3);
    }
    const auto x0 = model.unknowns(v, theta);
    const Eigen::MatrixXd jac(model.jacobian(v, theta));
    double jac_err = 0.0;
    const double h = 1e-6;
    for (std::size_t c = 0; c < x0.size(); ++c) {
        auto xp = x0, xm = x0;
        xp[c] += h;
        xm[c] -= h;
        auto vp = v, tp = theta, vm = v, tm = theta;
        model.assign(xp, vp, tp);
        model.assign(xm, vm, tm);
        const auto fp = model.mismatch(vp, tp);
        const auto fm = model.mismatch(vm, tm);
        std::vector<double> numeric(fp.size()), analytic(fp.size());
        for (std::size_t r = 0; r < fp.size(); ++r) {
            numeric[r] = (fp[r] - fm[r]) / (2 * h);
            analytic[r] = jac(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        }
        jac_err = std::max(jac_err, oracle::max_relative_error(analytic, numeric, 1.0));
    }

    Grid two;
    two.buses = {Bus{"1", BusKind::slack}, Bus{"2", BusKind::pq, 0.8, 0.3}};
    two.branches = {Branch{0, 1, 0.05, 0.2, 0.1}};
    two.gens = {Gen{0}};
    two.gens[0].v_set = 1.03;
    const auto s2 = pf::solve_ac_power_flow(two, build_ybus(two));
    const auto ref = oracle::two_bus_grid_search(1.03, 0.05, 0.2, 0.1, 0.8, 0.3);
    const double two_err = std::max(std::abs(s2.v[1] - ref.v2), std::abs(s2.theta[1] - ref.theta2));

    return {sol.iterations <= 10 && sol.max_mismatch < 1e-8 && closure < 1e-8 && jac_err < 1e-5 && two_err < 1e-6,
            fmt("14-bus: %d iterations, closure %.3g p.u.; Jacobian rel. error %.3g; 2-bus vs grid search %.3g",
                sol.iterations, closure, jac_err, two_err)};
}

// 6 and 10 ----------------------------------------------------------------------
std::string dataset_digest(const fs::path& dir) {
    std::string all;
    for (const char* f : {"train.bin", "validation.bin", "test.bin", "meta.json", "grid.json"}) {
        all += sha256_file(dir / f);
    }
    return sha256_hex(all);
}

Outcome protocol_reproduction(const fs::path& dir, double& seconds) {
    const auto start = Clock::now();
    const int code = cli({"gen", case14.string(), dir.string(), "--total", "36000", "--seed", "1", "--jobs", "0"});
    seconds = seconds_since(start);
    if (code != 0) return {false, fmt("gen exited with %d", code)};
    const json c = read_json(dir / "meta.json").at("counts");
    auto at = [&](const char* split, const char* key) { return c.at(split).at(key).get<std::size_t>(); };
    const bool ok = at("train", "total") == 24000 && at("validation", "total") == 6000 &&
                    at("test", "total") == 6000 && at("train", "clean") == 12000 &&
                    at("train", "distribution") == 6000 && at("train", "scale") == 6000;
    return {ok && seconds < 600.0,
            fmt("splits %zu/%zu/%zu, train %zu clean + %zu A_d + %zu A_s, %.1f s", at("train", "total"),
                at("validation", "total"), at("test", "total"), at("train", "clean"), at("train", "distribution"),
                at("train", "scale"), seconds)};
}

// 7, 8 and 10 -------------------------------------------------------------------
struct TrainedRun {
    bool ok = false;
    double seconds = 0.0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::size_t epochs = 0;
    double accuracy = 0.0;
    double dr = 0.0;
    double fa = 1.0;
    std::string checkpoint_digest;
};

TrainedRun train_and_eval(const fs::path& data, const std::string& arch, int seed, const fs::path& out) {
    TrainedRun r;
    const auto start = Clock::now();
    if (cli({"train", data.string(), "--arch", arch, "--seed", std::to_string(seed), "--out", out.string()}) != 0) {
        return r;
    }
    r.seconds = seconds_since(start);
    const json h = read_json(out.string() + ".history.json");
    r.initial_loss = h.at("initial_train_loss").get<double>();
    r.final_loss = h.at("train_loss").back().get<double>();
    r.epochs = h.at("epochs").get<std::size_t>();
    const fs::path report = out.string() + ".eval.json";
    if (cli({"eval", data.string(), out.string(), "--json", report.string()}) != 0) return r;
    const json e = read_json(report);
    const auto tp = e.at("tp").get<double>(), tn = e.at("tn").get<double>();
    const auto fp = e.at("fp").get<double>(), fn = e.at("fn").get<double>();
    r.accuracy = (tp + tn) / (tp + tn + fp + fn);
    r.dr = e.at("dr").is_null() ? 0.0 : e.at("dr").get<double>();
    r.fa = e.at("fa").is_null() ? 1.0 : e.at("fa").get<double>();
    r.checkpoint_digest = sha256_file(out);
    r.ok = true;
    return r;
}

Outcome desk_scale(const fs::path& dir, TrainedRun& run) {
    const auto start = Clock::now();
    if (cli({"gen", case14.string(), dir.string(), "--total", "4800", "--seed", "1"}) != 0) {
        return {false, "gen failed"};
    }
    run = train_and_eval(dir, "cgcn", 1, dir / "cgcn_seed1.ckpt");
    const double elapsed = seconds_since(start);
    if (!run.ok) return {false, "train or eval failed"};
    return {elapsed < 900.0 && run.final_loss < run.initial_loss && run.accuracy >= 0.85 && run.dr > run.fa,
            fmt("%.1f s total (training %.1f s, %zu epochs); train loss %.4f -> %.4f; test accuracy %.4f, DR %.4f, FA "
                "%.4f",
                elapsed, run.seconds, run.epochs, run.initial_loss, run.final_loss, run.accuracy, run.dr, run.fa)};
}

Outcome comparative_trend(const fs::path& dir, const TrainedRun& first) {
    std::vector<double> cgcn{first.accuracy}, fcn;
    for (int seed = 2; seed <= 3; ++seed) {
        const auto r = train_and_eval(dir, "cgcn", seed, dir / ("cgcn_seed" + std::to_string(seed) + ".ckpt"));
        if (!r.ok) return {false, "cgcn training failed"};
        cgcn.push_back(r.accuracy);
    }
    for (int seed = 1; seed <= 3; ++seed) {
        const auto r = train_and_eval(dir, "fcn", seed, dir / ("fcn_seed" + std::to_string(seed) + ".ckpt"));
        if (!r.ok) return {false, "fcn training failed"};
        fcn.push_back(r.accuracy);
    }
    const double mc = (cgcn[0] + cgcn[1] + cgcn[2]) / 3.0;
    const double mf = (fcn[0] + fcn[1] + fcn[2]) / 3.0;
    return {mc >= mf - 0.01,
            fmt("mean test accuracy CGCN %.4f (%.4f %.4f %.4f) vs FCN %.4f (%.4f %.4f %.4f), gap %+.2f pp", mc,
                cgcn[0], cgcn[1], cgcn[2], mf, fcn[0], fcn[1], fcn[2], 100.0 * (mc - mf))};
}

// 9 -------------------------------------------------------------------------
Outcome scale_smoke() {
    Rng rng(109);
    const std::size_t n = 2848;
    const std::size_t edges = static_cast<std::size_t>(std::llround(2.7 * n / 2.0));
    const auto g = oracle::random_connected_graph(n, edges - (n - 1), rng);
    const double degree = 2.0 * static_cast<double>(g.edges.size()) / static_cast<double>(n);
    const spectral::NormalizedLaplacian lap(g.to_weighted());
    const auto scaled = std::make_shared<const spectral::ScaledLaplacian>(lap, spectral::estimate_lambda_max(lap).value);
    const auto arch = nn::Architecture::cgcn(n, 4, 32, 5);
    const auto model = nn::init_model<float>(arch, scaled, 1);

    std::vector<data::Sample> samples(20);
    for (auto& s : samples) {
        s.n = n;
        s.features.resize(2 * n);
        for (auto& f : s.features) f = static_cast<float>(rng.normal());
    }
    data::Scaler scaler;
    scaler.n = n;
    scaler.mean.assign(2 * n, 0.0);
    scaler.std.assign(2 * n, 1.0);

    spectral::reset_laplacian_matvec_count();
    nn::predict(model, scaler, samples[0]);
    const auto matvecs = spectral::laplacian_matvec_count();
    std::size_t expected = 0;
    for (std::size_t l = 0; l < arch.layers(); ++l) expected += arch.channels[l] * (arch.order - 1);

    const auto report = eval::benchmark_inference(model, scaler, samples, 1, 5);
    return {report.mean_ms < 100.0 && matvecs == expected,
            fmt("n=%zu, average degree %.3f, mean %.2f ms (median %.2f, p95 %.2f) per sample, %llu matvecs (expected "
                "%zu)",
                n, degree, report.mean_ms, report.median_ms, report.p95_ms,
                static_cast<unsigned long long>(matvecs), expected)};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "fdia_acceptance";
    fs::remove_all(work);
    fs::create_directories(work);

    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };
    auto guarded = [](const std::function<Outcome()>& f) {
        try {
            return f();
        } catch (const std::exception& e) {
            return Outcome{false, std::string("exception: ") + e.what()};
        }
    };

    report(1, "spectral oracle equivalence", guarded(spectral_oracle));
    report(2, "chebyshev identities", guarded(chebyshev_identities));
    report(3, "laplacian spectrum", guarded(laplacian_spectrum));
    report(4, "gradient fidelity", guarded(gradient_fidelity));
    report(5, "power flow", guarded(power_flow));

    double gen_seconds = 0.0;
    report(6, "protocol reproduction", guarded([&] { return protocol_reproduction(work / "gen36000_a", gen_seconds); }));
    TrainedRun first;
    report(7, "desk-scale end-to-end", guarded([&] { return desk_scale(work / "desk_a", first); }));
    report(8, "comparative trend", guarded([&] {
               if (!first.ok) return Outcome{false, "no desk-scale run to compare against"};
               return comparative_trend(work / "desk_a", first);
           }));
    report(9, "scale smoke test", guarded(scale_smoke));
    report(10, "determinism", guarded([&] {
               double again = 0.0;
               protocol_reproduction(work / "gen36000_b", again);
               const bool same_gen = dataset_digest(work / "gen36000_a") == dataset_digest(work / "gen36000_b");
               TrainedRun second;
               desk_scale(work / "desk_b", second);
               const bool same_data = dataset_digest(work / "desk_a") == dataset_digest(work / "desk_b");
               const bool same_ckpt = first.ok && second.ok && first.checkpoint_digest == second.checkpoint_digest;
               return Outcome{same_gen && same_data && same_ckpt,
                              fmt("36000-sample dataset %s, 4800-sample dataset %s, checkpoint %s (%.16s)",
                                  same_gen ? "identical" : "DIFFERS", same_data ? "identical" : "DIFFERS",
                                  same_ckpt ? "identical" : "DIFFERS", second.checkpoint_digest.c_str())};
           }));

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
