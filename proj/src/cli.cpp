#include "fdia/cli.hpp"

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <thread>
#include <type_traits>

#include <CLI11.hpp>
#include <json.hpp>

#include "fdia/case_ingest.hpp"
#include "fdia/dataset.hpp"
#include "fdia/digest.hpp"
#include "fdia/error.hpp"
#include "fdia/evalbench.hpp"
#include "fdia/grid.hpp"
#include "fdia/nn/checkpoint.hpp"
#include "fdia/nn/train.hpp"
#include "fdia/random.hpp"
#include "fdia/spectral.hpp"
#include "fdia/version.hpp"

namespace fdia::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t default_seed = 1;
constexpr std::uint64_t init_stream = 0x1417;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) {
        return *flag;
    }
    if (const char* env = std::getenv("FDIA_SEED"); env && *env) {
        std::uint64_t value = 0;
        const char* end = env + std::char_traits<char>::length(env);
        auto [ptr, ec] = std::from_chars(env, end, value);
        if (ec != std::errc{} || ptr != end) {
            throw ConfigError(std::string("FDIA_SEED is not an unsigned integer: ") + env);
        }
        return value;
    }
    return default_seed;
}

struct Manifest {
    std::string command;
    json config = json::object();
    json seeds = json::object();
    json inputs = json::object();
    json outputs = json::object();
};

void add_digest(json& section, const fs::path& path) {
    section[path.string()] = sha256_file(path);
}

void write_manifest(const fs::path& path, const Manifest& m) {
    json doc = {{"command", m.command}, {"tool_version", version}, {"timestamp", utc_timestamp()},
                {"config", m.config},   {"seeds", m.seeds},        {"inputs", m.inputs},
                {"outputs", m.outputs}};
    write_text_file(path, doc.dump(2) + "\n");
}

fs::path sibling(const fs::path& path, const std::string& suffix) {
    return fs::path(path.string() + suffix);
}

grid::Grid load_grid(const std::string& path) {
    const auto source = ingest::load_case_file(path);
    try {
        return ingest::parse_case(source);
    } catch (const ParseError& e) {
        const std::string what = e.what();
        const auto colon = what.find(": ");
        throw InputError(path + ":" + std::to_string(e.line()) + ": " +
                         (colon == std::string::npos ? what : what.substr(colon + 2)));
    } catch (const InputError& e) {
        throw InputError(path + ": " + e.what());
    }
}

std::array<double, 3> parse_splits(const std::string& text) {
    std::array<double, 3> parts{};
    std::stringstream in(text);
    std::string item;
    std::size_t count = 0;
    while (std::getline(in, item, ',')) {
        if (count == 3) {
            throw ConfigError("--splits takes exactly three comma-separated weights");
        }
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
        if (ec != std::errc{} || ptr != item.data() + item.size() || !(value > 0.0)) {
            throw ConfigError("--splits weight is not a positive number: " + item);
        }
        parts[count++] = value;
    }
    if (count != 3) {
        throw ConfigError("--splits takes exactly three comma-separated weights");
    }
    const double sum = parts[0] + parts[1] + parts[2];
    for (double& p : parts) p /= sum;
    return parts;
}

template <typename F>
decltype(auto) with_precision(nn::Precision p, F&& f) {
    if (p == nn::Precision::double_precision) {
        return f(std::type_identity<double>{});
    }
    return f(std::type_identity<float>{});
}

std::shared_ptr<const spectral::ScaledLaplacian> laplacian_with_lambda(const grid::Grid& g,
                                                                       double lambda_max) {
    const auto graph = grid::build_weighted_adjacency(g);
    return std::make_shared<const spectral::ScaledLaplacian>(spectral::NormalizedLaplacian(graph),
                                                             lambda_max);
}

grid::Grid dataset_grid(const fs::path& dir, const std::string& fingerprint) {
    grid::Grid g = load_grid((dir / "grid.json").string());
    if (data::grid_fingerprint(g) != fingerprint) {
        throw InputError((dir / "grid.json").string() + " does not match the dataset fingerprint");
    }
    return g;
}

template <typename T>
nn::Model<T> restore_model(const nn::Checkpoint& cp, const grid::Grid& g) {
    std::shared_ptr<const spectral::ScaledLaplacian> lap;
    if (cp.arch.kind == nn::ModelKind::cgcn) {
        if (data::grid_fingerprint(g) != cp.meta.grid_fingerprint) {
            throw InputError("checkpoint was trained on a different grid");
        }
        lap = laplacian_with_lambda(g, cp.meta.lambda_max);
    }
    return nn::model_from_checkpoint<T>(cp, lap);
}

json history_json(const nn::TrainHistory& h) {
    return {{"initial_train_loss", h.initial_train_loss},
            {"initial_validation_loss", h.initial_validation_loss},
            {"train_loss", h.train_loss},
            {"validation_loss", h.validation_loss},
            {"epochs", h.epochs()},
            {"best_epoch", h.best_epoch},
            {"best_validation_loss", h.best_validation_loss},
            {"stop_reason", nn::to_string(h.stop_reason)}};
}

// convert -------------------------------------------------------------------

struct ConvertArgs {
    std::string in;
    std::string out;
};

int cmd_convert(const ConvertArgs& a) {
    const grid::Grid g = load_grid(a.in);
    write_text_file(a.out, ingest::write_grid_json(g));
    Manifest m;
    m.command = "convert";
    m.config = {{"in", a.in}, {"out", a.out}};
    add_digest(m.inputs, a.in);
    add_digest(m.outputs, a.out);
    write_manifest(sibling(a.out, ".manifest.json"), m);
    std::cout << "wrote " << a.out << " (" << g.buses.size() << " buses, " << g.branches.size()
              << " branches, " << g.gens.size() << " generators)\n";
    return 0;
}

// gen -------------------------------------------------------------------------

struct GenArgs {
    std::string grid;
    std::string out_dir;
    data::GenConfig config;
    std::optional<std::uint64_t> seed;
    std::string splits = "4,1,1";
    unsigned jobs = 0;
};

int cmd_gen(GenArgs a) {
    const grid::Grid g = load_grid(a.grid);
    grid::build_weighted_adjacency(g);  // rejects disconnected grids up front
    a.config.master_seed = resolve_seed(a.seed);
    a.config.split_fractions = parse_splits(a.splits);
    a.config.jobs = a.jobs ? a.jobs : std::max(1u, std::thread::hardware_concurrency());
    a.config.validate();

    const data::Dataset ds = data::generate_dataset(g, a.config);
    const fs::path dir(a.out_dir);
    data::save_dataset(ds, dir);
    write_text_file(dir / "grid.json", ingest::write_grid_json(g));

    Manifest m;
    m.command = "gen";
    m.config = json::parse(data::meta_json(ds)).at("config");
    m.config["grid"] = a.grid;
    m.config["out_dir"] = a.out_dir;
    m.config["jobs"] = a.config.jobs;
    m.seeds = {{"master_seed", a.config.master_seed}};
    add_digest(m.inputs, a.grid);
    for (const char* name : {"grid.json", "meta.json", "train.bin", "validation.bin", "test.bin"}) {
        add_digest(m.outputs, dir / name);
    }
    write_manifest(dir / "manifest.json", m);

    for (std::size_t s = 0; s < 3; ++s) {
        std::size_t attacked = 0;
        for (const auto& x : ds.splits[s]) attacked += x.label;
        std::cout << data::split_names[s] << ": " << ds.splits[s].size() << " samples ("
                  << attacked << " attacked)\n";
    }
    return 0;
}

// train -----------------------------------------------------------------------

struct TrainArgs {
    std::string data_dir;
    std::string arch = "cgcn";
    std::size_t layers = 4;
    std::optional<std::size_t> channels;
    std::size_t order = 5;
    std::size_t batch = 256;
    std::size_t max_epochs = 256;
    std::size_t patience = 16;
    bool no_early_stop = false;
    double lr = 1e-3;
    std::optional<std::uint64_t> seed;
    std::string precision = "single";
    std::string out;
};

int cmd_train(const TrainArgs& a) {
    const fs::path dir(a.data_dir);
    const data::Dataset ds = data::load_dataset(dir);
    const grid::Grid g = dataset_grid(dir, ds.grid_fingerprint);

    const nn::ModelKind kind = nn::model_kind_from_string(a.arch);
    const std::size_t width = a.channels.value_or(kind == nn::ModelKind::cgcn ? 32 : 64);
    const nn::Architecture arch = kind == nn::ModelKind::cgcn
                                      ? nn::Architecture::cgcn(ds.n, a.layers, width, a.order)
                                      : nn::Architecture::fcn(ds.n, a.layers, width);
    arch.validate();

    nn::TrainConfig cfg;
    cfg.batch_size = a.batch;
    cfg.max_epochs = a.max_epochs;
    cfg.patience = a.patience;
    cfg.early_stopping = !a.no_early_stop;
    cfg.adam.lr = a.lr;
    cfg.seed = resolve_seed(a.seed);
    cfg.precision = nn::precision_from_string(a.precision);
    cfg.validate();
    const std::uint64_t init_seed = derive_seed(cfg.seed, init_stream);

    nn::CheckpointMeta meta;
    meta.grid_fingerprint = ds.grid_fingerprint;
    meta.scaler_digest = nn::scaler_digest(ds.scaler);
    std::shared_ptr<const spectral::ScaledLaplacian> lap;
    spectral::LambdaEstimate lambda;
    if (kind == nn::ModelKind::cgcn) {
        const auto graph = grid::build_weighted_adjacency(g);
        const spectral::NormalizedLaplacian normalized(graph);
        lambda = spectral::estimate_lambda_max(normalized);
        lap = std::make_shared<const spectral::ScaledLaplacian>(normalized, lambda.value);
        meta.lambda_max = lambda.value;
    }

    const fs::path out = a.out.empty() ? dir / (a.arch + ".ckpt") : fs::path(a.out);
    const fs::path history_path = sibling(out, ".history.json");
    nn::TrainHistory history;
    try {
        with_precision(cfg.precision, [&]<typename T>(std::type_identity<T>) {
            nn::Model<T> model = kind == nn::ModelKind::cgcn
                                     ? nn::init_model<T>(arch, lap, init_seed)
                                     : nn::build_fcn_baseline<T>(arch, init_seed);
            history = nn::train(model, ds, cfg);
            nn::save_checkpoint(out, model, meta);
        });
    } catch (const nn::TrainingDiverged& e) {
        write_text_file(history_path, history_json(e.history()).dump(2) + "\n");
        throw;
    }
    write_text_file(history_path, history_json(history).dump(2) + "\n");

    Manifest m;
    m.command = "train";
    m.config = {{"data_dir", a.data_dir},
                {"arch", nn::to_string(kind)},
                {"layers", a.layers},
                {"channels", width},
                {"order", kind == nn::ModelKind::cgcn ? a.order : 1},
                {"batch", cfg.batch_size},
                {"max_epochs", cfg.max_epochs},
                {"patience", cfg.patience},
                {"early_stopping", cfg.early_stopping},
                {"lr", cfg.adam.lr},
                {"beta1", cfg.adam.beta1},
                {"beta2", cfg.adam.beta2},
                {"epsilon", cfg.adam.epsilon},
                {"precision", nn::to_string(cfg.precision)},
                {"parameter_count", arch.parameter_count()},
                {"lambda_max", meta.lambda_max},
                {"out", out.string()}};
    m.seeds = {{"train_seed", cfg.seed}, {"init_seed", init_seed}};
    for (const char* name : {"grid.json", "meta.json", "train.bin", "validation.bin"}) {
        add_digest(m.inputs, dir / name);
    }
    add_digest(m.outputs, out);
    add_digest(m.outputs, history_path);
    write_manifest(sibling(out, ".manifest.json"), m);

    std::cout << "trained " << nn::to_string(kind) << " (" << arch.parameter_count()
              << " parameters) for " << history.epochs() << " epochs; best epoch "
              << history.best_epoch << ", validation loss " << history.best_validation_loss
              << "\nwrote " << out.string() << "\n";
    return 0;
}

// eval ------------------------------------------------------------------------

struct EvalArgs {
    std::string data_dir;
    std::string model;
    double threshold = 0.5;
    std::string split = "test";
    std::string json_out;
    std::string plot_dir;
    std::string precision = "single";
};

std::size_t split_index(const std::string& name) {
    for (std::size_t s = 0; s < 3; ++s) {
        if (name == data::split_names[s]) return s;
    }
    throw ConfigError("unknown split: " + name);
}

void check_compatible(const nn::Checkpoint& cp, const data::Dataset& ds) {
    if (cp.arch.nodes != ds.n) {
        throw InputError("checkpoint expects " + std::to_string(cp.arch.nodes) +
                         " buses but the dataset has " + std::to_string(ds.n));
    }
    if (cp.meta.scaler_digest != nn::scaler_digest(ds.scaler)) {
        throw InputError("checkpoint was trained with a different scaler than this dataset");
    }
}

void write_plot_data(const fs::path& dir, const fs::path& model_path, const eval::Metrics& metrics,
                     const std::vector<data::Sample>& split, const std::vector<double>& probs) {
    fs::create_directories(dir);
    const fs::path history_path = sibling(model_path, ".history.json");
    if (fs::exists(history_path)) {
        const json h = json::parse(read_text_file(history_path));
        std::ostringstream csv;
        csv << "epoch,train_loss,validation_loss\n";
        csv.precision(17);
        const auto& tl = h.at("train_loss");
        const auto& vl = h.at("validation_loss");
        csv << 0 << ',' << h.at("initial_train_loss").get<double>() << ','
            << h.at("initial_validation_loss").get<double>() << '\n';
        for (std::size_t e = 0; e < tl.size(); ++e) {
            csv << e + 1 << ',' << (tl[e].is_null() ? NAN : tl[e].get<double>()) << ','
                << (vl[e].is_null() ? NAN : vl[e].get<double>()) << '\n';
        }
        write_text_file(dir / "loss.csv", csv.str());
    }
    std::array<std::size_t, 3> total{}, flagged{};
    for (std::size_t i = 0; i < split.size(); ++i) {
        const auto k = static_cast<std::size_t>(split[i].attack_kind);
        ++total[k];
        flagged[k] += probs[i] >= metrics.threshold;
    }
    std::ostringstream csv;
    csv.precision(17);
    csv << "series,value\n";
    csv << "DR," << (metrics.dr ? std::to_string(*metrics.dr) : "") << '\n';
    csv << "FA," << (metrics.fa ? std::to_string(*metrics.fa) : "") << '\n';
    const char* names[3] = {"flagged_clean", "DR_scale", "DR_distribution"};
    for (std::size_t k = 0; k < 3; ++k) {
        csv << names[k] << ','
            << (total[k] ? std::to_string(static_cast<double>(flagged[k]) / total[k]) : "") << '\n';
    }
    write_text_file(dir / "detection.csv", csv.str());
}

int cmd_eval(const EvalArgs& a) {
    const fs::path dir(a.data_dir);
    const data::Dataset ds = data::load_dataset(dir);
    const nn::Checkpoint cp = nn::load_checkpoint(a.model);
    check_compatible(cp, ds);
    const grid::Grid g = dataset_grid(dir, ds.grid_fingerprint);
    const auto& split = ds.splits[split_index(a.split)];

    std::vector<double> probs;
    eval::Metrics metrics;
    with_precision(nn::precision_from_string(a.precision), [&]<typename T>(std::type_identity<T>) {
        const nn::Model<T> model = restore_model<T>(cp, g);
        if (split.empty()) {
            throw InputError("split " + a.split + " is empty");
        }
        probs = nn::predict_batch(model, ds.scaler, split);
    });
    std::vector<std::uint8_t> labels;
    for (const auto& s : split) labels.push_back(s.label);
    metrics = eval::compute_metrics(probs, labels, a.threshold);

    json report = eval::report_json(metrics, std::nullopt);
    report["split"] = a.split;
    report["model"] = nn::to_string(cp.arch.kind);
    std::cout << report.dump(2) << "\n";
    Manifest m;
    m.command = "eval";
    m.config = {{"data_dir", a.data_dir}, {"model", a.model},   {"threshold", a.threshold},
                {"split", a.split},       {"precision", a.precision}};
    add_digest(m.inputs, a.model);
    add_digest(m.inputs, dir / (a.split + ".bin"));
    if (!a.plot_dir.empty()) {
        write_plot_data(a.plot_dir, a.model, metrics, split, probs);
        for (const char* name : {"loss.csv", "detection.csv"}) {
            if (fs::exists(fs::path(a.plot_dir) / name)) add_digest(m.outputs, fs::path(a.plot_dir) / name);
        }
    }
    if (!a.json_out.empty()) {
        write_text_file(a.json_out, report.dump(2) + "\n");
        add_digest(m.outputs, a.json_out);
        write_manifest(sibling(a.json_out, ".manifest.json"), m);
    } else if (!a.plot_dir.empty()) {
        write_manifest(fs::path(a.plot_dir) / "manifest.json", m);
    }
    return 0;
}

// bench -----------------------------------------------------------------------

struct BenchArgs {
    std::string model;
    std::string data_dir;
    std::string grid;
    std::size_t random = 0;
    std::size_t repeat = 1;
    std::size_t warmup = 0;
    std::size_t limit = 0;
    std::optional<std::uint64_t> seed;
    std::string json_out;
    std::string precision = "single";
};

int cmd_bench(const BenchArgs& a) {
    const nn::Checkpoint cp = nn::load_checkpoint(a.model);
    grid::Grid g;
    data::Scaler scaler;
    std::vector<data::Sample> samples;
    Manifest m;
    m.command = "bench";
    add_digest(m.inputs, a.model);

    if (!a.data_dir.empty()) {
        const fs::path dir(a.data_dir);
        data::Dataset ds = data::load_dataset(dir);
        check_compatible(cp, ds);
        g = dataset_grid(dir, ds.grid_fingerprint);
        scaler = ds.scaler;
        samples = std::move(ds.splits[2]);
        add_digest(m.inputs, dir / "test.bin");
    } else if (!a.grid.empty() && a.random > 0) {
        g = load_grid(a.grid);
        if (g.buses.size() != cp.arch.nodes) {
            throw InputError("checkpoint expects " + std::to_string(cp.arch.nodes) +
                             " buses but the grid has " + std::to_string(g.buses.size()));
        }
        add_digest(m.inputs, a.grid);
        const std::size_t n = g.buses.size();
        scaler.n = n;
        scaler.mean.assign(n * data::channels, 0.0);
        scaler.std.assign(n * data::channels, 1.0);
        Rng rng(resolve_seed(a.seed));
        for (std::size_t i = 0; i < a.random; ++i) {
            data::Sample s;
            s.n = n;
            s.features.resize(n * data::channels);
            for (float& f : s.features) f = static_cast<float>(rng.normal());
            samples.push_back(std::move(s));
        }
        m.seeds = {{"input_seed", resolve_seed(a.seed)}};
    } else {
        throw ConfigError("bench needs --data DIR, or --grid FILE with --random N");
    }
    if (a.limit > 0 && samples.size() > a.limit) {
        samples.resize(a.limit);
    }
    if (samples.empty()) {
        throw InputError("no samples to benchmark");
    }

    eval::LatencyReport report;
    with_precision(nn::precision_from_string(a.precision), [&]<typename T>(std::type_identity<T>) {
        const nn::Model<T> model = restore_model<T>(cp, g);
        report = eval::benchmark_inference(model, scaler, samples, a.repeat, a.warmup);
    });

    json doc = {{"model", nn::to_string(cp.arch.kind)},
                {"nodes", cp.arch.nodes},
                {"samples", samples.size()},
                {"repeat", a.repeat},
                {"precision", a.precision},
                {"latency", eval::to_json(report)}};
    std::cout << doc.dump(2) << "\n";
    if (!a.json_out.empty()) {
        write_text_file(a.json_out, doc.dump(2) + "\n");
        m.config = {{"model", a.model},   {"data_dir", a.data_dir}, {"grid", a.grid},
                    {"random", a.random}, {"repeat", a.repeat},     {"warmup", a.warmup},
                    {"limit", a.limit},   {"precision", a.precision}};
        add_digest(m.outputs, a.json_out);
        write_manifest(sibling(a.json_out, ".manifest.json"), m);
    }
    return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
    CLI::App app{"False data injection detection with Chebyshev graph convolutions"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1, 1);

    ConvertArgs convert;
    auto* c = app.add_subcommand("convert", "Convert a MATPOWER case to native grid JSON");
    c->add_option("in", convert.in, "Input case (.m or .json)")->required();
    c->add_option("out", convert.out, "Output JSON path")->required();

    GenArgs gen;
    auto* g = app.add_subcommand("gen", "Generate a labelled measurement dataset");
    g->add_option("grid", gen.grid, "Grid case (.m or .json)")->required();
    g->add_option("out_dir", gen.out_dir, "Output directory")->required();
    g->add_option("--total", gen.config.total, "Number of samples")->capture_default_str();
    g->add_option("--seed", gen.seed, "Master seed (falls back to FDIA_SEED, then 1)");
    g->add_option("--noise", gen.config.noise, "Relative measurement noise level")->capture_default_str();
    g->add_option("--load-lo", gen.config.load_lo, "Lower load scaling factor")->capture_default_str();
    g->add_option("--load-hi", gen.config.load_hi, "Upper load scaling factor")->capture_default_str();
    g->add_option("--scale-lo", gen.config.scale_lo, "Lower scale-attack factor")->capture_default_str();
    g->add_option("--scale-hi", gen.config.scale_hi, "Upper scale-attack factor")->capture_default_str();
    g->add_option("--attack-frac", gen.config.attack_bus_fraction,
                  "Share of buses an attack perturbs (seeded subset below 1)")
        ->capture_default_str();
    g->add_option("--attacked-share", gen.config.attack_fraction,
                  "Share of each split that is attacked")
        ->capture_default_str();
    g->add_option("--splits", gen.splits, "Train,validation,test weights")->capture_default_str();
    g->add_option("--max-retries", gen.config.max_retries, "Redraws per divergent scenario")
        ->capture_default_str();
    g->add_option("--pf-tol", gen.config.solver.tol, "Power flow mismatch tolerance (p.u.)")
        ->capture_default_str();
    g->add_option("--pf-max-iter", gen.config.solver.max_iter, "Power flow iteration cap")
        ->capture_default_str();
    g->add_option("--jobs", gen.jobs, "Worker threads (0 = all cores)")->capture_default_str();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "Train a detector on a generated dataset");
    t->add_option("data_dir", train.data_dir, "Dataset directory written by gen")->required();
    t->add_option("--arch", train.arch, "Model architecture")
        ->check(CLI::IsMember({"cgcn", "fcn"}))
        ->capture_default_str();
    t->add_option("--layers", train.layers, "Hidden layers")->capture_default_str();
    t->add_option("--channels", train.channels, "Hidden width (default 32 for cgcn, 64 for fcn)");
    t->add_option("--order", train.order, "Chebyshev order K (cgcn)")->capture_default_str();
    t->add_option("--batch", train.batch, "Mini-batch size")->capture_default_str();
    t->add_option("--max-epochs", train.max_epochs, "Epoch cap")->capture_default_str();
    t->add_option("--patience", train.patience, "Early-stopping patience in epochs")
        ->capture_default_str();
    t->add_flag("--no-early-stop", train.no_early_stop, "Train for exactly --max-epochs epochs");
    t->add_option("--lr", train.lr, "Adam learning rate")->capture_default_str();
    t->add_option("--seed", train.seed, "Training seed (falls back to FDIA_SEED, then 1)");
    t->add_option("--precision", train.precision, "Arithmetic precision")
        ->check(CLI::IsMember({"single", "double"}))
        ->capture_default_str();
    t->add_option("--out", train.out, "Checkpoint path (default <data_dir>/<arch>.ckpt)");

    EvalArgs ev;
    auto* e = app.add_subcommand("eval", "Report detection rate and false alarms");
    e->add_option("data_dir", ev.data_dir, "Dataset directory")->required();
    e->add_option("model", ev.model, "Checkpoint file")->required();
    e->add_option("--threshold", ev.threshold, "Decision threshold on the attack probability")
        ->capture_default_str();
    e->add_option("--split", ev.split, "Split to evaluate")
        ->check(CLI::IsMember({"train", "validation", "test"}))
        ->capture_default_str();
    e->add_option("--json", ev.json_out, "Also write the report to this file");
    e->add_option("--plot-data", ev.plot_dir, "Write loss and detection CSV series here");
    e->add_option("--precision", ev.precision, "Arithmetic precision")
        ->check(CLI::IsMember({"single", "double"}))
        ->capture_default_str();

    BenchArgs bench;
    auto* b = app.add_subcommand("bench", "Measure per-sample detection latency");
    b->add_option("model", bench.model, "Checkpoint file")->required();
    b->add_option("--data", bench.data_dir, "Dataset directory; its test split is timed");
    b->add_option("--grid", bench.grid, "Grid case for timing on random inputs");
    b->add_option("--random", bench.random, "Number of random input samples (with --grid)");
    b->add_option("--repeat", bench.repeat, "Passes over the samples")->capture_default_str();
    b->add_option("--warmup", bench.warmup, "Leading timings to discard")->capture_default_str();
    b->add_option("--limit", bench.limit, "Use at most this many samples (0 = all)");
    b->add_option("--seed", bench.seed, "Seed for random inputs");
    b->add_option("--json", bench.json_out, "Also write the report to this file");
    b->add_option("--precision", bench.precision, "Arithmetic precision")
        ->check(CLI::IsMember({"single", "double"}))
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (c->parsed()) return cmd_convert(convert);
        if (g->parsed()) return cmd_gen(gen);
        if (t->parsed()) return cmd_train(train);
        if (e->parsed()) return cmd_eval(ev);
        if (b->parsed()) return cmd_bench(bench);
    } catch (const InputError& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 2;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return 1;
    }
    return 2;
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<std::string> storage;
    storage.reserve(args.size() + 1);
    storage.emplace_back("fdia");
    storage.insert(storage.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : storage) argv.push_back(s.data());
    argv.push_back(nullptr);
    return run_cli(static_cast<int>(storage.size()), argv.data());
}

}  // namespace fdia::cli
