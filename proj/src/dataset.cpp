#include "fdia/dataset.hpp"

#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "fdia/case_ingest.hpp"
#include "fdia/digest.hpp"
#include "fdia/error.hpp"
#include "fdia/random.hpp"

namespace fdia::data {
namespace {

using nlohmann::json;

constexpr std::uint64_t attack_stream = 0xa77ac;
constexpr std::uint64_t subset_stream = 0xb05;
constexpr std::uint64_t retry_stream = 0x7e7;
constexpr std::uint64_t shuffle_stream = 0x5117;

}  // namespace

const char* to_string(AttackKind kind) noexcept {
    switch (kind) {
        case AttackKind::none: return "none";
        case AttackKind::scale: return "scale";
        case AttackKind::distribution: return "distribution";
    }
    return "none";
}

void GenConfig::validate() const {
    if (total < 6) {
        throw ConfigError("total must be at least 6 samples, got " + std::to_string(total));
    }
    double sum = 0.0;
    for (double f : split_fractions) {
        if (!(f > 0.0 && f < 1.0)) {
            throw ConfigError("split fractions must lie strictly between 0 and 1");
        }
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
        throw ConfigError("split fractions must sum to 1");
    }
    if (!(attack_fraction >= 0.0 && attack_fraction <= 1.0)) {
        throw ConfigError("attack fraction must lie in [0, 1]");
    }
    if (!(load_lo >= 0.0 && load_lo <= load_hi)) {
        throw ConfigError("load scale bounds must satisfy 0 <= lo <= hi");
    }
    if (!(scale_lo <= scale_hi)) {
        throw ConfigError("scale-attack bounds must satisfy lo <= hi");
    }
    if (!(noise >= 0.0)) {
        throw ConfigError("noise level must be nonnegative");
    }
    if (!(attack_bus_fraction > 0.0 && attack_bus_fraction <= 1.0)) {
        throw ConfigError("attack bus fraction must lie in (0, 1]");
    }
    if (max_retries < 0 || jobs < 1) {
        throw ConfigError("retries must be nonnegative and jobs positive");
    }
}

std::array<SplitCounts, 3> plan_splits(const GenConfig& config) {
    config.validate();
    std::array<SplitCounts, 3> plan{};
    const auto total = static_cast<double>(config.total);
    plan[1].total = static_cast<std::size_t>(std::llround(total * config.split_fractions[1]));
    plan[2].total = static_cast<std::size_t>(std::llround(total * config.split_fractions[2]));
    if (plan[1].total + plan[2].total >= config.total) {
        throw ConfigError("split fractions leave no training samples");
    }
    plan[0].total = config.total - plan[1].total - plan[2].total;
    for (std::size_t s = 0; s < 3; ++s) {
        SplitCounts& c = plan[s];
        if (c.total == 0) {
            throw ConfigError(std::string(split_names[s]) + " split would be empty");
        }
        const auto attacked = static_cast<std::size_t>(
            std::floor(static_cast<double>(c.total) * config.attack_fraction + 1e-9));
        c.clean = c.total - attacked;
        c.scale = attacked / 2;
        c.distribution = attacked - c.scale;
    }
    return plan;
}

void Scaler::standardize(const float* features, float* out) const {
    for (std::size_t k = 0; k < n * channels; ++k) {
        out[k] = static_cast<float>((features[k] - mean[k]) / std::max(std[k], epsilon));
    }
}

void Scaler::standardize(const float* features, double* out) const {
    for (std::size_t k = 0; k < n * channels; ++k) {
        out[k] = (features[k] - mean[k]) / std::max(std[k], epsilon);
    }
}

std::vector<double> Scaler::standardize(const Sample& sample) const {
    if (sample.n != n) {
        throw DimensionError("sample bus count does not match the scaler");
    }
    std::vector<double> out(n * channels);
    standardize(sample.features.data(), out.data());
    return out;
}

std::vector<double> Scaler::unstandardize(std::span<const double> standardized) const {
    if (standardized.size() != n * channels) {
        throw DimensionError("feature vector does not match the scaler");
    }
    std::vector<double> out(standardized.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = standardized[k] * std::max(std[k], epsilon) + mean[k];
    }
    return out;
}

Scaler fit_scaler(const std::vector<Sample>& train) {
    if (train.empty()) {
        throw ConfigError("cannot fit a scaler on an empty split");
    }
    Scaler s;
    s.n = train.front().n;
    const std::size_t width = s.n * channels;
    s.mean.assign(width, 0.0);
    s.std.assign(width, 0.0);
    for (const Sample& sample : train) {
        if (sample.n != s.n) {
            throw DimensionError("training samples disagree on bus count");
        }
        for (std::size_t k = 0; k < width; ++k) {
            s.mean[k] += sample.features[k];
        }
    }
    const auto count = static_cast<double>(train.size());
    for (auto& m : s.mean) m /= count;
    for (const Sample& sample : train) {
        for (std::size_t k = 0; k < width; ++k) {
            const double d = sample.features[k] - s.mean[k];
            s.std[k] += d * d;
        }
    }
    for (auto& v : s.std) v = std::sqrt(v / count);
    return s;
}

std::vector<double> apply_scaler(const Scaler& scaler, const Sample& sample) {
    return scaler.standardize(sample);
}

ScenarioDraw generate_scenario(const grid::Grid& grid, const grid::AdmittanceMatrix& ybus,
                               const GenConfig& config, std::uint64_t scenario_seed) {
    const std::size_t n = grid.size();
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
        const std::uint64_t seed =
            attempt == 0 ? scenario_seed : derive_seed(scenario_seed, retry_stream + static_cast<std::uint64_t>(attempt));
        Rng rng(seed);
        ScenarioDraw draw;
        draw.retries = attempt;
        draw.load_factors.resize(n);
        grid::Grid scaled = grid;
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform(config.load_lo, config.load_hi);
            draw.load_factors[i] = u;
            scaled.buses[i].p_load *= u;
            scaled.buses[i].q_load *= u;
        }
        for (auto& gen : scaled.gens) {
            gen.p_gen *= draw.load_factors[gen.bus];
        }
        pf::PFSolution solution;
        try {
            solution = pf::solve_ac_power_flow(scaled, ybus, config.solver);
        } catch (const pf::DivergenceError&) {
            continue;
        } catch (const pf::SingularJacobianError&) {
            continue;
        }
        const auto inj = pf::compute_injections(solution.v, solution.theta, ybus);
        Sample& s = draw.sample;
        s.n = n;
        s.scenario_seed = scenario_seed;
        s.features.resize(n * channels);
        for (std::size_t i = 0; i < n; ++i) {
            const double p = inj.p[i] + rng.normal() * config.noise * std::abs(inj.p[i]);
            const double q = inj.q[i] + rng.normal() * config.noise * std::abs(inj.q[i]);
            s.features[i * channels] = static_cast<float>(p);
            s.features[i * channels + 1] = static_cast<float>(q);
        }
        return draw;
    }
    throw ScenarioError("scenario " + std::to_string(scenario_seed) + " diverged after " +
                        std::to_string(config.max_retries + 1) + " attempts");
}

std::vector<std::size_t> attacked_buses(std::size_t n, std::uint64_t attack_seed, double fraction) {
    std::vector<std::size_t> buses(n);
    for (std::size_t i = 0; i < n; ++i) buses[i] = i;
    if (fraction >= 1.0) {
        return buses;
    }
    const auto count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    Rng rng(derive_seed(attack_seed, subset_stream));
    rng.shuffle(buses.begin(), buses.end());
    buses.resize(std::min(count, n));
    std::sort(buses.begin(), buses.end());
    return buses;
}

Sample apply_scale_attack(const Sample& sample, std::uint64_t attack_seed, double lo, double hi,
                          double bus_fraction) {
    Sample out = sample;
    Rng rng(attack_seed);
    for (std::size_t bus : attacked_buses(sample.n, attack_seed, bus_fraction)) {
        for (std::size_t c = 0; c < channels; ++c) {
            float& z = out.features[bus * channels + c];
            z = static_cast<float>(static_cast<double>(z) * rng.uniform(lo, hi));
        }
    }
    out.label = 1;
    out.attack_kind = AttackKind::scale;
    return out;
}

Sample apply_distribution_attack(const Sample& sample, std::uint64_t attack_seed,
                                 double bus_fraction) {
    if (sample.n < 2) {
        throw DimensionError("distribution attack needs at least two buses");
    }
    Sample out = sample;
    Rng rng(attack_seed);
    const auto targets = attacked_buses(sample.n, attack_seed, bus_fraction);
    const auto count = static_cast<double>(sample.n);
    for (std::size_t c = 0; c < channels; ++c) {
        double mean = 0.0;
        for (std::size_t i = 0; i < sample.n; ++i) mean += sample.features[i * channels + c];
        mean /= count;
        double var = 0.0;
        for (std::size_t i = 0; i < sample.n; ++i) {
            const double d = sample.features[i * channels + c] - mean;
            var += d * d;
        }
        var /= count;
        const double stddev = std::sqrt(var);
        if (var == 0.0) {
            out.degenerate_channel = true;
        }
        for (std::size_t bus : targets) {
            const double value = (var == 0.0) ? mean : rng.normal(mean, stddev);
            out.features[bus * channels + c] = static_cast<float>(value);
        }
    }
    out.label = 1;
    out.attack_kind = AttackKind::distribution;
    return out;
}

std::string grid_fingerprint(const grid::Grid& grid) {
    return sha256_hex(ingest::write_grid_json(grid));
}

Dataset generate_dataset(const grid::Grid& grid, const GenConfig& config) {
    const auto plan = plan_splits(config);
    const auto ybus = grid::build_ybus(grid);

    std::vector<AttackKind> kinds;
    kinds.reserve(config.total);
    for (const auto& c : plan) {
        kinds.insert(kinds.end(), c.clean, AttackKind::none);
        kinds.insert(kinds.end(), c.scale, AttackKind::scale);
        kinds.insert(kinds.end(), c.distribution, AttackKind::distribution);
    }

    std::vector<Sample> samples(config.total);
    std::atomic<std::size_t> next{0};
    std::atomic<std::size_t> failures{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < config.total; i = next.fetch_add(1)) {
            try {
                const std::uint64_t seed = derive_seed(config.master_seed, i);
                Sample s = generate_scenario(grid, ybus, config, seed).sample;
                const std::uint64_t attack_seed = derive_seed(seed, attack_stream);
                switch (kinds[i]) {
                    case AttackKind::none: break;
                    case AttackKind::scale:
                        s = apply_scale_attack(s, attack_seed, config.scale_lo, config.scale_hi,
                                               config.attack_bus_fraction);
                        break;
                    case AttackKind::distribution:
                        s = apply_distribution_attack(s, attack_seed, config.attack_bus_fraction);
                        break;
                }
                samples[i] = std::move(s);
            } catch (const ScenarioError&) {
                ++failures;
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        }
    };
    const unsigned jobs = std::max(1u, config.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
    if (failures > 0) {
        throw ScenarioError(std::to_string(failures.load()) + " of " + std::to_string(config.total) +
                            " scenarios diverged beyond the retry budget");
    }

    Dataset ds;
    ds.n = grid.size();
    ds.config = config;
    ds.grid_fingerprint = grid_fingerprint(grid);
    std::size_t offset = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        auto first = samples.begin() + static_cast<std::ptrdiff_t>(offset);
        auto last = first + static_cast<std::ptrdiff_t>(plan[s].total);
        Rng rng(derive_seed(config.master_seed, shuffle_stream + s));
        rng.shuffle(first, last);
        ds.splits[s].assign(std::make_move_iterator(first), std::make_move_iterator(last));
        offset += plan[s].total;
    }
    ds.scaler = fit_scaler(ds.splits[0]);
    return ds;
}

namespace {

void put_u32(std::string& buf, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_u64(std::string& buf, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

class ByteReader {
  public:
    ByteReader(std::string bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

    std::uint64_t uint(int width) {
        need(static_cast<std::size_t>(width));
        std::uint64_t v = 0;
        for (int b = 0; b < width; ++b) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(b)])) << (8 * b);
        }
        pos_ += static_cast<std::size_t>(width);
        return v;
    }

    std::string raw(std::size_t count) {
        need(count);
        std::string s = bytes_.substr(pos_, count);
        pos_ += count;
        return s;
    }

    bool at_end() const { return pos_ == bytes_.size(); }

  private:
    void need(std::size_t count) const {
        if (pos_ + count > bytes_.size()) {
            throw InputError(origin_ + ": truncated file");
        }
    }

    std::string bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

}  // namespace

void write_split_file(const std::filesystem::path& path, const std::vector<Sample>& samples,
                      std::size_t n) {
    std::string buf = "FDIA";
    put_u32(buf, split_format_version);
    put_u32(buf, static_cast<std::uint32_t>(n));
    put_u32(buf, static_cast<std::uint32_t>(channels));
    put_u64(buf, samples.size());
    buf.reserve(buf.size() + samples.size() * (n * channels * 4 + 2));
    for (const Sample& s : samples) {
        if (s.n != n || s.features.size() != n * channels) {
            throw DimensionError("sample does not match split bus count");
        }
        for (float f : s.features) put_u32(buf, std::bit_cast<std::uint32_t>(f));
    }
    for (const Sample& s : samples) buf.push_back(static_cast<char>(s.label));
    for (const Sample& s : samples) buf.push_back(static_cast<char>(s.attack_kind));
    write_text_file(path, buf);
}

std::vector<Sample> read_split_file(const std::filesystem::path& path) {
    ByteReader in(read_text_file(path), path.string());
    if (in.raw(4) != "FDIA") {
        throw InputError(path.string() + ": bad magic");
    }
    if (in.uint(4) != split_format_version) {
        throw InputError(path.string() + ": unsupported version");
    }
    const auto n = static_cast<std::size_t>(in.uint(4));
    if (in.uint(4) != channels) {
        throw InputError(path.string() + ": unexpected channel count");
    }
    const auto count = static_cast<std::size_t>(in.uint(8));
    std::vector<Sample> samples(count);
    for (auto& s : samples) {
        s.n = n;
        s.features.resize(n * channels);
        for (auto& f : s.features) f = std::bit_cast<float>(static_cast<std::uint32_t>(in.uint(4)));
    }
    for (auto& s : samples) s.label = static_cast<std::uint8_t>(in.uint(1));
    for (auto& s : samples) {
        const auto kind = in.uint(1);
        if (kind > 2) {
            throw InputError(path.string() + ": invalid attack kind");
        }
        s.attack_kind = static_cast<AttackKind>(kind);
        if ((s.label == 1) != (s.attack_kind != AttackKind::none)) {
            throw InputError(path.string() + ": label disagrees with attack kind");
        }
    }
    if (!in.at_end()) {
        throw InputError(path.string() + ": trailing bytes");
    }
    return samples;
}

namespace {

json config_to_json(const GenConfig& c) {
    return {{"total", c.total},
            {"split_fractions", c.split_fractions},
            {"attack_fraction", c.attack_fraction},
            {"load_lo", c.load_lo},
            {"load_hi", c.load_hi},
            {"noise", c.noise},
            {"scale_lo", c.scale_lo},
            {"scale_hi", c.scale_hi},
            {"attack_bus_fraction", c.attack_bus_fraction},
            {"master_seed", c.master_seed},
            {"max_retries", c.max_retries},
            {"solver", {{"tol", c.solver.tol}, {"max_iter", c.solver.max_iter}, {"flat_start", c.solver.flat_start}}}};
}

GenConfig config_from_json(const json& j) {
    GenConfig c;
    c.total = j.at("total").get<std::size_t>();
    c.split_fractions = j.at("split_fractions").get<std::array<double, 3>>();
    c.attack_fraction = j.at("attack_fraction").get<double>();
    c.load_lo = j.at("load_lo").get<double>();
    c.load_hi = j.at("load_hi").get<double>();
    c.noise = j.at("noise").get<double>();
    c.scale_lo = j.at("scale_lo").get<double>();
    c.scale_hi = j.at("scale_hi").get<double>();
    c.attack_bus_fraction = j.at("attack_bus_fraction").get<double>();
    c.master_seed = j.at("master_seed").get<std::uint64_t>();
    c.max_retries = j.at("max_retries").get<int>();
    const json& solver = j.at("solver");
    c.solver.tol = solver.at("tol").get<double>();
    c.solver.max_iter = solver.at("max_iter").get<int>();
    c.solver.flat_start = solver.at("flat_start").get<bool>();
    return c;
}

}  // namespace

std::string meta_json(const Dataset& ds) {
    json counts;
    for (std::size_t s = 0; s < 3; ++s) {
        std::size_t clean = 0, scale = 0, dist = 0;
        for (const Sample& x : ds.splits[s]) {
            if (x.attack_kind == AttackKind::none) ++clean;
            if (x.attack_kind == AttackKind::scale) ++scale;
            if (x.attack_kind == AttackKind::distribution) ++dist;
        }
        counts[split_names[s]] = {{"total", ds.splits[s].size()},
                                  {"clean", clean},
                                  {"scale", scale},
                                  {"distribution", dist}};
    }
    json meta = {{"format_version", split_format_version},
                 {"n", ds.n},
                 {"channels", channels},
                 {"grid_fingerprint", ds.grid_fingerprint},
                 {"config", config_to_json(ds.config)},
                 {"counts", counts},
                 {"scaler", {{"mean", ds.scaler.mean}, {"std", ds.scaler.std}, {"epsilon", ds.scaler.epsilon}}},
                 {"files", {{"train", "train.bin"}, {"validation", "validation.bin"}, {"test", "test.bin"}}}};
    return meta.dump(2) + "\n";
}

void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (std::size_t s = 0; s < 3; ++s) {
        write_split_file(dir / (std::string(split_names[s]) + ".bin"), ds.splits[s], ds.n);
    }
    write_text_file(dir / "meta.json", meta_json(ds));
}

Dataset load_dataset(const std::filesystem::path& dir) {
    json meta;
    try {
        meta = json::parse(read_text_file(dir / "meta.json"));
    } catch (const json::exception& e) {
        throw InputError((dir / "meta.json").string() + ": " + e.what());
    }
    Dataset ds;
    try {
        if (meta.at("format_version").get<std::uint32_t>() != split_format_version) {
            throw InputError("unsupported dataset format version");
        }
        ds.n = meta.at("n").get<std::size_t>();
        ds.grid_fingerprint = meta.at("grid_fingerprint").get<std::string>();
        ds.config = config_from_json(meta.at("config"));
        ds.scaler.n = ds.n;
        ds.scaler.mean = meta.at("scaler").at("mean").get<std::vector<double>>();
        ds.scaler.std = meta.at("scaler").at("std").get<std::vector<double>>();
        ds.scaler.epsilon = meta.at("scaler").at("epsilon").get<double>();
    } catch (const json::exception& e) {
        throw InputError((dir / "meta.json").string() + ": " + e.what());
    }
    if (ds.scaler.mean.size() != ds.n * channels || ds.scaler.std.size() != ds.n * channels) {
        throw InputError("scaler arrays do not match n");
    }
    for (std::size_t s = 0; s < 3; ++s) {
        ds.splits[s] = read_split_file(dir / (std::string(split_names[s]) + ".bin"));
        for (const Sample& x : ds.splits[s]) {
            if (x.n != ds.n) {
                throw InputError(std::string(split_names[s]) + ".bin bus count disagrees with meta.json");
            }
        }
    }
    return ds;
}

}  // namespace fdia::data
