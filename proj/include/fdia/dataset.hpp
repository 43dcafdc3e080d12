#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fdia/grid.hpp"
#include "fdia/power_flow.hpp"

namespace fdia::data {

inline constexpr std::size_t channels = 2;  // P and Q injections

enum class AttackKind : std::uint8_t { none = 0, scale = 1, distribution = 2 };

const char* to_string(AttackKind kind) noexcept;

// One measurement snapshot. Features are row-major n x 2 (row = bus,
// columns = P, Q), stored unstandardized in single precision.
struct Sample {
    std::size_t n = 0;
    std::vector<float> features;
    std::uint8_t label = 0;
    AttackKind attack_kind = AttackKind::none;
    std::uint64_t scenario_seed = 0;
    bool degenerate_channel = false;  // distribution attack met a zero-variance channel

    float p(std::size_t bus) const { return features[bus * channels]; }
    float q(std::size_t bus) const { return features[bus * channels + 1]; }
};

struct GenConfig {
    std::size_t total = 36000;
    std::array<double, 3> split_fractions{4.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0};
    double attack_fraction = 0.5;  // share of each split that is attacked
    double load_lo = 0.8;
    double load_hi = 1.2;
    double noise = 0.01;
    double scale_lo = 0.9;
    double scale_hi = 1.1;
    double attack_bus_fraction = 1.0;  // share of buses an attack touches
    std::uint64_t master_seed = 1;
    int max_retries = 8;
    unsigned jobs = 1;
    pf::SolverOptions solver;

    void validate() const;
};

// Per-bus, per-channel standardization fitted on the training split.
struct Scaler {
    std::size_t n = 0;
    std::vector<double> mean;  // n x 2, row-major
    std::vector<double> std;   // n x 2, row-major
    double epsilon = 1e-8;

    void standardize(const float* features, float* out) const;
    void standardize(const float* features, double* out) const;
    std::vector<double> standardize(const Sample& sample) const;
    std::vector<double> unstandardize(std::span<const double> standardized) const;
};

Scaler fit_scaler(const std::vector<Sample>& train);
std::vector<double> apply_scaler(const Scaler& scaler, const Sample& sample);

enum class SplitId { train = 0, validation = 1, test = 2 };
inline constexpr std::array<const char*, 3> split_names{"train", "validation", "test"};

struct SplitCounts {
    std::size_t total = 0;
    std::size_t clean = 0;
    std::size_t scale = 0;
    std::size_t distribution = 0;
};

// Exact sample composition for a configuration; throws ConfigError when infeasible.
std::array<SplitCounts, 3> plan_splits(const GenConfig& config);

struct Dataset {
    std::size_t n = 0;
    std::array<std::vector<Sample>, 3> splits;
    Scaler scaler;
    GenConfig config;
    std::string grid_fingerprint;

    const std::vector<Sample>& train() const { return splits[0]; }
    const std::vector<Sample>& validation() const { return splits[1]; }
    const std::vector<Sample>& test() const { return splits[2]; }
};

struct ScenarioDraw {
    Sample sample;
    std::vector<double> load_factors;
    int retries = 0;
};

class ScenarioError : public Error {
  public:
    using Error::Error;
};

// Scales every bus's load P/Q and generation P by an independent U(lo, hi)
// factor, solves the power flow and adds relative Gaussian noise to the
// resulting injections. Divergent draws are retried with derived seeds.
ScenarioDraw generate_scenario(const grid::Grid& grid, const grid::AdmittanceMatrix& ybus,
                               const GenConfig& config, std::uint64_t scenario_seed);

// Multiplies each targeted entry by an independent U(lo, hi) factor.
Sample apply_scale_attack(const Sample& sample, std::uint64_t attack_seed, double lo = 0.9,
                          double hi = 1.1, double bus_fraction = 1.0);

// Replaces each targeted entry with a draw from N(mu, sigma^2), where mu and
// sigma^2 are the mean and population variance of that channel over all buses.
Sample apply_distribution_attack(const Sample& sample, std::uint64_t attack_seed,
                                 double bus_fraction = 1.0);

// Buses an attack touches: all of them at fraction 1, else a seeded subset.
std::vector<std::size_t> attacked_buses(std::size_t n, std::uint64_t attack_seed, double fraction);

std::string grid_fingerprint(const grid::Grid& grid);

Dataset generate_dataset(const grid::Grid& grid, const GenConfig& config);

// On-disk layout: meta.json + {train,validation,test}.bin (+ grid.json).
inline constexpr std::uint32_t split_format_version = 1;

void write_split_file(const std::filesystem::path& path, const std::vector<Sample>& samples,
                      std::size_t n);
std::vector<Sample> read_split_file(const std::filesystem::path& path);

std::string meta_json(const Dataset& dataset);
void save_dataset(const Dataset& dataset, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace fdia::data
