#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdia/dataset.hpp"
#include "fdia/nn/model.hpp"

namespace fdia::eval {

struct Metrics {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
    std::optional<double> dr;  // TP / (TP + FN), absent without positives
    std::optional<double> fa;  // FP / (FP + TN), absent without negatives
    double threshold = 0.5;

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
    double accuracy() const noexcept {
        return total() ? static_cast<double>(tp + tn) / static_cast<double>(total()) : 0.0;
    }
};

// A prediction is positive iff probability >= threshold.
Metrics compute_metrics(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                        double threshold = 0.5);

template <typename T>
Metrics evaluate(const nn::Model<T>& model, const data::Scaler& scaler,
                 const std::vector<data::Sample>& split, double threshold = 0.5);

struct LatencyReport {
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    double min_ms = 0.0;
    double max_ms = 0.0;
    std::size_t n = 0;
    std::size_t warmup = 0;
    std::string host;
};

LatencyReport summarize_latencies(std::vector<double> milliseconds, std::size_t warmup = 0);

// Times detect() once per sample per repeat on a monotonic clock; the first
// `warmup` timings are dropped.
LatencyReport benchmark_inference(const std::function<void(const data::Sample&)>& detect,
                                  const std::vector<data::Sample>& samples, std::size_t repeats,
                                  std::size_t warmup = 0);

template <typename T>
LatencyReport benchmark_inference(const nn::Model<T>& model, const data::Scaler& scaler,
                                  const std::vector<data::Sample>& samples, std::size_t repeats,
                                  std::size_t warmup = 0);

std::string host_description();

nlohmann::json to_json(const Metrics& metrics);
nlohmann::json to_json(const LatencyReport& latency);

// Combined report document; latency omitted when not measured.
nlohmann::json report_json(const Metrics& metrics, const std::optional<LatencyReport>& latency);

}  // namespace fdia::eval
