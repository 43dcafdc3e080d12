#include "fdia/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <thread>

#include <sys/utsname.h>

#include "fdia/error.hpp"
#include "fdia/nn/train.hpp"

namespace fdia::eval {

Metrics compute_metrics(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                        double threshold) {
    if (probabilities.empty()) {
        throw DimensionError("cannot evaluate an empty split");
    }
    if (probabilities.size() != labels.size()) {
        throw DimensionError("probabilities and labels differ in length");
    }
    Metrics m;
    m.threshold = threshold;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        const bool positive = probabilities[i] >= threshold;
        if (labels[i]) {
            positive ? ++m.tp : ++m.fn;
        } else {
            positive ? ++m.fp : ++m.tn;
        }
    }
    if (m.tp + m.fn > 0) {
        m.dr = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    }
    if (m.fp + m.tn > 0) {
        m.fa = static_cast<double>(m.fp) / static_cast<double>(m.fp + m.tn);
    }
    return m;
}

template <typename T>
Metrics evaluate(const nn::Model<T>& model, const data::Scaler& scaler,
                 const std::vector<data::Sample>& split, double threshold) {
    if (split.empty()) {
        throw DimensionError("cannot evaluate an empty split");
    }
    const auto probs = nn::predict_batch(model, scaler, split);
    std::vector<std::uint8_t> labels(split.size());
    for (std::size_t i = 0; i < split.size(); ++i) labels[i] = split[i].label;
    return compute_metrics(probs, labels, threshold);
}

LatencyReport summarize_latencies(std::vector<double> ms, std::size_t warmup) {
    LatencyReport r;
    r.warmup = std::min(warmup, ms.size());
    ms.erase(ms.begin(), ms.begin() + static_cast<std::ptrdiff_t>(r.warmup));
    r.n = ms.size();
    r.host = host_description();
    if (ms.empty()) {
        return r;
    }
    std::sort(ms.begin(), ms.end());
    r.mean_ms = std::accumulate(ms.begin(), ms.end(), 0.0) / static_cast<double>(ms.size());
    r.min_ms = ms.front();
    r.max_ms = ms.back();
    const std::size_t mid = ms.size() / 2;
    r.median_ms = ms.size() % 2 ? ms[mid] : 0.5 * (ms[mid - 1] + ms[mid]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(ms.size())));
    r.p95_ms = ms[std::max<std::size_t>(rank, 1) - 1];
    // Guard the ordering against the mean-of-two median on tiny samples.
    r.p95_ms = std::max(r.p95_ms, r.median_ms);
    r.mean_ms = std::clamp(r.mean_ms, r.min_ms, r.max_ms);
    return r;
}

LatencyReport benchmark_inference(const std::function<void(const data::Sample&)>& detect,
                                  const std::vector<data::Sample>& samples, std::size_t repeats,
                                  std::size_t warmup) {
    if (samples.empty()) {
        throw DimensionError("benchmark needs at least one sample");
    }
    using clock = std::chrono::steady_clock;
    std::vector<double> ms;
    ms.reserve(samples.size() * std::max<std::size_t>(repeats, 1));
    for (std::size_t r = 0; r < std::max<std::size_t>(repeats, 1); ++r) {
        for (const auto& sample : samples) {
            const auto start = clock::now();
            detect(sample);
            const auto stop = clock::now();
            ms.push_back(std::chrono::duration<double, std::milli>(stop - start).count());
        }
    }
    return summarize_latencies(std::move(ms), warmup);
}

template <typename T>
LatencyReport benchmark_inference(const nn::Model<T>& model, const data::Scaler& scaler,
                                  const std::vector<data::Sample>& samples, std::size_t repeats,
                                  std::size_t warmup) {
    volatile double sink = 0.0;
    return benchmark_inference(
        [&](const data::Sample& s) { sink = sink + nn::predict(model, scaler, s); }, samples,
        repeats, warmup);
}

std::string host_description() {
    std::string cpu;
    std::ifstream info("/proc/cpuinfo");
    for (std::string line; std::getline(info, line);) {
        if (line.rfind("model name", 0) == 0) {
            if (auto colon = line.find(':'); colon != std::string::npos) {
                cpu = line.substr(colon + 1);
                cpu.erase(0, cpu.find_first_not_of(' '));
            }
            break;
        }
    }
    utsname uts{};
    std::string os = uname(&uts) == 0 ? std::string(uts.sysname) + " " + uts.release : "unknown";
    return (cpu.empty() ? "unknown cpu" : cpu) + "; " + os + "; " +
           std::to_string(std::thread::hardware_concurrency()) + " hw threads; single-threaded run";
}

nlohmann::json to_json(const Metrics& m) {
    nlohmann::json j = {{"threshold", m.threshold}, {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn}};
    j["dr"] = m.dr ? nlohmann::json(*m.dr) : nlohmann::json(nullptr);
    j["fa"] = m.fa ? nlohmann::json(*m.fa) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json to_json(const LatencyReport& r) {
    return {{"mean_ms", r.mean_ms}, {"median_ms", r.median_ms}, {"p95_ms", r.p95_ms},
            {"min_ms", r.min_ms},   {"max_ms", r.max_ms},       {"n", r.n},
            {"warmup", r.warmup},   {"host", r.host}};
}

nlohmann::json report_json(const Metrics& metrics, const std::optional<LatencyReport>& latency) {
    nlohmann::json j = to_json(metrics);
    if (latency) {
        j["latency"] = to_json(*latency);
    }
    return j;
}

template Metrics evaluate<float>(const nn::Model<float>&, const data::Scaler&, const std::vector<data::Sample>&, double);
template Metrics evaluate<double>(const nn::Model<double>&, const data::Scaler&, const std::vector<data::Sample>&, double);
template LatencyReport benchmark_inference<float>(const nn::Model<float>&, const data::Scaler&, const std::vector<data::Sample>&, std::size_t, std::size_t);
template LatencyReport benchmark_inference<double>(const nn::Model<double>&, const data::Scaler&, const std::vector<data::Sample>&, std::size_t, std::size_t);

}  // namespace fdia::eval
