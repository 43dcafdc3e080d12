#include "fdia/spectral.hpp"

#include <cmath>
#include <numeric>

#include "fdia/error.hpp"
#include "fdia/random.hpp"

namespace fdia::spectral {
namespace {
thread_local std::uint64_t matvec_counter = 0;
}

std::uint64_t laplacian_matvec_count() noexcept { return matvec_counter; }
void reset_laplacian_matvec_count() noexcept { matvec_counter = 0; }
void detail::add_matvecs(std::uint64_t count) noexcept { matvec_counter += count; }

NormalizedLaplacian::NormalizedLaplacian(const grid::WeightedGraph& graph) {
    const std::size_t n = graph.size();
    const auto& deg = graph.degrees();
    std::vector<double> inv_sqrt(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(deg[i] > 0.0)) {
            throw ValidationError("vertex " + std::to_string(i) +
                                  " has zero degree; normalized Laplacian undefined");
        }
        inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
    }
    std::vector<Triplet<double>> entries;
    entries.reserve(graph.weights().nnz() + n);
    for (std::size_t i = 0; i < n; ++i) {
        entries.push_back({i, i, 1.0});
        graph.weights().for_each_in_row(i, [&](std::size_t j, double w) {
            entries.push_back({i, j, -w * (inv_sqrt[i] * inv_sqrt[j])});
        });
    }
    matrix_ = CsrMatrix<double>::from_triplets(n, std::move(entries));
}

NormalizedLaplacian normalized_laplacian(const grid::WeightedGraph& graph) {
    return NormalizedLaplacian(graph);
}

LambdaEstimate estimate_lambda_max(const NormalizedLaplacian& laplacian,
                                   const PowerIterationOptions& options) {
    const std::size_t n = laplacian.size();
    const auto& m = laplacian.matrix();
    LambdaEstimate est;
    if (n == 0) {
        est.fallback = true;
        return est;
    }
    Rng rng(options.seed);
    std::vector<double> x(n);
    std::vector<double> y(n);
    for (auto& xi : x) {
        xi = rng.uniform(-1.0, 1.0);
    }
    auto normalize = [](std::vector<double>& v) {
        const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
        if (norm > 0.0) {
            for (auto& vi : v) vi /= norm;
        }
        return norm;
    };
    normalize(x);
    for (int it = 1; it <= options.max_iter; ++it) {
        m.multiply(x, y);
        const double rayleigh = std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
        // Residual ||Lx - rx|| bounds the distance from rayleigh to the spectrum.
        double residual = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double r = y[i] - rayleigh * x[i];
            residual += r * r;
        }
        residual = std::sqrt(residual);
        if (normalize(y) == 0.0) {
            break;
        }
        x.swap(y);
        if (rayleigh > 0.0 && residual <= options.tol * rayleigh) {
            est.value = std::min(rayleigh, 2.0);
            est.iterations = it;
            return est;
        }
    }
    est.value = 2.0;
    est.iterations = options.max_iter;
    est.fallback = true;
    return est;
}

ScaledLaplacian::ScaledLaplacian(const NormalizedLaplacian& laplacian, double lambda_max)
    : lambda_max_(lambda_max) {
    if (!(lambda_max > 0.0) || !std::isfinite(lambda_max)) {
        throw ValidationError("lambda_max must be positive");
    }
    const std::size_t n = laplacian.size();
    std::vector<Triplet<double>> entries;
    entries.reserve(laplacian.matrix().nnz() + n);
    for (std::size_t i = 0; i < n; ++i) {
        entries.push_back({i, i, -1.0});
        laplacian.matrix().for_each_in_row(i, [&](std::size_t j, double v) {
            entries.push_back({i, j, 2.0 * v / lambda_max});
        });
    }
    matrix_ = CsrMatrix<double>::from_triplets(n, std::move(entries));
}

void ScaledLaplacian::apply(std::span<const double> x, std::span<double> y) const {
    matrix_.multiply(x, y);
    detail::add_matvecs(1);
}

ScaledLaplacian scale_laplacian(const NormalizedLaplacian& laplacian, double lambda_max) {
    return ScaledLaplacian(laplacian, lambda_max);
}

ScaledLaplacian scaled_laplacian_for(const grid::WeightedGraph& graph,
                                     const PowerIterationOptions& options) {
    const NormalizedLaplacian lap(graph);
    return ScaledLaplacian(lap, estimate_lambda_max(lap, options).value);
}

double cheb_eval_scalar(int k, double x) {
    if (k < 0) {
        throw DimensionError("Chebyshev order must be nonnegative");
    }
    if (k == 0) {
        return 1.0;
    }
    double prev = 1.0;
    double cur = x;
    for (int i = 2; i <= k; ++i) {
        const double next = 2.0 * x * cur - prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

std::vector<double> cheb_filter_apply(const ScaledLaplacian& laplacian, const ChebCoeffs& coeffs,
                                      std::span<const double> x) {
    const std::size_t n = laplacian.size();
    const std::size_t order = coeffs.order();
    if (order < 1) {
        throw DimensionError("Chebyshev filter needs at least one coefficient");
    }
    if (x.size() != n) {
        throw DimensionError("signal length does not match the Laplacian");
    }
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] = coeffs.theta[0] * x[i];
    }
    if (order == 1) {
        return y;
    }
    std::vector<double> prev(x.begin(), x.end());
    std::vector<double> cur(n);
    laplacian.apply(prev, cur);
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += coeffs.theta[1] * cur[i];
    }
    std::vector<double> next(n);
    for (std::size_t k = 2; k < order; ++k) {
        laplacian.apply(cur, next);
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = 2.0 * next[i] - prev[i];
            y[i] += coeffs.theta[k] * next[i];
        }
        prev.swap(cur);
        cur.swap(next);
    }
    return y;
}

}  // namespace fdia::spectral
