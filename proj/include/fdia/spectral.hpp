#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fdia/grid.hpp"
#include "fdia/sparse.hpp"

namespace fdia::spectral {

// Thread-local count of scaled-Laplacian products, one per filtered column.
std::uint64_t laplacian_matvec_count() noexcept;
void reset_laplacian_matvec_count() noexcept;

namespace detail {
void add_matvecs(std::uint64_t count) noexcept;
}

// L = I - D^{-1/2} W D^{-1/2}.
class NormalizedLaplacian {
  public:
    explicit NormalizedLaplacian(const grid::WeightedGraph& graph);

    std::size_t size() const noexcept { return matrix_.size(); }
    const CsrMatrix<double>& matrix() const noexcept { return matrix_; }

  private:
    CsrMatrix<double> matrix_;
};

NormalizedLaplacian normalized_laplacian(const grid::WeightedGraph& graph);

struct PowerIterationOptions {
    double tol = 1e-6;
    int max_iter = 20000;
    std::uint64_t seed = 0x5eed;
};

struct LambdaEstimate {
    double value = 2.0;
    int iterations = 0;
    bool fallback = false;  // true when the analytic bound 2 was returned
};

LambdaEstimate estimate_lambda_max(const NormalizedLaplacian& laplacian,
                                   const PowerIterationOptions& options = {});

// 2 L / lambda_max - I.
class ScaledLaplacian {
  public:
    ScaledLaplacian(const NormalizedLaplacian& laplacian, double lambda_max);

    std::size_t size() const noexcept { return matrix_.size(); }
    double lambda_max() const noexcept { return lambda_max_; }
    const CsrMatrix<double>& matrix() const noexcept { return matrix_; }

    // y = L~ x; counts one product.
    void apply(std::span<const double> x, std::span<double> y) const;

  private:
    CsrMatrix<double> matrix_;
    double lambda_max_;
};

ScaledLaplacian scale_laplacian(const NormalizedLaplacian& laplacian, double lambda_max);

// Convenience: graph -> normalized Laplacian -> power-iteration estimate -> scaled.
ScaledLaplacian scaled_laplacian_for(const grid::WeightedGraph& graph,
                                     const PowerIterationOptions& options = {});

double cheb_eval_scalar(int k, double x);

struct ChebCoeffs {
    std::vector<double> theta;

    std::size_t order() const noexcept { return theta.size(); }
};

// y = sum_k theta_k T_k(L~) x via the three-term recursion, K-1 products of L~.
std::vector<double> cheb_filter_apply(const ScaledLaplacian& laplacian, const ChebCoeffs& coeffs,
                                      std::span<const double> x);

// out[i, c] = scale * sum_j M[i, j] in[j, c] + beta * out[i, c] for c < cols, where
// in and out are row-major with leading dimensions ld_in and ld_out. Counts
// `cols` products.
template <typename T>
void multiply_columns(const CsrMatrix<T>& m, const T* in, std::size_t ld_in, T* out,
                      std::size_t ld_out, std::size_t cols, T scale, T beta) {
    const auto row_ptr = m.row_ptr();
    const auto col_idx = m.col_idx();
    const auto values = m.values();
    std::vector<T> acc(cols);
    for (std::size_t i = 0; i < m.size(); ++i) {
        std::fill(acc.begin(), acc.end(), T{});
        for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
            const T w = values[p];
            const T* src = in + col_idx[p] * ld_in;
            for (std::size_t c = 0; c < cols; ++c) {
                acc[c] += w * src[c];
            }
        }
        T* dst = out + i * ld_out;
        if (beta == T{}) {
            for (std::size_t c = 0; c < cols; ++c) dst[c] = scale * acc[c];
        } else {
            for (std::size_t c = 0; c < cols; ++c) dst[c] = scale * acc[c] + beta * dst[c];
        }
    }
    detail::add_matvecs(cols);
}

}  // namespace fdia::spectral
