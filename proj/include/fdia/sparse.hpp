#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <tuple>
#include <vector>

#include "fdia/error.hpp"

namespace fdia {

template <typename T>
struct Triplet {
    std::size_t row;
    std::size_t col;
    T value;
};

// Square compressed-row matrix. Column indices are sorted within each row and
// duplicate (row, col) entries are summed on construction.
template <typename T>
class CsrMatrix {
  public:
    CsrMatrix() : row_ptr_(1, 0) {}

    static CsrMatrix from_triplets(std::size_t n, std::vector<Triplet<T>> entries) {
        std::stable_sort(entries.begin(), entries.end(), [](const Triplet<T>& a, const Triplet<T>& b) {
            return std::tie(a.row, a.col) < std::tie(b.row, b.col);
        });
        CsrMatrix m;
        m.n_ = n;
        m.row_ptr_.assign(n + 1, 0);
        for (std::size_t k = 0; k < entries.size(); ++k) {
            const auto& e = entries[k];
            if (e.row >= n || e.col >= n) {
                throw DimensionError("sparse entry out of range");
            }
            if (!m.col_idx_.empty() && k > 0 && entries[k - 1].row == e.row &&
                entries[k - 1].col == e.col) {
                m.values_.back() += e.value;
                continue;
            }
            m.col_idx_.push_back(e.col);
            m.values_.push_back(e.value);
            ++m.row_ptr_[e.row + 1];
        }
        for (std::size_t i = 0; i < n; ++i) {
            m.row_ptr_[i + 1] += m.row_ptr_[i];
        }
        return m;
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t nnz() const noexcept { return values_.size(); }

    std::span<const std::size_t> row_ptr() const noexcept { return row_ptr_; }
    std::span<const std::size_t> col_idx() const noexcept { return col_idx_; }
    std::span<const T> values() const noexcept { return values_; }

    // Value at (i, j), zero when not stored.
    T at(std::size_t i, std::size_t j) const {
        auto first = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i]);
        auto last = col_idx_.begin() + static_cast<std::ptrdiff_t>(row_ptr_[i + 1]);
        auto it = std::lower_bound(first, last, j);
        if (it == last || *it != j) {
            return T{};
        }
        return values_[static_cast<std::size_t>(it - col_idx_.begin())];
    }

    template <typename F>
    void for_each_in_row(std::size_t i, F&& f) const {
        for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
            f(col_idx_[p], values_[p]);
        }
    }

    void multiply(std::span<const T> x, std::span<T> y) const {
        if (x.size() != n_ || y.size() != n_) {
            throw DimensionError("matvec dimension mismatch");
        }
        for (std::size_t i = 0; i < n_; ++i) {
            T acc{};
            for (std::size_t p = row_ptr_[i]; p < row_ptr_[i + 1]; ++p) {
                acc += values_[p] * x[col_idx_[p]];
            }
            y[i] = acc;
        }
    }

    // Dense copy, row-major.
    std::vector<T> dense() const {
        std::vector<T> d(n_ * n_, T{});
        for (std::size_t i = 0; i < n_; ++i) {
            for_each_in_row(i, [&](std::size_t j, const T& v) { d[i * n_ + j] = v; });
        }
        return d;
    }

    template <typename U, typename F>
    CsrMatrix<U> transform(F&& f) const {
        CsrMatrix<U> out;
        out.n_ = n_;
        out.row_ptr_ = row_ptr_;
        out.col_idx_ = col_idx_;
        out.values_.reserve(values_.size());
        for (const auto& v : values_) {
            out.values_.push_back(f(v));
        }
        return out;
    }

  private:
    template <typename>
    friend class CsrMatrix;

    std::size_t n_ = 0;
    std::vector<std::size_t> row_ptr_;
    std::vector<std::size_t> col_idx_;
    std::vector<T> values_;
};

}  // namespace fdia
