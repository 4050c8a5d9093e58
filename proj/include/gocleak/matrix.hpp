#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gocleak/simd/kernels.hpp"

namespace gocleak {

using Vector = std::vector<double>;

// Row-major dense matrix. Sized for the small (tens of states) chains this
// library works with.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    const double* data() const { return data_.data(); }

    Matrix transposed() const {
        Matrix t(cols_, rows_);
        for (std::size_t r = 0; r < rows_; ++r)
            for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
        return t;
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// out = x * m (row vector times matrix).
inline void vec_mat(std::span<const double> x, const Matrix& m, std::span<double> out) {
    simd::active_kernels().vec_mat(x.data(), m.data(), m.rows(), m.cols(), m.cols(), out.data());
}

inline Vector vec_mat(std::span<const double> x, const Matrix& m) {
    Vector out(m.cols());
    vec_mat(x, m, out);
    return out;
}

// a * b
inline Matrix mat_mul(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) vec_mat(a.row(r), b, out.row(r));
    return out;
}

}  // namespace gocleak
