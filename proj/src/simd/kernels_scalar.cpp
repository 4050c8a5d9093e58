#include "gocleak/simd/kernels.hpp"

#include "kernels_internal.hpp"

namespace gocleak::simd {
namespace {

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double p = a * x[i];
        y[i] = y[i] + p;
    }
}

void vec_mat_scalar(const double* x, const double* m, std::size_t rows, std::size_t cols,
                    std::size_t stride, double* y) {
    for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        if (x[i] == 0.0) continue;
        axpy_scalar(x[i], m + i * stride, y, cols);
    }
}

void hadamard_scalar(const double* a, const double* b, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

void scale_scalar(double a, double* x, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double sum_scalar(const double* x, std::size_t n) {
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s[0] += x[i];
        s[1] += x[i + 1];
        s[2] += x[i + 2];
        s[3] += x[i + 3];
    }
    double total = (s[0] + s[1]) + (s[2] + s[3]);
    for (; i < n; ++i) total += x[i];
    return total;
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (std::size_t l = 0; l < 4; ++l) {
            const double p = a[i + l] * b[i + l];
            s[l] = s[l] + p;
        }
    }
    double total = (s[0] + s[1]) + (s[2] + s[3]);
    for (; i < n; ++i) {
        const double p = a[i] * b[i];
        total = total + p;
    }
    return total;
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{
        "scalar", axpy_scalar, vec_mat_scalar, hadamard_scalar, scale_scalar, sum_scalar, dot_scalar,
    };
    return table;
}

}  // namespace gocleak::simd
