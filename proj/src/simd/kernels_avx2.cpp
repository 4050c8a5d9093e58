#include "kernels_internal.hpp"

#include <immintrin.h>

namespace gocleak::simd::detail {
namespace {

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d p = _mm256_mul_pd(va, _mm256_loadu_pd(x + i));
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), p));
    }
    for (; i < n; ++i) {
        const double p = a * x[i];
        y[i] = y[i] + p;
    }
}

void vec_mat_avx2(const double* x, const double* m, std::size_t rows, std::size_t cols,
                  std::size_t stride, double* y) {
    for (std::size_t j = 0; j < cols; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        if (x[i] == 0.0) continue;
        axpy_avx2(x[i], m + i * stride, y, cols);
    }
}

void hadamard_avx2(const double* a, const double* b, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) y[i] = a[i] * b[i];
}

void scale_avx2(double a, double* x, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    }
    for (; i < n; ++i) x[i] *= a;
}

double combine_lanes(__m256d acc) {
    alignas(32) double s[4];
    _mm256_store_pd(s, acc);
    return (s[0] + s[1]) + (s[2] + s[3]);
}

double sum_avx2(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double total = combine_lanes(acc);
    for (; i < n; ++i) total += x[i];
    return total;
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    double total = combine_lanes(acc);
    for (; i < n; ++i) {
        const double p = a[i] * b[i];
        total = total + p;
    }
    return total;
}

}  // namespace

const KernelTable& avx2_table() {
    static const KernelTable table{
        "avx2", axpy_avx2, vec_mat_avx2, hadamard_avx2, scale_avx2, sum_avx2, dot_avx2,
    };
    return table;
}

}  // namespace gocleak::simd::detail
