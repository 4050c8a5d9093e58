#pragma once

// Dense double-precision kernels used by belief propagation and smoothing.
//
// Every kernel has a scalar reference implementation and, when the build and
// the CPU allow it, an AVX2 variant. The variants use the same per-element
// operation order (no fused multiply-add, identical reduction tree), so they
// produce bit-identical results. The active table is chosen once at first use
// from CPUID; setting GOCLEAK_SIMD=scalar in the environment forces the scalar
// reference.

#include <cstddef>
#include <span>
#include <string_view>

namespace gocleak::simd {

struct KernelTable {
    std::string_view name;
    // y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    // y = x * M, M row-major rows x cols with the given row stride; rows of M
    // whose weight x[i] is exactly zero are skipped.
    void (*vec_mat)(const double* x, const double* m, std::size_t rows, std::size_t cols,
                    std::size_t stride, double* y);
    // y = a .* b
    void (*hadamard)(const double* a, const double* b, double* y, std::size_t n);
    // x *= a
    void (*scale)(double a, double* x, std::size_t n);
    // Four interleaved partial sums, combined as (s0 + s1) + (s2 + s3), then the tail.
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
};

const KernelTable& scalar_kernels();

// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2.
const KernelTable* avx2_kernels();

const KernelTable& active_kernels();

// Span wrappers over the active table.
void axpy(double a, std::span<const double> x, std::span<double> y);
void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> y);
void scale(double a, std::span<double> x);
double sum(std::span<const double> x);
double dot(std::span<const double> a, std::span<const double> b);

}  // namespace gocleak::simd
