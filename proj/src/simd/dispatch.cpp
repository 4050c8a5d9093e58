#include <cassert>
#include <cstdlib>
#include <string_view>

#include "gocleak/simd/kernels.hpp"
#include "kernels_internal.hpp"

namespace gocleak::simd {

const KernelTable* avx2_kernels() {
#if defined(GOCLEAK_HAVE_AVX2)
    static const bool supported = [] {
        __builtin_cpu_init();
        return __builtin_cpu_supports("avx2") != 0;
    }();
    return supported ? &detail::avx2_table() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active_kernels() {
    static const KernelTable& table = []() -> const KernelTable& {
        const char* forced = std::getenv("GOCLEAK_SIMD");
        if (forced != nullptr && std::string_view(forced) == "scalar") return scalar_kernels();
        if (const KernelTable* avx2 = avx2_kernels()) return *avx2;
        return scalar_kernels();
    }();
    return table;
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
    assert(x.size() == y.size());
    active_kernels().axpy(a, x.data(), y.data(), x.size());
}

void hadamard(std::span<const double> a, std::span<const double> b, std::span<double> y) {
    assert(a.size() == b.size() && a.size() == y.size());
    active_kernels().hadamard(a.data(), b.data(), y.data(), a.size());
}

void scale(double a, std::span<double> x) { active_kernels().scale(a, x.data(), x.size()); }

double sum(std::span<const double> x) { return active_kernels().sum(x.data(), x.size()); }

double dot(std::span<const double> a, std::span<const double> b) {
    assert(a.size() == b.size());
    return active_kernels().dot(a.data(), b.data(), a.size());
}

}  // namespace gocleak::simd
