#pragma once

#include "gocleak/simd/kernels.hpp"

namespace gocleak::simd::detail {

// Defined in kernels_avx2.cpp when GOCLEAK_HAVE_AVX2 is set; does not check the CPU.
const KernelTable& avx2_table();

}  // namespace gocleak::simd::detail
