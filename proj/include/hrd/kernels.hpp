// Blocked GEMM kernels behind the conv/fc ops. Compiled once in kernels.cpp
// (explicit float/double instantiations) so performance does not depend on
// the including translation unit.

#pragma once

#include <cstdint>

namespace hrd {
namespace detail {

// C[M,N] += A[M,K] * B[K,N], row-major. Deterministic: within one C element
// the k terms accumulate in ascending order regardless of chunking/threads.
template <typename T>
void gemm_accum(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n);

// Dot product with a fixed 16-lane split; the combine order never changes.
template <typename T>
T dot_fixed(const T* a, const T* b, int64_t n);

// C[M,N] += A[M,K] * B[N,K]^T (dot-product form), deterministic as above.
template <typename T>
void gemm_abt_accum(const T* a, const T* b, T* c, int64_t m, int64_t k, int64_t n, int threads);

extern template void gemm_accum<float>(const float*, const float*, float*, int64_t, int64_t,
                                       int64_t);
extern template void gemm_accum<double>(const double*, const double*, double*, int64_t, int64_t,
                                        int64_t);
extern template float dot_fixed<float>(const float*, const float*, int64_t);
extern template double dot_fixed<double>(const double*, const double*, int64_t);
extern template void gemm_abt_accum<float>(const float*, const float*, float*, int64_t, int64_t,
                                           int64_t, int);
extern template void gemm_abt_accum<double>(const double*, const double*, double*, int64_t,
                                            int64_t, int64_t, int);

}  // namespace detail
}  // namespace hrd
