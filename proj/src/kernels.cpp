#include "hrd/kernels.hpp"

#include <algorithm>

#ifdef _OPENMP
#include <omp.h>
#endif

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace hrd {
namespace detail {

#if defined(__GLIBC__)
// Activation buffers are tens of MB and reallocated every step; keeping them
// on the heap instead of fresh mmaps avoids the kernel re-zeroing pages.
namespace {
struct MallocTuning {
    MallocTuning() {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
    }
} malloc_tuning;
}  // namespace
#endif

// C[M,N] += A[M,K] * B[K,N]. Row-major. Column chunks are the outer loop so
// each B chunk is pulled from memory once and stays cached across the row
// tiles; within one C element the k terms still accumulate in ascending
// order, so results are independent of chunking and threading.
template <typename T>
void gemm_accum(const T* __restrict a, const T* __restrict b, T* __restrict c, int64_t m, int64_t k,
                int64_t n) {
    constexpr int64_t MR = 8;
    constexpr int64_t JB = 128;
    for (int64_t j0 = 0; j0 < n; j0 += JB) {
        const int64_t jn = std::min(JB, n - j0);
        int64_t m0 = 0;
        for (; m0 + MR <= m; m0 += MR) {
            // local accumulator tile: provably disjoint rows, stays in L1
            alignas(64) T acc0[JB] = {}, acc1[JB] = {}, acc2[JB] = {}, acc3[JB] = {};
            alignas(64) T acc4[JB] = {}, acc5[JB] = {}, acc6[JB] = {}, acc7[JB] = {};
            for (int64_t p = 0; p < k; ++p) {
                const T a0 = a[(m0 + 0) * k + p];
                const T a1 = a[(m0 + 1) * k + p];
                const T a2 = a[(m0 + 2) * k + p];
                const T a3 = a[(m0 + 3) * k + p];
                const T a4 = a[(m0 + 4) * k + p];
                const T a5 = a[(m0 + 5) * k + p];
                const T a6 = a[(m0 + 6) * k + p];
                const T a7 = a[(m0 + 7) * k + p];
                const T* __restrict brow = b + p * n + j0;
                if (jn == JB) {
                    for (int64_t j = 0; j < JB; ++j) {
                        const T bj = brow[j];
                        acc0[j] += a0 * bj;
                        acc1[j] += a1 * bj;
                        acc2[j] += a2 * bj;
                        acc3[j] += a3 * bj;
                        acc4[j] += a4 * bj;
                        acc5[j] += a5 * bj;
                        acc6[j] += a6 * bj;
                        acc7[j] += a7 * bj;
                    }
                } else {
                    for (int64_t j = 0; j < jn; ++j) {
                        const T bj = brow[j];
                        acc0[j] += a0 * bj;
                        acc1[j] += a1 * bj;
                        acc2[j] += a2 * bj;
                        acc3[j] += a3 * bj;
                        acc4[j] += a4 * bj;
                        acc5[j] += a5 * bj;
                        acc6[j] += a6 * bj;
                        acc7[j] += a7 * bj;
                    }
                }
            }
            T* crow = c + m0 * n + j0;
            for (int64_t j = 0; j < jn; ++j) crow[j] += acc0[j];
            for (int64_t j = 0; j < jn; ++j) crow[n + j] += acc1[j];
            for (int64_t j = 0; j < jn; ++j) crow[2 * n + j] += acc2[j];
            for (int64_t j = 0; j < jn; ++j) crow[3 * n + j] += acc3[j];
            for (int64_t j = 0; j < jn; ++j) crow[4 * n + j] += acc4[j];
            for (int64_t j = 0; j < jn; ++j) crow[5 * n + j] += acc5[j];
            for (int64_t j = 0; j < jn; ++j) crow[6 * n + j] += acc6[j];
            for (int64_t j = 0; j < jn; ++j) crow[7 * n + j] += acc7[j];
        }
        for (; m0 < m; ++m0) {
            alignas(64) T acc[JB] = {};
            for (int64_t p = 0; p < k; ++p) {
                const T a0 = a[m0 * k + p];
                const T* __restrict brow = b + p * n + j0;
                for (int64_t j = 0; j < jn; ++j) acc[j] += a0 * brow[j];
            }
            T* crow = c + m0 * n + j0;
            for (int64_t j = 0; j < jn; ++j) crow[j] += acc[j];
        }
    }
}

template <typename T>
T dot_fixed(const T* __restrict a, const T* __restrict b, int64_t n) {
    constexpr int64_t L = 16;
    T acc[L] = {};
    int64_t i = 0;
    for (; i + L <= n; i += L)
        for (int64_t l = 0; l < L; ++l) acc[l] += a[i + l] * b[i + l];
    T tail = T(0);
    for (; i < n; ++i) tail += a[i] * b[i];
    T s = T(0);
    for (int64_t l = 0; l < L; ++l) s += acc[l];
    return s + tail;
}

// C[M,N] += A[M,K] * B[N,K]^T (dot-product form). k runs in chunks so each B
// chunk leaves memory once; per C element the chunk partials and the lanes
// inside them always combine in the same fixed order.
template <typename T>
void gemm_abt_accum(const T* __restrict a, const T* __restrict b, T* __restrict c, int64_t m,
                    int64_t k, int64_t n, int threads) {
    constexpr int64_t MR = 4;
    constexpr int64_t KB = 128;
    const int64_t m_tiles = (m + MR - 1) / MR;
    for (int64_t p0 = 0; p0 < k; p0 += KB) {  // B chunk stays cached across row tiles
        const int64_t pn = std::min(KB, k - p0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(threads) if (threads > 1 && m_tiles > 1)
#endif
        for (int64_t t = 0; t < m_tiles; ++t) {
            const int64_t i0 = t * MR;
            const int64_t rows = std::min<int64_t>(MR, m - i0);
            if (rows == MR) {
                const T* __restrict a0 = a + (i0 + 0) * k + p0;
                const T* __restrict a1 = a + (i0 + 1) * k + p0;
                const T* __restrict a2 = a + (i0 + 2) * k + p0;
                const T* __restrict a3 = a + (i0 + 3) * k + p0;
                for (int64_t j = 0; j < n; ++j) {
                    const T* __restrict brow = b + j * k + p0;
                    constexpr int64_t L = 16;
                    T acc0[L] = {}, acc1[L] = {}, acc2[L] = {}, acc3[L] = {};
                    int64_t p = 0;
                    if (pn == KB) {  // compile-time trip count on the hot path
                        for (; p < KB; p += L)
                            for (int64_t l = 0; l < L; ++l) {
                                const T bv = brow[p + l];
                                acc0[l] += a0[p + l] * bv;
                                acc1[l] += a1[p + l] * bv;
                                acc2[l] += a2[p + l] * bv;
                                acc3[l] += a3[p + l] * bv;
                            }
                    } else {
                        for (; p + L <= pn; p += L)
                            for (int64_t l = 0; l < L; ++l) {
                                const T bv = brow[p + l];
                                acc0[l] += a0[p + l] * bv;
                                acc1[l] += a1[p + l] * bv;
                                acc2[l] += a2[p + l] * bv;
                                acc3[l] += a3[p + l] * bv;
                            }
                    }
                    T t0 = T(0), t1 = T(0), t2 = T(0), t3 = T(0);
                    for (; p < pn; ++p) {
                        const T bv = brow[p];
                        t0 += a0[p] * bv;
                        t1 += a1[p] * bv;
                        t2 += a2[p] * bv;
                        t3 += a3[p] * bv;
                    }
                    for (int64_t l = 0; l < L; ++l) {
                        t0 += acc0[l];
                        t1 += acc1[l];
                        t2 += acc2[l];
                        t3 += acc3[l];
                    }
                    c[(i0 + 0) * n + j] += t0;
                    c[(i0 + 1) * n + j] += t1;
                    c[(i0 + 2) * n + j] += t2;
                    c[(i0 + 3) * n + j] += t3;
                }
            } else {
                for (int64_t r = 0; r < rows; ++r)
                    for (int64_t j = 0; j < n; ++j)
                        c[(i0 + r) * n + j] += dot_fixed(a + (i0 + r) * k + p0, b + j * k + p0, pn);
            }
        }
    }
#ifndef _OPENMP
    (void)threads;
#endif
}

template void gemm_accum<float>(const float*, const float*, float*, int64_t, int64_t, int64_t);
template void gemm_accum<double>(const double*, const double*, double*, int64_t, int64_t, int64_t);
template float dot_fixed<float>(const float*, const float*, int64_t);
template double dot_fixed<double>(const double*, const double*, int64_t);
template void gemm_abt_accum<float>(const float*, const float*, float*, int64_t, int64_t, int64_t,
                                    int);
template void gemm_abt_accum<double>(const double*, const double*, double*, int64_t, int64_t,
                                     int64_t, int);

}  // namespace detail
}  // namespace hrd
