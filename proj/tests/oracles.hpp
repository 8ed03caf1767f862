// Test-only reference implementations: naive quadruple-loop convolutions,
// windowed pooling, matrix products. These stay independent of the library's
// im2col/GEMM path on purpose.

#pragma once

#include <random>

#include "hrd/tensor.hpp"

namespace oracle {

template <typename T>
hrd::TensorT<T> conv2d(const hrd::TensorT<T>& x, const hrd::TensorT<T>& w, const hrd::TensorT<T>& b,
                       std::pair<int64_t, int64_t> stride, std::pair<int64_t, int64_t> pad) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int64_t k = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int64_t oh = (h + 2 * pad.first - kh) / stride.first + 1;
    const int64_t ow = (ww + 2 * pad.second - kw) / stride.second + 1;
    auto out = hrd::TensorT<T>::zeros({n, k, oh, ow});
    for (int64_t in = 0; in < n; ++in)
        for (int64_t kk = 0; kk < k; ++kk)
            for (int64_t oy = 0; oy < oh; ++oy)
                for (int64_t ox = 0; ox < ow; ++ox) {
                    T acc = b.defined() ? b.data()[kk] : T(0);
                    for (int64_t cc = 0; cc < c; ++cc)
                        for (int64_t i = 0; i < kh; ++i)
                            for (int64_t j = 0; j < kw; ++j) {
                                const int64_t y = oy * stride.first - pad.first + i;
                                const int64_t xx = ox * stride.second - pad.second + j;
                                if (y < 0 || y >= h || xx < 0 || xx >= ww) continue;
                                acc += x.ptr()[((in * c + cc) * h + y) * ww + xx] *
                                       w.ptr()[((kk * c + cc) * kh + i) * kw + j];
                            }
                    out.ptr()[((in * k + kk) * oh + oy) * ow + ox] = acc;
                }
    return out;
}

template <typename T>
hrd::TensorT<T> conv_transpose2d(const hrd::TensorT<T>& x, const hrd::TensorT<T>& w,
                                 const hrd::TensorT<T>& b, std::pair<int64_t, int64_t> stride,
                                 std::pair<int64_t, int64_t> pad) {
    const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int64_t cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    const int64_t oh = (h - 1) * stride.first - 2 * pad.first + kh;
    const int64_t ow = (ww - 1) * stride.second - 2 * pad.second + kw;
    auto out = hrd::TensorT<T>::zeros({n, cout, oh, ow});
    if (b.defined())
        for (int64_t in = 0; in < n; ++in)
            for (int64_t co = 0; co < cout; ++co)
                for (int64_t y = 0; y < oh * ow; ++y)
                    out.ptr()[(in * cout + co) * oh * ow + y] = b.data()[co];
    for (int64_t in = 0; in < n; ++in)
        for (int64_t ci = 0; ci < cin; ++ci)
            for (int64_t y = 0; y < h; ++y)
                for (int64_t xx = 0; xx < ww; ++xx) {
                    const T v = x.ptr()[((in * cin + ci) * h + y) * ww + xx];
                    for (int64_t co = 0; co < cout; ++co)
                        for (int64_t i = 0; i < kh; ++i)
                            for (int64_t j = 0; j < kw; ++j) {
                                const int64_t oy = y * stride.first - pad.first + i;
                                const int64_t ox = xx * stride.second - pad.second + j;
                                if (oy < 0 || oy >= oh || ox < 0 || ox >= ow) continue;
                                out.ptr()[((in * cout + co) * oh + oy) * ow + ox] +=
                                    v * w.ptr()[((ci * cout + co) * kh + i) * kw + j];
                            }
                }
    return out;
}

template <typename T>
hrd::TensorT<T> max_pool2d(const hrd::TensorT<T>& x, std::pair<int64_t, int64_t> kernel,
                           std::pair<int64_t, int64_t> stride) {
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t oh = (h - kernel.first) / stride.first + 1;
    const int64_t ow = (w - kernel.second) / stride.second + 1;
    auto out = hrd::TensorT<T>::zeros({n, c, oh, ow});
    for (int64_t i = 0; i < n * c; ++i)
        for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
                T best = -std::numeric_limits<T>::infinity();
                for (int64_t dy = 0; dy < kernel.first; ++dy)
                    for (int64_t dx = 0; dx < kernel.second; ++dx)
                        best = std::max(best, x.ptr()[i * h * w + (oy * stride.first + dy) * w +
                                                      ox * stride.second + dx]);
                out.ptr()[i * oh * ow + oy * ow + ox] = best;
            }
    return out;
}

template <typename T>
hrd::TensorT<T> matmul_bias(const hrd::TensorT<T>& x, const hrd::TensorT<T>& w,
                            const hrd::TensorT<T>& b) {
    const int64_t n = x.dim(0), d = x.dim(1), m = w.dim(1);
    auto out = hrd::TensorT<T>::zeros({n, m});
    for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) {
            T acc = b.defined() ? b.data()[j] : T(0);
            for (int64_t p = 0; p < d; ++p) acc += x.ptr()[i * d + p] * w.ptr()[p * m + j];
            out.ptr()[i * m + j] = acc;
        }
    return out;
}

// --- random tensor helpers ---------------------------------------------------

template <typename T>
hrd::TensorT<T> random_uniform(hrd::Shape shape, std::mt19937& rng, T lo = T(-1), T hi = T(1)) {
    auto t = hrd::TensorT<T>::zeros(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data()) v = static_cast<T>(dist(rng));
    return t;
}

// Distinct shuffled values with gaps >= 2/(n+1); keeps max-pool argmaxes and
// PReLU signs stable under finite-difference probing.
template <typename T>
hrd::TensorT<T> random_distinct(hrd::Shape shape, std::mt19937& rng) {
    auto t = hrd::TensorT<T>::zeros(std::move(shape));
    const int64_t n = t.numel();
    std::vector<int64_t> perm(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int64_t i = 0; i < n; ++i) {
        const double u = (static_cast<double>(perm[static_cast<size_t>(i)]) + 1.0) /
                         (static_cast<double>(n) + 1.0);
        double v = 2.0 * u - 1.0;
        if (std::abs(v) < 0.05) v += v >= 0 ? 0.06 : -0.06;  // stay clear of the PReLU kink
        t.data()[static_cast<size_t>(i)] = static_cast<T>(v);
    }
    return t;
}

template <typename T>
double max_abs_diff(const hrd::TensorT<T>& a, const hrd::TensorT<T>& b) {
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        m = std::max(m, std::abs(static_cast<double>(a.ptr()[i]) - static_cast<double>(b.ptr()[i])));
    return m;
}

template <typename T>
double inner(const hrd::TensorT<T>& a, const hrd::TensorT<T>& b) {
    double s = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i)
        s += static_cast<double>(a.ptr()[i]) * static_cast<double>(b.ptr()[i]);
    return s;
}

}  // namespace oracle
