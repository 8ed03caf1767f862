// Differentiable operator set: conv2d, transposed conv2d, max pooling,
// replication unpooling, batch norm, PReLU, fully-connected, global average
// pooling, plus the small elementwise/reduction ops the tests lean on.
//
// Convolutions run as im2col + blocked GEMM. Every reduction that lands in
// one output element runs in a fixed order, so results are bit-identical
// across runs and thread counts; parallel loops only split independent
// output elements.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>
#include <thread>

#include "hrd/kernels.hpp"
#include "hrd/tensor.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace hrd {

inline int& op_threads() {
    static int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    return n;
}

inline bool& grad_mode() {
    static thread_local bool enabled = true;
    return enabled;
}

namespace detail {

// ---------------------------------------------------------------------------
// GEMM kernels
// ---------------------------------------------------------------------------

// GEMM kernels live in kernels.cpp so every caller links one compilation of
// them (see include/hrd/kernels.hpp).

template <typename T>
std::vector<T> transpose(const T* a, int64_t rows, int64_t cols) {
    std::vector<T> t(static_cast<size_t>(rows * cols));
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t c = 0; c < cols; ++c) t[c * rows + r] = a[r * cols + c];
    return t;
}

// ---------------------------------------------------------------------------
// im2col / col2im
// ---------------------------------------------------------------------------

struct ConvGeom {
    int64_t C, H, W, kh, kw, sh, sw, ph, pw, OH, OW;
    int64_t ckk() const { return C * kh * kw; }
    int64_t ohow() const { return OH * OW; }
};

// col[(c*kh+i)*kw+j, oy*OW+ox] = x[c, oy*sh-ph+i, ox*sw-pw+j], zero outside.
template <typename T>
#if defined(__GNUC__)
__attribute__((noinline))
#endif
void im2col(const T* __restrict x, const ConvGeom& g, T* __restrict col) {
    for (int64_t c = 0; c < g.C; ++c) {
        const T* xc = x + c * g.H * g.W;
        for (int64_t i = 0; i < g.kh; ++i) {
            for (int64_t j = 0; j < g.kw; ++j) {
                T* crow = col + ((c * g.kh + i) * g.kw + j) * g.ohow();
                for (int64_t oy = 0; oy < g.OH; ++oy) {
                    const int64_t y = oy * g.sh - g.ph + i;
                    T* cr = crow + oy * g.OW;
                    if (y < 0 || y >= g.H) {
                        std::fill(cr, cr + g.OW, T(0));
                        continue;
                    }
                    const T* xrow = xc + y * g.W;
                    for (int64_t ox = 0; ox < g.OW; ++ox) {
                        const int64_t xx = ox * g.sw - g.pw + j;
                        cr[ox] = (xx >= 0 && xx < g.W) ? xrow[xx] : T(0);
                    }
                }
            }
        }
    }
}

// Adjoint scatter: x[c, y, xx] += col[...]. Fixed loop order.
template <typename T>
#if defined(__GNUC__)
__attribute__((noinline))
#endif
void col2im_add(const T* __restrict col, const ConvGeom& g, T* __restrict x) {
    for (int64_t c = 0; c < g.C; ++c) {
        T* xc = x + c * g.H * g.W;
        for (int64_t i = 0; i < g.kh; ++i) {
            for (int64_t j = 0; j < g.kw; ++j) {
                const T* crow = col + ((c * g.kh + i) * g.kw + j) * g.ohow();
                for (int64_t oy = 0; oy < g.OH; ++oy) {
                    const int64_t y = oy * g.sh - g.ph + i;
                    if (y < 0 || y >= g.H) continue;
                    T* xrow = xc + y * g.W;
                    const T* cr = crow + oy * g.OW;
                    for (int64_t ox = 0; ox < g.OW; ++ox) {
                        const int64_t xx = ox * g.sw - g.pw + j;
                        if (xx >= 0 && xx < g.W) xrow[xx] += cr[ox];
                    }
                }
            }
        }
    }
}

inline int64_t conv_out_dim(int64_t in, int64_t k, int64_t s, int64_t p) {
    return (in + 2 * p - k) / s + 1;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise / reduction ops
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape() != b.shape())
        throw ValidationError("add: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    auto out = TensorT<T>::make_op(a.shape(), "add", {a, b}, [a, b](TensorNode<T>& node) mutable {
        for (auto* p : {a.node(), b.node()}) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (int64_t i = 0; i < node.numel(); ++i) p->grad[i] += node.grad[i];
        }
    });
    for (int64_t i = 0; i < a.numel(); ++i) out.ptr()[i] = a.ptr()[i] + b.ptr()[i];
    return out;
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.shape() != b.shape())
        throw ValidationError("mul: shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    auto out = TensorT<T>::make_op(a.shape(), "mul", {a, b}, [a, b](TensorNode<T>& node) mutable {
        if (a.node()->requires_grad) {
            a.node()->ensure_grad();
            for (int64_t i = 0; i < node.numel(); ++i) a.grad()[i] += node.grad[i] * b.ptr()[i];
        }
        if (b.node()->requires_grad) {
            b.node()->ensure_grad();
            for (int64_t i = 0; i < node.numel(); ++i) b.grad()[i] += node.grad[i] * a.ptr()[i];
        }
    });
    for (int64_t i = 0; i < a.numel(); ++i) out.ptr()[i] = a.ptr()[i] * b.ptr()[i];
    return out;
}

template <typename T>
TensorT<T> sum(const TensorT<T>& x) {
    auto out = TensorT<T>::make_op({1}, "sum", {x}, [x](TensorNode<T>& node) mutable {
        x.node()->ensure_grad();
        const T g = node.grad[0];
        for (int64_t i = 0; i < x.numel(); ++i) x.grad()[i] += g;
    });
    T s = T(0);
    for (int64_t i = 0; i < x.numel(); ++i) s += x.ptr()[i];
    out.ptr()[0] = s;
    return out;
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& x, Shape shape) {
    int64_t wild = -1, known = 1;
    for (size_t i = 0; i < shape.size(); ++i) {
        if (shape[i] == -1) wild = static_cast<int64_t>(i);
        else known *= shape[i];
    }
    if (wild >= 0) shape[wild] = x.numel() / known;
    if (numel_of(shape) != x.numel())
        throw ValidationError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    auto out = TensorT<T>::make_op(shape, "reshape", {x}, [x](TensorNode<T>& node) mutable {
        x.node()->ensure_grad();
        for (int64_t i = 0; i < node.numel(); ++i) x.grad()[i] += node.grad[i];
    });
    std::copy(x.data().begin(), x.data().end(), out.data().begin());
    return out;
}

// Concatenate along dim 0.
template <typename T>
TensorT<T> concat0(const TensorT<T>& a, const TensorT<T>& b) {
    if (a.ndim() != b.ndim())
        throw ValidationError("concat0: rank mismatch");
    for (int64_t d = 1; d < a.ndim(); ++d)
        if (a.dim(d) != b.dim(d))
            throw ValidationError("concat0: dim " + std::to_string(d) + " mismatch");
    Shape shape = a.shape();
    shape[0] += b.dim(0);
    const int64_t an = a.numel();
    auto out = TensorT<T>::make_op(shape, "concat0", {a, b}, [a, b, an](TensorNode<T>& node) mutable {
        if (a.node()->requires_grad) {
            a.node()->ensure_grad();
            for (int64_t i = 0; i < an; ++i) a.grad()[i] += node.grad[i];
        }
        if (b.node()->requires_grad) {
            b.node()->ensure_grad();
            for (int64_t i = 0; i < b.numel(); ++i) b.grad()[i] += node.grad[an + i];
        }
    });
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    std::copy(b.data().begin(), b.data().end(), out.data().begin() + an);
    return out;
}

// Slice [start, start+len) along dim 0.
template <typename T>
TensorT<T> slice0(const TensorT<T>& x, int64_t start, int64_t len) {
    if (start < 0 || len <= 0 || start + len > x.dim(0))
        throw ValidationError("slice0: range [" + std::to_string(start) + "," +
                              std::to_string(start + len) + ") out of dim 0 size " +
                              std::to_string(x.dim(0)));
    Shape shape = x.shape();
    shape[0] = len;
    const int64_t stride = x.numel() / x.dim(0);
    auto out =
        TensorT<T>::make_op(shape, "slice0", {x}, [x, start, stride](TensorNode<T>& node) mutable {
            x.node()->ensure_grad();
            for (int64_t i = 0; i < node.numel(); ++i) x.grad()[start * stride + i] += node.grad[i];
        });
    std::copy(x.data().begin() + start * stride, x.data().begin() + (start + len) * stride,
              out.data().begin());
    return out;
}

// ---------------------------------------------------------------------------
// Fully connected: y[N,M] = x[N,D] * w[D,M] + b[M]
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> fully_connected(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b) {
    if (x.ndim() != 2 || w.ndim() != 2)
        throw ValidationError("fully_connected: need 2-d input and weight");
    const int64_t n = x.dim(0), d = x.dim(1), m = w.dim(1);
    if (w.dim(0) != d)
        throw ValidationError("fully_connected: input width " + std::to_string(d) +
                              " vs weight rows " + std::to_string(w.dim(0)));
    if (b.defined() && b.numel() != m)
        throw ValidationError("fully_connected: bias length " + std::to_string(b.numel()) +
                              " vs output width " + std::to_string(m));

    std::vector<TensorT<T>> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    auto out = TensorT<T>::make_op({n, m}, "fully_connected", std::move(parents),
                                   [x, w, b, n, d, m](TensorNode<T>& node) mutable {
        if (x.node()->requires_grad) {
            x.node()->ensure_grad();
            detail::gemm_abt_accum(node.grad.data(), w.ptr(), x.grad().data(), n, m, d, 1);
        }
        if (w.node()->requires_grad) {
            w.node()->ensure_grad();
            auto xt = detail::transpose(x.ptr(), n, d);
            detail::gemm_accum(xt.data(), node.grad.data(), w.grad().data(), d, n, m);
        }
        if (b.defined() && b.node()->requires_grad) {
            b.node()->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t j = 0; j < m; ++j) b.grad()[j] += node.grad[i * m + j];
        }
    });
    if (b.defined()) {
        for (int64_t i = 0; i < n; ++i)
            std::copy(b.data().begin(), b.data().end(), out.data().begin() + i * m);
    }
    detail::gemm_accum(x.ptr(), w.ptr(), out.ptr(), n, d, m);
    return out;
}

// dgrad path of fully_connected needs w^T; gemm_abt_accum above computes
// dy[N,M] * w[D,M]^T directly in dot form.

// ---------------------------------------------------------------------------
// conv2d: x[N,C,H,W], w[K,C,kh,kw], b[K]
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                  std::pair<int64_t, int64_t> stride = {1, 1},
                  std::pair<int64_t, int64_t> padding = {0, 0}) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw ValidationError("conv2d: need 4-d input and weight");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int64_t k = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != c)
        throw ValidationError("conv2d: input channels " + std::to_string(c) +
                              " vs weight channels " + std::to_string(w.dim(1)));
    if (b.defined() && b.numel() != k)
        throw ValidationError("conv2d: bias length " + std::to_string(b.numel()) + " vs kernels " +
                              std::to_string(k));
    if (kh > h + 2 * padding.first || kw > ww + 2 * padding.second)
        throw ValidationError("conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                              " exceeds padded input " + std::to_string(h + 2 * padding.first) +
                              "x" + std::to_string(ww + 2 * padding.second));

    detail::ConvGeom g{c, h, ww, kh, kw, stride.first, stride.second,
                       padding.first, padding.second,
                       detail::conv_out_dim(h, kh, stride.first, padding.first),
                       detail::conv_out_dim(ww, kw, stride.second, padding.second)};

    std::vector<TensorT<T>> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    auto out = TensorT<T>::make_op({n, k, g.OH, g.OW}, "conv2d", std::move(parents),
                                   [x, w, b, g, n, k](TensorNode<T>& node) mutable {
        const int64_t ckk = g.ckk(), ohow = g.ohow();
        const int threads = op_threads();
        if (x.node()->requires_grad) {
            x.node()->ensure_grad();
            auto wt = detail::transpose(w.ptr(), k, ckk);  // [ckk, k]
#ifdef _OPENMP
#pragma omp parallel num_threads(threads) if (threads > 1 && n > 1)
#endif
            {
                std::vector<T> col(static_cast<size_t>(ckk * ohow));
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
                for (int64_t i = 0; i < n; ++i) {
                    std::fill(col.begin(), col.end(), T(0));
                    detail::gemm_accum(wt.data(), node.grad.data() + i * k * ohow, col.data(), ckk,
                                       k, ohow);
                    detail::col2im_add(col.data(), g, x.grad().data() + i * g.C * g.H * g.W);
                }
            }
        }
        if (w.node()->requires_grad) {
            w.node()->ensure_grad();
            // dW^T[p, kk] = sum_n sum_j col_n[p, j] * dy_n[kk, j]; images serial
            std::vector<T> col(static_cast<size_t>(ckk * ohow));
            std::vector<T> dyt(static_cast<size_t>(ohow * k));
            std::vector<T> wgt(static_cast<size_t>(ckk * k), T(0));
            for (int64_t i = 0; i < n; ++i) {
                detail::im2col(x.ptr() + i * g.C * g.H * g.W, g, col.data());
                const T* dy = node.grad.data() + i * k * ohow;
                for (int64_t kk = 0; kk < k; ++kk)
                    for (int64_t j = 0; j < ohow; ++j) dyt[j * k + kk] = dy[kk * ohow + j];
                detail::gemm_accum(col.data(), dyt.data(), wgt.data(), ckk, ohow, k);
            }
            for (int64_t p = 0; p < ckk; ++p)
                for (int64_t kk = 0; kk < k; ++kk) w.grad()[kk * ckk + p] += wgt[p * k + kk];
        }
        if (b.defined() && b.node()->requires_grad) {
            b.node()->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t kk = 0; kk < k; ++kk) {
                    T s = T(0);
                    const T* gp = node.grad.data() + (i * k + kk) * ohow;
                    for (int64_t j = 0; j < ohow; ++j) s += gp[j];
                    b.grad()[kk] += s;
                }
        }
    });

    const int64_t ckk = g.ckk(), ohow = g.ohow();
    const int threads = op_threads();
#ifdef _OPENMP
#pragma omp parallel num_threads(threads) if (threads > 1 && n > 1)
#endif
    {
        std::vector<T> col(static_cast<size_t>(ckk * ohow));
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (int64_t i = 0; i < n; ++i) {
            detail::im2col(x.ptr() + i * c * h * ww, g, col.data());
            T* yp = out.ptr() + i * k * ohow;
            if (b.defined()) {
                for (int64_t kk = 0; kk < k; ++kk)
                    std::fill(yp + kk * ohow, yp + (kk + 1) * ohow, b.data()[kk]);
            }
            detail::gemm_accum(w.ptr(), col.data(), yp, k, ckk, ohow);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// conv_transpose2d: x[N,Cin,H,W], w[Cin,Cout,kh,kw], b[Cout]
// Adjoint of conv2d shape arithmetic: OH = (H-1)*sh - 2*ph + kh.
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> conv_transpose2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>& b,
                            std::pair<int64_t, int64_t> stride = {1, 1},
                            std::pair<int64_t, int64_t> padding = {0, 0}) {
    if (x.ndim() != 4 || w.ndim() != 4)
        throw ValidationError("conv_transpose2d: need 4-d input and weight");
    const int64_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), ww = x.dim(3);
    const int64_t cout = w.dim(1), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(0) != cin)
        throw ValidationError("conv_transpose2d: input channels " + std::to_string(cin) +
                              " vs weight rows " + std::to_string(w.dim(0)));
    if (b.defined() && b.numel() != cout)
        throw ValidationError("conv_transpose2d: bias length mismatch");
    const int64_t oh = (h - 1) * stride.first - 2 * padding.first + kh;
    const int64_t ow = (ww - 1) * stride.second - 2 * padding.second + kw;
    if (oh <= 0 || ow <= 0)
        throw ValidationError("conv_transpose2d: non-positive output size");

    // Geometry is phrased from the adjoint conv's point of view: the
    // "input" of that conv is our output.
    detail::ConvGeom g{cout, oh, ow, kh, kw, stride.first, stride.second,
                       padding.first, padding.second, h, ww};

    std::vector<TensorT<T>> parents = {x, w};
    if (b.defined()) parents.push_back(b);
    auto out = TensorT<T>::make_op({n, cout, oh, ow}, "conv_transpose2d", std::move(parents),
                                   [x, w, b, g, n, cin, cout](TensorNode<T>& node) mutable {
        const int64_t ckk = g.ckk(), hw = g.ohow();  // ckk = cout*kh*kw, hw = H*W of input x
        const int threads = op_threads();
        if (x.node()->requires_grad) {
            x.node()->ensure_grad();
#ifdef _OPENMP
#pragma omp parallel num_threads(threads) if (threads > 1 && n > 1)
#endif
            {
                std::vector<T> col(static_cast<size_t>(ckk * hw));
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
                for (int64_t i = 0; i < n; ++i) {
                    detail::im2col(node.grad.data() + i * g.C * g.H * g.W, g, col.data());
                    detail::gemm_accum(w.ptr(), col.data(), x.grad().data() + i * cin * hw, cin,
                                       ckk, hw);
                }
            }
        }
        if (w.node()->requires_grad) {
            w.node()->ensure_grad();
            // dW^T[p, ci] = sum_n sum_j dycol_n[p, j] * x_n[ci, j]; images serial
            std::vector<T> col(static_cast<size_t>(ckk * hw));
            std::vector<T> xt(static_cast<size_t>(hw * cin));
            std::vector<T> wgt(static_cast<size_t>(ckk * cin), T(0));
            for (int64_t i = 0; i < n; ++i) {
                detail::im2col(node.grad.data() + i * g.C * g.H * g.W, g, col.data());
                const T* xp = x.ptr() + i * cin * hw;
                for (int64_t ci = 0; ci < cin; ++ci)
                    for (int64_t j = 0; j < hw; ++j) xt[j * cin + ci] = xp[ci * hw + j];
                detail::gemm_accum(col.data(), xt.data(), wgt.data(), ckk, hw, cin);
            }
            for (int64_t p = 0; p < ckk; ++p)
                for (int64_t ci = 0; ci < cin; ++ci) w.grad()[ci * ckk + p] += wgt[p * cin + ci];
        }
        if (b.defined() && b.node()->requires_grad) {
            b.node()->ensure_grad();
            const int64_t sp = g.H * g.W;
            for (int64_t i = 0; i < n; ++i)
                for (int64_t co = 0; co < cout; ++co) {
                    T s = T(0);
                    const T* gp = node.grad.data() + (i * cout + co) * sp;
                    for (int64_t j = 0; j < sp; ++j) s += gp[j];
                    b.grad()[co] += s;
                }
        }
    });

    const int64_t ckk = g.ckk(), hw = g.ohow();
    auto wt = detail::transpose(w.ptr(), cin, ckk);  // [cout*kh*kw, cin]
    const int threads = op_threads();
#ifdef _OPENMP
#pragma omp parallel num_threads(threads) if (threads > 1 && n > 1)
#endif
    {
        std::vector<T> col(static_cast<size_t>(ckk * hw));
#ifdef _OPENMP
#pragma omp for schedule(static)
#endif
        for (int64_t i = 0; i < n; ++i) {
            std::fill(col.begin(), col.end(), T(0));
            detail::gemm_accum(wt.data(), x.ptr() + i * cin * hw, col.data(), ckk, cin, hw);
            T* yp = out.ptr() + i * cout * oh * ow;
            if (b.defined()) {
                for (int64_t co = 0; co < cout; ++co)
                    std::fill(yp + co * oh * ow, yp + (co + 1) * oh * ow, b.data()[co]);
            }
            detail::col2im_add(col.data(), g, yp);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// max_pool2d; ties break to the first element in row-major scan order
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> max_pool2d(const TensorT<T>& x, std::pair<int64_t, int64_t> kernel,
                      std::pair<int64_t, int64_t> stride) {
    if (x.ndim() != 4) throw ValidationError("max_pool2d: need 4-d input");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t kh = kernel.first, kw = kernel.second, sh = stride.first, sw = stride.second;
    if (kh > h || kw > w)
        throw ValidationError("max_pool2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
                              " larger than input " + std::to_string(h) + "x" + std::to_string(w));
    const int64_t oh = (h - kh) / sh + 1, ow = (w - kw) / sw + 1;

    auto argmax = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(n * c * oh * ow));
    auto out = TensorT<T>::make_op({n, c, oh, ow}, "max_pool2d", {x},
                                   [x, argmax](TensorNode<T>& node) mutable {
        x.node()->ensure_grad();
        for (int64_t i = 0; i < node.numel(); ++i) x.grad()[(*argmax)[i]] += node.grad[i];
    });

    for (int64_t i = 0; i < n * c; ++i) {
        const T* xp = x.ptr() + i * h * w;
        T* yp = out.ptr() + i * oh * ow;
        int64_t* ap = argmax->data() + i * oh * ow;
        for (int64_t oy = 0; oy < oh; ++oy)
            for (int64_t ox = 0; ox < ow; ++ox) {
                const int64_t y0 = oy * sh, x0 = ox * sw;
                T best = xp[y0 * w + x0];
                int64_t bi = y0 * w + x0;
                for (int64_t dy = 0; dy < kh; ++dy)
                    for (int64_t dx = 0; dx < kw; ++dx) {
                        const int64_t idx = (y0 + dy) * w + (x0 + dx);
                        if (xp[idx] > best) {
                            best = xp[idx];
                            bi = idx;
                        }
                    }
                yp[oy * ow + ox] = best;
                ap[oy * ow + ox] = i * h * w + bi;
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// upsample_unpool: replicate each value into a kh x kw block; grad = block sum
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> upsample_unpool(const TensorT<T>& x, std::pair<int64_t, int64_t> kernel) {
    if (x.ndim() != 4) throw ValidationError("upsample_unpool: need 4-d input");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    const int64_t kh = kernel.first, kw = kernel.second;
    const int64_t oh = h * kh, ow = w * kw;

    auto out = TensorT<T>::make_op({n, c, oh, ow}, "upsample_unpool", {x},
                                   [x, n, c, h, w, kh, kw, oh, ow](TensorNode<T>& node) mutable {
        x.node()->ensure_grad();
        for (int64_t i = 0; i < n * c; ++i) {
            const T* gp = node.grad.data() + i * oh * ow;
            T* xg = x.grad().data() + i * h * w;
            for (int64_t y = 0; y < h; ++y)
                for (int64_t xx = 0; xx < w; ++xx) {
                    T s = T(0);
                    for (int64_t dy = 0; dy < kh; ++dy)
                        for (int64_t dx = 0; dx < kw; ++dx)
                            s += gp[(y * kh + dy) * ow + xx * kw + dx];
                    xg[y * w + xx] += s;
                }
        }
    });

    for (int64_t i = 0; i < n * c; ++i) {
        const T* xp = x.ptr() + i * h * w;
        T* yp = out.ptr() + i * oh * ow;
        for (int64_t y = 0; y < oh; ++y) {
            const T* xrow = xp + (y / kh) * w;
            T* yrow = yp + y * ow;
            for (int64_t xx = 0; xx < ow; ++xx) yrow[xx] = xrow[xx / kw];
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// batch_norm2d over (N,H,W) per channel
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> batch_norm2d(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                        std::vector<T>& running_mean, std::vector<T>& running_var,
                        bool& stats_ready, bool train, T momentum = T(0.1), T eps = T(1e-5)) {
    if (x.ndim() != 4) throw ValidationError("batch_norm2d: need 4-d input");
    const int64_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    if (gamma.numel() != c || beta.numel() != c)
        throw ValidationError("batch_norm2d: gamma/beta length vs channels " + std::to_string(c));
    if (!train && !stats_ready)
        throw ValidationError("batch_norm2d: eval mode requested before running statistics exist");

    const int64_t sp = h * w;
    const int64_t m = n * sp;

    auto mean = std::make_shared<std::vector<T>>(c, T(0));
    auto var = std::make_shared<std::vector<T>>(c, T(0));
    auto xhat = std::make_shared<std::vector<T>>(static_cast<size_t>(x.numel()));

    if (train) {
        for (int64_t ch = 0; ch < c; ++ch) {
            T s = T(0);
            for (int64_t i = 0; i < n; ++i) {
                const T* xp = x.ptr() + (i * c + ch) * sp;
                for (int64_t j = 0; j < sp; ++j) s += xp[j];
            }
            const T mu = s / T(m);
            T v = T(0);
            for (int64_t i = 0; i < n; ++i) {
                const T* xp = x.ptr() + (i * c + ch) * sp;
                for (int64_t j = 0; j < sp; ++j) v += (xp[j] - mu) * (xp[j] - mu);
            }
            (*mean)[ch] = mu;
            (*var)[ch] = v / T(m);  // biased, used for normalization
        }
        // running stats keep the unbiased variance
        const T unbias = (m > 1) ? T(m) / T(m - 1) : T(1);
        if (!stats_ready) {
            running_mean.assign(mean->begin(), mean->end());
            running_var.resize(static_cast<size_t>(c));
            for (int64_t ch = 0; ch < c; ++ch) running_var[ch] = (*var)[ch] * unbias;
            stats_ready = true;
        } else {
            for (int64_t ch = 0; ch < c; ++ch) {
                running_mean[ch] = (T(1) - momentum) * running_mean[ch] + momentum * (*mean)[ch];
                running_var[ch] =
                    (T(1) - momentum) * running_var[ch] + momentum * (*var)[ch] * unbias;
            }
        }
    } else {
        mean->assign(running_mean.begin(), running_mean.end());
        var->assign(running_var.begin(), running_var.end());
    }

    auto out = TensorT<T>::make_op(x.shape(), "batch_norm2d", {x, gamma, beta},
                                   [x, gamma, beta, mean, var, xhat, n, c, sp, m, eps,
                                    train](TensorNode<T>& node) mutable {
        // dgamma / dbeta
        std::vector<T> dgamma(c, T(0)), dbeta(c, T(0));
        for (int64_t ch = 0; ch < c; ++ch) {
            T dg = T(0), db = T(0);
            for (int64_t i = 0; i < n; ++i) {
                const int64_t base = (i * c + ch) * sp;
                for (int64_t j = 0; j < sp; ++j) {
                    dg += node.grad[base + j] * (*xhat)[base + j];
                    db += node.grad[base + j];
                }
            }
            dgamma[ch] = dg;
            dbeta[ch] = db;
        }
        if (gamma.node()->requires_grad) {
            gamma.node()->ensure_grad();
            for (int64_t ch = 0; ch < c; ++ch) gamma.grad()[ch] += dgamma[ch];
        }
        if (beta.node()->requires_grad) {
            beta.node()->ensure_grad();
            for (int64_t ch = 0; ch < c; ++ch) beta.grad()[ch] += dbeta[ch];
        }
        if (x.node()->requires_grad) {
            x.node()->ensure_grad();
            for (int64_t ch = 0; ch < c; ++ch) {
                const T inv = T(1) / std::sqrt((*var)[ch] + eps);
                const T g = gamma.ptr()[ch];
                if (train) {
                    const T mdb = dbeta[ch] / T(m), mdg = dgamma[ch] / T(m);
                    for (int64_t i = 0; i < n; ++i) {
                        const int64_t base = (i * c + ch) * sp;
                        for (int64_t j = 0; j < sp; ++j)
                            x.grad()[base + j] +=
                                g * inv * (node.grad[base + j] - mdb - (*xhat)[base + j] * mdg);
                    }
                } else {
                    for (int64_t i = 0; i < n; ++i) {
                        const int64_t base = (i * c + ch) * sp;
                        for (int64_t j = 0; j < sp; ++j)
                            x.grad()[base + j] += g * inv * node.grad[base + j];
                    }
                }
            }
        }
    });

    for (int64_t ch = 0; ch < c; ++ch) {
        const T inv = T(1) / std::sqrt((*var)[ch] + eps);
        const T g = gamma.ptr()[ch], bb = beta.ptr()[ch], mu = (*mean)[ch];
        for (int64_t i = 0; i < n; ++i) {
            const int64_t base = (i * c + ch) * sp;
            const T* xp = x.ptr() + base;
            T* yp = out.ptr() + base;
            T* xh = xhat->data() + base;
            for (int64_t j = 0; j < sp; ++j) {
                xh[j] = (xp[j] - mu) * inv;
                yp[j] = g * xh[j] + bb;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// prelu: slope is learnable per channel (dim 1)
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> prelu(const TensorT<T>& x, const TensorT<T>& slope) {
    if (x.ndim() < 2) throw ValidationError("prelu: need at least 2-d input");
    const int64_t c = x.dim(1);
    if (slope.numel() != c)
        throw ValidationError("prelu: slope length " + std::to_string(slope.numel()) +
                              " vs channels " + std::to_string(c));
    const int64_t n = x.dim(0);
    const int64_t sp = x.numel() / (n * c);

    auto out = TensorT<T>::make_op(x.shape(), "prelu", {x, slope},
                                   [x, slope, n, c, sp](TensorNode<T>& node) mutable {
        if (x.node()->requires_grad) {
            x.node()->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t ch = 0; ch < c; ++ch) {
                    const T a = slope.ptr()[ch];
                    const int64_t base = (i * c + ch) * sp;
                    for (int64_t j = 0; j < sp; ++j)
                        x.grad()[base + j] +=
                            node.grad[base + j] * (x.ptr()[base + j] > T(0) ? T(1) : a);
                }
        }
        if (slope.node()->requires_grad) {
            slope.node()->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                for (int64_t ch = 0; ch < c; ++ch) {
                    T s = T(0);
                    const int64_t base = (i * c + ch) * sp;
                    for (int64_t j = 0; j < sp; ++j)
                        if (x.ptr()[base + j] <= T(0)) s += node.grad[base + j] * x.ptr()[base + j];
                    slope.grad()[ch] += s;
                }
        }
    });

    for (int64_t i = 0; i < n; ++i)
        for (int64_t ch = 0; ch < c; ++ch) {
            const T a = slope.ptr()[ch];
            const int64_t base = (i * c + ch) * sp;
            for (int64_t j = 0; j < sp; ++j) {
                const T v = x.ptr()[base + j];
                out.ptr()[base + j] = v > T(0) ? v : a * v;
            }
        }
    return out;
}

// ---------------------------------------------------------------------------
// global_avg_pool: [N,C,H,W] -> [N,C]
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> global_avg_pool(const TensorT<T>& x) {
    if (x.ndim() != 4) throw ValidationError("global_avg_pool: need 4-d input");
    const int64_t n = x.dim(0), c = x.dim(1), sp = x.dim(2) * x.dim(3);

    auto out = TensorT<T>::make_op({n, c}, "global_avg_pool", {x},
                                   [x, n, c, sp](TensorNode<T>& node) mutable {
        x.node()->ensure_grad();
        for (int64_t i = 0; i < n * c; ++i) {
            const T g = node.grad[i] / T(sp);
            T* xg = x.grad().data() + i * sp;
            for (int64_t j = 0; j < sp; ++j) xg[j] += g;
        }
    });
    for (int64_t i = 0; i < n * c; ++i) {
        T s = T(0);
        const T* xp = x.ptr() + i * sp;
        for (int64_t j = 0; j < sp; ++j) s += xp[j];
        out.ptr()[i] = s / T(sp);
    }
    return out;
}

}  // namespace hrd
