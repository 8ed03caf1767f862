// Training objectives: batch RMSE reconstruction error, the margin-hinged
// contrastive reconstruction loss, and softmax cross-entropy.
//
// The contrastive loss drives asymptomatic reconstruction error toward zero
// while pushing symptomatic reconstruction error up to the margin m:
//
//     L = rmse(asym, asym_recon) + max(0, m - rmse(sym, sym_recon))

#pragma once

#include "hrd/ops.hpp"

namespace hrd {

// sqrt(mean((x - x_hat)^2)) over every element of the batch.
template <typename T>
TensorT<T> rmse_loss(const TensorT<T>& x, const TensorT<T>& x_hat) {
    if (x.shape() != x_hat.shape())
        throw ValidationError("rmse_loss: shape mismatch " + shape_str(x.shape()) + " vs " +
                              shape_str(x_hat.shape()));
    const int64_t n = x.numel();

    auto out = TensorT<T>::make_op({1}, "rmse_loss", {x, x_hat}, [x, x_hat, n](TensorNode<T>& node) {
        const T r = node.data[0];
        if (r <= T(0)) return;  // zero-subgradient at the perfect-reconstruction kink
        const T g = node.grad[0] / (T(n) * r);
        if (x_hat.node()->requires_grad) {
            x_hat.node()->ensure_grad();
            for (int64_t i = 0; i < n; ++i)
                x_hat.grad()[i] += g * (x_hat.ptr()[i] - x.ptr()[i]);
        }
        if (x.node()->requires_grad) {
            x.node()->ensure_grad();
            for (int64_t i = 0; i < n; ++i) x.grad()[i] += g * (x.ptr()[i] - x_hat.ptr()[i]);
        }
    });

    T s = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const T d = x.ptr()[i] - x_hat.ptr()[i];
        s += d * d;
    }
    out.ptr()[0] = std::sqrt(s / T(n));
    return out;
}

// max(0, m - r) on a scalar; slope 0 once r has reached the margin.
template <typename T>
TensorT<T> margin_hinge(const TensorT<T>& r, T m) {
    if (r.numel() != 1) throw ValidationError("margin_hinge: scalar input required");
    auto out = TensorT<T>::make_op({1}, "margin_hinge", {r}, [r, m](TensorNode<T>& node) {
        r.node()->ensure_grad();
        if (r.ptr()[0] < m) r.grad()[0] -= node.grad[0];
    });
    out.ptr()[0] = std::max(T(0), m - r.ptr()[0]);
    return out;
}

template <typename T>
TensorT<T> contrastive_loss(const TensorT<T>& asym, const TensorT<T>& asym_recon,
                            const TensorT<T>& sym, const TensorT<T>& sym_recon, T margin) {
    if (asym.numel() == 0 || sym.numel() == 0 || asym.dim(0) == 0 || sym.dim(0) == 0)
        throw ValidationError("contrastive_loss: both classes required per step");
    auto r_asym = rmse_loss(asym, asym_recon);
    auto r_sym = rmse_loss(sym, sym_recon);
    return add(r_asym, margin_hinge(r_sym, margin));
}

// Mean softmax cross-entropy; labels are class indices.
template <typename T>
TensorT<T> cross_entropy_loss(const TensorT<T>& logits, const std::vector<int>& labels) {
    if (logits.ndim() != 2)
        throw ValidationError("cross_entropy_loss: need [N,K] logits");
    const int64_t n = logits.dim(0), k = logits.dim(1);
    if (static_cast<int64_t>(labels.size()) != n)
        throw ValidationError("cross_entropy_loss: " + std::to_string(labels.size()) +
                              " labels for batch of " + std::to_string(n));
    for (int lb : labels)
        if (lb < 0 || lb >= k) throw ValidationError("cross_entropy_loss: label out of range");

    auto probs = std::make_shared<std::vector<T>>(static_cast<size_t>(n * k));
    auto out = TensorT<T>::make_op({1}, "cross_entropy_loss", {logits},
                                   [logits, labels, probs, n, k](TensorNode<T>& node) {
        logits.node()->ensure_grad();
        const T g = node.grad[0] / T(n);
        for (int64_t i = 0; i < n; ++i)
            for (int64_t j = 0; j < k; ++j)
                logits.grad()[i * k + j] +=
                    g * ((*probs)[i * k + j] - (labels[i] == j ? T(1) : T(0)));
    });

    T loss = T(0);
    for (int64_t i = 0; i < n; ++i) {
        const T* row = logits.ptr() + i * k;
        T mx = row[0];
        for (int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        T z = T(0);
        for (int64_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
        const T logz = std::log(z) + mx;
        for (int64_t j = 0; j < k; ++j) (*probs)[i * k + j] = std::exp(row[j] - logz);
        loss += logz - row[labels[i]];
    }
    out.ptr()[0] = loss / T(n);
    return out;
}

}  // namespace hrd
