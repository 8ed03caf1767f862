// Adam with bias correction. One AdamState per parameter group; moments are
// stored flat alongside the parameters they belong to.

#pragma once

#include <cmath>
#include <vector>

#include "hrd/tensor.hpp"

namespace hrd {

template <typename T>
struct AdamState {
    std::vector<std::vector<T>> m;  // first moments, one buffer per parameter
    std::vector<std::vector<T>> v;  // second moments
    int64_t step = 0;

    void reset() {
        m.clear();
        v.clear();
        step = 0;
    }
};

template <typename T>
struct AdamConfig {
    T lr = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T eps = T(1e-8);
};

// Applies one update to every parameter with a populated gradient. Parameters
// whose grad buffer is empty (never touched by backward) are left unchanged.
template <typename T>
void adam_step(std::vector<TensorT<T>>& params, AdamState<T>& state, const AdamConfig<T>& cfg) {
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].data().size(), T(0));
            state.v[i].assign(params[i].data().size(), T(0));
        }
    }
    if (state.m.size() != params.size())
        throw ValidationError("adam_step: state was initialized for a different parameter set");

    state.step += 1;
    const T bc1 = T(1) - std::pow(cfg.beta1, T(state.step));
    const T bc2 = T(1) - std::pow(cfg.beta2, T(state.step));

    for (size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].data();
        const auto& g = params[i].grad();
        if (g.empty()) continue;
        auto& m = state.m[i];
        auto& v = state.v[i];
        for (size_t j = 0; j < p.size(); ++j) {
            m[j] = cfg.beta1 * m[j] + (T(1) - cfg.beta1) * g[j];
            v[j] = cfg.beta2 * v[j] + (T(1) - cfg.beta2) * g[j] * g[j];
            const T mhat = m[j] / bc1;
            const T vhat = v[j] / bc2;
            p[j] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

}  // namespace hrd
