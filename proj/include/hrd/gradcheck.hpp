// Central finite-difference gradient checking, run in double precision.
// Each check rebuilds the loss from scratch per probe, so recorded tapes
// never leak between evaluations.

#pragma once

#include <functional>
#include <random>

#include "hrd/tensor.hpp"

namespace hrd {

struct GradCheckReport {
    std::string op;
    int probes = 0;
    double max_rel_err = 0.0;
    bool pass = true;
};

struct GradCheckOptions {
    int probes = 50;
    double h = 1e-4;
    double tol = 1e-3;
    uint64_t seed = 7;
    // Test hook: applied to the analytic gradient before comparison, used to
    // prove the checker catches corrupted backward passes.
    std::function<void(std::vector<std::vector<double>>&)> grad_transform;
};

// make_loss() must rebuild the scalar loss from the current leaf contents.
inline GradCheckReport check_gradient(const std::string& op_name,
                                      const std::function<TensorT<double>()>& make_loss,
                                      std::vector<TensorT<double>> leaves,
                                      const GradCheckOptions& opt = {}) {
    GradCheckReport rep;
    rep.op = op_name;

    for (auto& l : leaves) {
        l.set_requires_grad(true);
        l.zero_grad();
    }
    auto loss = make_loss();
    loss.backward();

    std::vector<std::vector<double>> analytic(leaves.size());
    for (size_t i = 0; i < leaves.size(); ++i) {
        analytic[i] = leaves[i].grad().empty() ? std::vector<double>(leaves[i].data().size(), 0.0)
                                               : leaves[i].grad();
    }
    if (opt.grad_transform) opt.grad_transform(analytic);

    std::mt19937_64 rng(opt.seed);
    int64_t total = 0;
    for (const auto& l : leaves) total += l.numel();

    for (int p = 0; p < opt.probes; ++p) {
        int64_t flat = static_cast<int64_t>(rng() % static_cast<uint64_t>(total));
        size_t li = 0;
        while (flat >= leaves[li].numel()) {
            flat -= leaves[li].numel();
            ++li;
        }
        double& theta = leaves[li].data()[static_cast<size_t>(flat)];
        const double saved = theta;

        NoGradGuard ng;  // finite differences need values only
        theta = saved + opt.h;
        const double up = make_loss().item();
        theta = saved - opt.h;
        const double down = make_loss().item();
        theta = saved;

        const double numeric = (up - down) / (2.0 * opt.h);
        const double a = analytic[li][static_cast<size_t>(flat)];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-3});
        const double rel = std::abs(a - numeric) / denom;
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
        ++rep.probes;
    }
    rep.pass = rep.max_rel_err < opt.tol;
    return rep;
}

}  // namespace hrd
