// The finite-difference suite over every differentiable operator and both
// training losses, ending with a full contrastive-CAE composite. Runs in
// double precision. Used by the gradcheck CLI subcommand and the tests.

#pragma once

#include "hrd/gradcheck.hpp"
#include "hrd/nets.hpp"

namespace hrd {

namespace gcdetail {

using DTensor = TensorT<double>;

inline DTensor rand_t(Shape shape, std::mt19937& rng, double lo = -1.0, double hi = 1.0) {
    auto t = DTensor::zeros(std::move(shape));
    std::uniform_real_distribution<double> dist(lo, hi);
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

// shuffled distinct values, clear of the PReLU/pool kinks
inline DTensor rand_distinct(Shape shape, std::mt19937& rng) {
    auto t = DTensor::zeros(std::move(shape));
    const int64_t n = t.numel();
    std::vector<int64_t> perm(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int64_t i = 0; i < n; ++i) {
        double v = 2.0 * (static_cast<double>(perm[static_cast<size_t>(i)]) + 1.0) /
                       (static_cast<double>(n) + 1.0) -
                   1.0;
        if (std::abs(v) < 0.05) v += v >= 0 ? 0.07 : -0.07;
        t.data()[static_cast<size_t>(i)] = v;
    }
    return t;
}

// generic scalar readout: <out, c> with a fixed random cotangent
inline DTensor readout(const DTensor& out, const DTensor& c) { return sum(mul(out, c)); }

}  // namespace gcdetail

inline std::vector<GradCheckReport> run_gradcheck_suite(int probes = 50, uint64_t seed = 17) {
    using gcdetail::DTensor;
    using gcdetail::rand_distinct;
    using gcdetail::rand_t;
    using gcdetail::readout;

    std::vector<GradCheckReport> reports;
    std::mt19937 rng(static_cast<uint32_t>(seed));
    GradCheckOptions opt;
    opt.probes = probes;
    opt.seed = seed;

    {
        auto x = rand_t({2, 3, 6, 7}, rng);
        auto w = rand_t({4, 3, 3, 3}, rng);
        auto b = rand_t({4}, rng);
        auto c = rand_t({2, 4, 6, 7}, rng);
        reports.push_back(check_gradient(
            "conv2d", [&] { return readout(conv2d(x, w, b, {1, 1}, {1, 1}), c); }, {x, w, b}, opt));
    }
    {
        auto x = rand_t({1, 2, 9, 9}, rng);
        auto w = rand_t({3, 2, 3, 3}, rng);
        auto b = rand_t({3}, rng);
        auto c = rand_t({1, 3, 5, 5}, rng);
        reports.push_back(check_gradient(
            "conv2d_strided", [&] { return readout(conv2d(x, w, b, {2, 2}, {1, 1}), c); },
            {x, w, b}, opt));
    }
    {
        auto x = rand_t({2, 3, 5, 6}, rng);
        auto w = rand_t({3, 2, 3, 3}, rng);
        auto b = rand_t({2}, rng);
        auto c = rand_t({2, 2, 7, 8}, rng);
        reports.push_back(check_gradient(
            "conv_transpose2d", [&] { return readout(conv_transpose2d(x, w, b, {1, 1}, {0, 0}), c); },
            {x, w, b}, opt));
    }
    {
        auto x = rand_t({1, 2, 8, 8}, rng);
        auto w = rand_t({2, 3, 2, 2}, rng);
        auto b = rand_t({3}, rng);
        auto c = rand_t({1, 3, 14, 14}, rng);  // (8-1)*2 - 2*1 + 2
        reports.push_back(check_gradient(
            "conv_transpose2d_strided",
            [&] { return readout(conv_transpose2d(x, w, b, {2, 2}, {1, 1}), c); }, {x, w, b}, opt));
    }
    {
        auto x = rand_distinct({2, 2, 6, 6}, rng);
        auto c = rand_t({2, 2, 3, 3}, rng);
        reports.push_back(check_gradient(
            "max_pool2d", [&] { return readout(max_pool2d(x, {2, 2}, {2, 2}), c); }, {x}, opt));
    }
    {
        auto x = rand_t({2, 3, 3, 5}, rng);
        auto c = rand_t({2, 3, 6, 10}, rng);
        reports.push_back(check_gradient(
            "upsample_unpool", [&] { return readout(upsample_unpool(x, {2, 2}), c); }, {x}, opt));
    }
    {
        auto x = rand_t({2, 3, 4, 4}, rng);
        auto gamma = rand_t({3}, rng, 0.5, 1.5);
        auto beta = rand_t({3}, rng, -0.5, 0.5);
        auto c = rand_t({2, 3, 4, 4}, rng);
        auto rm = std::make_shared<std::vector<double>>();
        auto rv = std::make_shared<std::vector<double>>();
        auto ready = std::make_shared<bool>(false);
        reports.push_back(check_gradient(
            "batch_norm",
            [=] { return readout(batch_norm2d(x, gamma, beta, *rm, *rv, *ready, true), c); },
            {x, gamma, beta}, opt));
    }
    {
        auto x = rand_distinct({2, 4, 5, 5}, rng);
        auto slope = rand_t({4}, rng, 0.1, 0.5);
        auto c = rand_t({2, 4, 5, 5}, rng);
        reports.push_back(
            check_gradient("prelu", [&] { return readout(prelu(x, slope), c); }, {x, slope}, opt));
    }
    {
        auto x = rand_t({3, 7}, rng);
        auto w = rand_t({7, 4}, rng);
        auto b = rand_t({4}, rng);
        auto c = rand_t({3, 4}, rng);
        reports.push_back(check_gradient(
            "fully_connected", [&] { return readout(fully_connected(x, w, b), c); }, {x, w, b},
            opt));
    }
    {
        auto x = rand_t({2, 3, 4, 5}, rng);
        auto c = rand_t({2, 3}, rng);
        reports.push_back(check_gradient(
            "global_avg_pool", [&] { return readout(global_avg_pool(x), c); }, {x}, opt));
    }
    {
        auto a = rand_t({3, 4}, rng);
        auto b = rand_t({2, 4}, rng);
        auto c = rand_t({10, 2}, rng);
        reports.push_back(check_gradient(
            "reshape_concat_slice",
            [&] {
                auto cat = concat0(a, b);            // [5,4]
                auto flat = reshape(cat, {10, 2});   // view
                auto cut = slice0(flat, 0, 10);
                return readout(cut, c);
            },
            {a, b}, opt));
    }
    {
        auto x = rand_t({2, 6}, rng);
        auto xh = rand_t({2, 6}, rng);
        reports.push_back(
            check_gradient("rmse_loss", [&] { return rmse_loss(x, xh); }, {x, xh}, opt));
    }
    {
        // hinge active: symptomatic error below the margin
        auto xa = rand_t({2, 5}, rng);
        auto ra = rand_t({2, 5}, rng);
        auto xs = rand_t({2, 5}, rng);
        auto rs = rand_t({2, 5}, rng);
        reports.push_back(check_gradient(
            "contrastive_loss", [&] { return contrastive_loss(xa, ra, xs, rs, 5.0); },
            {xa, ra, xs, rs}, opt));
    }
    {
        // hinge saturated: symptomatic error beyond the margin, slope 0
        auto xa = rand_t({2, 5}, rng);
        auto ra = rand_t({2, 5}, rng);
        auto xs = rand_t({2, 5}, rng, 4.0, 6.0);
        auto rs = rand_t({2, 5}, rng, -6.0, -4.0);
        reports.push_back(check_gradient(
            "contrastive_loss_saturated", [&] { return contrastive_loss(xa, ra, xs, rs, 5.0); },
            {xa, ra, xs, rs}, opt));
    }
    {
        auto logits = rand_t({6, 2}, rng, -2.0, 2.0);
        std::vector<int> labels = {0, 1, 1, 0, 1, 0};
        reports.push_back(check_gradient(
            "cross_entropy_loss", [&] { return cross_entropy_loss(logits, labels); }, {logits},
            opt));
    }
    {
        // full contrastive-CAE loss through a 2-layer model, probing parameters
        ModelConfig cfg;
        cfg.family = Family::contrastive_cae;
        cfg.num_layers = 2;
        cfg.latent_dim = 16;
        auto cae = std::make_shared<CaeModel<double>>();
        cae->build(cfg, seed);

        std::mt19937 rng2(static_cast<uint32_t>(seed + 1));
        auto batch = rand_t({4, 1, kMapRows, kMapCols}, rng2, -0.4, 0.6);

        std::vector<DTensor> leaves;
        for (auto& np : cae->named_params()) leaves.push_back(np.t);

        // The full model crosses PReLU/max-pool kinks under perturbation; the
        // induced FD error scales linearly with h, so a small step keeps the
        // check about the gradients rather than the subdifferential.
        GradCheckOptions full = opt;
        full.h = 3e-5;
        reports.push_back(check_gradient(
            "contrastive_cae_full",
            [=] {
                auto recon = cae->reconstruct(batch, true);
                auto xa = slice0(batch, 0, 2);
                auto xs = slice0(batch, 2, 2);
                auto ra = slice0(recon, 0, 2);
                auto rs = slice0(recon, 2, 2);
                return contrastive_loss(xa, ra, xs, rs, 5.0);
            },
            leaves, full));
    }

    return reports;
}

}  // namespace hrd
