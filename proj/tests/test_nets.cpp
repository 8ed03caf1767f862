#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "hrd/gradcheck.hpp"
#include "hrd/nets.hpp"
#include "hrd/segmenter.hpp"
#include "hrd/synth.hpp"
#include "hrd/trainer.hpp"
#include "oracles.hpp"

using namespace hrd;

namespace {

ModelConfig cae_cfg(int layers, int64_t latent) {
    ModelConfig c;
    c.family = Family::contrastive_cae;
    c.num_layers = layers;
    c.latent_dim = latent;
    return c;
}

ModelConfig cnn_cfg(int layers) {
    ModelConfig c;
    c.family = Family::cnn;
    c.num_layers = layers;
    return c;
}

}  // namespace

TEST_CASE("encoder spatial arithmetic for the six-row table") {
    const std::vector<SpatialDims> want = {
        {32, 12, 84}, {64, 6, 42}, {128, 3, 21}, {256, 1, 7}, {512, 1, 7}, {1024, 1, 7}};
    for (int d = 1; d <= 6; ++d) {
        auto got = encoder_dims(d);
        CHECK(got.c == want[d - 1].c);
        CHECK(got.h == want[d - 1].h);
        CHECK(got.w == want[d - 1].w);
    }
    CHECK(encoder_dims(4).flat() == 1792);  // 256 x 1 x 7
    CHECK_THROWS_AS(encoder_dims(0), ValidationError);
    CHECK_THROWS_AS(encoder_dims(7), ValidationError);
}

TEST_CASE("cnn produces [N,2] logits at every depth") {
    std::mt19937 rng(1);
    for (int d = 1; d <= 6; ++d) {
        CnnModel<float> net;
        net.build(cnn_cfg(d), 5);
        auto x = oracle::random_uniform<float>({2, 1, 24, 168}, rng, -0.5f, 0.5f);
        auto y = net.forward(x, true);
        CHECK(y.shape() == Shape{2, 2});
        for (auto v : y.data()) CHECK(std::isfinite(v));
    }
}

TEST_CASE("3-layer cnn takes a batch of 32 to 32x2 logits") {
    std::mt19937 rng(2);
    CnnModel<float> net;
    net.build(cnn_cfg(3), 5);
    auto x = oracle::random_uniform<float>({32, 1, 24, 168}, rng, -0.5f, 0.5f);
    auto y = net.forward(x, true);
    CHECK(y.shape() == Shape{32, 2});
}

TEST_CASE("cnn eval mode handles a single-example batch via running stats") {
    std::mt19937 rng(3);
    CnnModel<float> net;
    net.build(cnn_cfg(2), 5);
    auto warm = oracle::random_uniform<float>({4, 1, 24, 168}, rng, -0.5f, 0.5f);
    (void)net.forward(warm, true);  // initialize running statistics
    auto x = oracle::random_uniform<float>({1, 1, 24, 168}, rng, -0.5f, 0.5f);
    auto y = net.forward(x, false);
    CHECK(y.shape() == Shape{1, 2});
    for (auto v : y.data()) CHECK(std::isfinite(v));
}

TEST_CASE("cnn rejects wrong input shapes") {
    CnnModel<float> net;
    net.build(cnn_cfg(1), 5);
    CHECK_THROWS_AS(net.forward(Tensor::zeros({2, 1, 24, 100}), true), ValidationError);
}

TEST_CASE("cae reconstructs exactly [N,1,24,168] for every depth") {
    std::mt19937 rng(4);
    for (int d = 1; d <= 6; ++d) {
        CaeModel<float> net;
        net.build(cae_cfg(d, 32), 7);
        auto x = oracle::random_uniform<float>({2, 1, 24, 168}, rng, -0.5f, 0.5f);
        auto z = net.encode(x, true);
        CHECK(z.shape() == Shape{2, 32});
        auto r = net.decode(z, true);
        CHECK(r.shape() == Shape{2, 1, 24, 168});
    }
}

TEST_CASE("cae latent sizes: explicit bottleneck and flattened pass-through") {
    std::mt19937 rng(5);
    CaeModel<float> hundred;
    hundred.build(cae_cfg(4, 100), 7);
    auto x = oracle::random_uniform<float>({3, 1, 24, 168}, rng, -0.5f, 0.5f);
    CHECK(hundred.encode(x, true).shape() == Shape{3, 100});

    CaeModel<float> none;
    none.build(cae_cfg(4, 0), 7);
    auto z = none.encode(x, true);
    CHECK(z.shape() == Shape{3, 1792});  // 256 * 1 * 7, no bottleneck layer
    CHECK(none.decode(z, true).shape() == Shape{3, 1, 24, 168});

    CHECK_THROWS_AS(hundred.decode(Tensor::zeros({3, 99}), true), ValidationError);
}

TEST_CASE("cae encode is deterministic for fixed weights and input") {
    std::mt19937 rng(6);
    auto x = oracle::random_uniform<float>({2, 1, 24, 168}, rng, -0.5f, 0.5f);
    CaeModel<float> a, b;
    a.build(cae_cfg(2, 16), 11);
    b.build(cae_cfg(2, 16), 11);
    auto za = a.encode(x, true);
    auto zb = b.encode(x, true);
    CHECK(za.data() == zb.data());
    auto za2 = a.encode(x, false);
    auto za3 = a.encode(x, false);
    CHECK(za2.data() == za3.data());
}

TEST_CASE("mirror property: decoder layer k output equals encoder layer (depth-k) input") {
    std::mt19937 rng(7);
    for (int d = 1; d <= 6; ++d) {
        CaeModel<float> net;
        net.build(cae_cfg(d, 24), 7);
        auto x = oracle::random_uniform<float>({1, 1, 24, 168}, rng, -0.5f, 0.5f);
        auto z = net.encode(x, true);

        // walk the decoder blocks manually and record spatial shapes
        auto y = z;
        if (net.has_bottleneck()) y = net.dec_fc.forward(y);
        y = reshape(y, {1, net.enc_out.c, net.enc_out.h, net.enc_out.w});
        for (size_t i = 0; i < net.dec_blocks.size(); ++i) {
            y = net.dec_blocks[i].forward(y, true);
            const int k = d - static_cast<int>(i);  // this block mirrors encoder layer k
            const SpatialDims enc_input =
                (k >= 2) ? encoder_dims(k - 1) : SpatialDims{1, kMapRows, kMapCols};
            CHECK(y.dim(2) == enc_input.h);
            CHECK(y.dim(3) == enc_input.w);
        }
        CHECK(y.shape() == Shape{1, 1, 24, 168});
    }
}

TEST_CASE("zero-weight cae decodes to a bias-only constant image") {
    CaeModel<float> net;
    net.build(cae_cfg(2, 8), 7);
    for (auto& np : net.named_params())
        std::fill(np.t.data().begin(), np.t.data().end(), 0.0f);
    net.dec_blocks.back().deconv.b.data()[0] = 0.7f;  // final layer bias
    auto z = Tensor::zeros({2, 8});
    auto r = net.decode(z, true);
    for (auto v : r.data()) CHECK(v == doctest::Approx(0.7f));
}

TEST_CASE("train and eval batch norm agree when batch stats equal running stats") {
    std::mt19937 rng(8);
    auto x = oracle::random_uniform<float>({4, 3, 6, 6}, rng);
    auto gamma = oracle::random_uniform<float>({3}, rng, 0.5f, 1.5f);
    auto beta = oracle::random_uniform<float>({3}, rng, -0.5f, 0.5f);

    // compute batch stats and install them as running stats (biased variance)
    std::vector<float> mean(3, 0.0f), var(3, 0.0f);
    const int64_t m = 4 * 36;
    for (int64_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (int64_t n = 0; n < 4; ++n)
            for (int64_t i = 0; i < 36; ++i) s += x.ptr()[(n * 3 + c) * 36 + i];
        mean[c] = static_cast<float>(s / m);
        double v = 0.0;
        for (int64_t n = 0; n < 4; ++n)
            for (int64_t i = 0; i < 36; ++i) {
                const double dlt = x.ptr()[(n * 3 + c) * 36 + i] - mean[c];
                v += dlt * dlt;
            }
        var[c] = static_cast<float>(v / m);
    }
    std::vector<float> rm = mean, rv = var;
    bool ready = true;
    auto eval_out = batch_norm2d(x, gamma, beta, rm, rv, ready, false);

    std::vector<float> rm2, rv2;
    bool ready2 = false;
    auto train_out = batch_norm2d(x, gamma, beta, rm2, rv2, ready2, true);

    CHECK(oracle::max_abs_diff(eval_out, train_out) < 1e-5);
}

TEST_CASE("mlp widths, zero input, and the closed-form parameter count") {
    MlpModel<float> net;
    net.build(MlpConfig{}, 3);

    const std::vector<int64_t> widths = {4032, 1000, 250, 50, 20, 2};
    REQUIRE(net.fcs.size() == 5);
    for (size_t i = 0; i < 5; ++i) {
        CHECK(net.fcs[i].w.dim(0) == widths[i]);
        CHECK(net.fcs[i].w.dim(1) == widths[i + 1]);
    }

    auto y = net.forward(Tensor::zeros({3, 4032}));
    CHECK(y.shape() == Shape{3, 2});
    for (auto v : y.data()) CHECK(v == 0.0f);  // zero input, zero bias

    int64_t fc_expected = 0;
    for (size_t i = 0; i + 1 < widths.size(); ++i)
        fc_expected += widths[i] * widths[i + 1] + widths[i + 1];
    int64_t slope_expected = 1000 + 250 + 50 + 20;
    CHECK(net.param_count() == fc_expected + slope_expected);
}

TEST_CASE("attribute classifier maps latents to [N,2]") {
    AttrClassifier<float> clf;
    clf.build(100, 32, 5);
    std::mt19937 rng(9);
    auto z = oracle::random_uniform<float>({4, 100}, rng);
    CHECK(clf.forward(z).shape() == Shape{4, 2});

    // hand-set weights give a fixed mapping: hidden = z, logits = [sum, -sum]
    AttrClassifier<float> fixed;
    fixed.build(2, 2, 5);
    fixed.fc1.w.data() = {1.0f, 0.0f, 0.0f, 1.0f};
    fixed.fc1.b.data() = {0.0f, 0.0f};
    fixed.act.slope.data() = {1.0f, 1.0f};  // identity activation
    fixed.fc2.w.data() = {1.0f, -1.0f, 1.0f, -1.0f};
    fixed.fc2.b.data() = {0.0f, 0.0f};
    auto out = fixed.forward(Tensor::from({1, 2}, {2.0f, 3.0f}));
    CHECK(out.data()[0] == doctest::Approx(5.0f));
    CHECK(out.data()[1] == doctest::Approx(-5.0f));
}

TEST_CASE("attribute classifier gradient check") {
    AttrClassifier<double> clf;
    clf.build(6, 4, 5);
    std::mt19937 rng(10);
    auto z = TensorT<double>::zeros({3, 6});
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    for (auto& v : z.data()) v = d(rng);
    std::vector<int> labels = {0, 1, 1};

    std::vector<TensorT<double>> leaves;
    for (auto& np : clf.named_params()) leaves.push_back(np.t);
    auto rep = check_gradient(
        "attr_classifier", [&] { return cross_entropy_loss(clf.forward(z), labels); }, leaves, {});
    CHECK(rep.pass);
    CHECK(rep.max_rel_err < 1e-3);
}

TEST_CASE("single-example reconstruction overfit drives rmse under 0.05") {
    // a real training example: the replication unpool makes decoder outputs
    // 2x2-block-constant, so only smooth inputs (like heart-rate maps) can be
    // reconstructed to low error
    GeneratorConfig gc;
    gc.days = 42;
    gc.anomaly.onset_day = 28;
    gc.seed = 3;
    auto participant = generate_participant(gc, Group::positive, 0);
    auto five = resample_5min(participant.series);
    auto seg = impute_median(extract_symptomatic(five, *participant.entry.onset_day));
    std::vector<const Segment*> one = {&seg};
    auto x = batch_from_segments(one, true);

    CaeModel<float> net;
    net.build(cae_cfg(1, 32), 13);
    std::vector<Tensor> params;
    for (auto& np : net.named_params()) params.push_back(np.t);
    AdamState<float> state;
    AdamConfig<float> adam;
    adam.lr = 0.01f;

    float final_rmse = 1e9f;
    for (int step = 0; step < 200; ++step) {
        auto recon = net.reconstruct(x, true);
        auto loss = rmse_loss(x, recon);
        final_rmse = loss.item();
        if (final_rmse < 0.05f) break;
        for (auto& p : params) p.zero_grad();
        loss.backward();
        adam_step(params, state, adam);
    }
    CHECK(final_rmse < 0.05f);
}
