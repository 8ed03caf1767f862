#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "hrd/synth.hpp"
#include "hrd/trainer.hpp"
#include "oracles.hpp"

using namespace hrd;

namespace {

// small pool of imputed synthetic segments for training tests
struct SegmentPool {
    std::vector<Segment> sym, asym;

    explicit SegmentPool(uint64_t seed) {
        GeneratorConfig gc;
        gc.days = 49;
        gc.anomaly.onset_day = 31;
        gc.seed = seed;
        for (int i = 0; i < 3; ++i) {
            auto p = generate_participant(gc, Group::pretrain, i);
            auto five = resample_5min(p.series);
            sym.push_back(impute_median(extract_symptomatic(five, *p.entry.onset_day)));
            for (auto& a : extract_asymptomatic(five, *p.entry.onset_day))
                asym.push_back(impute_median(a));
        }
    }
    SegmentSet set() const {
        SegmentSet s;
        s.symptomatic = sym;
        s.asymptomatic = asym;
        return s;
    }
};

ModelConfig tiny_cae() {
    ModelConfig c;
    c.family = Family::contrastive_cae;
    c.num_layers = 1;
    c.latent_dim = 16;
    return c;
}

std::vector<float> snapshot(Model& m) {
    std::vector<float> all;
    for (auto& np : m.named_params())
        all.insert(all.end(), np.t.data().begin(), np.t.data().end());
    return all;
}

}  // namespace

TEST_CASE("rmse_loss values and properties") {
    auto zeros = Tensor::zeros({2});
    auto same = Tensor::zeros({2});
    CHECK(rmse_loss(zeros, same).item() == 0.0f);

    auto x = Tensor::from({2}, {0.0f, 0.0f});
    auto xh = Tensor::from({2}, {3.0f, 4.0f});
    CHECK(rmse_loss(x, xh).item() == doctest::Approx(std::sqrt(25.0 / 2.0)));  // 3.5355...

    // scale equivariance: rmse(ax, ax^) = |a| rmse(x, x^)
    std::mt19937 rng(1);
    auto a = oracle::random_uniform<float>({3, 5}, rng);
    auto b = oracle::random_uniform<float>({3, 5}, rng);
    const float base = rmse_loss(a, b).item();
    for (float scale : {2.0f, -3.0f, 0.25f}) {
        auto at = a.detach();
        auto bt = b.detach();
        for (auto& v : at.data()) v *= scale;
        for (auto& v : bt.data()) v *= scale;
        CHECK(rmse_loss(at, bt).item() == doctest::Approx(std::abs(scale) * base).epsilon(1e-4));
    }

    CHECK_THROWS_AS(rmse_loss(Tensor::zeros({2}), Tensor::zeros({3})), ValidationError);
}

TEST_CASE("contrastive_loss spec on the margin") {
    const float m = 5.0f;
    auto mk = [](float v) { return Tensor::full({2, 4}, v); };

    // perfect reconstruction of both classes: loss = m
    CHECK(contrastive_loss(mk(0.3f), mk(0.3f), mk(0.4f), mk(0.4f), m).item() ==
          doctest::Approx(5.0f));

    // asym error 0, sym error exactly m: loss = 0
    CHECK(contrastive_loss(mk(0.3f), mk(0.3f), mk(0.0f), mk(5.0f), m).item() ==
          doctest::Approx(0.0f));

    // asym error 1, sym error 7: loss = 1 + max(0, -2) = 1
    CHECK(contrastive_loss(mk(0.0f), mk(1.0f), mk(0.0f), mk(7.0f), m).item() ==
          doctest::Approx(1.0f));

    // direct-formula grid: monotone non-increasing in sym error up to m, flat after
    float prev = std::numeric_limits<float>::infinity();
    for (int i = 0; i < 20; ++i) {
        const float err = 0.5f * static_cast<float>(i);  // 0 .. 9.5
        const float loss = contrastive_loss(mk(0.0f), mk(1.0f), mk(0.0f), mk(err), m).item();
        CHECK(loss == doctest::Approx(1.0f + std::max(0.0f, m - err)));
        CHECK(loss <= prev + 1e-6f);
        if (err >= m) CHECK(loss == doctest::Approx(1.0f));
        prev = loss;
    }

    CHECK_THROWS_WITH_AS(
        contrastive_loss(Tensor::zeros({0, 4}), Tensor::zeros({0, 4}), mk(0.0f), mk(1.0f), m),
        "contrastive_loss: both classes required per step", ValidationError);
}

TEST_CASE("cross_entropy_loss values") {
    auto even = Tensor::from({1, 2}, {0.0f, 0.0f});
    CHECK(cross_entropy_loss(even, {0}).item() == doctest::Approx(std::log(2.0)));
    CHECK(cross_entropy_loss(even, {1}).item() == doctest::Approx(std::log(2.0)));

    auto sure = Tensor::from({1, 2}, {1000.0f, -1000.0f});
    CHECK(cross_entropy_loss(sure, {0}).item() == doctest::Approx(0.0f));
    CHECK(std::isfinite(cross_entropy_loss(sure, {1}).item()));

    // random case against a log-sum-exp oracle
    std::mt19937 rng(2);
    auto logits = oracle::random_uniform<float>({5, 2}, rng, -3.0f, 3.0f);
    std::vector<int> labels = {0, 1, 1, 0, 1};
    double want = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double a = logits.ptr()[i * 2], b = logits.ptr()[i * 2 + 1];
        const double mx = std::max(a, b);
        const double lse = mx + std::log(std::exp(a - mx) + std::exp(b - mx));
        want += lse - (labels[i] == 0 ? a : b);
    }
    want /= 5.0;
    CHECK(cross_entropy_loss(logits, labels).item() == doctest::Approx(want).epsilon(1e-5));
}

TEST_CASE("learning-rate schedule matches the closed form") {
    TrainSchedule s;
    CHECK(s.lr_at(0) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(s.lr_at(49) == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(s.lr_at(50) == doctest::Approx(0.0099).epsilon(1e-12));
    CHECK(s.lr_at(100) == doctest::Approx(0.003267).epsilon(1e-9));
    CHECK(s.lr_at(150) == doctest::Approx(0.00107811).epsilon(1e-9));
    CHECK(s.lr_at(200) == doctest::Approx(0.0003557763).epsilon(1e-6));
    CHECK(s.lr_at(250) == doctest::Approx(0.0001174062).epsilon(1e-6));
    CHECK(s.lr_at(300) == doctest::Approx(1e-4).epsilon(1e-12));  // floor
    CHECK(s.lr_at(1000) == doctest::Approx(1e-4).epsilon(1e-12));

    for (int e = 0; e < 400; ++e) {
        const double closed =
            std::max(1e-4, 0.03 * std::pow(0.33, static_cast<double>(e / 50)));
        CHECK(s.lr_at(e) == doctest::Approx(closed).epsilon(1e-12));
    }
}

TEST_CASE("contrastive step sizes pair equal half-batches") {
    CHECK(contrastive_step_sizes(32, 32) == std::vector<int64_t>{16, 16});
    CHECK(contrastive_step_sizes(33, 32) == std::vector<int64_t>{16, 16, 1});
    CHECK(contrastive_step_sizes(5, 32) == std::vector<int64_t>{5});
    CHECK(contrastive_step_sizes(49, 32) == std::vector<int64_t>{16, 16, 16, 1});
    int64_t total = 0;
    for (auto v : contrastive_step_sizes(1470, 32)) total += v;
    CHECK(total == 1470);
}

TEST_CASE("train is deterministic: same seed gives bit-identical parameters") {
    SegmentPool pool(21);
    TrainSchedule sched;
    sched.max_epochs = 3;

    auto m1 = Model::build(tiny_cae(), 9);
    auto m2 = Model::build(tiny_cae(), 9);
    train(m1, pool.set(), sched, LossKind::contrastive, 123);
    train(m2, pool.set(), sched, LossKind::contrastive, 123);
    CHECK(snapshot(m1) == snapshot(m2));

    auto m3 = Model::build(tiny_cae(), 9);
    train(m3, pool.set(), sched, LossKind::contrastive, 124);
    CHECK(snapshot(m1) != snapshot(m3));
}

TEST_CASE("contrastive training requires both classes") {
    SegmentPool pool(22);
    SegmentSet one_sided;
    one_sided.asymptomatic = pool.asym;
    auto m = Model::build(tiny_cae(), 9);
    TrainSchedule sched;
    sched.max_epochs = 1;
    CHECK_THROWS_WITH_AS(train(m, one_sided, sched, LossKind::contrastive, 1),
                         "both classes required per step", ValidationError);
}

TEST_CASE("single-example contrastive overfit reaches loss < 0.1") {
    SegmentPool pool(23);
    SegmentSet set;
    set.symptomatic = {pool.sym.front()};
    set.asymptomatic = {pool.asym.front()};

    ModelConfig cfg = tiny_cae();
    cfg.latent_dim = 32;
    auto model = Model::build(cfg, 7);
    TrainSchedule sched;
    sched.max_epochs = 150;  // well within the 500-epoch budget
    auto result = train(model, set, sched, LossKind::contrastive, 42);
    double best = 1e9;
    for (const auto& e : result.trace) best = std::min(best, e.loss);
    CHECK(best < 0.1);
}

TEST_CASE("pretrain_then_finetune") {
    SegmentPool pool(24);
    auto base = pool.set();

    SegmentSet pre = base, fine;
    fine.symptomatic = {base.symptomatic.back()};
    fine.asymptomatic = {base.asymptomatic.back()};

    TrainSchedule sched;
    sched.max_epochs = 2;

    // empty fine-tune set: parameters equal a pretrain-only run
    auto a = Model::build(tiny_cae(), 9);
    pretrain_then_finetune(a, pre, SegmentSet{}, sched, sched, 55);
    auto b = Model::build(tiny_cae(), 9);
    train(b, pre, sched, LossKind::contrastive, 55);
    CHECK(snapshot(a) == snapshot(b));

    // non-empty fine-tune changes parameters
    auto c = Model::build(tiny_cae(), 9);
    auto trace = pretrain_then_finetune(c, pre, fine, sched, sched, 55);
    CHECK(snapshot(c) != snapshot(a));
    CHECK(trace.trace.size() == 4);

    // fine-tuning does not increase the loss on the fine-tune data
    auto d = Model::build(tiny_cae(), 9);
    TrainSchedule longer = sched;
    longer.max_epochs = 30;
    train(d, pre, longer, LossKind::contrastive, 55);
    auto errs_of = [&](Model& m) {
        std::vector<const Segment*> segs = {&fine.symptomatic[0], &fine.asymptomatic[0]};
        auto e = reconstruction_errors(m, segs);
        // contrastive objective: asym error + hinge on sym error
        return e[1] + std::max(0.0, 5.0 - e[0]);
    };
    const double before = errs_of(d);
    train(d, fine, longer, LossKind::contrastive, 56);
    const double after = errs_of(d);
    CHECK(after <= before + 1e-6);
}

TEST_CASE("training detects divergence with the epoch index") {
    SegmentPool pool(25);
    auto model = Model::build(tiny_cae(), 9);
    // poison a weight so the forward pass goes non-finite
    auto params = model.named_params();
    params[0].t.data()[0] = std::numeric_limits<float>::infinity();
    TrainSchedule sched;
    sched.max_epochs = 1;
    CHECK_THROWS_AS(train(model, pool.set(), sched, LossKind::contrastive, 1), NumericError);
}
