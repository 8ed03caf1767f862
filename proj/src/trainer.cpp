#include "hrd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace hrd {

LossKind default_loss_for(Family family) {
    switch (family) {
        case Family::cnn:
        case Family::mlp: return LossKind::cross_entropy;
        case Family::cae: return LossKind::rmse;
        case Family::contrastive_cae: return LossKind::contrastive;
    }
    return LossKind::cross_entropy;
}

Tensor batch_from_segments(const std::vector<const Segment*>& segs, bool map_layout) {
    const int64_t n = static_cast<int64_t>(segs.size());
    if (n == 0) throw ValidationError("empty batch");
    std::vector<float> buf(static_cast<size_t>(n * kSegmentBins));
    for (int64_t i = 0; i < n; ++i) {
        const Segment& s = *segs[static_cast<size_t>(i)];
        if (static_cast<int64_t>(s.values.size()) != kSegmentBins)
            throw ValidationError("segment length != 4032");
        float* dst = buf.data() + i * kSegmentBins;
        if (map_layout) {
            // pixel(r,c) = values[c*24 + r]
            for (int64_t c = 0; c < kMapCols; ++c)
                for (int64_t r = 0; r < kMapRows; ++r)
                    dst[r * kMapCols + c] = normalize_bpm(s.values[static_cast<size_t>(c * kMapRows + r)]);
        } else {
            for (int64_t j = 0; j < kSegmentBins; ++j)
                dst[j] = normalize_bpm(s.values[static_cast<size_t>(j)]);
        }
    }
    if (map_layout) return Tensor::from({n, 1, kMapRows, kMapCols}, std::move(buf));
    return Tensor::from({n, kSegmentBins}, std::move(buf));
}

std::vector<int64_t> contrastive_step_sizes(int64_t n_asym, int batch_size) {
    const int64_t half = std::max<int64_t>(1, batch_size / 2);
    std::vector<int64_t> sizes;
    for (int64_t at = 0; at < n_asym; at += half) sizes.push_back(std::min(half, n_asym - at));
    return sizes;
}

namespace {

std::vector<const Segment*> pointers_of(const std::vector<Segment>& v) {
    std::vector<const Segment*> out;
    out.reserve(v.size());
    for (const auto& s : v) out.push_back(&s);
    return out;
}

void check_finite(double loss, int epoch) {
    if (!std::isfinite(loss))
        throw NumericError("loss diverged (non-finite) at epoch " + std::to_string(epoch));
}

// One epoch of contrastive training: both class lists are shuffled, then
// each step takes chunk i of each. Lists have equal length after balancing,
// so the two half-batches always match in size.
double contrastive_epoch(CaeModel<float>& net, const std::vector<const Segment*>& sym,
                         const std::vector<const Segment*>& asym, float margin, int batch_size,
                         AdamState<float>& state, AdamConfig<float> adam,
                         std::vector<Tensor>& params, int epoch) {
    const int64_t n = static_cast<int64_t>(asym.size());
    double loss_sum = 0.0;
    int64_t steps = 0;
    int64_t at = 0;
    for (const int64_t take_a : contrastive_step_sizes(n, batch_size)) {
        std::vector<const Segment*> chunk;
        chunk.reserve(static_cast<size_t>(2 * take_a));
        for (int64_t i = 0; i < take_a; ++i) chunk.push_back(asym[static_cast<size_t>(at + i)]);
        for (int64_t i = 0; i < take_a; ++i) {
            const int64_t si = (at + i) % static_cast<int64_t>(sym.size());
            chunk.push_back(sym[static_cast<size_t>(si)]);
        }
        at += take_a;
        auto x = batch_from_segments(chunk, true);
        auto recon = net.reconstruct(x, true);
        auto x_asym = slice0(x, 0, take_a);
        auto x_sym = slice0(x, take_a, take_a);
        auto r_asym = slice0(recon, 0, take_a);
        auto r_sym = slice0(recon, take_a, take_a);
        auto loss = contrastive_loss(x_asym, r_asym, x_sym, r_sym, margin);
        check_finite(loss.item(), epoch);
        for (auto& p : params) p.zero_grad();
        loss.backward();
        adam_step(params, state, adam);
        loss_sum += loss.item();
        ++steps;
    }
    return loss_sum / static_cast<double>(std::max<int64_t>(1, steps));
}

double plain_epoch(Model& model, const std::vector<std::pair<const Segment*, int>>& items,
                   LossKind kind, int batch_size, AdamState<float>& state,
                   AdamConfig<float> adam, std::vector<Tensor>& params, int epoch) {
    const bool map_layout = model.cfg.family != Family::mlp;
    const int64_t n = static_cast<int64_t>(items.size());
    double loss_sum = 0.0;
    int64_t steps = 0;
    for (int64_t at = 0; at < n; at += batch_size) {
        const int64_t take = std::min<int64_t>(batch_size, n - at);
        std::vector<const Segment*> chunk;
        std::vector<int> labels;
        chunk.reserve(static_cast<size_t>(take));
        for (int64_t i = 0; i < take; ++i) {
            chunk.push_back(items[static_cast<size_t>(at + i)].first);
            labels.push_back(items[static_cast<size_t>(at + i)].second);
        }
        auto x = batch_from_segments(chunk, map_layout);
        Tensor loss;
        if (kind == LossKind::rmse) {
            auto recon = model.as_cae().reconstruct(x, true);
            loss = rmse_loss(x, recon);
        } else {
            auto logits = model.forward(x, true);
            loss = cross_entropy_loss(logits, labels);
        }
        check_finite(loss.item(), epoch);
        for (auto& p : params) p.zero_grad();
        loss.backward();
        adam_step(params, state, adam);
        loss_sum += loss.item();
        ++steps;
    }
    return loss_sum / static_cast<double>(std::max<int64_t>(1, steps));
}

}  // namespace

TrainResult train(Model& model, const SegmentSet& data, const TrainSchedule& schedule,
                  LossKind loss_kind, uint64_t seed) {
    if (loss_kind == LossKind::contrastive &&
        (data.symptomatic.empty() || data.asymptomatic.empty()))
        throw ValidationError("both classes required per step");
    if (data.symptomatic.empty() && data.asymptomatic.empty())
        throw ValidationError("empty training set");

    std::mt19937_64 rng(seed);
    auto params = param_tensors(model.named_params());
    AdamState<float> state;
    TrainResult result;

    for (int epoch = 0; epoch < schedule.max_epochs; ++epoch) {
        AdamConfig<float> adam;
        adam.lr = static_cast<float>(schedule.lr_at(epoch));
        double mean_loss = 0.0;

        if (loss_kind == LossKind::contrastive) {
            auto sym = pointers_of(data.symptomatic);
            auto asym = pointers_of(data.asymptomatic);
            std::shuffle(sym.begin(), sym.end(), rng);
            std::shuffle(asym.begin(), asym.end(), rng);
            mean_loss = contrastive_epoch(model.as_cae(), sym, asym,
                                          static_cast<float>(model.cfg.margin),
                                          schedule.batch_size, state, adam, params, epoch);
        } else {
            std::vector<std::pair<const Segment*, int>> items;
            for (const auto& s : data.symptomatic) items.push_back({&s, 1});
            for (const auto& s : data.asymptomatic) items.push_back({&s, 0});
            std::shuffle(items.begin(), items.end(), rng);
            mean_loss =
                plain_epoch(model, items, loss_kind, schedule.batch_size, state, adam, params, epoch);
        }
        result.trace.push_back({epoch, schedule.lr_at(epoch), mean_loss});
    }
    return result;
}

TrainResult pretrain_then_finetune(Model& model, const SegmentSet& pretrain,
                                   const SegmentSet& finetune, const TrainSchedule& pre_schedule,
                                   const TrainSchedule& fine_schedule, uint64_t seed) {
    const LossKind kind = default_loss_for(model.cfg.family);
    TrainResult result = train(model, pretrain, pre_schedule, kind, seed);
    if (finetune.symptomatic.empty() && finetune.asymptomatic.empty()) return result;
    TrainResult fine = train(model, finetune, fine_schedule, kind, seed + 1);
    for (auto& e : fine.trace) {
        e.epoch += pre_schedule.max_epochs;
        result.trace.push_back(e);
    }
    return result;
}

std::vector<double> reconstruction_errors(Model& model, const std::vector<const Segment*>& segs,
                                          int batch_size) {
    NoGradGuard ng;
    auto& net = model.as_cae();
    std::vector<double> out;
    out.reserve(segs.size());
    for (size_t at = 0; at < segs.size(); at += static_cast<size_t>(batch_size)) {
        const size_t take = std::min(static_cast<size_t>(batch_size), segs.size() - at);
        std::vector<const Segment*> chunk(segs.begin() + static_cast<int64_t>(at),
                                          segs.begin() + static_cast<int64_t>(at + take));
        auto x = batch_from_segments(chunk, true);
        auto recon = net.reconstruct(x, false);
        for (size_t i = 0; i < take; ++i) {
            double s = 0.0;
            const float* xp = x.ptr() + i * static_cast<size_t>(kSegmentBins);
            const float* rp = recon.ptr() + i * static_cast<size_t>(kSegmentBins);
            for (int64_t j = 0; j < kSegmentBins; ++j) {
                const double d = static_cast<double>(xp[j]) - static_cast<double>(rp[j]);
                s += d * d;
            }
            out.push_back(std::sqrt(s / static_cast<double>(kSegmentBins)));
        }
    }
    return out;
}

std::vector<std::vector<float>> latents_of(Model& model, const std::vector<const Segment*>& segs,
                                           int batch_size) {
    NoGradGuard ng;
    auto& net = model.as_cae();
    std::vector<std::vector<float>> out;
    out.reserve(segs.size());
    for (size_t at = 0; at < segs.size(); at += static_cast<size_t>(batch_size)) {
        const size_t take = std::min(static_cast<size_t>(batch_size), segs.size() - at);
        std::vector<const Segment*> chunk(segs.begin() + static_cast<int64_t>(at),
                                          segs.begin() + static_cast<int64_t>(at + take));
        auto x = batch_from_segments(chunk, true);
        auto z = net.encode(x, false);
        const int64_t d = z.dim(1);
        for (size_t i = 0; i < take; ++i)
            out.emplace_back(z.ptr() + i * static_cast<size_t>(d),
                             z.ptr() + (i + 1) * static_cast<size_t>(d));
    }
    return out;
}

std::vector<int> logit_decisions(Model& model, const std::vector<const Segment*>& segs,
                                 int batch_size) {
    NoGradGuard ng;
    const bool map_layout = model.cfg.family != Family::mlp;
    std::vector<int> out;
    out.reserve(segs.size());
    for (size_t at = 0; at < segs.size(); at += static_cast<size_t>(batch_size)) {
        const size_t take = std::min(static_cast<size_t>(batch_size), segs.size() - at);
        std::vector<const Segment*> chunk(segs.begin() + static_cast<int64_t>(at),
                                          segs.begin() + static_cast<int64_t>(at + take));
        auto x = batch_from_segments(chunk, map_layout);
        auto logits = model.forward(x, false);
        for (size_t i = 0; i < take; ++i)
            out.push_back(logits.ptr()[i * 2 + 1] > logits.ptr()[i * 2] ? 1 : 0);
    }
    return out;
}

}  // namespace hrd
