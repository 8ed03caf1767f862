// Training loop: Adam with the step-decay learning-rate schedule, per-epoch
// shuffling, contrastive half-batch composition, and pretrain/fine-tune
// orchestration. Feature maps enter the networks through the fixed affine
// normalization bpm -> (bpm - 40) / 80, applied identically at train and
// eval time.

#pragma once

#include "hrd/model.hpp"
#include "hrd/segmenter.hpp"

namespace hrd {

constexpr float kNormOffset = 40.0f;
constexpr float kNormScale = 80.0f;

inline float normalize_bpm(float bpm) { return (bpm - kNormOffset) / kNormScale; }

struct TrainSchedule {
    double lr_init = 0.03;
    double decay_factor = 0.33;
    int decay_every = 50;  // epochs
    double lr_floor = 1e-4;
    int batch_size = 32;
    int max_epochs = 300;

    double lr_at(int epoch) const {
        const double lr = lr_init * std::pow(decay_factor, static_cast<double>(epoch / decay_every));
        return std::max(lr_floor, lr);
    }
};

struct ContrastiveParams {
    double margin = 5.0;
};

enum class LossKind { rmse, contrastive, cross_entropy };

LossKind default_loss_for(Family family);

// Normalized input tensors from segments. CNN/CAE batches are [N,1,24,168]
// in feature-map order; MLP batches are [N,4032] in time order.
Tensor batch_from_segments(const std::vector<const Segment*>& segs, bool map_layout);

struct TrainResult {
    std::vector<TrainLogEntry> trace;
};

// Half-batch sizes for one contrastive epoch over n_asym segments; each step
// pairs this many asymptomatic and symptomatic examples.
std::vector<int64_t> contrastive_step_sizes(int64_t n_asym, int batch_size);

// Trains in place. `data` must already be balanced for classifier losses;
// the contrastive loss draws equal half-batches from each class per step.
TrainResult train(Model& model, const SegmentSet& data, const TrainSchedule& schedule,
                  LossKind loss_kind, uint64_t seed);

// Pretrain, then continue on the fine-tune set with fresh optimizer state and
// a fresh schedule. An empty fine-tune set returns after pretraining.
TrainResult pretrain_then_finetune(Model& model, const SegmentSet& pretrain,
                                   const SegmentSet& finetune, const TrainSchedule& pre_schedule,
                                   const TrainSchedule& fine_schedule, uint64_t seed);

// Per-segment reconstruction error (RMSE in normalized units, eval mode).
std::vector<double> reconstruction_errors(Model& model, const std::vector<const Segment*>& segs,
                                          int batch_size = 32);

// Latent attributes for a list of segments (eval mode).
std::vector<std::vector<float>> latents_of(Model& model, const std::vector<const Segment*>& segs,
                                           int batch_size = 32);

// Argmax class decisions from logits (eval mode); cnn or mlp families.
std::vector<int> logit_decisions(Model& model, const std::vector<const Segment*>& segs,
                                 int batch_size = 32);

}  // namespace hrd
