// Family-dispatching model wrapper and the on-disk checkpoint format:
// magic "FBCAE1", u32 little-endian JSON header length, JSON header
// (architecture config, seed, loss trace, parameter manifest with byte
// offsets), then raw little-endian f32 blobs for parameters and batch-norm
// running statistics, with an optional Adam-state section.

#pragma once

#include <variant>

#include "hrd/nets.hpp"

namespace hrd {

struct TrainLogEntry {
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct Model {
    ModelConfig cfg;
    std::variant<std::monostate, CnnModel<float>, CaeModel<float>, MlpModel<float>> net;

    static Model build(const ModelConfig& cfg, uint64_t seed);

    bool is_cae() const {
        return cfg.family == Family::cae || cfg.family == Family::contrastive_cae;
    }
    CnnModel<float>& as_cnn();
    CaeModel<float>& as_cae();
    MlpModel<float>& as_mlp();

    std::vector<NamedParam<float>> named_params();
    std::vector<NamedBuffer<float>> named_buffers();
    void mark_stats_ready();

    // logits for cnn/mlp, reconstruction for cae
    Tensor forward(const Tensor& batch, bool train);
};

void save_checkpoint(Model& model, const std::string& path, uint64_t seed,
                     const std::vector<TrainLogEntry>& trace,
                     const AdamState<float>* adam = nullptr);

Model load_checkpoint(const std::string& path, uint64_t* seed = nullptr,
                      std::vector<TrainLogEntry>* trace = nullptr,
                      AdamState<float>* adam = nullptr);

ModelConfig model_config_from_json_str(const std::string& json_text);
std::string model_config_to_json_str(const ModelConfig& cfg);

}  // namespace hrd
