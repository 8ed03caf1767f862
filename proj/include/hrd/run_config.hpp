// Declarative run configuration: one JSON file drives every subcommand, with
// CLI flags overriding individual fields. Defaults reproduce the full
// protocol shape (paper-scale cohort, 4-layer contrastive CAE, latent 100,
// margin 5, Adam with the 0.03/0.33/50 step-decay schedule, batch 32).

#pragma once

#include <string>

#include "hrd/eval.hpp"
#include "hrd/synth.hpp"
#include "hrd/trainer.hpp"

namespace hrd {

struct RunConfig {
    std::string data_dir = "out/cohort";
    std::string cache_dir = "out/cache";
    std::string output_dir = "out/results";
    uint64_t seed = 1;
    int jobs = 0;  // 0 = hardware concurrency
    double completeness_threshold = 0.70;

    ModelConfig model;
    TrainSchedule schedule;       // lr/decay/batch shared by both phases
    int pretrain_epochs = 300;
    int finetune_epochs = 300;
    double finetune_lr_init = 0.0;  // 0 = inherit schedule.lr_init

    EvalMode eval_mode = EvalMode::recon_error;
    bool macro_aggregation = false;

    int scan_from = -3;
    int scan_to = 5;

    GeneratorConfig synth;
};

RunConfig load_run_config(const std::string& path);
RunConfig run_config_from_json_text(const std::string& text);
std::string run_config_to_json_text(const RunConfig& cfg);

}  // namespace hrd
