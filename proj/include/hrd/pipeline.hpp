// End-to-end drivers shared by the CLI subcommands: preprocessing a cohort
// into the segment cache, pretraining, the LOSO fold loop with per-fold
// fine-tuning and evaluation, and the window-shift scan. Fold workers run in
// parallel, each single-threaded and seeded independently, so results do not
// depend on the worker count.

#pragma once

#include "hrd/run_config.hpp"

namespace hrd {

struct PreprocessStats {
    int64_t participants = 0;
    int64_t symptomatic = 0;
    int64_t asymptomatic = 0;
    int64_t discarded_incomplete = 0;
    // completeness mean/std per group, keyed by group name
    std::vector<std::tuple<std::string, double, double>> completeness_by_group;
};

// Resample, segment, impute, filter by completeness, write one cache file per
// participant. Deterministic: rerunning on unchanged inputs is byte-identical.
PreprocessStats preprocess_cohort(const RunConfig& cfg);

// Segments of one participant from the cache, already imputed.
std::vector<Segment> cached_segments(const std::string& cache_dir, const std::string& pid);

SegmentSet assemble_set(const std::string& cache_dir, const std::vector<std::string>& sym_ids,
                        const std::vector<std::string>& asym_only_ids, Provenance provenance);

// Pretrains cfg.model on the pretrain participants; writes pretrained.ckpt
// and pretrain_loss.csv under output_dir. Returns the checkpoint path.
std::string run_pretrain(const RunConfig& cfg, const Manifest& manifest);

struct LosoFoldResult {
    Fold fold;
    FoldReport report;
    std::string checkpoint_path;
};

struct LosoResult {
    std::vector<LosoFoldResult> folds;
    MetricReport pooled;
    std::string results_csv_path;
    std::string summary_json_path;
};

// Full fold loop: per-fold fine-tune from the pretrained checkpoint,
// threshold/classifier fit, evaluation, aggregation, artifact writing.
LosoResult run_loso(const RunConfig& cfg, const Manifest& manifest,
                    const std::string& pretrained_ckpt);

// Window-shift scan for one positive participant using that participant's
// fold checkpoint and threshold (written by run_loso).
std::vector<ScanEntry> run_scan(const RunConfig& cfg, const Manifest& manifest,
                                const std::string& participant, int shift_from, int shift_to,
                                const std::string& scan_csv_path);

}  // namespace hrd
