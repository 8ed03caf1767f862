// Leave-one-subject-out evaluation: matched-pair fold construction, the
// one-feature logistic-regression threshold on reconstruction error, the
// metric suite, aggregation, the machine-checked leakage scan, and the
// window-shift classification scan.

#pragma once

#include <optional>

#include "hrd/model.hpp"
#include "hrd/segmenter.hpp"
#include "hrd/trainer.hpp"

namespace hrd {

struct Fold {
    std::string held_out_positive;
    std::string held_out_control;
    std::vector<std::string> train_positives;
    std::vector<std::string> train_controls;
    std::vector<std::string> pretrain_ids;
};

// One fold per positive participant, paired with a (site, gender, age-band)
// matched control. Deterministic ordering.
std::vector<Fold> build_folds(const Manifest& manifest);

struct MetricReport {
    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::optional<double> sensitivity, specificity, uar, precision, f1;

    static MetricReport from_counts(int64_t tp, int64_t fp, int64_t tn, int64_t fn);
};

// Pool confusion counts across folds (micro). macro = true averages the
// per-fold metrics instead, skipping folds where a metric is undefined.
MetricReport aggregate(const std::vector<MetricReport>& reports, bool macro = false);

struct ThresholdModel {
    double weight = 0.0;
    double bias = 0.0;
    bool midpoint_fallback = false;  // set when classes are perfectly separable

    double threshold() const { return -bias / weight; }
    bool decide(double error) const { return weight * error + bias > 0.0; }
};

// Maximum-likelihood 1-d logistic fit by damped Newton iterations
// (gradient tolerance 1e-8, at most 100 iterations). label true =
// symptomatic. Perfectly separable data falls back to the midpoint between
// the class extremes.
ThresholdModel fit_threshold(const std::vector<std::pair<double, bool>>& errors);

enum class EvalMode { recon_error, latent_mlp, cnn_logits };

std::string eval_mode_name(EvalMode m);
EvalMode eval_mode_from(const std::string& s);

struct SegmentScore {
    std::string participant_id;
    int64_t start_day = 0;
    int shift_days = 0;
    SegmentLabel label = SegmentLabel::asymptomatic;
    double score = 0.0;  // reconstruction error or positive-class logit margin
    bool decision = false;
};

struct FoldReport {
    MetricReport metrics;
    std::vector<SegmentScore> scores;
    ThresholdModel threshold;  // recon_error mode only
};

// Throws if any training segment belongs to a held-out participant.
void verify_no_leakage(const Fold& fold, const SegmentSet& train_set);

// Scores all held-out segments with the fold-fit decision rule. The CAE is
// not retrained here; only the threshold (recon_error) or the attribute
// classifier (latent_mlp) is fit on the fold's training segments.
FoldReport evaluate_fold(const Fold& fold, Model& model, EvalMode mode,
                         const SegmentSet& train_set, const SegmentSet& test_set,
                         int classifier_hidden, uint64_t seed);

struct ScanEntry {
    int shift = 0;
    bool valid = false;
    double recon_error = 0.0;
    bool decision = false;
    std::string note;  // set for skipped shifts
};

// Shifted symptomatic windows scored against a fixed threshold; invalid
// shifts produce warning entries instead of aborting the scan.
std::vector<ScanEntry> window_scan(const FiveMinSeries& series, int64_t onset_day, Model& model,
                                   const ThresholdModel& threshold, int shift_from, int shift_to,
                                   double completeness_threshold = 0.0);

}  // namespace hrd
