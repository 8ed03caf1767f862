// Synthetic heart-rate cohorts with known ground truth: per-participant
// resting rate, a 24-hour circadian rhythm with its trough at night, bounded
// sample noise, and (for positive and pretrain roles) a resting-rate
// elevation ramping in around the onset day. Emits the same CSV + manifest
// formats the ingest stage consumes, plus the true anomaly windows.

#pragma once

#include "hrd/hr_ingest.hpp"

namespace hrd {

struct AnomalyShape {
    double delta_bpm = 8.0;
    int onset_day = 45;      // day index within the collection
    int duration_days = 7;
    double ramp_days = 1.0;
};

struct GeneratorConfig {
    int n_pretrain = 49;
    int n_positive = 19;
    int n_control = 19;
    int days = 90;

    double base_hr_mean = 65.0;
    double base_hr_sd = 8.0;
    double circadian_amp_bpm = 10.0;  // per-participant amplitude/phase jitter applied
    double daily_wobble_sd = 1.0;     // slow day-to-day resting drift
    double noise_sd = 2.5;            // per raw sample, clamped at 3 sigma

    AnomalyShape anomaly;
    double missing_rate = 0.02;  // fraction of 5-minute bins dropped
    bool burst_gaps = false;     // drop multi-hour runs instead of single bins

    int sample_interval_s = 60;
    int64_t start_date_days = 18262;  // 2020-01-01, day count since epoch
    uint64_t seed = 1;

    // Desk-scale overrides; 0 means inherit `days` / `anomaly.onset_day`.
    int days_positive = 0;
    int days_control = 0;
    int onset_positive = 0;
};

struct GroundTruth {
    std::string participant_id;
    int64_t illness_start = 0;  // UTC epoch seconds, 0 when never ill
    int64_t illness_end = 0;
};

struct SynthParticipant {
    HeartRateSeries series;
    ManifestEntry entry;
    GroundTruth truth;
};

// index is the participant's position within its role group.
SynthParticipant generate_participant(const GeneratorConfig& config, Group role, int index);

struct Cohort {
    std::vector<SynthParticipant> participants;
    Manifest manifest;
};

Cohort generate_cohort(const GeneratorConfig& config);

// data_dir gets one CSV per participant, manifest.json, ground_truth.json.
void write_cohort(const Cohort& cohort, const std::string& data_dir);

}  // namespace hrd
