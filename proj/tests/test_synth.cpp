#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>

#include "hrd/segmenter.hpp"
#include "hrd/synth.hpp"

using namespace hrd;

TEST_CASE("flat config produces a constant series at the base rate") {
    GeneratorConfig gc;
    gc.days = 20;
    gc.noise_sd = 0.0;
    gc.circadian_amp_bpm = 0.0;
    gc.daily_wobble_sd = 0.0;
    gc.anomaly.delta_bpm = 0.0;
    gc.anomaly.onset_day = 10;
    gc.missing_rate = 0.0;
    auto p = generate_participant(gc, Group::control, 0);
    REQUIRE(!p.series.samples.empty());
    const double first = p.series.samples.front().bpm;
    for (const auto& s : p.series.samples) CHECK(s.bpm == doctest::Approx(first));
    CHECK(first > 45.0);
    CHECK(first < 100.0);
}

TEST_CASE("illness window raises the mean by ~delta (windowed-mean oracle)") {
    GeneratorConfig gc;
    gc.days = 45;
    gc.anomaly.onset_day = 25;
    gc.anomaly.delta_bpm = 8.0;
    gc.anomaly.duration_days = 7;
    gc.anomaly.ramp_days = 0.01;  // effectively a plateau
    gc.daily_wobble_sd = 0.2;
    gc.missing_rate = 0.0;
    gc.seed = 5;
    auto p = generate_participant(gc, Group::positive, 2);

    const int64_t onset = p.truth.illness_start;
    auto window_mean = [&](int64_t lo, int64_t hi) {
        double s = 0.0;
        int64_t n = 0;
        for (const auto& smp : p.series.samples)
            if (smp.timestamp >= lo && smp.timestamp < hi) {
                s += smp.bpm;
                ++n;
            }
        return s / static_cast<double>(n);
    };
    const double ill = window_mean(onset, onset + 7 * kSecondsPerDay);
    const double pre = window_mean(onset - 7 * kSecondsPerDay, onset);
    CHECK(ill - pre == doctest::Approx(8.0).epsilon(0.08));
}

TEST_CASE("generation is deterministic per seed") {
    GeneratorConfig gc;
    gc.days = 30;
    gc.anomaly.onset_day = 15;
    auto a = generate_participant(gc, Group::positive, 1);
    auto b = generate_participant(gc, Group::positive, 1);
    REQUIRE(a.series.samples.size() == b.series.samples.size());
    for (size_t i = 0; i < a.series.samples.size(); ++i) {
        CHECK(a.series.samples[i].timestamp == b.series.samples[i].timestamp);
        CHECK(a.series.samples[i].bpm == b.series.samples[i].bpm);
    }

    gc.seed = 2;
    auto c = generate_participant(gc, Group::positive, 1);
    bool any_diff = c.series.samples.size() != a.series.samples.size();
    for (size_t i = 0; !any_diff && i < a.series.samples.size(); ++i)
        any_diff = a.series.samples[i].bpm != c.series.samples[i].bpm;
    CHECK(any_diff);
}

TEST_CASE("default cohort is paper-shaped: 87 participants") {
    GeneratorConfig gc;
    gc.days = 30;  // keep the test fast; counts are what matter here
    gc.anomaly.onset_day = 15;
    gc.sample_interval_s = 300;
    auto cohort = generate_cohort(gc);
    CHECK(cohort.participants.size() == 87);
    CHECK(cohort.manifest.by_group(Group::pretrain).size() == 49);
    CHECK(cohort.manifest.by_group(Group::positive).size() == 19);
    CHECK(cohort.manifest.by_group(Group::control).size() == 19);

    // controls are matched to positives on site, gender, and age band
    auto positives = cohort.manifest.by_group(Group::positive);
    auto controls = cohort.manifest.by_group(Group::control);
    for (size_t i = 0; i < positives.size(); ++i) {
        CHECK(positives[i]->site == controls[i]->site);
        CHECK(positives[i]->gender == controls[i]->gender);
        CHECK(positives[i]->age_band == controls[i]->age_band);
        CHECK(positives[i]->onset_day.has_value());
        CHECK_FALSE(controls[i]->onset_day.has_value());
    }
}

TEST_CASE("tiny cohort flows into the fold builder") {
    GeneratorConfig gc;
    gc.n_pretrain = 2;
    gc.n_positive = 2;
    gc.n_control = 2;
    gc.days = 30;
    gc.anomaly.onset_day = 15;
    gc.sample_interval_s = 300;
    auto cohort = generate_cohort(gc);
    CHECK(cohort.participants.size() == 6);
}

TEST_CASE("pretrain participant with full data and onset at day 45 of 90 yields 36 windows") {
    GeneratorConfig gc;
    gc.missing_rate = 0.0;
    gc.sample_interval_s = 60;
    REQUIRE(gc.days == 90);
    REQUIRE(gc.anomaly.onset_day == 45);
    auto p = generate_participant(gc, Group::pretrain, 0);
    auto five = resample_5min(p.series);
    auto asym = extract_asymptomatic(five, *p.entry.onset_day);
    CHECK(asym.size() == 36);
    auto sym = extract_symptomatic(five, *p.entry.onset_day);
    CHECK(sym.completeness == doctest::Approx(1.0));
}

TEST_CASE("missingness shows up as imputed bins at roughly the configured rate") {
    GeneratorConfig gc;
    gc.days = 60;
    gc.anomaly.onset_day = 30;
    gc.missing_rate = 0.10;
    gc.sample_interval_s = 150;
    auto p = generate_participant(gc, Group::control, 3);
    auto five = resample_5min(p.series);
    int64_t imputed = 0;
    for (const auto& b : five.values)
        if (b.imputed) ++imputed;
    const double rate = static_cast<double>(imputed) / static_cast<double>(five.values.size());
    CHECK(rate > 0.05);
    CHECK(rate < 0.15);
}

TEST_CASE("invalid generator configs are rejected") {
    GeneratorConfig gc;
    gc.days = 20;
    gc.anomaly.onset_day = 18;  // illness would extend past the collection
    CHECK_THROWS_AS(generate_participant(gc, Group::positive, 0), ValidationError);

    GeneratorConfig late;
    late.days = 20;
    late.anomaly.onset_day = 5;  // no room for the 7 days before onset
    late.anomaly.duration_days = 7;
    CHECK_THROWS_AS(generate_participant(late, Group::positive, 0), ValidationError);

    GeneratorConfig bad;
    bad.missing_rate = 1.5;
    CHECK_THROWS_AS(generate_participant(bad, Group::control, 0), ValidationError);
}

TEST_CASE("write_cohort emits series, manifest, and ground truth") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "hrd_synth_test";
    fs::remove_all(dir);

    GeneratorConfig gc;
    gc.n_pretrain = 1;
    gc.n_positive = 1;
    gc.n_control = 1;
    gc.days = 30;
    gc.anomaly.onset_day = 15;
    gc.sample_interval_s = 300;
    auto cohort = generate_cohort(gc);
    write_cohort(cohort, dir.string());

    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "ground_truth.json"));
    CHECK(fs::exists(dir / "PT001.csv"));
    CHECK(fs::exists(dir / "PS001.csv"));
    CHECK(fs::exists(dir / "CT001.csv"));

    auto manifest = load_manifest((dir / "manifest.json").string());
    CHECK(manifest.entries.size() == 3);
    auto series = load_series_csv((dir / "PS001.csv").string(), *manifest.find("PS001"));
    CHECK(series.collection_end - series.collection_start == 30 * kSecondsPerDay);

    fs::remove_all(dir);
}
