#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "hrd/hr_ingest.hpp"

using namespace hrd;

namespace {

HeartRateSeries make_series(int64_t start, int64_t end, int tz,
                            const std::vector<HeartRateSample>& samples) {
    HeartRateSeries s;
    s.participant_id = "X";
    s.collection_start = start;
    s.collection_end = end;
    s.tz_offset_min = tz;
    s.samples = samples;
    return s;
}

}  // namespace

TEST_CASE("resample: 600 s of constant 60 bpm at 1 Hz gives two bins of 60") {
    std::vector<HeartRateSample> samples;
    for (int64_t t = 0; t < 600; ++t) samples.push_back({t, 60.0});
    auto five = resample_5min(make_series(0, kSecondsPerDay, 0, samples));
    REQUIRE(five.values.size() == static_cast<size_t>(kBinsPerDay));
    CHECK(five.values[0].value == doctest::Approx(60.0));
    CHECK(five.values[1].value == doctest::Approx(60.0));
    CHECK_FALSE(five.values[0].imputed);
    CHECK_FALSE(five.values[1].imputed);
    CHECK(five.values[2].imputed);  // nothing after 600 s
}

TEST_CASE("resample: bin of {58,60,62} averages to 60") {
    std::vector<HeartRateSample> samples = {{10, 58.0}, {20, 60.0}, {30, 62.0}};
    auto five = resample_5min(make_series(0, kSecondsPerDay, 0, samples));
    CHECK(five.values[0].value == doctest::Approx(60.0));
}

TEST_CASE("resample: 1 Hz staircase matches a brute-force sum oracle") {
    // value 50 + floor(i/5) for i in 0..299, one sample per second
    std::vector<HeartRateSample> samples;
    double oracle_sum = 0.0;
    for (int64_t i = 0; i < 300; ++i) {
        const double bpm = 50.0 + static_cast<double>(i / 5);
        samples.push_back({i, bpm});
        oracle_sum += bpm;
    }
    const double oracle_mean = oracle_sum / 300.0;
    auto five = resample_5min(make_series(0, kSecondsPerDay, 0, samples));
    CHECK(five.values[0].value == doctest::Approx(oracle_mean).epsilon(1e-9));
}

TEST_CASE("resample errors") {
    CHECK_THROWS_WITH_AS(resample_5min(make_series(0, kSecondsPerDay, 0, {})), "no samples",
                         ValidationError);
    CHECK_THROWS_WITH_AS(resample_5min(make_series(100, kSecondsPerDay, 0, {{200, 60.0}})),
                         "misaligned collection window", ValidationError);
    // alignment is relative to the site timezone
    const int tz = 60;
    const int64_t start = -tz * 60;
    CHECK_NOTHROW(resample_5min(make_series(start, start + kSecondsPerDay, tz, {{100, 60.0}})));
}

TEST_CASE("resample: out-of-range bpm is treated as missing") {
    std::vector<HeartRateSample> samples = {{10, 15.0}, {20, 260.0}};
    auto five = resample_5min(make_series(0, kSecondsPerDay, 0, samples));
    CHECK(five.values[0].imputed);
    CHECK(std::isnan(five.values[0].value));
}

TEST_CASE("resample properties: mass preservation, idempotence, bin count") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> bpm(40.0, 180.0);

    // mass preservation over non-empty bins
    std::vector<HeartRateSample> samples;
    double total = 0.0;
    int64_t count = 0;
    for (int64_t t = 0; t < 2 * kSecondsPerDay; t += 7) {
        if ((t / 300) % 5 == 2) continue;  // leave some bins empty
        const double v = bpm(rng);
        samples.push_back({t, v});
        total += v;
        ++count;
    }
    auto five = resample_5min(make_series(0, 2 * kSecondsPerDay, 0, samples));

    double mass = 0.0;
    std::vector<int64_t> per_bin(five.values.size(), 0);
    for (const auto& s : samples) ++per_bin[static_cast<size_t>(s.timestamp / 300)];
    for (size_t i = 0; i < five.values.size(); ++i)
        if (!five.values[i].imputed)
            mass += static_cast<double>(five.values[i].value) * static_cast<double>(per_bin[i]);
    CHECK(mass == doctest::Approx(total).epsilon(1e-9));

    // idempotence on bin-constant input
    std::vector<HeartRateSample> constant;
    for (int64_t t = 0; t < kSecondsPerDay; t += 60)
        constant.push_back({t, 60.0 + 0.5 * static_cast<double>(t / 300)});
    auto c1 = resample_5min(make_series(0, kSecondsPerDay, 0, constant));
    for (size_t i = 0; i < c1.values.size(); ++i)
        CHECK(c1.values[i].value == doctest::Approx(60.0 + 0.5 * static_cast<double>(i)));

    // bin count depends only on the window
    auto sparse = resample_5min(make_series(0, 3 * kSecondsPerDay, 0, {{9999, 70.0}}));
    CHECK(sparse.values.size() == static_cast<size_t>(3 * kBinsPerDay));
}

TEST_CASE("completeness") {
    FiveMinSeries five;
    five.start = 0;
    five.values.assign(4032, {60.0f, false});
    CHECK(completeness(five, 0, 4032 * kBinSeconds) == doctest::Approx(1.0));

    for (auto& v : five.values) v = {std::nanf(""), true};
    CHECK(completeness(five, 0, 4032 * kBinSeconds) == doctest::Approx(0.0));

    // 81 imputed bins out of 4032: direct count oracle
    int64_t imputed = 0;
    for (size_t i = 0; i < five.values.size(); ++i) {
        const bool gap = i % 49 == 7 && imputed < 81;
        five.values[i] = gap ? FiveMinBin{std::nanf(""), true} : FiveMinBin{60.0f, false};
        if (gap) ++imputed;
    }
    REQUIRE(imputed == 81);
    CHECK(completeness(five, 0, 4032 * kBinSeconds) ==
          doctest::Approx((4032.0 - 81.0) / 4032.0).epsilon(1e-12));

    CHECK_THROWS_AS(completeness(five, 0, 4033 * kBinSeconds), ValidationError);
}

TEST_CASE("civil date round trip") {
    CHECK(days_from_civil(1970, 1, 1) == 0);
    CHECK(days_from_civil(2020, 3, 1) == 18322);
    CHECK(parse_iso_date("2020-03-01") == 18322);
    CHECK(format_iso_date(18322) == "2020-03-01");
    for (int64_t d : {-1000, 0, 18322, 20000}) CHECK(parse_iso_date(format_iso_date(d)) == d);
}

TEST_CASE("manifest and CSV round trips") {
    namespace fs = std::filesystem;
    const auto dir = fs::temp_directory_path() / "hrd_ingest_test";
    fs::create_directories(dir);

    Manifest m;
    ManifestEntry e;
    e.participant_id = "P1";
    e.site = "site_b";
    e.gender = "female";
    e.age_band = "40-49";
    e.tz_offset_min = 60;
    e.onset_day = 18322 * kSecondsPerDay - 3600;
    e.group = Group::positive;
    m.entries.push_back(e);
    ManifestEntry c = e;
    c.participant_id = "C1";
    c.onset_day.reset();
    c.group = Group::control;
    m.entries.push_back(c);

    save_manifest(m, (dir / "manifest.json").string());
    auto m2 = load_manifest((dir / "manifest.json").string());
    REQUIRE(m2.entries.size() == 2);
    CHECK(m2.entries[0].participant_id == "P1");
    CHECK(m2.entries[0].onset_day == e.onset_day);
    CHECK_FALSE(m2.entries[1].onset_day.has_value());
    CHECK(m2.find("C1") != nullptr);
    CHECK(m2.by_group(Group::positive).size() == 1);

    HeartRateSeries s;
    s.participant_id = "P1";
    s.tz_offset_min = 60;
    const int64_t day0 = 18322 * kSecondsPerDay - 3600;
    s.collection_start = day0;
    s.collection_end = day0 + kSecondsPerDay;
    for (int64_t t = 0; t < 1000; t += 10) s.samples.push_back({day0 + t, 60.0 + (t % 40)});
    save_series_csv(s, (dir / "P1.csv").string());
    auto s2 = load_series_csv((dir / "P1.csv").string(), e);
    CHECK(s2.samples.size() == s.samples.size());
    CHECK(s2.collection_start == day0);
    CHECK(s2.collection_end == day0 + kSecondsPerDay);
    CHECK(s2.samples.front().bpm == doctest::Approx(60.0));

    fs::remove_all(dir);
}
