// Raw wristband heart-rate streams and their reduction to uniform
// five-minute-mean series. Timestamps are UTC epoch seconds; day alignment is
// relative to the participant's site timezone offset.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hrd/tensor.hpp"

namespace hrd {

constexpr int64_t kSecondsPerDay = 86400;
constexpr int64_t kBinSeconds = 300;
constexpr int64_t kBinsPerDay = kSecondsPerDay / kBinSeconds;  // 288

// bpm outside this open interval is treated as sensor artifact, i.e. missing.
constexpr double kBpmMin = 20.0;
constexpr double kBpmMax = 250.0;

// --- civil date helpers (proleptic Gregorian) ------------------------------

// Days since 1970-01-01.
int64_t days_from_civil(int y, int m, int d);
void civil_from_days(int64_t z, int& y, int& m, int& d);

// "YYYY-MM-DD" -> day count since epoch.
int64_t parse_iso_date(const std::string& s);
std::string format_iso_date(int64_t days);

// ---------------------------------------------------------------------------

struct HeartRateSample {
    int64_t timestamp = 0;  // UTC epoch seconds
    double bpm = 0.0;
};

struct HeartRateSeries {
    std::string participant_id;
    std::vector<HeartRateSample> samples;  // strictly increasing timestamps
    int64_t collection_start = 0;          // local-midnight aligned, UTC epoch
    int64_t collection_end = 0;
    int tz_offset_min = 0;
};

struct FiveMinBin {
    float value = 0.0f;  // NaN while the bin is an unimputed gap
    bool imputed = false;
};

struct FiveMinSeries {
    std::string participant_id;
    int64_t start = 0;  // local-midnight aligned
    int tz_offset_min = 0;
    std::vector<FiveMinBin> values;

    int64_t end() const { return start + kBinSeconds * static_cast<int64_t>(values.size()); }
    int64_t days() const { return static_cast<int64_t>(values.size()) / kBinsPerDay; }
};

bool is_local_midnight(int64_t utc, int tz_offset_min);

// Mean of the raw samples per 5-minute bin; empty bins carry NaN and
// imputed=true. Out-of-range bpm counts as missing.
FiveMinSeries resample_5min(const HeartRateSeries& series);

// Fraction of non-imputed bins over [window_start, window_end).
double completeness(const FiveMinSeries& series, int64_t window_start, int64_t window_end);

// --- cohort manifest --------------------------------------------------------

enum class Group { pretrain, positive, control };

std::string group_name(Group g);
Group group_from(const std::string& s);

struct ManifestEntry {
    std::string participant_id;
    std::string site;
    std::string gender;
    std::string age_band;
    int tz_offset_min = 0;
    std::optional<int64_t> onset_day;  // local midnight of onset, UTC epoch seconds
    Group group = Group::control;
};

struct Manifest {
    std::vector<ManifestEntry> entries;

    const ManifestEntry* find(const std::string& pid) const;
    std::vector<const ManifestEntry*> by_group(Group g) const;
};

Manifest load_manifest(const std::string& path);
void save_manifest(const Manifest& m, const std::string& path);

// Per-participant CSV with header "timestamp,bpm". Collection bounds are the
// enclosing local-midnight-aligned window of the data.
HeartRateSeries load_series_csv(const std::string& path, const ManifestEntry& entry);
void save_series_csv(const HeartRateSeries& series, const std::string& path);

}  // namespace hrd
