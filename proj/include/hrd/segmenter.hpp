// 14-day segment extraction with the 7-day distance rule, segment-median
// imputation, class balancing by cyclic replication, and the 24x168
// feature-map rendering. Also the on-disk segment cache.

#pragma once

#include <string>
#include <vector>

#include "hrd/hr_ingest.hpp"

namespace hrd {

constexpr int64_t kSegmentDays = 14;
constexpr int64_t kSegmentBins = kSegmentDays * kBinsPerDay;  // 4032

enum class SegmentLabel { symptomatic, asymptomatic };

struct Segment {
    std::string participant_id;
    int64_t start_day = 0;  // local-midnight aligned, UTC epoch seconds
    std::vector<float> values;  // exactly 4032 five-minute means, NaN = gap
    SegmentLabel label = SegmentLabel::asymptomatic;
    int shift_days = 0;  // nonzero only in window-scan mode
    double completeness = 1.0;

    bool imputed() const;
};

struct FeatureMap {
    // pixels[r * kMapCols + c] == segment.values[c * kMapRows + r]
    std::vector<float> pixels;  // 24 rows x 168 columns
    float at(int64_t r, int64_t c) const { return pixels[static_cast<size_t>(r * 168 + c)]; }
};

enum class Provenance { pretrain, cv_positive, cv_control };

struct SegmentSet {
    std::vector<Segment> symptomatic;
    std::vector<Segment> asymptomatic;
    Provenance provenance = Provenance::pretrain;
};

// The 14-day window starting at midnight of (onset - 7d + shift). The shifted
// window must still contain the onset day.
Segment extract_symptomatic(const FiveMinSeries& series, int64_t onset_day, int shift_days = 0);

// Every in-bounds midnight-aligned 14-day window at least 7 days distant from
// the symptomatic segment (window end <= onset-14d or start >= onset+14d).
// With no onset, every in-bounds window qualifies.
std::vector<Segment> extract_asymptomatic(const FiveMinSeries& series,
                                          std::optional<int64_t> onset_day);

// Replace NaN gaps with the median of the segment's present values; the
// median of an even count is the mean of the two central order statistics.
Segment impute_median(const Segment& segment);

FeatureMap to_feature_map(const Segment& segment);

// Repeat the symptomatic list cyclically until it matches the asymptomatic
// count. Deterministic order.
SegmentSet balance_by_replication(const SegmentSet& set);

// --- segment cache -----------------------------------------------------------
//
// One file per participant: magic "HRSEG01\n", u32 little-endian JSON index
// length, the JSON index, then one raw record of 4032 little-endian f32 per
// index row.

void save_segment_cache(const std::vector<Segment>& segments, const std::string& path);
std::vector<Segment> load_segment_cache(const std::string& path);

}  // namespace hrd
