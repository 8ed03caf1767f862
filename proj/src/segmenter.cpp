#include "hrd/segmenter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace hrd {

bool Segment::imputed() const {
    for (float v : values)
        if (std::isnan(v)) return false;
    return true;
}

namespace {

Segment cut_window(const FiveMinSeries& series, int64_t window_start, SegmentLabel label,
                   int shift_days) {
    Segment seg;
    seg.participant_id = series.participant_id;
    seg.start_day = window_start;
    seg.label = label;
    seg.shift_days = shift_days;
    const int64_t first = (window_start - series.start) / kBinSeconds;
    seg.values.resize(static_cast<size_t>(kSegmentBins));
    int64_t present = 0;
    for (int64_t i = 0; i < kSegmentBins; ++i) {
        const auto& bin = series.values[static_cast<size_t>(first + i)];
        seg.values[static_cast<size_t>(i)] = bin.value;
        if (!bin.imputed) ++present;
    }
    seg.completeness = static_cast<double>(present) / static_cast<double>(kSegmentBins);
    return seg;
}

}  // namespace

Segment extract_symptomatic(const FiveMinSeries& series, int64_t onset_day, int shift_days) {
    const int64_t window_start = onset_day + (shift_days - 7) * kSecondsPerDay;
    const int64_t window_end = window_start + kSegmentDays * kSecondsPerDay;
    // onset day must lie inside the shifted window
    if (!(window_start <= onset_day && onset_day < window_end))
        throw ValidationError("onset not contained");
    if (window_start < series.start || window_end > series.end())
        throw ValidationError("insufficient coverage");
    return cut_window(series, window_start, SegmentLabel::symptomatic, shift_days);
}

std::vector<Segment> extract_asymptomatic(const FiveMinSeries& series,
                                          std::optional<int64_t> onset_day) {
    std::vector<Segment> out;
    const int64_t seg_len = kSegmentDays * kSecondsPerDay;
    for (int64_t start = series.start; start + seg_len <= series.end();
         start += kSecondsPerDay) {
        if (onset_day) {
            const int64_t sym_start = *onset_day - 7 * kSecondsPerDay;
            const int64_t sym_end = sym_start + seg_len;
            const bool before = start + seg_len <= sym_start - 7 * kSecondsPerDay;
            const bool after = start >= sym_end + 7 * kSecondsPerDay;
            if (!before && !after) continue;
        }
        out.push_back(cut_window(series, start, SegmentLabel::asymptomatic, 0));
    }
    return out;
}

Segment impute_median(const Segment& segment) {
    std::vector<float> present;
    present.reserve(segment.values.size());
    for (float v : segment.values)
        if (!std::isnan(v)) present.push_back(v);
    if (present.empty()) throw ValidationError("empty segment");
    if (present.size() == segment.values.size()) return segment;

    std::sort(present.begin(), present.end());
    const size_t n = present.size();
    const float median = (n % 2 == 1)
                             ? present[n / 2]
                             : 0.5f * (present[n / 2 - 1] + present[n / 2]);

    Segment out = segment;
    for (float& v : out.values)
        if (std::isnan(v)) v = median;
    return out;
}

FeatureMap to_feature_map(const Segment& segment) {
    if (static_cast<int64_t>(segment.values.size()) != kSegmentBins)
        throw ValidationError("segment length " + std::to_string(segment.values.size()) +
                              " != " + std::to_string(kSegmentBins));
    if (!segment.imputed()) throw ValidationError("segment not imputed");
    FeatureMap map;
    map.pixels.resize(static_cast<size_t>(kSegmentBins));
    for (int64_t c = 0; c < 168; ++c)
        for (int64_t r = 0; r < 24; ++r)
            map.pixels[static_cast<size_t>(r * 168 + c)] =
                segment.values[static_cast<size_t>(c * 24 + r)];
    return map;
}

SegmentSet balance_by_replication(const SegmentSet& set) {
    if (set.symptomatic.empty() || set.asymptomatic.empty())
        throw ValidationError("cannot balance: empty class");
    SegmentSet out;
    out.provenance = set.provenance;
    out.asymptomatic = set.asymptomatic;
    out.symptomatic.reserve(set.asymptomatic.size());
    for (size_t i = 0; i < set.asymptomatic.size(); ++i)
        out.symptomatic.push_back(set.symptomatic[i % set.symptomatic.size()]);
    return out;
}

// --- segment cache -----------------------------------------------------------

namespace {
constexpr char kCacheMagic[8] = {'H', 'R', 'S', 'E', 'G', '0', '1', '\n'};
}

void save_segment_cache(const std::vector<Segment>& segments, const std::string& path) {
    nlohmann::json index = nlohmann::json::array();
    for (const auto& s : segments) {
        if (static_cast<int64_t>(s.values.size()) != kSegmentBins)
            throw ValidationError("segment record length != 4032");
        nlohmann::json row;
        row["participant_id"] = s.participant_id;
        row["start_day"] = s.start_day;
        row["label"] = (s.label == SegmentLabel::symptomatic) ? "symptomatic" : "asymptomatic";
        row["shift_days"] = s.shift_days;
        row["completeness"] = s.completeness;
        index.push_back(row);
    }
    const std::string header = index.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write segment cache " + path);
    out.write(kCacheMagic, sizeof(kCacheMagic));
    const uint32_t len = static_cast<uint32_t>(header.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const auto& s : segments)
        out.write(reinterpret_cast<const char*>(s.values.data()),
                  static_cast<std::streamsize>(s.values.size() * sizeof(float)));
}

std::vector<Segment> load_segment_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open segment cache " + path);
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kCacheMagic, sizeof(magic)) != 0)
        throw ValidationError(path + ": not a segment cache");
    uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header(len, '\0');
    in.read(header.data(), static_cast<std::streamsize>(len));
    if (!in) throw ValidationError(path + ": truncated index");

    nlohmann::json index = nlohmann::json::parse(header);
    std::vector<Segment> out;
    for (const auto& row : index) {
        Segment s;
        s.participant_id = row.at("participant_id").get<std::string>();
        s.start_day = row.at("start_day").get<int64_t>();
        s.label = row.at("label").get<std::string>() == "symptomatic"
                      ? SegmentLabel::symptomatic
                      : SegmentLabel::asymptomatic;
        s.shift_days = row.at("shift_days").get<int>();
        s.completeness = row.at("completeness").get<double>();
        s.values.resize(static_cast<size_t>(kSegmentBins));
        in.read(reinterpret_cast<char*>(s.values.data()),
                static_cast<std::streamsize>(s.values.size() * sizeof(float)));
        if (!in) throw ValidationError(path + ": truncated records");
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace hrd
