#include "hrd/hr_ingest.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace hrd {

int64_t days_from_civil(int y, int m, int d) {
    y -= m <= 2;
    const int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

void civil_from_days(int64_t z, int& y, int& m, int& d) {
    z += 719468;
    const int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const int64_t yy = static_cast<int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
    m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
    y = static_cast<int>(yy + (m <= 2));
}

int64_t parse_iso_date(const std::string& s) {
    int y, m, d;
    if (std::sscanf(s.c_str(), "%d-%d-%d", &y, &m, &d) != 3)
        throw ValidationError("bad ISO date '" + s + "'");
    return days_from_civil(y, m, d);
}

std::string format_iso_date(int64_t days) {
    int y, m, d;
    civil_from_days(days, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", y, m, d);
    return buf;
}

bool is_local_midnight(int64_t utc, int tz_offset_min) {
    const int64_t local = utc + static_cast<int64_t>(tz_offset_min) * 60;
    return ((local % kSecondsPerDay) + kSecondsPerDay) % kSecondsPerDay == 0;
}

FiveMinSeries resample_5min(const HeartRateSeries& series) {
    if (series.samples.empty()) throw ValidationError("no samples");
    if (!is_local_midnight(series.collection_start, series.tz_offset_min) ||
        !is_local_midnight(series.collection_end, series.tz_offset_min) ||
        series.collection_end <= series.collection_start)
        throw ValidationError("misaligned collection window");

    const int64_t n_bins = (series.collection_end - series.collection_start) / kBinSeconds;
    std::vector<double> sums(static_cast<size_t>(n_bins), 0.0);
    std::vector<int64_t> counts(static_cast<size_t>(n_bins), 0);

    for (const auto& s : series.samples) {
        if (s.timestamp < series.collection_start || s.timestamp >= series.collection_end)
            throw ValidationError("sample at " + std::to_string(s.timestamp) +
                                  " outside collection window of " + series.participant_id);
        if (s.bpm <= kBpmMin || s.bpm >= kBpmMax) continue;  // artifact, not physiology
        const int64_t bin = (s.timestamp - series.collection_start) / kBinSeconds;
        sums[static_cast<size_t>(bin)] += s.bpm;
        counts[static_cast<size_t>(bin)] += 1;
    }

    FiveMinSeries out;
    out.participant_id = series.participant_id;
    out.start = series.collection_start;
    out.tz_offset_min = series.tz_offset_min;
    out.values.resize(static_cast<size_t>(n_bins));
    for (int64_t i = 0; i < n_bins; ++i) {
        if (counts[static_cast<size_t>(i)] > 0) {
            out.values[static_cast<size_t>(i)] = {
                static_cast<float>(sums[static_cast<size_t>(i)] /
                                   static_cast<double>(counts[static_cast<size_t>(i)])),
                false};
        } else {
            out.values[static_cast<size_t>(i)] = {std::numeric_limits<float>::quiet_NaN(), true};
        }
    }
    return out;
}

double completeness(const FiveMinSeries& series, int64_t window_start, int64_t window_end) {
    if (window_start < series.start || window_end > series.end() || window_end <= window_start)
        throw ValidationError("completeness window outside series bounds");
    if ((window_start - series.start) % kBinSeconds != 0 || (window_end - window_start) % kBinSeconds != 0)
        throw ValidationError("completeness window not bin-aligned");
    const int64_t first = (window_start - series.start) / kBinSeconds;
    const int64_t count = (window_end - window_start) / kBinSeconds;
    int64_t present = 0;
    for (int64_t i = first; i < first + count; ++i)
        if (!series.values[static_cast<size_t>(i)].imputed) ++present;
    return static_cast<double>(present) / static_cast<double>(count);
}

std::string group_name(Group g) {
    switch (g) {
        case Group::pretrain: return "pretrain";
        case Group::positive: return "positive";
        case Group::control: return "control";
    }
    return "?";
}

Group group_from(const std::string& s) {
    if (s == "pretrain") return Group::pretrain;
    if (s == "positive") return Group::positive;
    if (s == "control") return Group::control;
    throw ValidationError("unknown group '" + s + "'");
}

const ManifestEntry* Manifest::find(const std::string& pid) const {
    for (const auto& e : entries)
        if (e.participant_id == pid) return &e;
    return nullptr;
}

std::vector<const ManifestEntry*> Manifest::by_group(Group g) const {
    std::vector<const ManifestEntry*> out;
    for (const auto& e : entries)
        if (e.group == g) out.push_back(&e);
    return out;
}

Manifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open manifest " + path);
    nlohmann::json j;
    in >> j;
    if (!j.is_array()) throw ValidationError("manifest must be a JSON array");

    Manifest m;
    for (const auto& e : j) {
        ManifestEntry entry;
        entry.participant_id = e.at("participant_id").get<std::string>();
        entry.site = e.at("site").get<std::string>();
        entry.gender = e.at("gender").get<std::string>();
        entry.age_band = e.at("age_band").get<std::string>();
        entry.tz_offset_min = e.at("timezone_offset_minutes").get<int>();
        entry.group = group_from(e.at("group").get<std::string>());
        if (!e.at("onset_date").is_null()) {
            const int64_t day = parse_iso_date(e.at("onset_date").get<std::string>());
            entry.onset_day = day * kSecondsPerDay - static_cast<int64_t>(entry.tz_offset_min) * 60;
        }
        m.entries.push_back(std::move(entry));
    }
    return m;
}

void save_manifest(const Manifest& m, const std::string& path) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& e : m.entries) {
        nlohmann::json je;
        je["participant_id"] = e.participant_id;
        je["site"] = e.site;
        je["gender"] = e.gender;
        je["age_band"] = e.age_band;
        je["timezone_offset_minutes"] = e.tz_offset_min;
        if (e.onset_day) {
            const int64_t local = *e.onset_day + static_cast<int64_t>(e.tz_offset_min) * 60;
            je["onset_date"] = format_iso_date(local / kSecondsPerDay);
        } else {
            je["onset_date"] = nullptr;
        }
        je["group"] = group_name(e.group);
        j.push_back(je);
    }
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write manifest " + path);
    out << j.dump(2) << "\n";
}

HeartRateSeries load_series_csv(const std::string& path, const ManifestEntry& entry) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open series file " + path);

    HeartRateSeries series;
    series.participant_id = entry.participant_id;
    series.tz_offset_min = entry.tz_offset_min;

    std::string line;
    if (!std::getline(in, line) || line.rfind("timestamp,bpm", 0) != 0)
        throw ValidationError(path + ": missing 'timestamp,bpm' header");

    int64_t prev_ts = std::numeric_limits<int64_t>::min();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const char* p = line.data();
        const char* end = p + line.size();
        HeartRateSample s;
        auto r1 = std::from_chars(p, end, s.timestamp);
        if (r1.ec != std::errc{} || r1.ptr == end || *r1.ptr != ',')
            throw ValidationError(path + ": bad row '" + line + "'");
        auto r2 = std::from_chars(r1.ptr + 1, end, s.bpm);
        if (r2.ec != std::errc{})
            throw ValidationError(path + ": bad bpm in row '" + line + "'");
        if (s.timestamp <= prev_ts)
            throw ValidationError(path + ": timestamps not strictly increasing at " +
                                  std::to_string(s.timestamp));
        prev_ts = s.timestamp;
        series.samples.push_back(s);
    }
    if (series.samples.empty()) throw ValidationError(path + ": no samples");

    const int64_t off = static_cast<int64_t>(entry.tz_offset_min) * 60;
    auto floor_day = [](int64_t t) {
        return (t >= 0 ? t / kSecondsPerDay : (t - kSecondsPerDay + 1) / kSecondsPerDay);
    };
    const int64_t first_local = series.samples.front().timestamp + off;
    const int64_t last_local = series.samples.back().timestamp + off;
    series.collection_start = floor_day(first_local) * kSecondsPerDay - off;
    series.collection_end = (floor_day(last_local) + 1) * kSecondsPerDay - off;
    return series;
}

void save_series_csv(const HeartRateSeries& series, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ValidationError("cannot write series file " + path);
    out << "timestamp,bpm\n";
    char buf[64];
    for (const auto& s : series.samples) {
        std::snprintf(buf, sizeof(buf), "%lld,%.2f\n", static_cast<long long>(s.timestamp), s.bpm);
        out << buf;
    }
}

}  // namespace hrd
