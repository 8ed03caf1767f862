#include "hrd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "json.hpp"
#include "hrd/segmenter.hpp"

namespace hrd {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t participant_seed(uint64_t base, Group role, int index) {
    return splitmix64(base ^ splitmix64((static_cast<uint64_t>(role) << 32) |
                                        static_cast<uint64_t>(index + 1)));
}

struct SiteInfo {
    const char* name;
    int tz_offset_min;
};

const SiteInfo kSites[3] = {{"site_a", 0}, {"site_b", 60}, {"site_c", -120}};
const char* kAgeBands[6] = {"<=30", "30-39", "40-49", "50-59", "60-69", ">=70"};

// Positives and controls share this mapping, which makes control i the
// matched pair of positive i by construction.
void fill_attributes(ManifestEntry& e, int index) {
    e.site = kSites[index % 3].name;
    e.tz_offset_min = kSites[index % 3].tz_offset_min;
    e.gender = (index % 4 == 0) ? "female" : "male";
    e.age_band = kAgeBands[index % 6];
}

struct RoleShape {
    int days;
    std::optional<int> onset_day;
};

RoleShape role_shape(const GeneratorConfig& c, Group role) {
    switch (role) {
        case Group::pretrain: return {c.days, c.anomaly.onset_day};
        case Group::positive:
            return {c.days_positive > 0 ? c.days_positive : c.days,
                    c.onset_positive > 0 ? c.onset_positive : c.anomaly.onset_day};
        case Group::control: return {c.days_control > 0 ? c.days_control : c.days, std::nullopt};
    }
    return {c.days, std::nullopt};
}

void sanity_check_segments(const GeneratorConfig& config, const HeartRateSeries& series,
                           int64_t onset) {
    if (config.anomaly.delta_bpm <= 3.0 * config.noise_sd) return;
    auto five = resample_5min(series);
    Segment sym;
    try {
        sym = extract_symptomatic(five, onset);
    } catch (const ValidationError&) {
        return;  // onset too close to the bounds for a full window
    }
    auto asym = extract_asymptomatic(five, onset);
    if (asym.empty()) return;

    auto seg_mean = [](const Segment& s) {
        double sum = 0.0;
        int64_t n = 0;
        for (float v : s.values)
            if (!std::isnan(v)) {
                sum += v;
                ++n;
            }
        return n ? sum / static_cast<double>(n) : 0.0;
    };
    const double sym_mean = seg_mean(sym);
    for (const auto& a : asym)
        if (seg_mean(a) >= sym_mean)
            throw NumericError("synthetic sanity check failed: asymptomatic segment mean >= "
                               "symptomatic segment mean for " +
                               series.participant_id);
}

}  // namespace

SynthParticipant generate_participant(const GeneratorConfig& config, Group role, int index) {
    if (config.days < 1 || config.sample_interval_s < 1 || config.missing_rate < 0.0 ||
        config.missing_rate >= 1.0 || config.noise_sd < 0.0 || config.anomaly.delta_bpm < 0.0)
        throw ValidationError("invalid generator config");

    const RoleShape shape = role_shape(config, role);
    if (shape.onset_day) {
        if (*shape.onset_day + config.anomaly.duration_days > shape.days)
            throw ValidationError("invalid generator config: anomaly extends past collection");
        if (*shape.onset_day < 7 || *shape.onset_day + 7 > shape.days)
            throw ValidationError("invalid generator config: onset day " +
                                  std::to_string(*shape.onset_day) +
                                  " leaves no room for a full symptomatic window");
    }

    std::mt19937_64 rng(participant_seed(config.seed, role, index));
    std::normal_distribution<double> norm01(0.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);

    SynthParticipant out;
    char idbuf[32];
    const char* prefix = role == Group::pretrain ? "PT" : (role == Group::positive ? "PS" : "CT");
    std::snprintf(idbuf, sizeof(idbuf), "%s%03d", prefix, index + 1);
    out.entry.participant_id = idbuf;
    out.entry.group = role;
    if (role == Group::pretrain) {
        out.entry.site = kSites[index % 3].name;
        out.entry.tz_offset_min = kSites[index % 3].tz_offset_min;
        out.entry.gender = (index % 3 == 0) ? "female" : "male";
        out.entry.age_band = kAgeBands[index % 6];
    } else {
        fill_attributes(out.entry, index);
    }

    const int64_t off = static_cast<int64_t>(out.entry.tz_offset_min) * 60;
    const int64_t start = config.start_date_days * kSecondsPerDay - off;
    const int64_t end = start + static_cast<int64_t>(shape.days) * kSecondsPerDay;

    out.series.participant_id = out.entry.participant_id;
    out.series.tz_offset_min = out.entry.tz_offset_min;
    out.series.collection_start = start;
    out.series.collection_end = end;

    const double base = std::clamp(config.base_hr_mean + config.base_hr_sd * norm01(rng), 45.0, 100.0);
    const double amp = config.circadian_amp_bpm * (0.7 + 0.6 * uni01(rng));
    const double phase_h = 4.0 + 3.0 * (uni01(rng) - 0.5);  // trough near 4 am local

    std::vector<double> wobble(static_cast<size_t>(shape.days));
    for (auto& w : wobble) w = config.daily_wobble_sd * norm01(rng);

    int64_t onset_utc = 0, illness_end_utc = 0;
    if (shape.onset_day) {
        onset_utc = start + static_cast<int64_t>(*shape.onset_day) * kSecondsPerDay;
        illness_end_utc = onset_utc + static_cast<int64_t>(config.anomaly.duration_days) * kSecondsPerDay;
        out.entry.onset_day = onset_utc;
        out.truth.illness_start = onset_utc;
        out.truth.illness_end = illness_end_utc;
    }
    out.truth.participant_id = out.entry.participant_id;

    // 5-minute bin drop mask
    const int64_t n_bins = (end - start) / kBinSeconds;
    std::vector<bool> dropped(static_cast<size_t>(n_bins), false);
    if (config.missing_rate > 0.0) {
        if (config.burst_gaps) {
            int64_t i = 0;
            while (i < n_bins) {
                if (uni01(rng) < config.missing_rate / 24.0) {
                    const int64_t gap = 6 + static_cast<int64_t>(uni01(rng) * 42.0);  // 0.5 .. 4 h
                    for (int64_t j = i; j < std::min(n_bins, i + gap); ++j)
                        dropped[static_cast<size_t>(j)] = true;
                    i += gap;
                } else {
                    ++i;
                }
            }
        } else {
            for (int64_t i = 0; i < n_bins; ++i)
                if (uni01(rng) < config.missing_rate) dropped[static_cast<size_t>(i)] = true;
        }
    }

    const double ramp_s = std::max(1.0, config.anomaly.ramp_days * kSecondsPerDay);
    auto illness_at = [&](int64_t t) {
        if (!shape.onset_day || t < onset_utc || t >= illness_end_utc) return 0.0;
        const double up = static_cast<double>(t - onset_utc) / ramp_s;
        const double down = static_cast<double>(illness_end_utc - t) / ramp_s;
        return config.anomaly.delta_bpm * std::clamp(std::min(up, down), 0.0, 1.0);
    };

    out.series.samples.reserve(static_cast<size_t>((end - start) / config.sample_interval_s));
    for (int64_t t = start; t < end; t += config.sample_interval_s) {
        const int64_t bin = (t - start) / kBinSeconds;
        if (dropped[static_cast<size_t>(bin)]) continue;
        const int64_t day = (t - start) / kSecondsPerDay;
        const double local_h =
            static_cast<double>((t + off) % kSecondsPerDay) / 3600.0;
        const double circadian = -amp * std::cos(2.0 * M_PI * (local_h - phase_h) / 24.0);
        double noise = config.noise_sd * norm01(rng);
        noise = std::clamp(noise, -3.0 * config.noise_sd, 3.0 * config.noise_sd);
        const double bpm =
            base + wobble[static_cast<size_t>(day)] + circadian + illness_at(t) + noise;
        out.series.samples.push_back({t, std::clamp(bpm, 25.0, 240.0)});
    }

    if (shape.onset_day) sanity_check_segments(config, out.series, onset_utc);
    return out;
}

Cohort generate_cohort(const GeneratorConfig& config) {
    Cohort cohort;
    auto add = [&](Group role, int count) {
        for (int i = 0; i < count; ++i) {
            cohort.participants.push_back(generate_participant(config, role, i));
            cohort.manifest.entries.push_back(cohort.participants.back().entry);
        }
    };
    add(Group::pretrain, config.n_pretrain);
    add(Group::positive, config.n_positive);
    add(Group::control, config.n_control);
    return cohort;
}

void write_cohort(const Cohort& cohort, const std::string& data_dir) {
    std::filesystem::create_directories(data_dir);
    for (const auto& p : cohort.participants)
        save_series_csv(p.series, data_dir + "/" + p.entry.participant_id + ".csv");
    save_manifest(cohort.manifest, data_dir + "/manifest.json");

    nlohmann::json truth = nlohmann::json::array();
    for (const auto& p : cohort.participants) {
        nlohmann::json e;
        e["participant_id"] = p.truth.participant_id;
        e["illness_start"] = p.truth.illness_start;
        e["illness_end"] = p.truth.illness_end;
        truth.push_back(e);
    }
    std::ofstream out(data_dir + "/ground_truth.json");
    if (!out) throw ValidationError("cannot write ground truth");
    out << truth.dump(2) << "\n";
}

}  // namespace hrd
