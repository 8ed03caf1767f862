#include "hrd/run_config.hpp"

#include <fstream>

#include "json.hpp"

namespace hrd {

using nlohmann::json;

namespace {

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RunConfig run_config_from_json_text(const std::string& text) {
    RunConfig cfg;
    json j = json::parse(text);

    maybe(j, "data_dir", cfg.data_dir);
    maybe(j, "cache_dir", cfg.cache_dir);
    maybe(j, "output_dir", cfg.output_dir);
    maybe(j, "seed", cfg.seed);
    maybe(j, "jobs", cfg.jobs);
    maybe(j, "completeness_threshold", cfg.completeness_threshold);

    if (j.contains("model")) cfg.model = model_config_from_json_str(j.at("model").dump());

    if (j.contains("schedule")) {
        const auto& s = j.at("schedule");
        maybe(s, "lr_init", cfg.schedule.lr_init);
        maybe(s, "decay_factor", cfg.schedule.decay_factor);
        maybe(s, "decay_every", cfg.schedule.decay_every);
        maybe(s, "lr_floor", cfg.schedule.lr_floor);
        maybe(s, "batch_size", cfg.schedule.batch_size);
        maybe(s, "pretrain_epochs", cfg.pretrain_epochs);
        maybe(s, "finetune_epochs", cfg.finetune_epochs);
        maybe(s, "finetune_lr_init", cfg.finetune_lr_init);
    }

    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        if (e.contains("mode")) cfg.eval_mode = eval_mode_from(e.at("mode").get<std::string>());
        maybe(e, "macro", cfg.macro_aggregation);
    }

    if (j.contains("scan")) {
        maybe(j.at("scan"), "from", cfg.scan_from);
        maybe(j.at("scan"), "to", cfg.scan_to);
    }

    if (j.contains("synth")) {
        const auto& s = j.at("synth");
        maybe(s, "n_pretrain", cfg.synth.n_pretrain);
        maybe(s, "n_positive", cfg.synth.n_positive);
        maybe(s, "n_control", cfg.synth.n_control);
        maybe(s, "days", cfg.synth.days);
        maybe(s, "base_hr_mean", cfg.synth.base_hr_mean);
        maybe(s, "base_hr_sd", cfg.synth.base_hr_sd);
        maybe(s, "circadian_amp_bpm", cfg.synth.circadian_amp_bpm);
        maybe(s, "daily_wobble_sd", cfg.synth.daily_wobble_sd);
        maybe(s, "noise_sd", cfg.synth.noise_sd);
        maybe(s, "missing_rate", cfg.synth.missing_rate);
        maybe(s, "burst_gaps", cfg.synth.burst_gaps);
        maybe(s, "sample_interval_s", cfg.synth.sample_interval_s);
        maybe(s, "days_positive", cfg.synth.days_positive);
        maybe(s, "days_control", cfg.synth.days_control);
        maybe(s, "onset_positive", cfg.synth.onset_positive);
        if (s.contains("start_date")) {
            cfg.synth.start_date_days = parse_iso_date(s.at("start_date").get<std::string>());
        }
        if (s.contains("anomaly")) {
            const auto& a = s.at("anomaly");
            maybe(a, "delta_bpm", cfg.synth.anomaly.delta_bpm);
            maybe(a, "onset_day", cfg.synth.anomaly.onset_day);
            maybe(a, "duration_days", cfg.synth.anomaly.duration_days);
            maybe(a, "ramp_days", cfg.synth.anomaly.ramp_days);
        }
    }
    cfg.synth.seed = cfg.seed;
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open config " + path);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    return run_config_from_json_text(text);
}

std::string run_config_to_json_text(const RunConfig& cfg) {
    json j;
    j["data_dir"] = cfg.data_dir;
    j["cache_dir"] = cfg.cache_dir;
    j["output_dir"] = cfg.output_dir;
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    j["completeness_threshold"] = cfg.completeness_threshold;
    j["model"] = json::parse(model_config_to_json_str(cfg.model));
    j["schedule"] = {{"lr_init", cfg.schedule.lr_init},
                     {"decay_factor", cfg.schedule.decay_factor},
                     {"decay_every", cfg.schedule.decay_every},
                     {"lr_floor", cfg.schedule.lr_floor},
                     {"batch_size", cfg.schedule.batch_size},
                     {"pretrain_epochs", cfg.pretrain_epochs},
                     {"finetune_epochs", cfg.finetune_epochs},
                     {"finetune_lr_init", cfg.finetune_lr_init}};
    j["eval"] = {{"mode", eval_mode_name(cfg.eval_mode)}, {"macro", cfg.macro_aggregation}};
    j["scan"] = {{"from", cfg.scan_from}, {"to", cfg.scan_to}};
    j["synth"] = {{"n_pretrain", cfg.synth.n_pretrain},
                  {"n_positive", cfg.synth.n_positive},
                  {"n_control", cfg.synth.n_control},
                  {"days", cfg.synth.days},
                  {"base_hr_mean", cfg.synth.base_hr_mean},
                  {"base_hr_sd", cfg.synth.base_hr_sd},
                  {"circadian_amp_bpm", cfg.synth.circadian_amp_bpm},
                  {"daily_wobble_sd", cfg.synth.daily_wobble_sd},
                  {"noise_sd", cfg.synth.noise_sd},
                  {"missing_rate", cfg.synth.missing_rate},
                  {"burst_gaps", cfg.synth.burst_gaps},
                  {"sample_interval_s", cfg.synth.sample_interval_s},
                  {"days_positive", cfg.synth.days_positive},
                  {"days_control", cfg.synth.days_control},
                  {"onset_positive", cfg.synth.onset_positive},
                  {"start_date", format_iso_date(cfg.synth.start_date_days)},
                  {"anomaly",
                   {{"delta_bpm", cfg.synth.anomaly.delta_bpm},
                    {"onset_day", cfg.synth.anomaly.onset_day},
                    {"duration_days", cfg.synth.anomaly.duration_days},
                    {"ramp_days", cfg.synth.anomaly.ramp_days}}}};
    return j.dump(2);
}

}  // namespace hrd
