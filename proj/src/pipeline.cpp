#include "hrd/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "json.hpp"

namespace hrd {

namespace fs = std::filesystem;

namespace {

uint64_t mix_seed(uint64_t base, uint64_t salt) {
    uint64_t x = base ^ (0x9e3779b97f4a7c15ULL + (salt << 1));
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : ""; }

void append_metrics_row(std::string& csv, const std::string& head, const MetricReport& m) {
    csv += head + "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," +
           std::to_string(m.tn) + "," + std::to_string(m.fn) + "," + fmt_opt(m.uar) + "," +
           fmt_opt(m.precision) + "," + fmt_opt(m.f1) + "," + fmt_opt(m.sensitivity) + "," +
           fmt_opt(m.specificity) + "\n";
}

nlohmann::json metrics_json(const MetricReport& m) {
    nlohmann::json j;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["tn"] = m.tn;
    j["fn"] = m.fn;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = *v;
        else
            j[key] = nullptr;
    };
    put("uar", m.uar);
    put("precision", m.precision);
    put("f1", m.f1);
    put("sensitivity", m.sensitivity);
    put("specificity", m.specificity);
    return j;
}

}  // namespace

PreprocessStats preprocess_cohort(const RunConfig& cfg) {
    auto manifest = load_manifest(cfg.data_dir + "/manifest.json");
    fs::create_directories(cfg.cache_dir);

    PreprocessStats stats;
    std::map<std::string, std::vector<double>> completeness;

    for (const auto& entry : manifest.entries) {
        auto series = load_series_csv(cfg.data_dir + "/" + entry.participant_id + ".csv", entry);
        auto five = resample_5min(series);

        std::vector<Segment> keep;
        auto admit = [&](Segment&& seg) {
            completeness[group_name(entry.group)].push_back(seg.completeness);
            if (seg.completeness < cfg.completeness_threshold) {
                ++stats.discarded_incomplete;
                return;
            }
            keep.push_back(impute_median(seg));
            if (keep.back().label == SegmentLabel::symptomatic)
                ++stats.symptomatic;
            else
                ++stats.asymptomatic;
        };

        if (entry.onset_day) admit(extract_symptomatic(five, *entry.onset_day));
        for (auto& seg : extract_asymptomatic(five, entry.onset_day)) admit(std::move(seg));

        save_segment_cache(keep, cfg.cache_dir + "/" + entry.participant_id + ".seg");
        ++stats.participants;
    }

    for (const auto& [group, vals] : completeness) {
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        const double sd = vals.size() > 1 ? std::sqrt(var / static_cast<double>(vals.size() - 1)) : 0.0;
        stats.completeness_by_group.push_back({group, mean, sd});
    }
    return stats;
}

std::vector<Segment> cached_segments(const std::string& cache_dir, const std::string& pid) {
    return load_segment_cache(cache_dir + "/" + pid + ".seg");
}

SegmentSet assemble_set(const std::string& cache_dir, const std::vector<std::string>& sym_ids,
                        const std::vector<std::string>& asym_only_ids, Provenance provenance) {
    SegmentSet set;
    set.provenance = provenance;
    for (const auto& pid : sym_ids) {
        for (auto& seg : cached_segments(cache_dir, pid)) {
            if (seg.label == SegmentLabel::symptomatic)
                set.symptomatic.push_back(std::move(seg));
            else
                set.asymptomatic.push_back(std::move(seg));
        }
    }
    for (const auto& pid : asym_only_ids) {
        for (auto& seg : cached_segments(cache_dir, pid)) {
            if (seg.label == SegmentLabel::asymptomatic)
                set.asymptomatic.push_back(std::move(seg));
        }
    }
    return set;
}

std::string run_pretrain(const RunConfig& cfg, const Manifest& manifest) {
    fs::create_directories(cfg.output_dir);

    std::vector<std::string> pretrain_ids;
    for (const auto* e : manifest.by_group(Group::pretrain))
        pretrain_ids.push_back(e->participant_id);
    if (pretrain_ids.empty()) throw ValidationError("no pretrain participants in manifest");

    auto raw = assemble_set(cfg.cache_dir, pretrain_ids, {}, Provenance::pretrain);
    const LossKind kind = default_loss_for(cfg.model.family);
    SegmentSet data = balance_by_replication(raw);

    auto model = Model::build(cfg.model, mix_seed(cfg.seed, 0xA11));
    TrainSchedule sched = cfg.schedule;
    sched.max_epochs = cfg.pretrain_epochs;
    auto result = train(model, data, sched, kind, mix_seed(cfg.seed, 0x711));

    std::string loss_csv = "epoch,lr,loss\n";
    for (const auto& e : result.trace)
        loss_csv += std::to_string(e.epoch) + "," + fmt(e.lr) + "," + fmt(e.loss) + "\n";
    std::ofstream(cfg.output_dir + "/pretrain_loss.csv") << loss_csv;

    const std::string path = cfg.output_dir + "/pretrained.ckpt";
    save_checkpoint(model, path, cfg.seed, result.trace);
    return path;
}

LosoResult run_loso(const RunConfig& cfg, const Manifest& manifest,
                    const std::string& pretrained_ckpt) {
    fs::create_directories(cfg.output_dir);
    auto folds = build_folds(manifest);
    if (folds.empty()) throw ValidationError("manifest yields no folds");

    LosoResult result;
    result.folds.resize(folds.size());

    const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    const int jobs = std::max(1, std::min<int>(cfg.jobs > 0 ? cfg.jobs : hw,
                                               static_cast<int>(folds.size())));
    op_threads() = jobs > 1 ? 1 : hw;

    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::string first_error;
    std::mutex error_mu;

    auto worker = [&]() {
        while (!failed.load()) {
            const size_t i = next.fetch_add(1);
            if (i >= folds.size()) break;
            try {
                const Fold& fold = folds[i];
                auto train_set = assemble_set(cfg.cache_dir, fold.train_positives,
                                              fold.train_controls, Provenance::cv_positive);
                verify_no_leakage(fold, train_set);

                auto model = load_checkpoint(pretrained_ckpt);
                if (model.cfg.family != cfg.model.family)
                    throw ValidationError("pretrained checkpoint family does not match config");

                const LossKind kind = default_loss_for(model.cfg.family);
                auto balanced = balance_by_replication(train_set);
                TrainSchedule sched = cfg.schedule;
                sched.max_epochs = cfg.finetune_epochs;
                if (cfg.finetune_lr_init > 0.0) sched.lr_init = cfg.finetune_lr_init;
                auto trace = train(model, balanced, sched, kind, mix_seed(cfg.seed, 0xF0 + i));

                auto test_set = assemble_set(cfg.cache_dir, {fold.held_out_positive},
                                             {fold.held_out_control}, Provenance::cv_positive);
                auto report = evaluate_fold(fold, model, cfg.eval_mode, train_set, test_set,
                                            cfg.model.classifier_hidden, mix_seed(cfg.seed, 0xC0 + i));

                const std::string ckpt_path =
                    cfg.output_dir + "/fold_" + fold.held_out_positive + ".ckpt";
                save_checkpoint(model, ckpt_path, cfg.seed, trace.trace);
                result.folds[i] = {fold, std::move(report), ckpt_path};
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!failed.exchange(true)) first_error = e.what();
            }
        }
    };

    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
        op_threads() = hw;
    }
    if (failed.load()) throw ValidationError("loso failed: " + first_error);

    std::vector<MetricReport> per_fold;
    for (const auto& fr : result.folds) per_fold.push_back(fr.report.metrics);
    result.pooled = aggregate(per_fold, cfg.macro_aggregation);

    // results CSV: one row per fold at shift 0
    std::string csv = "fold,mode,shift,tp,fp,tn,fn,uar,precision,f1,sensitivity,specificity\n";
    for (const auto& fr : result.folds) {
        const std::string head = fr.fold.held_out_positive + "," + eval_mode_name(cfg.eval_mode) + ",0";
        auto m = fr.report.metrics;
        csv += head + "," + std::to_string(m.tp) + "," + std::to_string(m.fp) + "," +
               std::to_string(m.tn) + "," + std::to_string(m.fn) + "," + fmt_opt(m.uar) + "," +
               fmt_opt(m.precision) + "," + fmt_opt(m.f1) + "," + fmt_opt(m.sensitivity) + "," +
               fmt_opt(m.specificity) + "\n";
    }
    std::string pooled_row;
    append_metrics_row(pooled_row,
                       std::string("ALL,") + eval_mode_name(cfg.eval_mode) + ",0", result.pooled);
    csv += pooled_row;
    result.results_csv_path = cfg.output_dir + "/results.csv";
    std::ofstream(result.results_csv_path) << csv;

    // per-segment scores CSV
    std::string scores = "fold,participant,start_day,shift,label,score,decision\n";
    for (const auto& fr : result.folds)
        for (const auto& s : fr.report.scores)
            scores += fr.fold.held_out_positive + "," + s.participant_id + "," +
                      std::to_string(s.start_day) + "," + std::to_string(s.shift_days) + "," +
                      (s.label == SegmentLabel::symptomatic ? "symptomatic" : "asymptomatic") +
                      "," + fmt(s.score) + "," + (s.decision ? "1" : "0") + "\n";
    std::ofstream(cfg.output_dir + "/segment_scores.csv") << scores;

    // summary JSON with pooled metrics and per-fold thresholds
    nlohmann::json summary;
    summary["mode"] = eval_mode_name(cfg.eval_mode);
    summary["aggregation"] = cfg.macro_aggregation ? "macro" : "micro";
    summary["seed"] = cfg.seed;
    summary["folds"] = nlohmann::json::array();
    for (const auto& fr : result.folds) {
        nlohmann::json jf;
        jf["held_out_positive"] = fr.fold.held_out_positive;
        jf["held_out_control"] = fr.fold.held_out_control;
        jf["metrics"] = metrics_json(fr.report.metrics);
        jf["checkpoint"] = fr.checkpoint_path;
        if (cfg.eval_mode == EvalMode::recon_error) {
            jf["threshold"] = {{"weight", fr.report.threshold.weight},
                               {"bias", fr.report.threshold.bias},
                               {"midpoint_fallback", fr.report.threshold.midpoint_fallback},
                               {"value", fr.report.threshold.threshold()}};
        }
        summary["folds"].push_back(jf);
    }
    summary["pooled"] = metrics_json(result.pooled);
    result.summary_json_path = cfg.output_dir + "/summary.json";
    std::ofstream(result.summary_json_path) << summary.dump(2) << "\n";

    return result;
}

std::vector<ScanEntry> run_scan(const RunConfig& cfg, const Manifest& manifest,
                                const std::string& participant, int shift_from, int shift_to,
                                const std::string& scan_csv_path) {
    const auto* entry = manifest.find(participant);
    if (!entry) throw ValidationError("participant " + participant + " not in manifest");
    if (!entry->onset_day)
        throw ValidationError("participant " + participant + " has no onset date to scan around");

    // fold artifacts for this participant
    const std::string ckpt_path = cfg.output_dir + "/fold_" + participant + ".ckpt";
    if (!fs::exists(ckpt_path))
        throw ValidationError("no fold checkpoint for " + participant + "; run loso first");
    auto model = load_checkpoint(ckpt_path);

    std::ifstream sj(cfg.output_dir + "/summary.json");
    if (!sj) throw ValidationError("missing summary.json; run loso first");
    nlohmann::json summary;
    sj >> summary;
    ThresholdModel threshold;
    bool found = false;
    for (const auto& jf : summary.at("folds")) {
        if (jf.at("held_out_positive").get<std::string>() == participant && jf.contains("threshold")) {
            threshold.weight = jf.at("threshold").at("weight").get<double>();
            threshold.bias = jf.at("threshold").at("bias").get<double>();
            threshold.midpoint_fallback = jf.at("threshold").at("midpoint_fallback").get<bool>();
            found = true;
        }
    }
    if (!found)
        throw ValidationError("no recon-error threshold recorded for " + participant);

    auto series = load_series_csv(cfg.data_dir + "/" + participant + ".csv", *entry);
    auto five = resample_5min(series);
    auto entries = window_scan(five, *entry->onset_day, model, threshold, shift_from, shift_to,
                               cfg.completeness_threshold);

    std::string csv = "participant,shift,valid,recon_error,decision,note\n";
    for (const auto& e : entries)
        csv += participant + "," + std::to_string(e.shift) + "," + (e.valid ? "1" : "0") + "," +
               (e.valid ? fmt(e.recon_error) : "") + "," + (e.valid && e.decision ? "1" : "0") +
               "," + e.note + "\n";
    std::ofstream(scan_csv_path) << csv;
    return entries;
}

}  // namespace hrd
