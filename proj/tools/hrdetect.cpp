// hrdetect: heart-rate based symptom-detection pipeline.
//
// Subcommands: synth, preprocess, train, loso, scan, gradcheck.
// Exit codes: 0 success, 1 validation error, 2 numerical failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "hrd/gradcheck_suite.hpp"
#include "hrd/pipeline.hpp"

namespace {

struct CommonFlags {
    std::string config_path;
    int64_t seed = -1;
    int jobs = -1;
    std::string output;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
    cmd->add_option("--config", flags.config_path, "JSON run configuration");
    cmd->add_option("--seed", flags.seed, "override the config seed");
    cmd->add_option("--jobs", flags.jobs, "fold/participant worker count");
    cmd->add_option("--output", flags.output, "override the output directory");
}

hrd::RunConfig resolve(const CommonFlags& flags) {
    hrd::RunConfig cfg;
    if (!flags.config_path.empty()) cfg = hrd::load_run_config(flags.config_path);
    if (flags.seed >= 0) {
        cfg.seed = static_cast<uint64_t>(flags.seed);
        cfg.synth.seed = cfg.seed;
    }
    if (flags.jobs >= 0) cfg.jobs = flags.jobs;
    if (!flags.output.empty()) cfg.output_dir = flags.output;
    if (const char* env = std::getenv("HRDETECT_CACHE_DIR")) cfg.cache_dir = env;
    return cfg;
}

std::string fmt_metric(const std::optional<double>& v) {
    if (!v) return "-";
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%.3f", *v);
    return buf;
}

void print_metrics(const char* tag, const hrd::MetricReport& m) {
    std::printf("%s  tp=%lld fp=%lld tn=%lld fn=%lld  uar=%s precision=%s f1=%s sens=%s spec=%s\n",
                tag, static_cast<long long>(m.tp), static_cast<long long>(m.fp),
                static_cast<long long>(m.tn), static_cast<long long>(m.fn),
                fmt_metric(m.uar).c_str(), fmt_metric(m.precision).c_str(),
                fmt_metric(m.f1).c_str(), fmt_metric(m.sensitivity).c_str(),
                fmt_metric(m.specificity).c_str());
}

int cmd_synth(const hrd::RunConfig& cfg) {
    auto cohort = hrd::generate_cohort(cfg.synth);
    hrd::write_cohort(cohort, cfg.data_dir);
    std::printf("cohort written to %s\n", cfg.data_dir.c_str());
    std::printf("participants: %zu (pretrain %d, positive %d, control %d)\n",
                cohort.participants.size(), cfg.synth.n_pretrain, cfg.synth.n_positive,
                cfg.synth.n_control);
    return 0;
}

int cmd_preprocess(const hrd::RunConfig& cfg) {
    auto stats = hrd::preprocess_cohort(cfg);
    std::printf("preprocessed %lld participants -> %s\n",
                static_cast<long long>(stats.participants), cfg.cache_dir.c_str());
    std::printf("segments: %lld symptomatic, %lld asymptomatic (%lld discarded below %.2f "
                "completeness)\n",
                static_cast<long long>(stats.symptomatic),
                static_cast<long long>(stats.asymptomatic),
                static_cast<long long>(stats.discarded_incomplete), cfg.completeness_threshold);
    for (const auto& [group, mean, sd] : stats.completeness_by_group)
        std::printf("completeness %-9s %.1f%% +- %.1f%%\n", group.c_str(), 100.0 * mean,
                    100.0 * sd);
    return 0;
}

int cmd_train(const hrd::RunConfig& cfg) {
    auto manifest = hrd::load_manifest(cfg.data_dir + "/manifest.json");
    auto path = hrd::run_pretrain(cfg, manifest);
    std::printf("checkpoint written to %s\n", path.c_str());
    return 0;
}

int cmd_loso(const hrd::RunConfig& cfg, const std::string& pretrained) {
    auto manifest = hrd::load_manifest(cfg.data_dir + "/manifest.json");
    std::string ckpt = pretrained;
    if (ckpt.empty()) {
        ckpt = cfg.output_dir + "/pretrained.ckpt";
        if (!std::filesystem::exists(ckpt)) {
            std::printf("pretraining %s...\n", hrd::family_name(cfg.model.family).c_str());
            ckpt = hrd::run_pretrain(cfg, manifest);
        }
    }
    auto result = hrd::run_loso(cfg, manifest, ckpt);
    for (const auto& fr : result.folds) {
        std::string tag = "fold " + fr.fold.held_out_positive;
        print_metrics(tag.c_str(), fr.report.metrics);
    }
    print_metrics("pooled", result.pooled);
    std::printf("results: %s\nsummary: %s\n", result.results_csv_path.c_str(),
                result.summary_json_path.c_str());
    return 0;
}

int cmd_scan(const hrd::RunConfig& cfg, const std::string& participant, int from, int to) {
    auto manifest = hrd::load_manifest(cfg.data_dir + "/manifest.json");
    const std::string csv = cfg.output_dir + "/scan_" + participant + ".csv";
    auto entries = hrd::run_scan(cfg, manifest, participant, from, to, csv);
    for (const auto& e : entries) {
        if (e.valid)
            std::printf("shift %+d  recon_error=%.4f  decision=%s\n", e.shift, e.recon_error,
                        e.decision ? "positive" : "negative");
        else
            std::printf("shift %+d  skipped (%s)\n", e.shift, e.note.c_str());
    }
    std::printf("trace: %s\n", csv.c_str());
    return 0;
}

int cmd_gradcheck() {
    auto reports = hrd::run_gradcheck_suite();
    bool all_pass = true;
    std::printf("%-28s %10s %8s\n", "op", "max_rel_err", "status");
    for (const auto& r : reports) {
        std::printf("%-28s %10.2e %8s\n", r.op.c_str(), r.max_rel_err,
                    r.pass ? "pass" : "FAIL");
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"heart-rate symptom detection pipeline"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string pretrained, participant;
    int scan_from = -1000, scan_to = 1000;

    auto* synth = app.add_subcommand("synth", "generate a synthetic cohort");
    add_common(synth, flags);

    auto* preprocess = app.add_subcommand("preprocess", "build the segment cache");
    add_common(preprocess, flags);

    auto* train = app.add_subcommand("train", "pretrain the configured model");
    add_common(train, flags);

    auto* loso = app.add_subcommand("loso", "leave-one-subject-out cross-validation");
    add_common(loso, flags);
    loso->add_option("--pretrained", pretrained, "start from an existing checkpoint");

    auto* scan = app.add_subcommand("scan", "window-shift classification scan");
    add_common(scan, flags);
    scan->add_option("--participant", participant, "positive participant id")->required();
    scan->add_option("--from", scan_from, "first shift in days");
    scan->add_option("--to", scan_to, "last shift in days");

    app.add_subcommand("gradcheck", "finite-difference check of all operators");

    CLI11_PARSE(app, argc, argv);

    try {
        auto cfg = resolve(flags);
        if (synth->parsed()) return cmd_synth(cfg);
        if (preprocess->parsed()) return cmd_preprocess(cfg);
        if (train->parsed()) return cmd_train(cfg);
        if (loso->parsed()) return cmd_loso(cfg, pretrained);
        if (scan->parsed()) {
            const int from = scan_from == -1000 ? cfg.scan_from : scan_from;
            const int to = scan_to == 1000 ? cfg.scan_to : scan_to;
            return cmd_scan(cfg, participant, from, to);
        }
        return cmd_gradcheck();
    } catch (const hrd::NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
