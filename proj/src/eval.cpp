#include "hrd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hrd {

std::vector<Fold> build_folds(const Manifest& manifest) {
    auto positives = manifest.by_group(Group::positive);
    auto controls = manifest.by_group(Group::control);
    auto pretrain = manifest.by_group(Group::pretrain);

    auto by_id = [](const ManifestEntry* a, const ManifestEntry* b) {
        return a->participant_id < b->participant_id;
    };
    std::sort(positives.begin(), positives.end(), by_id);
    std::sort(controls.begin(), controls.end(), by_id);
    std::sort(pretrain.begin(), pretrain.end(), by_id);

    // pair each positive with the first unused matched control
    std::vector<bool> used(controls.size(), false);
    std::vector<std::pair<const ManifestEntry*, const ManifestEntry*>> pairs;
    for (const auto* pos : positives) {
        const ManifestEntry* match = nullptr;
        for (size_t i = 0; i < controls.size(); ++i) {
            if (used[i]) continue;
            if (controls[i]->site == pos->site && controls[i]->gender == pos->gender &&
                controls[i]->age_band == pos->age_band) {
                match = controls[i];
                used[i] = true;
                break;
            }
        }
        if (!match)
            throw ValidationError("missing matched control for positive participant " +
                                  pos->participant_id);
        pairs.push_back({pos, match});
    }

    std::vector<Fold> folds;
    for (size_t i = 0; i < pairs.size(); ++i) {
        Fold f;
        f.held_out_positive = pairs[i].first->participant_id;
        f.held_out_control = pairs[i].second->participant_id;
        for (size_t j = 0; j < pairs.size(); ++j) {
            if (j == i) continue;
            f.train_positives.push_back(pairs[j].first->participant_id);
            f.train_controls.push_back(pairs[j].second->participant_id);
        }
        for (const auto* p : pretrain) f.pretrain_ids.push_back(p->participant_id);
        folds.push_back(std::move(f));
    }
    return folds;
}

MetricReport MetricReport::from_counts(int64_t tp, int64_t fp, int64_t tn, int64_t fn) {
    MetricReport r;
    r.tp = tp;
    r.fp = fp;
    r.tn = tn;
    r.fn = fn;
    if (tp + fn > 0) r.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
    if (tn + fp > 0) r.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);
    if (r.sensitivity && r.specificity) r.uar = (*r.sensitivity + *r.specificity) / 2.0;
    if (tp + fp > 0) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    if (r.precision && r.sensitivity && (*r.precision + *r.sensitivity) > 0.0)
        r.f1 = 2.0 * *r.precision * *r.sensitivity / (*r.precision + *r.sensitivity);
    return r;
}

MetricReport aggregate(const std::vector<MetricReport>& reports, bool macro) {
    if (!macro) {
        int64_t tp = 0, fp = 0, tn = 0, fn = 0;
        for (const auto& r : reports) {
            tp += r.tp;
            fp += r.fp;
            tn += r.tn;
            fn += r.fn;
        }
        return MetricReport::from_counts(tp, fp, tn, fn);
    }
    MetricReport out;
    auto mean_of = [&](std::optional<double> MetricReport::*field) -> std::optional<double> {
        double s = 0.0;
        int64_t n = 0;
        for (const auto& r : reports)
            if (r.*field) {
                s += *(r.*field);
                ++n;
            }
        if (n == 0) return std::nullopt;
        return s / static_cast<double>(n);
    };
    for (const auto& r : reports) {
        out.tp += r.tp;
        out.fp += r.fp;
        out.tn += r.tn;
        out.fn += r.fn;
    }
    out.sensitivity = mean_of(&MetricReport::sensitivity);
    out.specificity = mean_of(&MetricReport::specificity);
    out.uar = mean_of(&MetricReport::uar);
    out.precision = mean_of(&MetricReport::precision);
    out.f1 = mean_of(&MetricReport::f1);
    return out;
}

ThresholdModel fit_threshold(const std::vector<std::pair<double, bool>>& errors) {
    double min_pos = std::numeric_limits<double>::infinity();
    double max_pos = -std::numeric_limits<double>::infinity();
    double min_neg = std::numeric_limits<double>::infinity();
    double max_neg = -std::numeric_limits<double>::infinity();
    int64_t n_pos = 0, n_neg = 0;
    for (const auto& [e, label] : errors) {
        if (label) {
            min_pos = std::min(min_pos, e);
            max_pos = std::max(max_pos, e);
            ++n_pos;
        } else {
            min_neg = std::min(min_neg, e);
            max_neg = std::max(max_neg, e);
            ++n_neg;
        }
    }
    if (n_pos == 0 || n_neg == 0)
        throw ValidationError("fit_threshold: both labels required");

    // perfect separation: the MLE diverges, use the midpoint between extremes
    if (max_neg < min_pos || max_pos < min_neg) {
        ThresholdModel m;
        m.midpoint_fallback = true;
        const double mid =
            (max_neg < min_pos) ? 0.5 * (max_neg + min_pos) : 0.5 * (max_pos + min_neg);
        m.weight = (max_neg < min_pos) ? 1.0 : -1.0;
        m.bias = -m.weight * mid;
        return m;
    }

    auto nll_of = [&](double w, double b) {
        double nll = 0.0;
        for (const auto& [e, label] : errors) {
            const double z = w * e + b;
            // log(1 + exp(z)) - y*z, numerically stable
            const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
            nll += softplus - (label ? z : 0.0);
        }
        return nll;
    };

    double w = 0.0, b = 0.0;
    double nll = nll_of(w, b);
    for (int iter = 0; iter < 100; ++iter) {
        double g0 = 0.0, g1 = 0.0;        // gradient wrt w, b
        double h00 = 0.0, h01 = 0.0, h11 = 0.0;  // Hessian
        for (const auto& [e, label] : errors) {
            const double z = w * e + b;
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double r = p - (label ? 1.0 : 0.0);
            g0 += r * e;
            g1 += r;
            const double s = p * (1.0 - p);
            h00 += s * e * e;
            h01 += s * e;
            h11 += s;
        }
        if (std::sqrt(g0 * g0 + g1 * g1) < 1e-8) break;

        const double det = h00 * h11 - h01 * h01;
        double dw, db;
        if (std::abs(det) < 1e-14) {  // flat Hessian, take a gradient step
            dw = -g0;
            db = -g1;
        } else {
            dw = -(h11 * g0 - h01 * g1) / det;
            db = -(-h01 * g0 + h00 * g1) / det;
        }
        double step = 1.0;
        for (int damp = 0; damp < 40; ++damp) {
            const double cand = nll_of(w + step * dw, b + step * db);
            if (cand <= nll) {
                w += step * dw;
                b += step * db;
                nll = cand;
                break;
            }
            step *= 0.5;
        }
    }
    ThresholdModel m;
    m.weight = w;
    m.bias = b;
    return m;
}

std::string eval_mode_name(EvalMode m) {
    switch (m) {
        case EvalMode::recon_error: return "recon_error";
        case EvalMode::latent_mlp: return "latent_mlp";
        case EvalMode::cnn_logits: return "cnn_logits";
    }
    return "?";
}

EvalMode eval_mode_from(const std::string& s) {
    if (s == "recon_error") return EvalMode::recon_error;
    if (s == "latent_mlp") return EvalMode::latent_mlp;
    if (s == "cnn_logits") return EvalMode::cnn_logits;
    throw ValidationError("unknown eval mode '" + s + "'");
}

void verify_no_leakage(const Fold& fold, const SegmentSet& train_set) {
    std::set<std::string> held = {fold.held_out_positive, fold.held_out_control};
    auto scan = [&](const std::vector<Segment>& segs) {
        for (const auto& s : segs)
            if (held.count(s.participant_id))
                throw ValidationError("leakage: training segment of held-out participant " +
                                      s.participant_id);
    };
    scan(train_set.symptomatic);
    scan(train_set.asymptomatic);
}

namespace {

// Fold-local attribute classifier fit (two-layer MLP over latents).
std::vector<int> latent_mlp_decisions(Model& model, const SegmentSet& train_set,
                                      const std::vector<const Segment*>& test,
                                      int classifier_hidden, uint64_t seed) {
    auto train_sym = std::vector<const Segment*>();
    auto train_asym = std::vector<const Segment*>();
    for (const auto& s : train_set.symptomatic) train_sym.push_back(&s);
    for (const auto& s : train_set.asymptomatic) train_asym.push_back(&s);
    if (train_sym.empty() || train_asym.empty())
        throw ValidationError("latent_mlp: both classes needed in fold training data");

    auto z_sym = latents_of(model, train_sym);
    auto z_asym = latents_of(model, train_asym);
    const int64_t dim = static_cast<int64_t>(z_sym.front().size());

    AttrClassifier<float> clf;
    clf.build(dim, classifier_hidden, seed);
    auto params = param_tensors(clf.named_params());
    AdamState<float> state;

    // balance by cyclic replication, mirror of the segment-level rule
    const size_t n = std::max(z_sym.size(), z_asym.size());
    std::vector<std::pair<const std::vector<float>*, int>> items;
    for (size_t i = 0; i < n; ++i) {
        items.push_back({&z_sym[i % z_sym.size()], 1});
        items.push_back({&z_asym[i % z_asym.size()], 0});
    }

    std::mt19937_64 rng(seed);
    const int epochs = 200, batch = 32;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        std::shuffle(items.begin(), items.end(), rng);
        AdamConfig<float> adam;
        adam.lr = 0.01f;
        for (size_t at = 0; at < items.size(); at += batch) {
            const size_t take = std::min(static_cast<size_t>(batch), items.size() - at);
            std::vector<float> buf(take * static_cast<size_t>(dim));
            std::vector<int> labels(take);
            for (size_t i = 0; i < take; ++i) {
                std::copy(items[at + i].first->begin(), items[at + i].first->end(),
                          buf.begin() + i * static_cast<size_t>(dim));
                labels[i] = items[at + i].second;
            }
            auto x = Tensor::from({static_cast<int64_t>(take), dim}, std::move(buf));
            auto logits = clf.forward(x);
            auto loss = cross_entropy_loss(logits, labels);
            if (!std::isfinite(loss.item()))
                throw NumericError("latent_mlp classifier diverged at epoch " +
                                   std::to_string(epoch));
            for (auto& p : params) p.zero_grad();
            loss.backward();
            adam_step(params, state, adam);
        }
    }

    auto z_test = latents_of(model, test);
    std::vector<int> out;
    NoGradGuard ng;
    for (const auto& z : z_test) {
        auto x = Tensor::from({1, dim}, std::vector<float>(z.begin(), z.end()));
        auto logits = clf.forward(x);
        out.push_back(logits.ptr()[1] > logits.ptr()[0] ? 1 : 0);
    }
    return out;
}

}  // namespace

FoldReport evaluate_fold(const Fold& fold, Model& model, EvalMode mode,
                         const SegmentSet& train_set, const SegmentSet& test_set,
                         int classifier_hidden, uint64_t seed) {
    if (mode == EvalMode::cnn_logits && model.cfg.family != Family::cnn &&
        model.cfg.family != Family::mlp)
        throw ValidationError("cnn_logits mode requires a classifier model");
    if ((mode == EvalMode::recon_error || mode == EvalMode::latent_mlp) && !model.is_cae())
        throw ValidationError(eval_mode_name(mode) + " mode requires an auto-encoder model");

    verify_no_leakage(fold, train_set);

    std::vector<const Segment*> test;
    std::vector<SegmentLabel> truth;
    for (const auto& s : test_set.symptomatic) test.push_back(&s);
    for (const auto& s : test_set.asymptomatic) test.push_back(&s);

    FoldReport report;
    std::vector<double> scores(test.size(), 0.0);
    std::vector<bool> decisions(test.size(), false);

    if (mode == EvalMode::recon_error) {
        std::vector<const Segment*> train;
        std::vector<bool> train_labels;
        for (const auto& s : train_set.symptomatic) {
            train.push_back(&s);
            train_labels.push_back(true);
        }
        for (const auto& s : train_set.asymptomatic) {
            train.push_back(&s);
            train_labels.push_back(false);
        }
        auto train_err = reconstruction_errors(model, train);
        std::vector<std::pair<double, bool>> pts;
        for (size_t i = 0; i < train_err.size(); ++i) pts.push_back({train_err[i], train_labels[i]});
        report.threshold = fit_threshold(pts);

        auto test_err = reconstruction_errors(model, test);
        for (size_t i = 0; i < test.size(); ++i) {
            scores[i] = test_err[i];
            decisions[i] = report.threshold.decide(test_err[i]);
        }
    } else if (mode == EvalMode::latent_mlp) {
        auto dec = latent_mlp_decisions(model, train_set, test, classifier_hidden, seed);
        for (size_t i = 0; i < test.size(); ++i) {
            decisions[i] = dec[i] == 1;
            scores[i] = dec[i];
        }
    } else {
        auto dec = logit_decisions(model, test);
        for (size_t i = 0; i < test.size(); ++i) {
            decisions[i] = dec[i] == 1;
            scores[i] = dec[i];
        }
    }

    int64_t tp = 0, fp = 0, tn = 0, fn = 0;
    for (size_t i = 0; i < test.size(); ++i) {
        const bool is_sym = test[i]->label == SegmentLabel::symptomatic;
        if (is_sym && decisions[i]) ++tp;
        else if (is_sym && !decisions[i]) ++fn;
        else if (!is_sym && decisions[i]) ++fp;
        else ++tn;
        report.scores.push_back({test[i]->participant_id, test[i]->start_day,
                                 test[i]->shift_days, test[i]->label, scores[i], decisions[i]});
    }
    report.metrics = MetricReport::from_counts(tp, fp, tn, fn);
    return report;
}

std::vector<ScanEntry> window_scan(const FiveMinSeries& series, int64_t onset_day, Model& model,
                                   const ThresholdModel& threshold, int shift_from, int shift_to,
                                   double completeness_threshold) {
    std::vector<ScanEntry> out;
    for (int shift = shift_from; shift <= shift_to; ++shift) {
        ScanEntry entry;
        entry.shift = shift;
        try {
            Segment seg = extract_symptomatic(series, onset_day, shift);
            if (seg.completeness < completeness_threshold)
                throw ValidationError("completeness below threshold");
            seg = impute_median(seg);
            std::vector<const Segment*> one = {&seg};
            const double err = reconstruction_errors(model, one).front();
            entry.valid = true;
            entry.recon_error = err;
            entry.decision = threshold.decide(err);
        } catch (const ValidationError& e) {
            entry.valid = false;
            entry.note = e.what();
        }
        out.push_back(entry);
    }
    return out;
}

}  // namespace hrd
