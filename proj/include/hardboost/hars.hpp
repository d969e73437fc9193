#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hardboost/base.hpp"
#include "hardboost/error.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/hardness.hpp"
#include "hardboost/models.hpp"
#include "hardboost/random.hpp"
#include "hardboost/synth_set.hpp"
#include "hardboost/types.hpp"
#include "hardboost/validate.hpp"

namespace hardboost {

struct HarsConfig {
    std::size_t k = 2;              // hard classes
    std::size_t support = 2;        // support seen classes per hard class
    double alpha = 2.0;             // seen synthesizing scale
    double beta = 2.0;              // unseen synthesizing scale
    std::size_t n_unseen = 300;     // generated samples per easy unseen class
    std::uint64_t seed = 0;
    double ridge_lambda = 0.1;
    TrainConfig classifier;
};

inline void validate_config(const HarsConfig& c, std::size_t unseen_count) {
    if (c.k < 1 || c.k > unseen_count) {
        throw ValidationError("hars: K=" + std::to_string(c.k) + " outside [1, " + std::to_string(unseen_count) + "]");
    }
    if (c.support < 1) throw ValidationError("hars: S must be >= 1");
    if (!(c.alpha >= 0.0)) throw ValidationError("hars: alpha must be >= 0");
    if (!(c.beta >= 1.0)) throw ValidationError("hars: beta must be >= 1");
    if (c.n_unseen < 1) throw ValidationError("hars: N_u must be >= 1");
}

// Round half away from zero, for alpha * N_s and beta * N_u.
inline std::size_t scaled_count(double scale, std::size_t n) {
    return static_cast<std::size_t>(std::round(scale * static_cast<double>(n)));
}

// The S seen classes semantically closest to `hard_class` (cosine distance,
// ties by class id).
inline std::vector<ClassId> support_seen_classes(const ClassId& hard_class, const SemanticTable& semantics,
                                                 const ClassSplit& split, std::size_t count) {
    if (count > split.seen.size()) {
        throw ValidationError("support_seen_classes: S=" + std::to_string(count) + " exceeds the " +
                              std::to_string(split.seen.size()) + " seen classes");
    }
    const auto& e = semantics.at(hard_class);
    std::vector<std::pair<double, ClassId>> order;
    for (const auto& s : split.seen) order.emplace_back(cosine_distance(e, semantics.at(s)), s);
    std::sort(order.begin(), order.end());
    std::vector<ClassId> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(order[i].second);
    return out;
}

namespace detail {

inline std::map<ClassId, std::vector<std::size_t>> rows_by_class(const FeatureTable& t) {
    std::map<ClassId, std::vector<std::size_t>> out;
    for (std::size_t r = 0; r < t.rows(); ++r) out[t.label(r)].push_back(r);
    return out;
}

inline std::size_t unseen_index(const ClassSplit& split, const ClassId& c) {
    auto it = std::lower_bound(split.unseen.begin(), split.unseen.end(), c);
    if (it == split.unseen.end() || *it != c) throw ValidationError("class '" + c + "' is not unseen");
    return static_cast<std::size_t>(it - split.unseen.begin());
}

}  // namespace detail

// Virtual "hard class" samples around each hard unseen class: round(alpha * N_s)
// rows per hard class, where N_s is the training-row count of its support seen
// classes. Each row mixes one sample from each of two distinct support classes
// (the same class twice when S = 1) with one gamma ~ U(0,1) shared by the
// visual and semantic interpolation.
inline SynthSet synthesize_hard_seen(const FeatureTable& train, const SemanticTable& semantics,
                                     const ClassSplit& split, const std::vector<ClassId>& hard, double alpha,
                                     std::size_t support, std::uint64_t seed) {
    SynthSet out;
    if (alpha == 0.0) return out;
    auto by_class = detail::rows_by_class(train);
    for (const auto& h : hard) {
        auto sup = support_seen_classes(h, semantics, split, support);
        std::size_t n_s = 0;
        for (const auto& s : sup) {
            auto it = by_class.find(s);
            if (it == by_class.end()) {
                throw ValidationError("synthesize_hard_seen: support class '" + s + "' of '" + h +
                                      "' has no training samples");
            }
            n_s += it->second.size();
        }
        auto rng = substream(seed, "hard-seen-interp", detail::unseen_index(split, h));
        const std::size_t count = scaled_count(alpha, n_s);
        for (std::size_t n = 0; n < count; ++n) {
            std::size_t ci = uniform_index(rng, sup.size());
            std::size_t cj = ci;
            if (sup.size() > 1) {
                cj = uniform_index(rng, sup.size() - 1);
                if (cj >= ci) ++cj;
            }
            const auto& rows_i = by_class.at(sup[ci]);
            const auto& rows_j = by_class.at(sup[cj]);
            std::size_t ri = rows_i[uniform_index(rng, rows_i.size())];
            std::size_t rj = rows_j[uniform_index(rng, rows_j.size())];
            double gamma = uniform_open01(rng);

            SynthRow row;
            row.tag = SynthTag::hard_seen_interp;
            row.label = h;
            row.sources = {sup[ci], sup[cj]};
            row.source_rows = {ri, rj};
            row.gamma = gamma;
            auto xi = train.row(ri), xj = train.row(rj);
            row.visual.resize(xi.size());
            for (std::size_t d = 0; d < xi.size(); ++d) {
                row.visual[d] = gamma * static_cast<double>(xi[d]) + (1.0 - gamma) * static_cast<double>(xj[d]);
            }
            const auto& ei = semantics.at(sup[ci]);
            const auto& ej = semantics.at(sup[cj]);
            row.semantic.resize(ei.size());
            for (std::size_t d = 0; d < ei.size(); ++d) row.semantic[d] = gamma * ei[d] + (1.0 - gamma) * ej[d];
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

// Generated unseen samples: N_u per easy class and round(beta * N_u) per hard class.
inline SynthSet synthesize_unseen(const GenerativeModel& gen, const SemanticTable& semantics, const ClassSplit& split,
                                  const std::vector<ClassId>& hard, std::size_t n_unseen, double beta,
                                  std::uint64_t seed) {
    if (n_unseen < 1) throw ValidationError("synthesize_unseen: N_u must be >= 1");
    SynthSet out;
    for (std::size_t i = 0; i < split.unseen.size(); ++i) {
        const auto& c = split.unseen[i];
        bool is_hard = std::find(hard.begin(), hard.end(), c) != hard.end();
        std::size_t n = is_hard ? scaled_count(beta, n_unseen) : n_unseen;
        const auto& e = semantics.at(c);
        for (auto& x : sample_generator(gen, e, n, substream_seed(seed, "unseen-gen", i))) {
            SynthRow row;
            row.visual = std::move(x);
            row.semantic = e;
            row.label = c;
            row.sources = {c};
            out.rows.push_back(std::move(row));
        }
    }
    return out;
}

struct HarsResult {
    PseudoLabelSet predictions;  // one per test_unseen row
    HardnessReport hardness;
    std::optional<EvalReport> report;  // when test_unseen carries true labels
    std::size_t hard_seen_rows = 0;
    std::size_t unseen_rows = 0;
};

namespace detail {

inline std::optional<EvalReport> evaluate_if_labeled(const PseudoLabelSet& preds, const FeatureTable& table,
                                                     const ClassSplit& split) {
    if (table.empty() || !table.is_labeled()) return std::nullopt;
    return evaluate(preds, table.labels(), split);
}

}  // namespace detail

// Hardness-based synthesizing: SS identification, hard-seen interpolation,
// generator fit on real + interpolated seen data, hardness-weighted unseen
// generation, classifier fit on generated unseen data, prediction on D^U.
inline HarsResult run_hars(const DatasetBundle& bundle, const HarsConfig& cfg) {
    validate_config(cfg, bundle.split.unseen.size());
    const auto& split = bundle.split;
    const auto& sem = bundle.semantics;
    HarsResult out;
    out.hardness = detail::run_stage("hars", "identify", [&] { return identify_ss(sem, split, cfg.k); });
    auto seen_synth = detail::run_stage("hars", "synthesize-hard-seen", [&] {
        return synthesize_hard_seen(bundle.train_seen, sem, split, out.hardness.hard, cfg.alpha, cfg.support,
                                    substream_seed(cfg.seed, "hard-seen"));
    });
    out.hard_seen_rows = seen_synth.size();
    auto gen = detail::run_stage("hars", "fit-generator",
                                 [&] { return fit_generator(bundle.train_seen, seen_synth, sem, cfg.ridge_lambda); });
    auto unseen_synth = detail::run_stage("hars", "synthesize-unseen", [&] {
        return synthesize_unseen(gen, sem, split, out.hardness.hard, cfg.n_unseen, cfg.beta,
                                 substream_seed(cfg.seed, "unseen"));
    });
    out.unseen_rows = unseen_synth.size();
    auto clf = detail::run_stage("hars", "fit-classifier", [&] {
        auto train_cfg = cfg.classifier;
        train_cfg.seed = substream_seed(cfg.seed, "classifier");
        return fit_classifier(to_samples(unseen_synth), split.unseen, train_cfg);
    });
    out.predictions = detail::run_stage("hars", "predict", [&] { return predict_classifier(clf, bundle.test_unseen); });
    out.report = detail::evaluate_if_labeled(out.predictions, bundle.test_unseen, split);
    return out;
}

// Vanilla generative pipeline: generator on real seen data only, N_u samples
// per unseen class, classifier, prediction. Shares random substreams with run_hars.
inline PseudoLabelSet run_generative_baseline(const DatasetBundle& bundle, const HarsConfig& cfg) {
    const auto& split = bundle.split;
    const auto& sem = bundle.semantics;
    auto gen = fit_generator(bundle.train_seen, SynthSet{}, sem, cfg.ridge_lambda);
    const auto unseen_seed = substream_seed(cfg.seed, "unseen");
    SynthSet synth;
    for (std::size_t i = 0; i < split.unseen.size(); ++i) {
        const auto& e = sem.at(split.unseen[i]);
        for (auto& x : sample_generator(gen, e, cfg.n_unseen, substream_seed(unseen_seed, "unseen-gen", i))) {
            SynthRow row;
            row.visual = std::move(x);
            row.semantic = e;
            row.label = split.unseen[i];
            synth.rows.push_back(std::move(row));
        }
    }
    auto train_cfg = cfg.classifier;
    train_cfg.seed = substream_seed(cfg.seed, "classifier");
    auto clf = fit_classifier(to_samples(synth), split.unseen, train_cfg);
    return predict_classifier(clf, bundle.test_unseen);
}

}  // namespace hardboost
