#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardboost/base.hpp"
#include "hardboost/error.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/models.hpp"
#include "hardboost/random.hpp"
#include "hardboost/types.hpp"
#include "hardboost/validate.hpp"

namespace hardboost {

// Contrastive easy/hard analysis. Three equal-budget training groups, weighted
// towards the oracle-easy classes, towards the oracle-hard classes, or uniform,
// are each used to train a model that is then evaluated on test_unseen.
//
// inductive:    generated unseen samples, N1 per hard / 2*N1 per easy ("easy"),
//               2*N1 per hard / N1 per easy ("hard"), 1.5*N1 per class ("all").
// transductive: true-labeled real unseen rows added to D^S_tr, N2 per easy class
//               ("easy"), N2 per hard class ("hard"), N2/2 per class ("all").
enum class AnalysisVariant { inductive, transductive };

inline std::string to_string(AnalysisVariant v) { return v == AnalysisVariant::inductive ? "inductive" : "transductive"; }

inline AnalysisVariant parse_variant(const std::string& s) {
    if (s == "inductive") return AnalysisVariant::inductive;
    if (s == "transductive") return AnalysisVariant::transductive;
    throw ValidationError("unknown analysis variant '" + s + "' (expected inductive or transductive)");
}

inline const std::vector<std::string>& group_names() {
    static const std::vector<std::string> names = {"easy", "hard", "all"};
    return names;
}

struct ContrastiveGroup {
    std::string name;
    std::map<ClassId, std::size_t> per_class;  // rows per class in the group
    std::size_t rows = 0;
    EvalReport report;
};

struct ContrastiveResult {
    AnalysisVariant variant = AnalysisVariant::inductive;
    std::size_t n = 0;  // N1 or N2
    HardEasyOracle oracle;
    std::vector<ContrastiveGroup> groups;  // easy, hard, all
};

// Oracle split from an inductive run of the base model on the bundle.
inline HardEasyOracle reference_oracle(const DatasetBundle& bundle, const BaseModelConfig& base, std::uint64_t seed) {
    if (!bundle.test_unseen.is_labeled()) throw ValidationError("analysis: test_unseen must carry true labels");
    auto preds = train_and_predict(bundle.train_seen, bundle.semantics, bundle.split.unseen, bundle.test_unseen, base,
                                   substream_seed(seed, "oracle"));
    return hard_easy_oracle(evaluate(preds, bundle.test_unseen.labels(), bundle.split), bundle.split);
}

namespace detail {

inline std::map<ClassId, std::size_t> group_counts(const HardEasyOracle& oracle, std::size_t hard_n,
                                                   std::size_t easy_n) {
    std::map<ClassId, std::size_t> out;
    for (const auto& c : oracle.hard) out[c] = hard_n;
    for (const auto& c : oracle.easy) out[c] = easy_n;
    return out;
}

// Per-group class counts for the chosen variant, keyed by group name.
inline std::map<std::string, std::map<ClassId, std::size_t>> group_plan(AnalysisVariant variant,
                                                                         const HardEasyOracle& oracle, std::size_t n) {
    std::map<std::string, std::map<ClassId, std::size_t>> plan;
    if (variant == AnalysisVariant::inductive) {
        plan["easy"] = group_counts(oracle, n, 2 * n);
        plan["hard"] = group_counts(oracle, 2 * n, n);
        const auto uniform = static_cast<std::size_t>(std::round(1.5 * static_cast<double>(n)));
        plan["all"] = group_counts(oracle, uniform, uniform);
    } else {
        plan["easy"] = group_counts(oracle, 0, n);
        plan["hard"] = group_counts(oracle, n, 0);
        const auto half = static_cast<std::size_t>(std::round(0.5 * static_cast<double>(n)));
        plan["all"] = group_counts(oracle, half, half);
    }
    return plan;
}

// `count` rows of class `c` drawn from `pool`: without replacement when the class
// has enough rows, otherwise with replacement (and a warning).
inline std::vector<std::size_t> draw_class_rows(const std::vector<std::size_t>& pool, const ClassId& c,
                                                std::size_t count, Rng& rng) {
    std::vector<std::size_t> out;
    if (count == 0) return out;
    if (pool.empty()) throw ValidationError("analysis: class '" + c + "' has no test rows to draw from");
    if (count > pool.size()) {
        warn("analysis: N2=" + std::to_string(count) + " exceeds the " + std::to_string(pool.size()) +
             " rows of class '" + c + "'; sampling with replacement");
        for (std::size_t i = 0; i < count; ++i) out.push_back(pool[uniform_index(rng, pool.size())]);
        return out;
    }
    std::vector<std::size_t> idx = pool;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + uniform_index(rng, idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(idx[i]);
    }
    return out;
}

}  // namespace detail

inline ContrastiveResult contrastive_analysis(const DatasetBundle& bundle, const BaseModelConfig& base,
                                              AnalysisVariant variant, std::size_t n, const HardEasyOracle& oracle,
                                              std::uint64_t seed) {
    const auto& split = bundle.split;
    const auto& sem = bundle.semantics;
    if (n == 0) throw ValidationError("analysis: N1/N2 = 0 leaves every group without training data");
    if (!bundle.test_unseen.is_labeled()) throw ValidationError("analysis: test_unseen must carry true labels");
    const auto truths = bundle.test_unseen.labels();

    ContrastiveResult out;
    out.variant = variant;
    out.n = n;
    out.oracle = oracle;
    auto plan = detail::group_plan(variant, oracle, n);

    std::optional<GenerativeModel> gen;
    if (variant == AnalysisVariant::inductive) {
        if (base.kind != BaseModelKind::generative) {
            throw ValidationError("analysis: the inductive variant trains classifiers on generated data; use the generative base");
        }
        gen = fit_generator(bundle.train_seen, SynthSet{}, sem, base.ridge_lambda);
    }
    std::map<ClassId, std::vector<std::size_t>> by_class;
    for (std::size_t r = 0; r < bundle.test_unseen.rows(); ++r) by_class[bundle.test_unseen.label(r)].push_back(r);

    for (std::size_t g = 0; g < group_names().size(); ++g) {
        const auto& name = group_names()[g];
        ContrastiveGroup group;
        group.name = name;
        group.per_class = plan.at(name);
        for (const auto& [c, k] : group.per_class) group.rows += k;
        if (group.rows == 0) throw ValidationError("analysis: group '" + name + "' is empty");

        PseudoLabelSet preds;
        if (variant == AnalysisVariant::inductive) {
            SynthSet synth;
            for (std::size_t i = 0; i < split.unseen.size(); ++i) {
                const auto& c = split.unseen[i];
                const auto& e = sem.at(c);
                auto count = group.per_class.count(c) ? group.per_class.at(c) : 0;
                for (auto& x : sample_generator(*gen, e, count, substream_seed(seed, "contrastive-gen-" + name, i))) {
                    SynthRow row;
                    row.visual = std::move(x);
                    row.semantic = e;
                    row.label = c;
                    synth.rows.push_back(std::move(row));
                }
            }
            auto cfg = base.classifier;
            cfg.seed = substream_seed(seed, "contrastive-classifier");
            auto clf = fit_classifier(to_samples(synth), split.unseen, cfg);
            preds = predict_classifier(clf, bundle.test_unseen);
        } else {
            std::vector<std::size_t> rows;
            std::vector<ClassId> labels;
            for (std::size_t i = 0; i < split.unseen.size(); ++i) {
                const auto& c = split.unseen[i];
                auto count = group.per_class.count(c) ? group.per_class.at(c) : 0;
                auto rng = substream(seed, "contrastive-select-" + name, i);
                static const std::vector<std::size_t> kNone;
                auto it = by_class.find(c);
                for (auto r : detail::draw_class_rows(it == by_class.end() ? kNone : it->second, c, count, rng)) {
                    rows.push_back(r);
                    labels.push_back(c);
                }
            }
            auto train = with_extra_rows(bundle.train_seen, bundle.test_unseen, rows, labels);
            preds = train_and_predict(train, sem, split.unseen, bundle.test_unseen, base,
                                      substream_seed(seed, "contrastive-fit"));
        }
        group.report = evaluate(preds, truths, split);
        out.groups.push_back(std::move(group));
    }
    return out;
}

// Pseudo-label precision grouped by an oracle hard/easy split: the ratio of
// true positives to predicted positives per class, averaged within each group
// over classes with at least one predicted positive.
struct PrecisionAnalysis {
    std::map<ClassId, double> per_class;
    std::optional<double> hard_mean;
    std::optional<double> easy_mean;
    std::vector<ClassId> skipped;
};

inline PrecisionAnalysis pseudo_label_precision(const PseudoLabelSet& preds, const std::vector<ClassId>& truths,
                                                const ClassSplit& split, const HardEasyOracle& oracle) {
    auto cm = confusion_matrix(preds, truths, split, std::nullopt, 0);
    PrecisionAnalysis out;
    for (const auto& c : split.unseen) {
        if (auto p = class_precision(cm, c)) {
            out.per_class[c] = *p;
        } else {
            out.skipped.push_back(c);
        }
    }
    auto mean = [&](const std::vector<ClassId>& group) -> std::optional<double> {
        double sum = 0.0;
        std::size_t k = 0;
        for (const auto& c : group) {
            if (auto it = out.per_class.find(c); it != out.per_class.end()) {
                sum += it->second;
                ++k;
            }
        }
        if (k == 0) return std::nullopt;
        return sum / static_cast<double>(k);
    };
    out.hard_mean = mean(oracle.hard);
    out.easy_mean = mean(oracle.easy);
    return out;
}

inline nlohmann::json to_json(const ContrastiveResult& r) {
    nlohmann::json groups = nlohmann::json::object();
    for (const auto& g : r.groups) {
        groups[g.name] = {{"rows", g.rows},
                          {"per_class", g.per_class},
                          {"acc_u", optional_json(g.report.acc_u)},
                          {"per_class_accuracy", g.report.per_class_accuracy}};
    }
    return {{"variant", to_string(r.variant)},
            {"n", r.n},
            {"oracle", {{"hard", r.oracle.hard}, {"easy", r.oracle.easy}}},
            {"groups", groups}};
}

inline nlohmann::json to_json(const PrecisionAnalysis& p) {
    return {{"per_class", p.per_class},
            {"hard_mean", optional_json(p.hard_mean)},
            {"easy_mean", optional_json(p.easy_mean)},
            {"skipped", p.skipped}};
}

}  // namespace hardboost
