#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardboost/error.hpp"
#include "hardboost/hardness.hpp"
#include "hardboost/random.hpp"
#include "hardboost/types.hpp"

namespace hardboost {

// Rows are true classes, columns predicted classes, both in `labels` order.
struct ConfusionMatrix {
    std::vector<ClassId> labels;
    std::vector<std::vector<std::size_t>> counts;

    std::size_t size() const noexcept { return labels.size(); }

    std::size_t index_of(const ClassId& c) const {
        auto it = std::find(labels.begin(), labels.end(), c);
        if (it == labels.end()) throw ValidationError("confusion matrix: unknown class '" + c + "'");
        return static_cast<std::size_t>(it - labels.begin());
    }
    std::size_t row_sum(std::size_t i) const {
        std::size_t s = 0;
        for (auto v : counts[i]) s += v;
        return s;
    }
    std::size_t col_sum(std::size_t j) const {
        std::size_t s = 0;
        for (const auto& row : counts) s += row[j];
        return s;
    }
    std::size_t total() const {
        std::size_t s = 0;
        for (std::size_t i = 0; i < size(); ++i) s += row_sum(i);
        return s;
    }

    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct EvalReport {
    std::map<ClassId, double> per_class_accuracy;
    std::optional<double> acc_u;
    std::optional<double> acc_s;
    std::optional<double> h;
    ConfusionMatrix confusion;
    std::map<std::size_t, double> apr;  // keyed by k
    std::map<std::size_t, double> amr;
};

// 2ab / (a + b), and 0 when either side is 0.
inline double harmonic_mean(double a, double b) {
    if (a == 0.0 || b == 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

namespace detail {

inline void check_aligned(const PseudoLabelSet& preds, const std::vector<ClassId>& truths, const ClassSplit& split) {
    if (preds.size() != truths.size()) {
        throw ValidationError("evaluate: " + std::to_string(preds.size()) + " predictions for " +
                              std::to_string(truths.size()) + " ground-truth rows");
    }
    for (std::size_t i = 0; i < truths.size(); ++i) {
        if (!split.contains(truths[i])) {
            throw ValidationError("evaluate: row " + std::to_string(i) + " true label '" + truths[i] + "' is unknown");
        }
        if (!split.contains(preds.labels[i])) {
            throw ValidationError("evaluate: row " + std::to_string(i) + " predicted label '" + preds.labels[i] +
                                  "' is unknown");
        }
    }
}

// Unseen classes first; seen classes are appended only when they occur.
inline std::vector<ClassId> confusion_labels(const PseudoLabelSet& preds, const std::vector<ClassId>& truths,
                                             const ClassSplit& split) {
    std::vector<ClassId> labels = split.unseen;
    bool any_seen = std::any_of(truths.begin(), truths.end(), [&](const ClassId& c) { return split.is_seen(c); }) ||
                    std::any_of(preds.labels.begin(), preds.labels.end(),
                                [&](const ClassId& c) { return split.is_seen(c); });
    if (any_seen) labels.insert(labels.end(), split.seen.begin(), split.seen.end());
    return labels;
}

inline ConfusionMatrix tally(const std::vector<ClassId>& labels, const PseudoLabelSet& preds,
                             const std::vector<ClassId>& truths, const std::vector<std::size_t>& rows) {
    ConfusionMatrix cm{labels, std::vector<std::vector<std::size_t>>(labels.size(),
                                                                     std::vector<std::size_t>(labels.size(), 0))};
    std::map<ClassId, std::size_t> index;
    for (std::size_t i = 0; i < labels.size(); ++i) index[labels[i]] = i;
    for (auto r : rows) ++cm.counts[index.at(truths[r])][index.at(preds.labels[r])];
    return cm;
}

inline std::optional<double> mean_over(const std::map<ClassId, double>& acc, const std::vector<ClassId>& classes) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& c : classes) {
        if (auto it = acc.find(c); it != acc.end()) {
            sum += it->second;
            ++n;
        }
    }
    if (n == 0) return std::nullopt;
    return sum / static_cast<double>(n);
}

}  // namespace detail

// Per-class Top-1 accuracy, ACC_U / ACC_S (unweighted means over classes that
// have evaluated rows) and their harmonic mean.
inline EvalReport evaluate(const PseudoLabelSet& preds, const std::vector<ClassId>& truths, const ClassSplit& split) {
    detail::check_aligned(preds, truths, split);
    std::map<ClassId, std::size_t> total, correct;
    bool any_seen = false;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        ++total[truths[i]];
        if (preds.labels[i] == truths[i]) ++correct[truths[i]];
        any_seen = any_seen || split.is_seen(truths[i]);
    }
    EvalReport r;
    for (const auto& [c, n] : total) r.per_class_accuracy[c] = static_cast<double>(correct[c]) / static_cast<double>(n);
    for (const auto& c : split.unseen) {
        if (!total.count(c)) warn("evaluate: unseen class '" + c + "' has no evaluated rows; excluded from ACC_U");
    }
    if (any_seen) {
        for (const auto& c : split.seen) {
            if (!total.count(c)) warn("evaluate: seen class '" + c + "' has no evaluated rows; excluded from ACC_S");
        }
    }
    r.acc_u = detail::mean_over(r.per_class_accuracy, split.unseen);
    r.acc_s = detail::mean_over(r.per_class_accuracy, split.seen);
    if (r.acc_u && r.acc_s) r.h = harmonic_mean(*r.acc_u, *r.acc_s);
    std::vector<std::size_t> all(truths.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    r.confusion = detail::tally(detail::confusion_labels(preds, truths, split), preds, truths, all);
    return r;
}

// Confusion counts, optionally capped to `per_class_cap` rows per true class:
// classes with at least cap rows are subsampled without replacement, smaller
// classes are drawn with replacement up to cap.
inline ConfusionMatrix confusion_matrix(const PseudoLabelSet& preds, const std::vector<ClassId>& truths,
                                        const ClassSplit& split, std::optional<std::size_t> per_class_cap,
                                        std::uint64_t seed) {
    detail::check_aligned(preds, truths, split);
    auto labels = detail::confusion_labels(preds, truths, split);
    std::vector<std::size_t> rows;
    if (!per_class_cap) {
        rows.resize(truths.size());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        return detail::tally(labels, preds, truths, rows);
    }
    const std::size_t cap = *per_class_cap;
    for (std::size_t ci = 0; ci < labels.size(); ++ci) {
        std::vector<std::size_t> pool;
        for (std::size_t i = 0; i < truths.size(); ++i) {
            if (truths[i] == labels[ci]) pool.push_back(i);
        }
        if (pool.empty()) continue;
        auto rng = substream(seed, "confusion-cap", ci);
        if (pool.size() >= cap) {
            for (std::size_t i = 0; i < cap; ++i) {
                std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
            }
            rows.insert(rows.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(cap));
        } else {
            for (std::size_t i = 0; i < cap; ++i) rows.push_back(pool[uniform_index(rng, pool.size())]);
        }
    }
    return detail::tally(labels, preds, truths, rows);
}

using SimilarityMatrix = std::vector<std::vector<double>>;

// Cosine similarity between the semantic vectors of `labels`.
inline SimilarityMatrix similarity_matrix(const SemanticTable& semantics, const std::vector<ClassId>& labels) {
    SimilarityMatrix m(labels.size(), std::vector<double>(labels.size(), 0.0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        for (std::size_t j = 0; j < labels.size(); ++j) {
            m[i][j] = cosine_similarity(semantics.at(labels[i]), semantics.at(labels[j]));
        }
    }
    return m;
}

struct DiagnosticResult {
    double value = 0.0;
    std::map<ClassId, double> per_class;
    std::vector<ClassId> skipped;
};

namespace detail {

// Indices of the k largest `key` values among j != i; ties go to the smaller class id.
template <class Key>
std::set<std::size_t> top_k_others(std::size_t i, std::size_t k, const std::vector<ClassId>& labels, Key key) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < labels.size(); ++j) {
        if (j != i) others.push_back(j);
    }
    std::sort(others.begin(), others.end(), [&](std::size_t a, std::size_t b) {
        auto ka = key(a), kb = key(b);
        if (ka != kb) return ka > kb;
        return labels[a] < labels[b];
    });
    return {others.begin(), others.begin() + static_cast<std::ptrdiff_t>(k)};
}

inline void check_diagnostic_args(const ConfusionMatrix& cm, const SimilarityMatrix& sim, std::size_t k,
                                  const char* who) {
    if (sim.size() != cm.size()) throw ValidationError(std::string(who) + ": similarity and confusion sizes differ");
    if (cm.size() < 2 || k < 1 || k > cm.size() - 1) {
        throw ValidationError(std::string(who) + ": k=" + std::to_string(k) + " outside [1, C-1]");
    }
}

}  // namespace detail

// Average per-class recall of confusing classes: for each class, the overlap
// between its k most frequent misclassification targets and its k most
// semantically similar classes, divided by k. Classes without any
// misclassification are skipped.
inline DiagnosticResult apr(const ConfusionMatrix& cm, const SimilarityMatrix& sim, std::size_t k) {
    detail::check_diagnostic_args(cm, sim, k, "apr");
    DiagnosticResult out;
    double sum = 0.0;
    for (std::size_t i = 0; i < cm.size(); ++i) {
        if (cm.row_sum(i) == cm.counts[i][i]) {
            out.skipped.push_back(cm.labels[i]);
            continue;
        }
        auto confusing = detail::top_k_others(i, k, cm.labels, [&](std::size_t j) { return static_cast<double>(cm.counts[i][j]); });
        auto similar = detail::top_k_others(i, k, cm.labels, [&](std::size_t j) { return sim[i][j]; });
        std::size_t hit = 0;
        for (auto j : confusing) hit += similar.count(j);
        double recall = static_cast<double>(hit) / static_cast<double>(k);
        out.per_class[cm.labels[i]] = recall;
        sum += recall;
    }
    if (!out.skipped.empty()) {
        warn("apr: " + std::to_string(out.skipped.size()) + " class(es) without misclassifications skipped");
    }
    if (out.per_class.empty()) throw Error("APR undefined: every class is perfectly classified");
    out.value = sum / static_cast<double>(out.per_class.size());
    return out;
}

// Average per-class misclassification rate into the k most similar classes:
// n_s / n_m averaged over classes with n_m > 0.
inline DiagnosticResult amr(const ConfusionMatrix& cm, const SimilarityMatrix& sim, std::size_t k) {
    detail::check_diagnostic_args(cm, sim, k, "amr");
    DiagnosticResult out;
    double sum = 0.0;
    for (std::size_t i = 0; i < cm.size(); ++i) {
        std::size_t n_m = cm.row_sum(i) - cm.counts[i][i];
        if (n_m == 0) {
            out.skipped.push_back(cm.labels[i]);
            continue;
        }
        std::size_t n_s = 0;
        for (auto j : detail::top_k_others(i, k, cm.labels, [&](std::size_t j) { return sim[i][j]; })) n_s += cm.counts[i][j];
        double rate = static_cast<double>(n_s) / static_cast<double>(n_m);
        out.per_class[cm.labels[i]] = rate;
        sum += rate;
    }
    if (out.per_class.empty()) throw Error("AMR undefined: every class is perfectly classified");
    out.value = sum / static_cast<double>(out.per_class.size());
    return out;
}

// Fills report.apr / report.amr for each k using the unseen-class semantic similarity.
inline void add_confusion_diagnostics(EvalReport& report, const SemanticTable& semantics,
                                      const std::vector<std::size_t>& ks) {
    auto sim = similarity_matrix(semantics, report.confusion.labels);
    for (auto k : ks) {
        try {
            report.apr[k] = apr(report.confusion, sim, k).value;
            report.amr[k] = amr(report.confusion, sim, k).value;
        } catch (const Error& e) {
            warn(std::string("diagnostics skipped for k=") + std::to_string(k) + ": " + e.what());
        }
    }
}

// ---- hard / easy analyses -------------------------------------------------

// True hard/easy split: ascending per-class accuracy, front half is hard. With
// an odd class count the extra class goes to hard.
struct HardEasyOracle {
    std::vector<ClassId> hard;
    std::vector<ClassId> easy;
};

inline HardEasyOracle hard_easy_oracle(const EvalReport& report, const ClassSplit& split) {
    std::vector<std::pair<double, ClassId>> order;
    for (const auto& c : split.unseen) {
        if (auto it = report.per_class_accuracy.find(c); it != report.per_class_accuracy.end()) {
            order.emplace_back(it->second, c);
        }
    }
    if (order.empty()) throw ValidationError("hard_easy_oracle: report has no unseen-class accuracies");
    std::sort(order.begin(), order.end());
    HardEasyOracle o;
    std::size_t n_hard = (order.size() + 1) / 2;
    for (std::size_t i = 0; i < order.size(); ++i) (i < n_hard ? o.hard : o.easy).push_back(order[i].second);
    std::sort(o.hard.begin(), o.hard.end());
    std::sort(o.easy.begin(), o.easy.end());
    return o;
}

struct IdentificationQuality {
    std::optional<double> recall_of_true_hard;
    std::optional<double> apa_hard;
    std::optional<double> apa_easy;
    std::optional<double> app_hard;
    std::optional<double> app_easy;
    std::vector<ClassId> app_skipped;  // predicted-positive count of zero
};

// Per-class precision from the confusion columns; nullopt when a class was never predicted.
inline std::optional<double> class_precision(const ConfusionMatrix& cm, const ClassId& c) {
    auto j = cm.index_of(c);
    auto col = cm.col_sum(j);
    if (col == 0) return std::nullopt;
    return static_cast<double>(cm.counts[j][j]) / static_cast<double>(col);
}

inline IdentificationQuality identification_quality(const std::vector<ClassId>& predicted_hard,
                                                    const EvalReport& report, const ClassSplit& split) {
    auto oracle = hard_easy_oracle(report, split);
    std::set<ClassId> pred_hard(predicted_hard.begin(), predicted_hard.end());
    std::vector<ClassId> hard_group, easy_group;
    for (const auto& c : split.unseen) {
        if (!report.per_class_accuracy.count(c)) continue;
        (pred_hard.count(c) ? hard_group : easy_group).push_back(c);
    }
    IdentificationQuality q;
    std::size_t hit = 0;
    for (const auto& c : oracle.hard) hit += pred_hard.count(c);
    q.recall_of_true_hard = static_cast<double>(hit) / static_cast<double>(oracle.hard.size());

    auto apa = [&](const std::vector<ClassId>& g) -> std::optional<double> {
        if (g.empty()) return std::nullopt;
        return detail::mean_over(report.per_class_accuracy, g);
    };
    auto app = [&](const std::vector<ClassId>& g) -> std::optional<double> {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& c : g) {
            if (auto p = class_precision(report.confusion, c)) {
                sum += *p;
                ++n;
            } else {
                q.app_skipped.push_back(c);
            }
        }
        if (n == 0) return std::nullopt;
        return sum / static_cast<double>(n);
    };
    q.apa_hard = apa(hard_group);
    q.apa_easy = apa(easy_group);
    q.app_hard = app(hard_group);
    q.app_easy = app(easy_group);
    return q;
}

// ---- serialization ----------------------------------------------------------

inline nlohmann::json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json j;
    j["per_class_accuracy"] = nlohmann::json::object();
    for (const auto& [c, a] : r.per_class_accuracy) j["per_class_accuracy"][c] = a;
    j["acc_u"] = optional_json(r.acc_u);
    j["acc_s"] = optional_json(r.acc_s);
    j["h"] = optional_json(r.h);
    j["confusion_labels"] = r.confusion.labels;
    j["confusion"] = r.confusion.counts;
    j["apr"] = nlohmann::json::object();
    j["amr"] = nlohmann::json::object();
    for (const auto& [k, v] : r.apr) j["apr"][std::to_string(k)] = v;
    for (const auto& [k, v] : r.amr) j["amr"][std::to_string(k)] = v;
    return j;
}

inline nlohmann::json to_json(const IdentificationQuality& q) {
    return {{"recall_of_true_hard", optional_json(q.recall_of_true_hard)},
            {"apa_hard", optional_json(q.apa_hard)},
            {"apa_easy", optional_json(q.apa_easy)},
            {"app_hard", optional_json(q.app_hard)},
            {"app_easy", optional_json(q.app_easy)},
            {"app_skipped", q.app_skipped}};
}

// CSV with a header row of predicted labels and one row per true label.
inline std::string encode_confusion_csv(const ConfusionMatrix& cm) {
    std::string out = "true\\predicted";
    for (const auto& c : cm.labels) out += "," + c;
    out += "\n";
    for (std::size_t i = 0; i < cm.size(); ++i) {
        out += cm.labels[i];
        for (auto v : cm.counts[i]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

}  // namespace hardboost
