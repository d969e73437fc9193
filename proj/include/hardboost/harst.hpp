#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hardboost/base.hpp"
#include "hardboost/error.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/hardness.hpp"
#include "hardboost/random.hpp"
#include "hardboost/types.hpp"

namespace hardboost {

enum class SelectionMode { cfbs, random };

inline std::string to_string(SelectionMode m) { return m == SelectionMode::cfbs ? "cfbs" : "random"; }

inline SelectionMode parse_selection(const std::string& s) {
    if (s == "cfbs") return SelectionMode::cfbs;
    if (s == "random") return SelectionMode::random;
    throw ValidationError("unknown selection '" + s + "' (expected cfbs or random)");
}

struct HarstConfig {
    std::size_t iterations = 5;  // T
    std::size_t k = 2;
    HardnessMetric metric = HardnessMetric::cf;
    SelectionMode selection = SelectionMode::cfbs;
    BaseModelConfig base;
    std::uint64_t seed = 0;
    // Label space Y instead of Y^U; test_seen joins the unlabeled pool.
    bool gzsl = false;
};

// floor(t * M / (T * K)) rows per hard class at iteration t.
inline std::size_t selection_quota(std::size_t t, std::size_t m, std::size_t total_iterations, std::size_t k) {
    if (t < 1 || t > total_iterations || m < 1 || k < 1) {
        throw ValidationError("selection_quota: need 1 <= t <= T and M, K >= 1");
    }
    return (static_cast<unsigned __int128>(t) * m / (static_cast<unsigned __int128>(total_iterations) * k));
}

// Pseudo-labeled rows chosen for one iteration, as indices into the pseudo
// label set they were drawn from.
struct Selection {
    HardnessReport hardness;  // empty hard list for random selection
    std::vector<std::size_t> rows;
    std::vector<ClassId> labels;
    std::map<ClassId, std::size_t> per_class;

    std::size_t size() const noexcept { return rows.size(); }
};

// CF/PnCF based selection: identify K hard classes from the pseudo label
// frequencies, then draw `quota` rows uniformly with replacement from each hard
// class's pseudo-label pool. Empty pools contribute nothing.
inline Selection select_cfbs(const PseudoLabelSet& p, const ClassSplit& split, std::size_t k, std::size_t quota,
                             const ClassPriors* priors, HardnessMetric metric, std::uint64_t seed) {
    Selection out;
    out.hardness = identify_cf(p, split, k, metric, priors);
    std::map<ClassId, std::vector<std::size_t>> pools;
    for (std::size_t r = 0; r < p.size(); ++r) pools[p.labels[r]].push_back(r);
    for (const auto& h : out.hardness.hard) {
        out.per_class[h] = 0;
        if (quota == 0) continue;
        auto it = pools.find(h);
        if (it == pools.end()) {
            warn("select_cfbs: hard class '" + h + "' has no pseudo-labeled rows; it contributes nothing");
            continue;
        }
        auto idx = static_cast<std::size_t>(std::lower_bound(split.unseen.begin(), split.unseen.end(), h) -
                                            split.unseen.begin());
        auto rng = substream(seed, "cfbs", idx);
        for (std::size_t i = 0; i < quota; ++i) {
            out.rows.push_back(it->second[uniform_index(rng, it->second.size())]);
            out.labels.push_back(h);
        }
        out.per_class[h] = quota;
    }
    return out;
}

// Size-matched ablation arm: `total` rows uniformly with replacement from the
// whole pseudo-labeled pool.
inline Selection random_selection_baseline(const PseudoLabelSet& p, std::size_t total, std::uint64_t seed) {
    Selection out;
    if (total == 0) return out;
    if (p.size() == 0) throw ValidationError("random_selection_baseline: empty pool with total > 0");
    auto rng = substream(seed, "random-selection");
    for (std::size_t i = 0; i < total; ++i) {
        auto r = uniform_index(rng, p.size());
        out.rows.push_back(r);
        out.labels.push_back(p.labels[r]);
        ++out.per_class[p.labels[r]];
    }
    return out;
}

struct IterationRecord {
    std::size_t t = 0;
    std::size_t quota = 0;
    Selection selection;                      // D^U_t used to train F_t
    PseudoLabelSet predictions;               // P_t
    HardnessReport next_hardness;             // identified from P_t
    std::optional<EvalReport> report;
    std::optional<IdentificationQuality> quality;
};

struct IterationTrace {
    std::size_t pool_size = 0;  // M
    std::optional<ClassPriors> priors;
    PseudoLabelSet initial_predictions;  // P_0
    std::optional<EvalReport> initial_report;
    std::vector<IterationRecord> iterations;
};

struct HarstResult {
    PseudoLabelSet predictions;  // P_T
    IterationTrace trace;
};

namespace detail {

struct UnseenView {
    PseudoLabelSet labels;               // pseudo labels restricted to unseen classes
    std::vector<std::size_t> pool_rows;  // their rows in the full pool
};

inline UnseenView unseen_view(const PseudoLabelSet& p, const ClassSplit& split) {
    UnseenView v;
    for (std::size_t r = 0; r < p.size(); ++r) {
        if (split.is_unseen(p.labels[r])) {
            v.labels.labels.push_back(p.labels[r]);
            v.pool_rows.push_back(r);
        }
    }
    return v;
}

}  // namespace detail

// Hardness-based selecting self-training loop. F_0 is fit on D^S_tr and
// predicts P_0; D_1 is selected from P_0 with quota(1). For t = 1..T the base
// model is refit from scratch on D^S_tr plus the selected pseudo-labeled rows,
// predicts P_t on the whole pool, and D_{t+1} is selected from P_t.
inline HarstResult run_harst(const DatasetBundle& bundle, const HarstConfig& cfg) {
    const auto& split = bundle.split;
    const auto& sem = bundle.semantics;
    if (cfg.iterations < 1) throw ValidationError("harst: T must be >= 1");
    if (cfg.k < 1 || cfg.k > split.unseen.size()) {
        throw ValidationError("harst: K=" + std::to_string(cfg.k) + " outside [1, " +
                              std::to_string(split.unseen.size()) + "]");
    }
    if (bundle.test_unseen.empty()) throw ValidationError("harst: unlabeled unseen pool is empty");

    FeatureTable pool = bundle.test_unseen;
    if (cfg.gzsl && bundle.test_seen) {
        for (std::size_t r = 0; r < bundle.test_seen->rows(); ++r) pool.add_row(bundle.test_seen->row(r), bundle.test_seen->label(r));
    }
    const auto candidates = cfg.gzsl ? split.all() : split.unseen;
    const std::size_t m = pool.rows();
    const auto fit_seed = substream_seed(cfg.seed, "fit");

    HarstResult out;
    auto& trace = out.trace;
    trace.pool_size = m;
    auto fit = [&](const FeatureTable& train) {
        return train_and_predict(train, sem, candidates, pool, cfg.base, fit_seed);
    };
    auto evaluate_pool = [&](const PseudoLabelSet& p) -> std::optional<EvalReport> {
        if (!pool.is_labeled()) return std::nullopt;
        return evaluate(p, pool.labels(), split);
    };

    trace.initial_predictions = fit(bundle.train_seen);
    trace.initial_report = evaluate_pool(trace.initial_predictions);

    const ClassPriors* priors = nullptr;
    if (cfg.metric == HardnessMetric::pncf) {
        if (bundle.class_priors) {
            trace.priors = *bundle.class_priors;
        } else {
            auto view = detail::unseen_view(trace.initial_predictions, split);
            FeatureTable rows(pool.dim());
            for (auto r : view.pool_rows) rows.add_row(pool.row(r), kUnlabeled);
            trace.priors = estimate_class_priors(rows, split, substream_seed(cfg.seed, "priors"), view.labels);
        }
        priors = &*trace.priors;
    } else if (cfg.metric != HardnessMetric::cf) {
        throw ValidationError("harst: metric must be cf or pncf");
    }

    auto identify = [&](const PseudoLabelSet& p) {
        return identify_cf(detail::unseen_view(p, split).labels, split, cfg.k, cfg.metric, priors);
    };
    auto select = [&](std::size_t t, const PseudoLabelSet& p) {
        auto view = detail::unseen_view(p, split);
        auto quota = selection_quota(t, m, cfg.iterations, cfg.k);
        auto sel_seed = substream_seed(cfg.seed, "select", t);
        Selection sel = cfg.selection == SelectionMode::cfbs
                            ? select_cfbs(view.labels, split, cfg.k, quota, priors, cfg.metric, sel_seed)
                            : random_selection_baseline(view.labels, cfg.k * quota, sel_seed);
        for (auto& r : sel.rows) r = view.pool_rows[r];
        return sel;
    };

    Selection current = select(1, trace.initial_predictions);
    for (std::size_t t = 1; t <= cfg.iterations; ++t) {
        IterationRecord rec;
        rec.t = t;
        rec.quota = selection_quota(t, m, cfg.iterations, cfg.k);
        auto train = with_extra_rows(bundle.train_seen, pool, current.rows, current.labels);
        rec.predictions = detail::run_stage("harst", "refit", [&] { return fit(train); });
        rec.selection = std::move(current);
        rec.next_hardness = identify(rec.predictions);
        rec.report = evaluate_pool(rec.predictions);
        if (rec.report) rec.quality = identification_quality(rec.next_hardness.hard, *rec.report, split);
        if (t < cfg.iterations) current = select(t + 1, rec.predictions);
        trace.iterations.push_back(std::move(rec));
    }
    out.predictions = trace.iterations.back().predictions;
    return out;
}

inline nlohmann::json to_json(const IterationTrace& trace) {
    auto summary = [](const std::optional<EvalReport>& r) {
        if (!r) return nlohmann::json(nullptr);
        return nlohmann::json{{"acc_u", optional_json(r->acc_u)},
                              {"acc_s", optional_json(r->acc_s)},
                              {"h", optional_json(r->h)},
                              {"per_class_accuracy", to_json(*r)["per_class_accuracy"]}};
    };
    nlohmann::json j;
    j["M"] = trace.pool_size;
    j["priors"] = trace.priors ? nlohmann::json(*trace.priors) : nlohmann::json(nullptr);
    j["initial"] = {{"metrics", summary(trace.initial_report)}};
    j["iterations"] = nlohmann::json::array();
    for (const auto& rec : trace.iterations) {
        nlohmann::json it;
        it["t"] = rec.t;
        it["quota"] = rec.quota;
        it["selected"] = rec.selection.size();
        it["selected_per_class"] = rec.selection.per_class;
        it["selection_hardness"] = to_json(rec.selection.hardness);
        it["hardness"] = to_json(rec.next_hardness);
        it["metrics"] = summary(rec.report);
        it["identification"] = rec.quality ? to_json(*rec.quality) : nlohmann::json(nullptr);
        j["iterations"].push_back(std::move(it));
    }
    return j;
}

}  // namespace hardboost
