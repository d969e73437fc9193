#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hardboost/error.hpp"
#include "hardboost/random.hpp"
#include "hardboost/types.hpp"

namespace hardboost {

enum class HardnessMetric { ss, cf, pncf };

inline std::string to_string(HardnessMetric m) {
    switch (m) {
        case HardnessMetric::ss: return "ss";
        case HardnessMetric::cf: return "cf";
        case HardnessMetric::pncf: return "pncf";
    }
    return "?";
}

inline HardnessMetric parse_metric(const std::string& s) {
    if (s == "ss") return HardnessMetric::ss;
    if (s == "cf") return HardnessMetric::cf;
    if (s == "pncf") return HardnessMetric::pncf;
    throw ValidationError("unknown metric '" + s + "' (expected ss, cf or pncf)");
}

using Scores = std::map<ClassId, double>;

struct HardnessReport {
    HardnessMetric metric = HardnessMetric::ss;
    Scores scores;
    std::vector<ClassId> hard;  // hardest first

    std::size_t k() const noexcept { return hard.size(); }
    friend bool operator==(const HardnessReport&, const HardnessReport&) = default;
};

inline nlohmann::json to_json(const HardnessReport& r) {
    nlohmann::json scores = nlohmann::json::object();
    for (const auto& [c, v] : r.scores) scores[c] = v;
    return {{"metric", to_string(r.metric)}, {"scores", scores}, {"hard", r.hard}, {"K", r.k()}};
}

inline HardnessReport hardness_from_json(const nlohmann::json& j) {
    HardnessReport r;
    r.metric = parse_metric(j.at("metric").get<std::string>());
    for (auto it = j.at("scores").begin(); it != j.at("scores").end(); ++it) {
        r.scores[it.key()] = it.value().get<double>();
    }
    r.hard = j.at("hard").get<std::vector<ClassId>>();
    if (j.at("K").get<std::size_t>() != r.hard.size()) {
        throw ValidationError("hardness report: K does not match the hard list length");
    }
    return r;
}

// ---- semantic similarity --------------------------------------------------

inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ValidationError("cosine: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                              std::to_string(b.size()) + ")");
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) throw ValidationError("cosine: zero-norm vector");
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

// 1 - cos(a, b), in [0, 2].
inline double cosine_distance(std::span<const double> a, std::span<const double> b) {
    return 1.0 - cosine_similarity(a, b);
}

// Number of nearest seen classes averaged into d^s.
inline constexpr std::size_t kSeenNeighbours = 3;

// Semantic-similarity hardness d_c = d^u_c - d^s_c for every unseen class:
// d^u_c is the smallest cosine distance to another unseen class, d^s_c the
// mean of the three smallest cosine distances to seen classes. Smaller is harder.
inline Scores ss_scores(const SemanticTable& semantics, const ClassSplit& split) {
    if (split.unseen.size() < 2) {
        throw ValidationError("ss_scores: need at least 2 unseen classes, got " +
                              std::to_string(split.unseen.size()));
    }
    if (split.seen.empty()) throw ValidationError("ss_scores: no seen classes");
    std::size_t take = std::min(kSeenNeighbours, split.seen.size());
    if (take < kSeenNeighbours) {
        warn("ss_scores: only " + std::to_string(split.seen.size()) +
             " seen classes; d^s averages all of them instead of the nearest 3");
    }
    Scores out;
    std::vector<double> to_seen(split.seen.size());
    for (const auto& c : split.unseen) {
        const auto& ec = semantics.at(c);
        double du = std::numeric_limits<double>::infinity();
        for (const auto& o : split.unseen) {
            if (o != c) du = std::min(du, cosine_distance(ec, semantics.at(o)));
        }
        for (std::size_t i = 0; i < split.seen.size(); ++i) {
            to_seen[i] = cosine_distance(ec, semantics.at(split.seen[i]));
        }
        std::partial_sort(to_seen.begin(), to_seen.begin() + static_cast<std::ptrdiff_t>(take),
                          to_seen.end());
        double ds = 0.0;
        for (std::size_t i = 0; i < take; ++i) ds += to_seen[i];
        ds /= static_cast<double>(take);
        out[c] = du - ds;
    }
    return out;
}

// First k class ids of the ascending score order; equal scores fall back to
// ascending class id. Accepts any range of (ClassId, double) pairs.
template <class ScoreRange>
std::vector<ClassId> rank_hard(const ScoreRange& scores, std::size_t k) {
    std::vector<std::pair<double, ClassId>> order;
    for (const auto& [c, v] : scores) order.emplace_back(v, c);
    if (k < 1 || k > order.size()) {
        throw ValidationError("rank_hard: K=" + std::to_string(k) + " outside [1, " +
                              std::to_string(order.size()) + "]");
    }
    std::sort(order.begin(), order.end());
    std::vector<ClassId> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) out.push_back(order[i].second);
    return out;
}

// ---- class frequency ------------------------------------------------------

inline std::map<ClassId, std::size_t> pseudo_label_histogram(const PseudoLabelSet& p,
                                                            const ClassSplit& split) {
    std::map<ClassId, std::size_t> f;
    for (const auto& c : split.unseen) f[c] = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        auto it = f.find(p.labels[i]);
        if (it == f.end()) {
            throw ValidationError("pseudo_label_histogram: row " + std::to_string(i) + " label '" +
                                  p.labels[i] + "' is not an unseen class");
        }
        ++it->second;
    }
    return f;
}

// f^_c = f_c / p_c.
inline Scores normalize_by_prior(const std::map<ClassId, std::size_t>& freqs, const ClassPriors& priors) {
    if (freqs.size() != priors.size()) {
        throw ValidationError("normalize_by_prior: frequency and prior class sets differ");
    }
    Scores out;
    for (const auto& [c, f] : freqs) {
        auto it = priors.find(c);
        if (it == priors.end()) throw ValidationError("normalize_by_prior: no prior for class '" + c + "'");
        if (!(it->second > 0.0)) {
            throw ValidationError("normalize_by_prior: prior of class '" + c + "' is not positive");
        }
        out[c] = static_cast<double>(f) / it->second;
    }
    return out;
}

inline Scores frequency_scores(const std::map<ClassId, std::size_t>& freqs) {
    Scores out;
    for (const auto& [c, f] : freqs) out[c] = static_cast<double>(f);
    return out;
}

inline HardnessReport identify_ss(const SemanticTable& semantics, const ClassSplit& split, std::size_t k) {
    HardnessReport r;
    r.metric = HardnessMetric::ss;
    r.scores = ss_scores(semantics, split);
    r.hard = rank_hard(r.scores, k);
    return r;
}

// CF (priors ignored) or PnCF (priors required) hard-class identification
// from one round of pseudo labels.
inline HardnessReport identify_cf(const PseudoLabelSet& p, const ClassSplit& split, std::size_t k,
                                  HardnessMetric metric, const ClassPriors* priors) {
    auto freqs = pseudo_label_histogram(p, split);
    HardnessReport r;
    r.metric = metric;
    if (metric == HardnessMetric::cf) {
        r.scores = frequency_scores(freqs);
    } else if (metric == HardnessMetric::pncf) {
        if (priors == nullptr) throw ValidationError("pncf: class priors are required");
        r.scores = normalize_by_prior(freqs, *priors);
    } else {
        throw ValidationError("identify_cf: metric must be cf or pncf");
    }
    r.hard = rank_hard(r.scores, k);
    return r;
}

// ---- class prior estimation -----------------------------------------------

namespace detail {

// Minimum-cost perfect assignment on a square cost matrix (Kuhn-Munkres with
// potentials). Returns column assigned to each row.
inline std::vector<std::size_t> min_cost_assignment(const std::vector<std::vector<double>>& cost) {
    const std::size_t n = cost.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            std::size_t i0 = p[j0], j1 = 0;
            double delta = inf;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> row_to_col(n);
    for (std::size_t j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

inline double sq_dist(std::span<const float> x, const std::vector<double>& c) {
    double d = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        double t = static_cast<double>(x[j]) - c[j];
        d += t * t;
    }
    return d;
}

// One Lloyd k-means run with k-means++ seeding. Returns the cluster of each
// row, or nullopt when a cluster goes empty.
inline std::optional<std::vector<std::size_t>> kmeans_assign(const FeatureTable& x, std::size_t k, Rng& rng,
                                                             std::size_t max_iter = 100) {
    const std::size_t n = x.rows(), d = x.dim();
    auto as_center = [&](std::size_t r) {
        auto row = x.row(r);
        return std::vector<double>(row.begin(), row.end());
    };
    std::vector<std::vector<double>> centers;
    centers.push_back(as_center(uniform_index(rng, n)));
    std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
    while (centers.size() < k) {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            nearest[r] = std::min(nearest[r], sq_dist(x.row(r), centers.back()));
            total += nearest[r];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t r = 0; r < n; ++r) {
                acc += nearest[r];
                if (u < acc) {
                    pick = r;
                    break;
                }
            }
        } else {
            pick = uniform_index(rng, n);
        }
        centers.push_back(as_center(pick));
    }

    std::vector<std::size_t> assign(n, k);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t r = 0; r < n; ++r) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double dist = sq_dist(x.row(r), centers[c]);
                if (dist < best_d) {
                    best_d = dist;
                    best = c;
                }
            }
            if (assign[r] != best) {
                assign[r] = best;
                changed = true;
            }
        }
        std::vector<std::size_t> counts(k, 0);
        for (auto& c : centers) std::fill(c.begin(), c.end(), 0.0);
        for (std::size_t r = 0; r < n; ++r) {
            ++counts[assign[r]];
            auto row = x.row(r);
            for (std::size_t j = 0; j < d; ++j) centers[assign[r]][j] += row[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) return std::nullopt;
            for (auto& v : centers[c]) v /= static_cast<double>(counts[c]);
        }
        if (!changed) break;
    }
    return assign;
}

}  // namespace detail

inline constexpr std::size_t kPriorRestarts = 10;

// Class priors of the unlabeled unseen pool. The rows are clustered into C
// groups with k-means; clusters are matched one-to-one to classes so that the
// agreement with `pseudo_labels` (a classifier's predictions on the same rows)
// is maximal. p_c = (|cluster matched to c| + 1) / (N + C).
inline ClassPriors estimate_class_priors(const FeatureTable& unlabeled, const ClassSplit& split,
                                         std::uint64_t seed, const PseudoLabelSet& pseudo_labels) {
    const std::size_t n = unlabeled.rows(), k = split.unseen.size();
    if (n == 0) throw ValidationError("estimate_class_priors: unlabeled table is empty");
    if (k == 0) throw ValidationError("estimate_class_priors: no unseen classes");
    if (k == 1) return {{split.unseen.front(), 1.0}};
    if (pseudo_labels.size() != n) {
        throw ValidationError("estimate_class_priors: " + std::to_string(pseudo_labels.size()) +
                              " pseudo labels for " + std::to_string(n) + " rows");
    }
    std::vector<std::size_t> label_index(n);
    for (std::size_t r = 0; r < n; ++r) {
        auto it = std::lower_bound(split.unseen.begin(), split.unseen.end(), pseudo_labels.labels[r]);
        if (it == split.unseen.end() || *it != pseudo_labels.labels[r]) {
            throw ValidationError("estimate_class_priors: pseudo label '" + pseudo_labels.labels[r] +
                                  "' is not an unseen class");
        }
        label_index[r] = static_cast<std::size_t>(it - split.unseen.begin());
    }

    for (std::size_t attempt = 0; attempt < kPriorRestarts; ++attempt) {
        auto rng = substream(seed, "class-priors", attempt);
        auto assign = detail::kmeans_assign(unlabeled, k, rng);
        if (!assign) continue;
        std::vector<std::vector<double>> cost(k, std::vector<double>(k, 0.0));
        std::vector<std::size_t> size(k, 0);
        for (std::size_t r = 0; r < n; ++r) {
            cost[(*assign)[r]][label_index[r]] -= 1.0;
            ++size[(*assign)[r]];
        }
        auto cluster_to_class = detail::min_cost_assignment(cost);
        ClassPriors out;
        for (std::size_t c = 0; c < k; ++c) {
            out[split.unseen[cluster_to_class[c]]] =
                static_cast<double>(size[c] + 1) / static_cast<double>(n + k);
        }
        return out;
    }
    throw Error("estimate_class_priors: clustering produced an empty cluster in all " +
                std::to_string(kPriorRestarts) + " restarts");
}

}  // namespace hardboost
