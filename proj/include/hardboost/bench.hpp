#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "hardboost/error.hpp"
#include "hardboost/hardness.hpp"
#include "hardboost/random.hpp"
#include "hardboost/types.hpp"

namespace hardboost {

// Synthetic zero-shot benchmark with planted confusable unseen pairs. Planted
// pairs sit close to each other and away from every seen class; the remaining
// unseen classes are blends of seen classes. Visual features are
// W0 * e_class + N(0, noise_scale^2 I).
struct BenchmarkSpec {
    std::size_t seen_count = 12;
    std::size_t unseen_count = 8;
    std::size_t semantic_dim = 16;
    std::size_t visual_dim = 32;
    std::size_t n_per_class = 100;       // train rows per seen class, test rows per unseen class
    std::size_t test_seen_per_class = 0;  // 0: no test_seen table
    std::size_t hard_pairs = 2;
    double affinity_gap = 0.2;   // planted pair distance + gap <= any planted-to-seen distance
    double pair_distance = 0.03; // cosine distance inside a planted pair
    double out_of_span = 0.8;    // share of a planted centre outside the seen-class span, in [0, 1)
    double blend_noise = 0.1;    // perturbation of non-planted unseen blends
    double map_scale = 3.0;      // |W0 e| is about map_scale for unit e
    double map_condition = 10.0; // ratio of the largest to the smallest singular value scale of W0
    double noise_scale = 0.3;
    bool unbalanced = false;     // one easy unseen class keeps 10% of its test rows
    bool include_priors = true;  // store the true test_unseen class proportions
    std::uint64_t seed = 0;
};

struct Benchmark {
    DatasetBundle bundle;
    std::vector<ClassId> planted_hard;                         // sorted
    std::vector<std::pair<ClassId, ClassId>> planted_pairs;
    std::optional<ClassId> shrunken_class;                     // unbalanced variant only
    Eigen::MatrixXd generating_map;                            // v x s
};

inline void validate_spec(const BenchmarkSpec& spec) {
    if (spec.seen_count < 1 || spec.unseen_count < 2) throw ValidationError("benchmark: need >= 1 seen and >= 2 unseen classes");
    if (spec.semantic_dim < 2 || spec.visual_dim < 1) throw ValidationError("benchmark: dimensions too small");
    if (2 * spec.hard_pairs > spec.unseen_count) throw ValidationError("benchmark: hard_pairs * 2 exceeds unseen_count");
    if (spec.hard_pairs < 1) throw ValidationError("benchmark: hard_pairs must be >= 1");
    if (!(spec.affinity_gap > 0.0)) throw ValidationError("benchmark: affinity_gap must be > 0");
    if (!(spec.pair_distance > 0.0 && spec.pair_distance < 1.0)) throw ValidationError("benchmark: pair_distance must be in (0, 1)");
    if (!(spec.out_of_span >= 0.0 && spec.out_of_span < 1.0)) throw ValidationError("benchmark: out_of_span must be in [0, 1)");
    if (!(spec.map_condition >= 1.0)) throw ValidationError("benchmark: map_condition must be >= 1");
    if (!(spec.noise_scale >= 0.0)) throw ValidationError("benchmark: noise_scale must be >= 0");
    if (spec.n_per_class < 1) throw ValidationError("benchmark: n_per_class must be >= 1");
}

// Spec fields by JSON key; unknown keys are rejected.
inline BenchmarkSpec spec_from_json(const nlohmann::json& j, const std::string& what = "benchmark spec") {
    if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
    static const std::set<std::string> known = {
        "seen_count",   "unseen_count",  "semantic_dim", "visual_dim", "n_per_class",   "test_seen_per_class",
        "hard_pairs",   "affinity_gap",  "pair_distance", "out_of_span", "blend_noise", "map_scale",
        "map_condition", "noise_scale",  "unbalanced",   "include_priors", "seed"};
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ValidationError(what + ": unknown key '" + it.key() + "'");
    }
    BenchmarkSpec spec;
    auto get = [&](const char* key, auto& field) {
        if (!j.contains(key)) return;
        try {
            field = j.at(key).get<std::decay_t<decltype(field)>>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(what + ": field '" + key + "' has the wrong type: " + e.what());
        }
    };
    get("seen_count", spec.seen_count);
    get("unseen_count", spec.unseen_count);
    get("semantic_dim", spec.semantic_dim);
    get("visual_dim", spec.visual_dim);
    get("n_per_class", spec.n_per_class);
    get("test_seen_per_class", spec.test_seen_per_class);
    get("hard_pairs", spec.hard_pairs);
    get("affinity_gap", spec.affinity_gap);
    get("pair_distance", spec.pair_distance);
    get("out_of_span", spec.out_of_span);
    get("blend_noise", spec.blend_noise);
    get("map_scale", spec.map_scale);
    get("map_condition", spec.map_condition);
    get("noise_scale", spec.noise_scale);
    get("unbalanced", spec.unbalanced);
    get("include_priors", spec.include_priors);
    get("seed", spec.seed);
    validate_spec(spec);
    return spec;
}

inline nlohmann::json to_json(const BenchmarkSpec& s) {
    return {{"seen_count", s.seen_count},       {"unseen_count", s.unseen_count},
            {"semantic_dim", s.semantic_dim},   {"visual_dim", s.visual_dim},
            {"n_per_class", s.n_per_class},     {"test_seen_per_class", s.test_seen_per_class},
            {"hard_pairs", s.hard_pairs},       {"affinity_gap", s.affinity_gap},
            {"pair_distance", s.pair_distance}, {"out_of_span", s.out_of_span},
            {"blend_noise", s.blend_noise},     {"map_scale", s.map_scale},
            {"map_condition", s.map_condition}, {"noise_scale", s.noise_scale},
            {"unbalanced", s.unbalanced},       {"include_priors", s.include_priors},
            {"seed", s.seed}};
}

namespace detail {

inline std::string class_name(char prefix, std::size_t i, std::size_t n) {
    std::ostringstream os;
    os << prefix << std::setw(n > 100 ? 3 : 2) << std::setfill('0') << i;
    return os.str();
}

inline Eigen::VectorXd gaussian_vector(Rng& rng, std::size_t n) {
    std::normal_distribution<double> g(0.0, 1.0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(rng);
    return v;
}

inline SemanticVector to_semantic(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

struct PlantedSemantics {
    SemanticTable table;
    std::vector<std::size_t> planted;  // unseen indices, pair members adjacent
};

// One attempt at the semantic construction; nullopt when a constraint fails.
inline std::optional<PlantedSemantics> plant_semantics(const BenchmarkSpec& spec, const std::vector<ClassId>& seen,
                                                       const std::vector<ClassId>& unseen, Rng& rng) {
    const std::size_t s = spec.semantic_dim;
    PlantedSemantics out;
    Eigen::MatrixXd seen_mat(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(seen.size()));
    for (std::size_t i = 0; i < seen.size(); ++i) {
        Eigen::VectorXd e = gaussian_vector(rng, s).normalized();
        seen_mat.col(static_cast<Eigen::Index>(i)) = e;
        out.table.vectors[seen[i]] = to_semantic(e);
    }
    // Orthonormal basis of the seen span.
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(seen_mat);
    const auto rank = qr.rank();
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd span = q.leftCols(rank);
    auto project_in = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return span * (span.transpose() * v); };

    std::vector<std::size_t> order(unseen.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    out.planted.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(2 * spec.hard_pairs));

    const double eps = std::sqrt(spec.pair_distance / (2.0 - spec.pair_distance));
    for (std::size_t p = 0; p < spec.hard_pairs; ++p) {
        Eigen::VectorXd g = gaussian_vector(rng, s);
        Eigen::VectorXd in = project_in(g);
        Eigen::VectorXd out_part = g - in;
        Eigen::VectorXd centre;
        if (out_part.norm() > 1e-9 && in.norm() > 1e-9) {
            double w = spec.out_of_span;
            centre = (std::sqrt(1.0 - w * w) * in.normalized() + w * out_part.normalized()).normalized();
        } else {
            centre = g.normalized();
        }
        Eigen::VectorXd dir = gaussian_vector(rng, s);
        dir -= centre * centre.dot(dir);
        dir.normalize();
        out.table.vectors[unseen[out.planted[2 * p]]] = to_semantic((centre + eps * dir).normalized());
        out.table.vectors[unseen[out.planted[2 * p + 1]]] = to_semantic((centre - eps * dir).normalized());
    }
    for (std::size_t k = 2 * spec.hard_pairs; k < order.size(); ++k) {
        Eigen::VectorXd blend = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s));
        std::vector<std::size_t> picks(seen.size());
        for (std::size_t i = 0; i < picks.size(); ++i) picks[i] = i;
        std::shuffle(picks.begin(), picks.end(), rng);
        for (std::size_t i = 0; i < std::min<std::size_t>(3, picks.size()); ++i) {
            blend += seen_mat.col(static_cast<Eigen::Index>(picks[i]));
        }
        blend.normalize();
        blend += spec.blend_noise * gaussian_vector(rng, s) / std::sqrt(static_cast<double>(s));
        out.table.vectors[unseen[order[k]]] = to_semantic(blend.normalized());
    }

    // Planted pairs: pair distance + gap <= distance to every seen class.
    for (std::size_t p = 0; p < spec.hard_pairs; ++p) {
        const auto& a = out.table.at(unseen[out.planted[2 * p]]);
        const auto& b = out.table.at(unseen[out.planted[2 * p + 1]]);
        double inside = cosine_distance(a, b);
        for (const auto& sc : seen) {
            const auto& e = out.table.at(sc);
            if (inside + spec.affinity_gap > cosine_distance(a, e) || inside + spec.affinity_gap > cosine_distance(b, e)) {
                return std::nullopt;
            }
        }
    }
    // Non-degenerate prototypes.
    for (std::size_t i = 0; i < unseen.size(); ++i) {
        for (std::size_t j = i + 1; j < unseen.size(); ++j) {
            if (cosine_distance(out.table.at(unseen[i]), out.table.at(unseen[j])) < 1e-6) return std::nullopt;
        }
    }
    // Every planted class must score strictly below every other unseen class.
    ClassSplit split = ClassSplit::make(seen, unseen);
    auto scores = ss_scores(out.table, split);
    double worst_planted = -std::numeric_limits<double>::infinity();
    double best_other = std::numeric_limits<double>::infinity();
    std::vector<bool> is_planted(unseen.size(), false);
    for (auto i : out.planted) is_planted[i] = true;
    for (std::size_t i = 0; i < unseen.size(); ++i) {
        double d = scores.at(unseen[i]);
        if (is_planted[i]) {
            worst_planted = std::max(worst_planted, d);
        } else {
            best_other = std::min(best_other, d);
        }
    }
    if (!(worst_planted < best_other)) return std::nullopt;
    return out;
}

}  // namespace detail

inline constexpr std::size_t kBenchmarkAttempts = 200;

inline Benchmark make_benchmark(const BenchmarkSpec& spec) {
    validate_spec(spec);
    std::vector<ClassId> seen, unseen;
    for (std::size_t i = 0; i < spec.seen_count; ++i) seen.push_back(detail::class_name('s', i, spec.seen_count));
    for (std::size_t i = 0; i < spec.unseen_count; ++i) unseen.push_back(detail::class_name('u', i, spec.unseen_count));

    std::optional<detail::PlantedSemantics> planted;
    for (std::size_t attempt = 0; attempt < kBenchmarkAttempts && !planted; ++attempt) {
        auto rng = substream(spec.seed, "bench-semantics", attempt);
        planted = detail::plant_semantics(spec, seen, unseen, rng);
    }
    if (!planted) {
        throw ValidationError("benchmark: could not satisfy the planted-hardness constraints in " +
                              std::to_string(kBenchmarkAttempts) +
                              " attempts; try a larger semantic_dim or a smaller affinity_gap");
    }

    Benchmark b;
    auto& bundle = b.bundle;
    bundle.split = ClassSplit::make(seen, unseen);
    bundle.semantics = std::move(planted->table);
    for (std::size_t p = 0; p < spec.hard_pairs; ++p) {
        b.planted_pairs.emplace_back(unseen[planted->planted[2 * p]], unseen[planted->planted[2 * p + 1]]);
    }
    for (auto i : planted->planted) b.planted_hard.push_back(unseen[i]);
    std::sort(b.planted_hard.begin(), b.planted_hard.end());

    const auto s = static_cast<Eigen::Index>(spec.semantic_dim), v = static_cast<Eigen::Index>(spec.visual_dim);
    {
        // W0 = G * Q * diag(d) * Q^T with G Gaussian, Q a random rotation and d geometric from 1 down to
        // 1 / map_condition, rescaled to unit mean square.
        auto rng = substream(spec.seed, "bench-map");
        std::normal_distribution<double> g(0.0, spec.map_scale / std::sqrt(static_cast<double>(spec.visual_dim)));
        Eigen::MatrixXd gm(v, s);
        for (Eigen::Index i = 0; i < v; ++i) {
            for (Eigen::Index j = 0; j < s; ++j) gm(i, j) = g(rng);
        }
        Eigen::MatrixXd raw(s, s);
        for (Eigen::Index i = 0; i < s; ++i) raw.col(i) = detail::gaussian_vector(rng, spec.semantic_dim);
        Eigen::MatrixXd rot = Eigen::HouseholderQR<Eigen::MatrixXd>(raw).householderQ();
        Eigen::VectorXd d(s);
        for (Eigen::Index j = 0; j < s; ++j) {
            d(j) = std::pow(spec.map_condition, -static_cast<double>(j) / static_cast<double>(std::max<Eigen::Index>(1, s - 1)));
        }
        d /= std::sqrt(d.squaredNorm() / static_cast<double>(s));
        b.generating_map = gm * rot * d.asDiagonal() * rot.transpose();
    }

    std::map<ClassId, std::size_t> unseen_rows;
    for (const auto& c : unseen) unseen_rows[c] = spec.n_per_class;
    if (spec.unbalanced) {
        for (const auto& c : unseen) {
            if (!std::binary_search(b.planted_hard.begin(), b.planted_hard.end(), c)) {
                b.shrunken_class = c;
                unseen_rows[c] = std::max<std::size_t>(1, static_cast<std::size_t>(std::round(0.1 * static_cast<double>(spec.n_per_class))));
                break;
            }
        }
    }

    auto emit = [&](FeatureTable& table, const std::vector<ClassId>& classes, const std::map<ClassId, std::size_t>& counts,
                    std::string_view stream) {
        table = FeatureTable(spec.visual_dim);
        auto rng = substream(spec.seed, stream);
        std::normal_distribution<double> noise(0.0, 1.0);
        std::vector<float> row(spec.visual_dim);
        for (const auto& c : classes) {
            const auto& e = bundle.semantics.at(c);
            Eigen::VectorXd mean = b.generating_map * Eigen::Map<const Eigen::VectorXd>(e.data(), s);
            for (std::size_t n = 0; n < counts.at(c); ++n) {
                for (std::size_t j = 0; j < spec.visual_dim; ++j) {
                    row[j] = static_cast<float>(mean(static_cast<Eigen::Index>(j)) + spec.noise_scale * noise(rng));
                }
                table.add_row(row, c);
            }
        }
    };
    std::map<ClassId, std::size_t> seen_rows;
    for (const auto& c : seen) seen_rows[c] = spec.n_per_class;
    emit(bundle.train_seen, seen, seen_rows, "bench-train-seen");
    emit(bundle.test_unseen, unseen, unseen_rows, "bench-test-unseen");
    if (spec.test_seen_per_class > 0) {
        FeatureTable ts;
        for (auto& [c, n] : seen_rows) n = spec.test_seen_per_class;
        emit(ts, seen, seen_rows, "bench-test-seen");
        bundle.test_seen = std::move(ts);
    }
    if (spec.include_priors) {
        std::size_t total = 0;
        for (const auto& [c, n] : unseen_rows) total += n;
        ClassPriors priors;
        for (const auto& [c, n] : unseen_rows) priors[c] = static_cast<double>(n) / static_cast<double>(total);
        bundle.class_priors = std::move(priors);
    }
    return b;
}

inline nlohmann::json ground_truth_json(const Benchmark& b) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& [x, y] : b.planted_pairs) pairs.push_back({x, y});
    nlohmann::json map = nlohmann::json::array();
    for (Eigen::Index i = 0; i < b.generating_map.rows(); ++i) {
        nlohmann::json r = nlohmann::json::array();
        for (Eigen::Index j = 0; j < b.generating_map.cols(); ++j) r.push_back(b.generating_map(i, j));
        map.push_back(std::move(r));
    }
    return {{"planted_hard", b.planted_hard},
            {"planted_pairs", pairs},
            {"shrunken_class", b.shrunken_class ? nlohmann::json(*b.shrunken_class) : nlohmann::json(nullptr)},
            {"generating_map", map}};
}

}  // namespace hardboost
