#pragma once

#include <cmath>
#include <string>

#include "hardboost/error.hpp"
#include "hardboost/types.hpp"

namespace hardboost {

namespace detail {

inline void validate_table(const FeatureTable& t, const std::string& name,
                           const ClassSplit& split, bool want_seen, bool allow_unlabeled) {
    if (t.dim() == 0 && !t.empty()) throw ValidationError(name + ": visual dimension must be >= 1");
    for (std::size_t r = 0; r < t.rows(); ++r) {
        const auto& label = t.label(r);
        if (label == kUnlabeled) {
            if (!allow_unlabeled) {
                throw ValidationError(name + ": row " + std::to_string(r) + " is unlabeled");
            }
            continue;
        }
        bool ok = want_seen ? split.is_seen(label) : split.is_unseen(label);
        if (!ok) {
            throw ValidationError(name + ": row " + std::to_string(r) + " has label '" + label +
                                  "' outside the " + (want_seen ? "seen" : "unseen") + " classes");
        }
        for (float f : t.row(r)) {
            if (!std::isfinite(f)) {
                throw ValidationError(name + ": row " + std::to_string(r) + " has a non-finite value");
            }
        }
    }
}

}  // namespace detail

// Checks every DatasetBundle invariant; returns the bundle unchanged.
inline const DatasetBundle& validate_bundle(const DatasetBundle& b) {
    const auto& split = b.split;
    if (split.seen.empty()) throw ValidationError("split: seen class set is empty");
    if (split.unseen.empty()) throw ValidationError("split: unseen class set is empty");
    for (const auto& c : split.seen) {
        if (split.is_unseen(c)) {
            throw ValidationError("split: class '" + c + "' is both seen and unseen");
        }
    }

    const auto& sem = b.semantics;
    std::size_t s = 0;
    for (const auto& c : split.all()) {
        if (!sem.contains(c)) throw ValidationError("semantics: class '" + c + "' has no vector");
    }
    for (const auto& [id, v] : sem.vectors) {
        if (!split.contains(id)) {
            throw ValidationError("semantics: class '" + id + "' is not in the split");
        }
        if (v.empty()) throw ValidationError("semantics: class '" + id + "' has an empty vector");
        if (s == 0) s = v.size();
        if (v.size() != s) {
            throw ValidationError("semantics: class '" + id + "' has dimension " +
                                  std::to_string(v.size()) + ", expected " + std::to_string(s));
        }
        double norm2 = 0.0;
        for (double x : v) {
            if (!std::isfinite(x)) throw ValidationError("semantics: class '" + id + "' has a non-finite value");
            norm2 += x * x;
        }
        if (norm2 == 0.0) throw ValidationError("semantics: class '" + id + "' has a zero-norm vector");
    }

    if (b.train_seen.empty()) throw ValidationError("train_seen: table is empty");
    detail::validate_table(b.train_seen, "train_seen", split, true, false);
    detail::validate_table(b.test_unseen, "test_unseen", split, false, true);
    if (b.test_seen) detail::validate_table(*b.test_seen, "test_seen", split, true, true);
    std::size_t v = b.train_seen.dim();
    auto check_dim = [v](const FeatureTable& t, const std::string& name) {
        if (!t.empty() && t.dim() != v) {
            throw ValidationError(name + ": visual dimension " + std::to_string(t.dim()) +
                                  " differs from train_seen dimension " + std::to_string(v));
        }
    };
    check_dim(b.test_unseen, "test_unseen");
    if (b.test_seen) check_dim(*b.test_seen, "test_seen");

    if (b.class_priors) {
        double total = 0.0;
        for (const auto& [id, p] : *b.class_priors) {
            if (!split.is_unseen(id)) throw ValidationError("priors: class '" + id + "' is not unseen");
            if (!(p > 0.0)) throw ValidationError("priors: class '" + id + "' has non-positive prior");
            total += p;
        }
        for (const auto& c : split.unseen) {
            if (!b.class_priors->count(c)) throw ValidationError("priors: unseen class '" + c + "' has no prior");
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw ValidationError("priors: sum to " + std::to_string(total) + ", expected 1");
        }
    }
    return b;
}

}  // namespace hardboost
