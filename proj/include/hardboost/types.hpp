#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hardboost/error.hpp"

namespace hardboost {

// Opaque class token. Dense integer indices are only used inside algorithms.
using ClassId = std::string;

// Label carried by rows of an unlabeled table.
inline const ClassId kUnlabeled = "?";

// Row-major table of f32 visual features with one label per row.
class FeatureTable {
public:
    FeatureTable() = default;
    explicit FeatureTable(std::size_t dim) : dim_(dim) {}

    std::size_t dim() const noexcept { return dim_; }
    std::size_t rows() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }

    std::span<const float> row(std::size_t i) const {
        return {values_.data() + i * dim_, dim_};
    }
    const ClassId& label(std::size_t i) const { return labels_[i]; }
    const std::vector<ClassId>& labels() const noexcept { return labels_; }
    const std::vector<float>& values() const noexcept { return values_; }

    void add_row(std::span<const float> x, ClassId label) {
        values_.insert(values_.end(), x.begin(), x.end());
        labels_.push_back(std::move(label));
    }

    // Used by loaders; callers guarantee values.size() == labels.size() * dim.
    static FeatureTable from_parts(std::size_t dim, std::vector<float> values,
                                   std::vector<ClassId> labels) {
        FeatureTable t(dim);
        t.values_ = std::move(values);
        t.labels_ = std::move(labels);
        return t;
    }

    bool is_labeled() const {
        return std::none_of(labels_.begin(), labels_.end(),
                            [](const ClassId& c) { return c == kUnlabeled; });
    }

    friend bool operator==(const FeatureTable&, const FeatureTable&) = default;

private:
    std::size_t dim_ = 0;
    std::vector<float> values_;
    std::vector<ClassId> labels_;
};

using SemanticVector = std::vector<double>;

// Class id -> attribute vector; iteration order is lexicographic by id.
struct SemanticTable {
    std::map<ClassId, SemanticVector> vectors;

    std::size_t dim() const { return vectors.empty() ? 0 : vectors.begin()->second.size(); }
    bool contains(const ClassId& c) const { return vectors.count(c) != 0; }
    const SemanticVector& at(const ClassId& c) const;

    friend bool operator==(const SemanticTable&, const SemanticTable&) = default;
};

// seen and unseen are kept sorted and duplicate-free.
struct ClassSplit {
    std::vector<ClassId> seen;
    std::vector<ClassId> unseen;

    static ClassSplit make(std::vector<ClassId> seen, std::vector<ClassId> unseen) {
        auto norm = [](std::vector<ClassId>& v) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        };
        norm(seen);
        norm(unseen);
        return {std::move(seen), std::move(unseen)};
    }

    std::size_t unseen_count() const noexcept { return unseen.size(); }
    bool is_seen(const ClassId& c) const { return std::binary_search(seen.begin(), seen.end(), c); }
    bool is_unseen(const ClassId& c) const {
        return std::binary_search(unseen.begin(), unseen.end(), c);
    }
    bool contains(const ClassId& c) const { return is_seen(c) || is_unseen(c); }

    std::vector<ClassId> all() const {
        std::vector<ClassId> out;
        std::merge(seen.begin(), seen.end(), unseen.begin(), unseen.end(), std::back_inserter(out));
        return out;
    }

    friend bool operator==(const ClassSplit&, const ClassSplit&) = default;
};

using ClassPriors = std::map<ClassId, double>;

struct DatasetBundle {
    FeatureTable train_seen;
    FeatureTable test_unseen;
    std::optional<FeatureTable> test_seen;
    SemanticTable semantics;
    ClassSplit split;
    std::optional<ClassPriors> class_priors;

    friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

// Predicted class per row, keyed by row index of the table it was computed on.
struct PseudoLabelSet {
    std::vector<ClassId> labels;

    std::size_t size() const noexcept { return labels.size(); }
    friend bool operator==(const PseudoLabelSet&, const PseudoLabelSet&) = default;
};

inline const SemanticVector& SemanticTable::at(const ClassId& c) const {
    auto it = vectors.find(c);
    if (it == vectors.end()) {
        throw ValidationError("no semantic vector for class '" + c + "'");
    }
    return it->second;
}

}  // namespace hardboost
