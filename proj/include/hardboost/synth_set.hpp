#pragma once

#include <cstddef>
#include <limits>
#include <vector>

#include "hardboost/types.hpp"

namespace hardboost {

enum class SynthTag { hard_seen_interp, unseen_gen };

// One synthesized (visual, semantic, label) triple plus how it was made.
struct SynthRow {
    std::vector<double> visual;
    SemanticVector semantic;
    SynthTag tag = SynthTag::unseen_gen;
    // Unseen class the row was generated for; for interpolated rows, the hard
    // unseen class whose support seen classes were mixed.
    ClassId label;
    // Interpolated rows: the two support classes and their train_seen rows.
    std::vector<ClassId> sources;
    std::vector<std::size_t> source_rows;
    double gamma = std::numeric_limits<double>::quiet_NaN();
};

struct SynthSet {
    std::vector<SynthRow> rows;

    std::size_t size() const noexcept { return rows.size(); }
    bool empty() const noexcept { return rows.empty(); }

    void append(SynthSet other) {
        rows.insert(rows.end(), std::make_move_iterator(other.rows.begin()),
                    std::make_move_iterator(other.rows.end()));
    }
};

}  // namespace hardboost
