#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hardboost/models.hpp"
#include "hardboost/types.hpp"

namespace hardboost {

enum class BaseModelKind { embedding, generative };

inline std::string to_string(BaseModelKind k) { return k == BaseModelKind::embedding ? "embedding" : "generative"; }

inline BaseModelKind parse_base_model(const std::string& s) {
    if (s == "embedding") return BaseModelKind::embedding;
    if (s == "generative") return BaseModelKind::generative;
    throw ValidationError("unknown base model '" + s + "' (expected embedding or generative)");
}

struct BaseModelConfig {
    BaseModelKind kind = BaseModelKind::embedding;
    double ridge_lambda = 0.1;
    std::size_t n_unseen = 300;  // generated samples per class for the generative base
    TrainConfig classifier;
};

namespace detail {

// Runs one pipeline stage, prefixing any failure with the pipeline and stage name.
template <class F>
auto run_stage(const char* pipeline, const char* stage, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const std::exception& e) {
        throw Error(std::string(pipeline) + ": stage '" + stage + "' failed: " + e.what());
    }
}

}  // namespace detail

// Fits the configured base model on `train` (labels may be seen or unseen
// classes) and predicts every row of `targets` within `candidates`.
inline PseudoLabelSet train_and_predict(const FeatureTable& train, const SemanticTable& semantics,
                                        const std::vector<ClassId>& candidates, const FeatureTable& targets,
                                        const BaseModelConfig& cfg, std::uint64_t seed) {
    if (cfg.kind == BaseModelKind::embedding) {
        auto model = fit_embedding(train, semantics, cfg.ridge_lambda);
        return predict_embedding(model, targets, candidates, semantics);
    }
    auto gen = fit_generator(train, SynthSet{}, semantics, cfg.ridge_lambda);
    auto classes = detail::sorted_candidates(candidates);
    SynthSet synth;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        const auto& e = semantics.at(classes[i]);
        for (auto& x : sample_generator(gen, e, cfg.n_unseen, substream_seed(seed, "unseen-gen", i))) {
            SynthRow row;
            row.visual = std::move(x);
            row.semantic = e;
            row.label = classes[i];
            row.sources = {classes[i]};
            synth.rows.push_back(std::move(row));
        }
    }
    auto train_cfg = cfg.classifier;
    train_cfg.seed = substream_seed(seed, "classifier");
    auto clf = fit_classifier(to_samples(synth), classes, train_cfg);
    return predict_classifier(clf, targets);
}

// `base` followed by rows `rows` of `source`, relabeled with `labels`.
inline FeatureTable with_extra_rows(const FeatureTable& base, const FeatureTable& source,
                                    const std::vector<std::size_t>& rows, const std::vector<ClassId>& labels) {
    FeatureTable out = base;
    for (std::size_t i = 0; i < rows.size(); ++i) out.add_row(source.row(rows[i]), labels[i]);
    return out;
}

}  // namespace hardboost
