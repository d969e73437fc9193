#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include <json.hpp>

#include "hardboost/base.hpp"
#include "hardboost/error.hpp"
#include "hardboost/hardness.hpp"
#include "hardboost/hars.hpp"
#include "hardboost/harst.hpp"

namespace hardboost {

// Pipeline configuration shared by the hars, harst, analyze and sweep commands.
// JSON keys: K, T, alpha, beta, S, N_u, seed, metric, base_model, lambda,
// learning_rate, epochs, batch_size, selection, gzsl. Unknown keys are rejected.
struct RunConfig {
    std::size_t k = 2;
    std::size_t iterations = 5;
    double alpha = 2.0;
    double beta = 2.0;
    std::size_t support = 2;
    std::size_t n_unseen = 300;
    std::uint64_t seed = 0;
    std::optional<HardnessMetric> metric;  // ss for hars, cf when unset for harst
    BaseModelKind base_model = BaseModelKind::embedding;
    double lambda = 0.1;
    double learning_rate = 0.1;
    std::size_t epochs = 200;
    std::size_t batch_size = 0;  // 0: full batch
    SelectionMode selection = SelectionMode::cfbs;
    bool gzsl = false;
};

namespace detail {

template <class T>
T config_field(const nlohmann::json& j, const char* key, const std::string& what) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(what + ": field '" + key + "' has the wrong type: " + e.what());
    }
}

}  // namespace detail

inline RunConfig config_from_json(const nlohmann::json& j, const std::string& what = "config") {
    static const std::set<std::string> known = {"K",      "T",             "alpha",  "beta",       "S",
                                                "N_u",    "seed",          "metric", "base_model", "lambda",
                                                "learning_rate", "epochs", "batch_size", "selection", "gzsl"};
    if (!j.is_object()) throw ValidationError(what + ": expected a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw ValidationError(what + ": unknown key '" + it.key() + "'");
    }
    RunConfig c;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = detail::config_field<std::decay_t<decltype(field)>>(j, key, what);
    };
    get("K", c.k);
    get("T", c.iterations);
    get("alpha", c.alpha);
    get("beta", c.beta);
    get("S", c.support);
    get("N_u", c.n_unseen);
    get("seed", c.seed);
    get("lambda", c.lambda);
    get("learning_rate", c.learning_rate);
    get("epochs", c.epochs);
    get("batch_size", c.batch_size);
    get("gzsl", c.gzsl);
    if (j.contains("metric") && !j.at("metric").is_null()) c.metric = parse_metric(detail::config_field<std::string>(j, "metric", what));
    if (j.contains("base_model")) c.base_model = parse_base_model(detail::config_field<std::string>(j, "base_model", what));
    if (j.contains("selection")) c.selection = parse_selection(detail::config_field<std::string>(j, "selection", what));
    if (!(c.lambda >= 0.0)) throw ValidationError(what + ": lambda must be >= 0");
    if (!(c.learning_rate > 0.0)) throw ValidationError(what + ": learning_rate must be > 0");
    return c;
}

// Canonical form with every field spelled out; the run manifest hashes this.
inline nlohmann::json to_json(const RunConfig& c) {
    return {{"K", c.k},
            {"T", c.iterations},
            {"alpha", c.alpha},
            {"beta", c.beta},
            {"S", c.support},
            {"N_u", c.n_unseen},
            {"seed", c.seed},
            {"metric", c.metric ? nlohmann::json(to_string(*c.metric)) : nlohmann::json(nullptr)},
            {"base_model", to_string(c.base_model)},
            {"lambda", c.lambda},
            {"learning_rate", c.learning_rate},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"selection", to_string(c.selection)},
            {"gzsl", c.gzsl}};
}

inline TrainConfig train_config(const RunConfig& c) {
    TrainConfig t;
    t.learning_rate = c.learning_rate;
    t.epochs = c.epochs;
    t.batch_size = c.batch_size;
    return t;
}

inline BaseModelConfig base_config(const RunConfig& c) {
    BaseModelConfig b;
    b.kind = c.base_model;
    b.ridge_lambda = c.lambda;
    b.n_unseen = c.n_unseen;
    b.classifier = train_config(c);
    return b;
}

inline HarsConfig hars_config(const RunConfig& c) {
    if (c.metric && *c.metric != HardnessMetric::ss) {
        throw ValidationError("hars identifies hard classes with the ss metric; got metric '" + to_string(*c.metric) + "'");
    }
    HarsConfig h;
    h.k = c.k;
    h.support = c.support;
    h.alpha = c.alpha;
    h.beta = c.beta;
    h.n_unseen = c.n_unseen;
    h.seed = c.seed;
    h.ridge_lambda = c.lambda;
    h.classifier = train_config(c);
    return h;
}

inline HarstConfig harst_config(const RunConfig& c) {
    HarstConfig h;
    h.iterations = c.iterations;
    h.k = c.k;
    h.metric = c.metric.value_or(HardnessMetric::cf);
    if (h.metric == HardnessMetric::ss) throw ValidationError("harst identifies hard classes with cf or pncf, not ss");
    h.selection = c.selection;
    h.base = base_config(c);
    h.seed = c.seed;
    h.gzsl = c.gzsl;
    return h;
}

}  // namespace hardboost
