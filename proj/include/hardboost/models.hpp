#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hardboost/error.hpp"
#include "hardboost/io.hpp"
#include "hardboost/random.hpp"
#include "hardboost/synth_set.hpp"
#include "hardboost/types.hpp"

namespace hardboost {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kVarianceFloor = 1e-6;

inline VectorXd to_vector(std::span<const double> v) {
    return Eigen::Map<const VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline VectorXd to_vector(std::span<const float> v) {
    return Eigen::Map<const Eigen::VectorXf>(v.data(), static_cast<Eigen::Index>(v.size())).cast<double>();
}

// Rows of `table` as an N x v matrix.
inline MatrixXd to_matrix(const FeatureTable& table) {
    MatrixXd out(static_cast<Eigen::Index>(table.rows()), static_cast<Eigen::Index>(table.dim()));
    for (std::size_t r = 0; r < table.rows(); ++r) out.row(static_cast<Eigen::Index>(r)) = to_vector(table.row(r));
    return out;
}

// Labeled samples in matrix form, used for classifier training.
struct LabeledSamples {
    MatrixXd x;  // N x v
    std::vector<ClassId> y;
};

namespace detail {

// Accumulates the normal equations of the ridge regression x ~ W e + b over
// rows (e, x). The bias is not penalized.
class RidgeAccumulator {
public:
    RidgeAccumulator(std::size_t s, std::size_t v)
        : s_(s), gram_(MatrixXd::Zero(static_cast<Eigen::Index>(s + 1), static_cast<Eigen::Index>(s + 1))),
          cross_(MatrixXd::Zero(static_cast<Eigen::Index>(s + 1), static_cast<Eigen::Index>(v))) {}

    void add(std::span<const double> e, const VectorXd& x) {
        if (e.size() != s_) throw ValidationError("ridge: semantic dimension mismatch");
        VectorXd ext(static_cast<Eigen::Index>(s_ + 1));
        ext.head(static_cast<Eigen::Index>(s_)) = to_vector(e);
        ext(static_cast<Eigen::Index>(s_)) = 1.0;
        gram_.noalias() += ext * ext.transpose();
        cross_.noalias() += ext * x.transpose();
        ++count_;
    }

    std::size_t count() const noexcept { return count_; }

    // Returns (W: v x s, b: v).
    std::pair<MatrixXd, VectorXd> solve(double lambda, const char* who) const {
        if (count_ == 0) throw ValidationError(std::string(who) + ": no training rows");
        if (!(lambda >= 0.0)) throw ValidationError(std::string(who) + ": ridge lambda must be >= 0");
        MatrixXd lhs = gram_;
        for (std::size_t i = 0; i < s_; ++i) lhs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) += lambda;
        if (lambda == 0.0) {
            Eigen::FullPivLU<MatrixXd> lu(lhs);
            if (!lu.isInvertible()) {
                throw ValidationError(std::string(who) +
                                      ": singular normal equations with lambda = 0; use lambda > 0");
            }
        }
        MatrixXd theta = lhs.ldlt().solve(cross_);
        auto si = static_cast<Eigen::Index>(s_);
        MatrixXd w = theta.topRows(si).transpose();
        VectorXd b = theta.row(si).transpose();
        return {std::move(w), std::move(b)};
    }

private:
    std::size_t s_;
    MatrixXd gram_;
    MatrixXd cross_;
    std::size_t count_ = 0;
};

}  // namespace detail

// ---- embedding model ------------------------------------------------------

// Linear semantic -> visual map; classification picks the class whose mapped
// prototype W e_c + b is nearest to the sample.
struct EmbeddingModel {
    MatrixXd weights;  // v x s
    VectorXd bias;     // v
    double lambda = 0.0;

    VectorXd prototype(std::span<const double> e) const { return weights * to_vector(e) + bias; }
};

// Minimizes sum_n |x_n - W e_{y_n} - b|^2 + lambda |W|_F^2 in closed form.
inline EmbeddingModel fit_embedding(const FeatureTable& train, const SemanticTable& semantics, double lambda) {
    if (train.empty()) throw ValidationError("fit_embedding: training table is empty");
    detail::RidgeAccumulator acc(semantics.dim(), train.dim());
    for (std::size_t r = 0; r < train.rows(); ++r) acc.add(semantics.at(train.label(r)), to_vector(train.row(r)));
    auto [w, b] = acc.solve(lambda, "fit_embedding");
    return {std::move(w), std::move(b), lambda};
}

// Value of the objective minimized by fit_embedding.
inline double embedding_objective(const EmbeddingModel& m, const FeatureTable& train, const SemanticTable& semantics) {
    double total = 0.0;
    for (std::size_t r = 0; r < train.rows(); ++r) {
        total += (to_vector(train.row(r)) - m.prototype(semantics.at(train.label(r)))).squaredNorm();
    }
    return total + m.lambda * m.weights.squaredNorm();
}

namespace detail {

inline ClassId nearest_prototype(const VectorXd& x, const std::vector<ClassId>& ids,
                                 const std::vector<VectorXd>& protos) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ids.size(); ++i) {
        double d = (x - protos[i]).squaredNorm();
        if (d < best_d || (d == best_d && ids[i] < ids[best])) {
            best_d = d;
            best = i;
        }
    }
    return ids[best];
}

inline std::vector<ClassId> sorted_candidates(std::vector<ClassId> c) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
}

}  // namespace detail

inline ClassId classify_embedding(const EmbeddingModel& m, std::span<const float> x,
                                  const std::vector<ClassId>& candidates, const SemanticTable& semantics) {
    if (candidates.empty()) throw ValidationError("classify_embedding: candidate set is empty");
    auto ids = detail::sorted_candidates(candidates);
    std::vector<VectorXd> protos;
    for (const auto& c : ids) protos.push_back(m.prototype(semantics.at(c)));
    return detail::nearest_prototype(to_vector(x), ids, protos);
}

inline PseudoLabelSet predict_embedding(const EmbeddingModel& m, const FeatureTable& table,
                                        const std::vector<ClassId>& candidates, const SemanticTable& semantics) {
    if (candidates.empty()) throw ValidationError("predict_embedding: candidate set is empty");
    auto ids = detail::sorted_candidates(candidates);
    std::vector<VectorXd> protos;
    for (const auto& c : ids) protos.push_back(m.prototype(semantics.at(c)));
    PseudoLabelSet out;
    out.labels.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) {
        out.labels.push_back(detail::nearest_prototype(to_vector(table.row(r)), ids, protos));
    }
    return out;
}

// ---- generative model -----------------------------------------------------

// Class-conditional Gaussian N(A e + offset, diag(variance)).
struct GenerativeModel {
    MatrixXd mean_map;  // v x s
    VectorXd offset;    // v
    VectorXd variance;  // v, each >= kVarianceFloor
    double lambda = 0.0;

    VectorXd mean(std::span<const double> e) const { return mean_map * to_vector(e) + offset; }
};

// Ridge fit of the conditional mean on real rows (semantic vector of their
// label) and synthesized rows (their own semantic vector); the variance is the
// pooled per-dimension residual variance, floored.
inline GenerativeModel fit_generator(const FeatureTable& train, const SynthSet& synth,
                                     const SemanticTable& semantics, double lambda) {
    const std::size_t s = semantics.dim(), v = train.dim();
    detail::RidgeAccumulator acc(s, v);
    for (std::size_t r = 0; r < train.rows(); ++r) acc.add(semantics.at(train.label(r)), to_vector(train.row(r)));
    for (const auto& row : synth.rows) {
        if (row.visual.size() != v) throw ValidationError("fit_generator: synthesized row has wrong visual dimension");
        acc.add(row.semantic, to_vector(row.visual));
    }
    auto [a, b] = acc.solve(lambda, "fit_generator");
    GenerativeModel g{std::move(a), std::move(b), VectorXd::Zero(static_cast<Eigen::Index>(v)), lambda};

    VectorXd sum_sq = VectorXd::Zero(static_cast<Eigen::Index>(v));
    for (std::size_t r = 0; r < train.rows(); ++r) {
        sum_sq += (to_vector(train.row(r)) - g.mean(semantics.at(train.label(r)))).array().square().matrix();
    }
    for (const auto& row : synth.rows) {
        sum_sq += (to_vector(row.visual) - g.mean(row.semantic)).array().square().matrix();
    }
    g.variance = (sum_sq / static_cast<double>(acc.count())).cwiseMax(kVarianceFloor);
    return g;
}

inline std::vector<std::vector<double>> sample_generator(const GenerativeModel& g, std::span<const double> e,
                                                         std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd mu = g.mean(e);
    VectorXd sd = g.variance.cwiseSqrt();
    std::vector<std::vector<double>> out(n, std::vector<double>(static_cast<std::size_t>(mu.size())));
    for (auto& x : out) {
        for (Eigen::Index j = 0; j < mu.size(); ++j) x[static_cast<std::size_t>(j)] = mu(j) + sd(j) * normal(rng);
    }
    return out;
}

// ---- softmax classifier ---------------------------------------------------

struct TrainConfig {
    double learning_rate = 0.1;
    std::size_t epochs = 200;
    std::size_t batch_size = 0;  // 0 = full batch
    std::uint64_t seed = 0;
};

// Multinomial logistic regression trained with (mini-batch) gradient descent
// on the mean softmax cross-entropy.
struct Classifier {
    std::vector<ClassId> classes;
    MatrixXd weights;  // classes x v
    VectorXd bias;     // classes
    std::vector<double> loss_history;  // full-data loss before training and after each epoch

    VectorXd logits(const VectorXd& x) const { return weights * x + bias; }
    VectorXd probabilities(const VectorXd& x) const {
        VectorXd z = logits(x);
        z.array() -= z.maxCoeff();
        z = z.array().exp().matrix();
        return z / z.sum();
    }
};

struct CrossEntropyGradient {
    MatrixXd weights;
    VectorXd bias;
};

// Mean cross-entropy of targets (class indices) under softmax(X W^T + b).
inline double softmax_cross_entropy(const MatrixXd& w, const VectorXd& b, const MatrixXd& x,
                                    const std::vector<std::size_t>& targets) {
    MatrixXd z = (x * w.transpose()).rowwise() + b.transpose();
    double total = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
        double m = z.row(i).maxCoeff();
        double lse = m + std::log((z.row(i).array() - m).exp().sum());
        total += lse - z(i, static_cast<Eigen::Index>(targets[static_cast<std::size_t>(i)]));
    }
    return total / static_cast<double>(z.rows());
}

inline CrossEntropyGradient softmax_cross_entropy_gradient(const MatrixXd& w, const VectorXd& b, const MatrixXd& x,
                                                           const std::vector<std::size_t>& targets) {
    MatrixXd p = (x * w.transpose()).rowwise() + b.transpose();
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        p.row(i).array() -= p.row(i).maxCoeff();
        p.row(i) = p.row(i).array().exp().matrix();
        p.row(i) /= p.row(i).sum();
        p(i, static_cast<Eigen::Index>(targets[static_cast<std::size_t>(i)])) -= 1.0;
    }
    const double n = static_cast<double>(x.rows());
    return {p.transpose() * x / n, p.colwise().sum().transpose() / n};
}

namespace detail {

inline std::vector<std::size_t> class_targets(const std::vector<ClassId>& y, const std::vector<ClassId>& classes) {
    std::map<ClassId, std::size_t> index;
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (!index.emplace(classes[i], i).second) throw ValidationError("classifier: duplicate class '" + classes[i] + "'");
    }
    std::vector<std::size_t> out;
    out.reserve(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        auto it = index.find(y[i]);
        if (it == index.end()) {
            throw ValidationError("classifier: row " + std::to_string(i) + " label '" + y[i] +
                                  "' is not in the class set");
        }
        out.push_back(it->second);
    }
    return out;
}

}  // namespace detail

inline Classifier fit_classifier(const LabeledSamples& data, const std::vector<ClassId>& classes,
                                 const TrainConfig& cfg) {
    if (data.y.empty()) throw ValidationError("fit_classifier: no training data");
    if (static_cast<std::size_t>(data.x.rows()) != data.y.size()) {
        throw ValidationError("fit_classifier: feature and label counts differ");
    }
    if (classes.empty()) throw ValidationError("fit_classifier: empty class set");
    auto targets = detail::class_targets(data.y, classes);
    const auto k = static_cast<Eigen::Index>(classes.size());
    Classifier m{classes, MatrixXd::Zero(k, data.x.cols()), VectorXd::Zero(k), {}};

    const std::size_t n = data.y.size();
    const std::size_t batch = cfg.batch_size == 0 ? n : std::min(cfg.batch_size, n);
    Rng rng = substream(cfg.seed, "classifier-batches");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    m.loss_history.push_back(softmax_cross_entropy(m.weights, m.bias, data.x, targets));
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        if (batch == n) {
            auto g = softmax_cross_entropy_gradient(m.weights, m.bias, data.x, targets);
            m.weights -= cfg.learning_rate * g.weights;
            m.bias -= cfg.learning_rate * g.bias;
        } else {
            std::shuffle(order.begin(), order.end(), rng);
            for (std::size_t start = 0; start < n; start += batch) {
                std::size_t end = std::min(n, start + batch);
                MatrixXd xb(static_cast<Eigen::Index>(end - start), data.x.cols());
                std::vector<std::size_t> tb;
                for (std::size_t i = start; i < end; ++i) {
                    xb.row(static_cast<Eigen::Index>(i - start)) = data.x.row(static_cast<Eigen::Index>(order[i]));
                    tb.push_back(targets[order[i]]);
                }
                auto g = softmax_cross_entropy_gradient(m.weights, m.bias, xb, tb);
                m.weights -= cfg.learning_rate * g.weights;
                m.bias -= cfg.learning_rate * g.bias;
            }
        }
        double loss = softmax_cross_entropy(m.weights, m.bias, data.x, targets);
        if (!std::isfinite(loss)) {
            throw Error("fit_classifier: loss became non-finite at epoch " + std::to_string(epoch) +
                        "; lower the learning rate");
        }
        m.loss_history.push_back(loss);
    }
    return m;
}

// argmax of the logits; equal logits resolve to the smaller class id.
inline ClassId predict_classifier(const Classifier& m, const VectorXd& x) {
    if (x.size() != m.weights.cols()) {
        throw ValidationError("predict_classifier: input dimension " + std::to_string(x.size()) +
                              " differs from model dimension " + std::to_string(m.weights.cols()));
    }
    VectorXd z = m.logits(x);
    std::size_t best = 0;
    for (std::size_t i = 1; i < m.classes.size(); ++i) {
        auto ii = static_cast<Eigen::Index>(i), bi = static_cast<Eigen::Index>(best);
        if (z(ii) > z(bi) || (z(ii) == z(bi) && m.classes[i] < m.classes[best])) best = i;
    }
    return m.classes[best];
}

inline PseudoLabelSet predict_classifier(const Classifier& m, const FeatureTable& table) {
    PseudoLabelSet out;
    out.labels.reserve(table.rows());
    for (std::size_t r = 0; r < table.rows(); ++r) out.labels.push_back(predict_classifier(m, to_vector(table.row(r))));
    return out;
}

inline LabeledSamples to_samples(const SynthSet& synth) {
    LabeledSamples out;
    if (synth.empty()) return out;
    out.x.resize(static_cast<Eigen::Index>(synth.size()), static_cast<Eigen::Index>(synth.rows.front().visual.size()));
    for (std::size_t i = 0; i < synth.size(); ++i) {
        out.x.row(static_cast<Eigen::Index>(i)) = to_vector(synth.rows[i].visual);
        out.y.push_back(synth.rows[i].label);
    }
    return out;
}

// ---- checkpoint blobs -----------------------------------------------------
//
// "ZSM1", u32 version, u32 kind, then kind-specific fields. Matrices are
// u64 rows, u64 cols and row-major little-endian f64; scalars are f64; class
// lists are a u32 byte length followed by newline-terminated ids.

inline constexpr std::uint32_t kModelVersion = 1;

enum class ModelKind : std::uint32_t { embedding = 1, generative = 2, classifier = 3 };

namespace detail {

inline void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

inline void put_matrix(std::string& out, const MatrixXd& m) {
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) put_f64(out, m(i, j));
    }
}

inline double get_f64(ByteReader& in, const char* field) { return std::bit_cast<double>(in.uint(8, field)); }

inline MatrixXd get_matrix(ByteReader& in, const char* field) {
    auto rows = in.uint(8, field), cols = in.uint(8, field);
    if (cols != 0 && rows > in.remaining() / 8 / cols) throw LoadError(std::string("model: matrix '") + field + "' too large");
    MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = get_f64(in, field);
    }
    return m;
}

inline std::string model_header(ModelKind kind) {
    std::string out = "ZSM1";
    put_u32(out, kModelVersion);
    put_u32(out, static_cast<std::uint32_t>(kind));
    return out;
}

inline ByteReader open_model(std::string_view data, ModelKind kind) {
    ByteReader in(data, "model");
    if (in.bytes(4, "magic") != "ZSM1") throw LoadError("model: bad magic (expected ZSM1)");
    if (in.uint(4, "version") != kModelVersion) throw LoadError("model: unsupported version");
    if (in.uint(4, "kind") != static_cast<std::uint32_t>(kind)) throw LoadError("model: unexpected model kind");
    return in;
}

}  // namespace detail

inline std::string encode_model(const EmbeddingModel& m) {
    auto out = detail::model_header(ModelKind::embedding);
    detail::put_f64(out, m.lambda);
    detail::put_matrix(out, m.weights);
    detail::put_matrix(out, m.bias);
    return out;
}

inline std::string encode_model(const GenerativeModel& m) {
    auto out = detail::model_header(ModelKind::generative);
    detail::put_f64(out, m.lambda);
    detail::put_matrix(out, m.mean_map);
    detail::put_matrix(out, m.offset);
    detail::put_matrix(out, m.variance);
    return out;
}

inline std::string encode_model(const Classifier& m) {
    auto out = detail::model_header(ModelKind::classifier);
    std::string ids;
    for (const auto& c : m.classes) ids += c + "\n";
    detail::put_u32(out, static_cast<std::uint32_t>(ids.size()));
    out += ids;
    detail::put_matrix(out, m.weights);
    detail::put_matrix(out, m.bias);
    return out;
}

inline EmbeddingModel decode_embedding_model(std::string_view data) {
    auto in = detail::open_model(data, ModelKind::embedding);
    EmbeddingModel m;
    m.lambda = detail::get_f64(in, "lambda");
    m.weights = detail::get_matrix(in, "weights");
    m.bias = detail::get_matrix(in, "bias");
    return m;
}

inline GenerativeModel decode_generative_model(std::string_view data) {
    auto in = detail::open_model(data, ModelKind::generative);
    GenerativeModel m;
    m.lambda = detail::get_f64(in, "lambda");
    m.mean_map = detail::get_matrix(in, "mean_map");
    m.offset = detail::get_matrix(in, "offset");
    m.variance = detail::get_matrix(in, "variance");
    return m;
}

inline Classifier decode_classifier(std::string_view data) {
    auto in = detail::open_model(data, ModelKind::classifier);
    Classifier m;
    auto len = in.uint(4, "class list length");
    auto block = in.bytes(len, "class list");
    for (auto id : detail::split_fields(block, '\n')) {
        if (!id.empty()) m.classes.emplace_back(id);
    }
    m.weights = detail::get_matrix(in, "weights");
    m.bias = detail::get_matrix(in, "bias");
    return m;
}

}  // namespace hardboost
