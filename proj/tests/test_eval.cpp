#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "hand_matrices.hpp"
#include "hardboost/bench.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/models.hpp"
#include "oracles.hpp"

using namespace hardboost;

namespace {

std::vector<ClassId> repeat(const ClassId& c, std::size_t n) { return std::vector<ClassId>(n, c); }

std::vector<ClassId> concat(std::vector<ClassId> a, const std::vector<ClassId>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// Predictions/truths realizing the given per-class accuracies (in percent, one decimal)
// with 1000 rows per class.
std::pair<PseudoLabelSet, std::vector<ClassId>> rows_with_accuracy(const ClassId& c, const ClassId& wrong, double pct) {
    auto correct = static_cast<std::size_t>(std::lround(pct * 10));
    PseudoLabelSet p{concat(repeat(c, correct), repeat(wrong, 1000 - correct))};
    return {p, repeat(c, 1000)};
}

}  // namespace

TEST(HarmonicMean, KnownRows) {
    EXPECT_NEAR(harmonic_mean(94.9, 92.3), 93.6, 0.05);
    EXPECT_NEAR(harmonic_mean(57.9, 61.4), 59.6, 0.05);
    EXPECT_EQ(harmonic_mean(0.0, 37.0), 0.0);
    EXPECT_EQ(harmonic_mean(37.0, 0.0), 0.0);
}

TEST(HarmonicMean, BoundsProperty) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.001, 1.0);
    for (int i = 0; i < 1000; ++i) {
        double a = u(rng), b = u(rng);
        double h = harmonic_mean(a, b);
        EXPECT_LE(h, (a + b) / 2 + 1e-15);
        EXPECT_GE(h, std::min(a, b) - 1e-15);
        EXPECT_NEAR(h, harmonic_mean(b, a), 1e-15);
    }
}

TEST(Evaluate, ReproducesHThroughCounts) {
    auto split = ClassSplit::make({"s"}, {"u"});
    auto [pu, tu] = rows_with_accuracy("u", "s", 94.9);
    auto [ps, ts] = rows_with_accuracy("s", "u", 92.3);
    PseudoLabelSet preds{concat(pu.labels, ps.labels)};
    auto r = evaluate(preds, concat(tu, ts), split);
    ASSERT_TRUE(r.h.has_value());
    EXPECT_NEAR(*r.acc_u, 0.949, 1e-12);
    EXPECT_NEAR(*r.acc_s, 0.923, 1e-12);
    EXPECT_NEAR(100 * *r.h, 93.6, 0.05);
}

TEST(Evaluate, PerClassMeansAreUnweighted) {
    auto split = ClassSplit::make({"s"}, {"a", "b"});
    // a: 1 of 1 right, b: 1 of 3 right.
    auto r = evaluate(PseudoLabelSet{{"a", "b", "a", "a"}}, {"a", "b", "b", "b"}, split);
    EXPECT_DOUBLE_EQ(*r.acc_u, (1.0 + 1.0 / 3.0) / 2.0);
    EXPECT_FALSE(r.acc_s.has_value());
    EXPECT_FALSE(r.h.has_value());
}

TEST(Evaluate, MissingClassWarnsAndIsExcluded) {
    auto split = ClassSplit::make({"s"}, {"a", "b", "c"});
    std::vector<std::string> warnings;
    ScopedWarningHandler h([&](const std::string& m) { warnings.push_back(m); });
    auto r = evaluate(PseudoLabelSet{{"a", "a"}}, {"a", "b"}, split);
    EXPECT_DOUBLE_EQ(*r.acc_u, 0.5);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("'c'"), std::string::npos);
}

TEST(Evaluate, ZeroAccuracyGivesZeroH) {
    auto split = ClassSplit::make({"s"}, {"u"});
    auto r = evaluate(PseudoLabelSet{{"s", "s"}}, {"u", "s"}, split);
    EXPECT_EQ(*r.acc_u, 0.0);
    EXPECT_EQ(*r.h, 0.0);
}

TEST(Evaluate, RejectsMisalignedInputs) {
    auto split = ClassSplit::make({"s"}, {"u"});
    EXPECT_THROW(evaluate(PseudoLabelSet{{"u"}}, {"u", "u"}, split), ValidationError);
    EXPECT_THROW(evaluate(PseudoLabelSet{{"zz"}}, {"u"}, split), ValidationError);
}

TEST(Confusion, PerfectIsDiagonal) {
    auto split = ClassSplit::make({"s"}, {"a", "b", "c"});
    std::vector<ClassId> t{"a", "b", "c", "c"};
    auto cm = confusion_matrix(PseudoLabelSet{t}, t, split, std::nullopt, 0);
    for (std::size_t i = 0; i < cm.size(); ++i)
        for (std::size_t j = 0; j < cm.size(); ++j)
            if (i != j) EXPECT_EQ(cm.counts[i][j], 0u);
    EXPECT_EQ(cm.counts[2][2], 2u);
}

TEST(Confusion, CapLimitsRows) {
    auto split = ClassSplit::make({"s"}, {"a", "b"});
    auto truths = concat(repeat("a", 250), repeat("b", 40));
    PseudoLabelSet preds{concat(concat(repeat("a", 200), repeat("b", 50)), repeat("b", 40))};
    auto cm = confusion_matrix(preds, truths, split, 100, 3);
    EXPECT_EQ(cm.row_sum(cm.index_of("a")), 100u);
    EXPECT_EQ(cm.row_sum(cm.index_of("b")), 100u);  // drawn with replacement
    EXPECT_EQ(cm, confusion_matrix(preds, truths, split, 100, 3));
}

TEST(Confusion, MatchesTallyOracle) {
    std::vector<ClassId> unseen{"a", "b", "c", "d"}, seen{"x", "y"};
    auto split = ClassSplit::make(seen, unseen);
    auto all = concat(unseen, seen);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    for (int trial = 0; trial < 20; ++trial) {
        PseudoLabelSet preds;
        std::vector<ClassId> truths;
        for (int i = 0; i < 500; ++i) {
            preds.labels.push_back(all[pick(rng)]);
            truths.push_back(all[pick(rng)]);
        }
        auto cm = confusion_matrix(preds, truths, split, std::nullopt, 0);
        EXPECT_EQ(cm.labels, all);
        EXPECT_EQ(cm.counts, oracle::tally(preds.labels, truths, all));
        EXPECT_EQ(cm.total(), 500u);
    }
}

TEST(Diagnostics, ThreeClassHandValues) {
    auto h = fixtures::three_class();
    for (const auto& [k, v] : h.apr) EXPECT_DOUBLE_EQ(apr(h.cm, h.sim, k).value, v) << "k=" << k;
    for (const auto& [k, v] : h.amr) EXPECT_DOUBLE_EQ(amr(h.cm, h.sim, k).value, v) << "k=" << k;
    EXPECT_EQ(apr(h.cm, h.sim, 1).per_class.at("c1"), 1.0);
}

TEST(Diagnostics, FiveClassHandValues) {
    auto h = fixtures::five_class();
    std::vector<std::string> warnings;
    ScopedWarningHandler guard([&](const std::string& m) { warnings.push_back(m); });
    for (const auto& [k, v] : h.apr) EXPECT_DOUBLE_EQ(apr(h.cm, h.sim, k).value, v) << "k=" << k;
    for (const auto& [k, v] : h.amr) EXPECT_DOUBLE_EQ(amr(h.cm, h.sim, k).value, v) << "k=" << k;
    auto r = apr(h.cm, h.sim, 1);
    EXPECT_EQ(r.skipped, (std::vector<ClassId>{"c"}));
    EXPECT_FALSE(warnings.empty());
    EXPECT_DOUBLE_EQ(amr(h.cm, h.sim, 1).per_class.at("e"), 1.0 / 4.0);  // uniform errors: 1/(C-1)
}

TEST(Diagnostics, DisjointRankingsGiveZeroApr) {
    ConfusionMatrix cm{{"a", "b", "c"}, {{3, 0, 1}, {0, 3, 1}, {1, 0, 3}}};
    SimilarityMatrix sim{{1, 0.9, 0.1}, {0.9, 1, 0.2}, {0.1, 0.9, 1}};
    // a errs into c, b into c, c into a; most similar: a->b, b->a, c->b.
    EXPECT_EQ(apr(cm, sim, 1).value, 0.0);
}

TEST(Diagnostics, Errors) {
    auto h = fixtures::three_class();
    EXPECT_THROW(apr(h.cm, h.sim, 0), ValidationError);
    EXPECT_THROW(apr(h.cm, h.sim, 3), ValidationError);
    ConfusionMatrix perfect{{"a", "b"}, {{2, 0}, {0, 2}}};
    SimilarityMatrix sim{{1, 0.5}, {0.5, 1}};
    try {
        amr(perfect, sim, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("AMR undefined"), std::string::npos);
    }
}

TEST(Diagnostics, RangeProperty) {
    std::mt19937_64 rng(6);
    std::uniform_int_distribution<std::size_t> cnt(0, 9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t c = 3 + trial % 4;
        ConfusionMatrix cm;
        for (std::size_t i = 0; i < c; ++i) cm.labels.push_back("k" + std::to_string(i));
        cm.counts.assign(c, std::vector<std::size_t>(c));
        SimilarityMatrix sim(c, std::vector<double>(c, 1.0));
        for (std::size_t i = 0; i < c; ++i) {
            for (std::size_t j = 0; j < c; ++j) cm.counts[i][j] = cnt(rng) + (i == j ? 0 : 1);
            for (std::size_t j = 0; j < i; ++j) sim[i][j] = sim[j][i] = u(rng);
        }
        ScopedWarningHandler quiet([](const std::string&) {});
        for (std::size_t k = 1; k < c; ++k) {
            double a = apr(cm, sim, k).value, m = amr(cm, sim, k).value;
            EXPECT_GE(a, 0.0);
            EXPECT_LE(a, 1.0);
            EXPECT_GE(m, 0.0);
            EXPECT_LE(m, 1.0);
        }
        EXPECT_DOUBLE_EQ(apr(cm, sim, c - 1).value, 1.0);
        EXPECT_DOUBLE_EQ(amr(cm, sim, c - 1).value, 1.0);
    }
}

TEST(Oracle, HardEasySplit) {
    EvalReport r;
    r.per_class_accuracy = {{"a", 0.9}, {"b", 0.2}, {"c", 0.5}, {"d", 0.1}, {"e", 0.95}};
    auto split = ClassSplit::make({"s"}, {"a", "b", "c", "d", "e"});
    auto o = hard_easy_oracle(r, split);
    EXPECT_EQ(o.hard, (std::vector<ClassId>{"b", "c", "d"}));
    EXPECT_EQ(o.easy, (std::vector<ClassId>{"a", "e"}));
}

TEST(Identification, PerfectPredictionHasRecallOne) {
    auto split = ClassSplit::make({"s"}, {"a", "b", "c", "d"});
    std::vector<ClassId> truths{"a", "a", "b", "b", "c", "c", "d", "d"};
    PseudoLabelSet preds{{"b", "a", "a", "b", "c", "c", "d", "d"}};
    auto r = evaluate(preds, truths, split);
    auto q = identification_quality({"a", "b"}, r, split);
    EXPECT_EQ(*q.recall_of_true_hard, 1.0);
    EXPECT_DOUBLE_EQ(*q.apa_hard, 0.5);
    EXPECT_DOUBLE_EQ(*q.apa_easy, 1.0);
    EXPECT_DOUBLE_EQ(*q.app_hard, 0.5);
    EXPECT_DOUBLE_EQ(*q.app_easy, 1.0);
}

TEST(Identification, EmptyGroupIsUndefined) {
    auto split = ClassSplit::make({"s"}, {"a", "b"});
    auto r = evaluate(PseudoLabelSet{{"a", "b"}}, {"a", "b"}, split);
    auto q = identification_quality({"a", "b"}, r, split);
    EXPECT_FALSE(q.apa_easy.has_value());
    EXPECT_FALSE(q.app_easy.has_value());
    EXPECT_TRUE(to_json(q)["apa_easy"].is_null());
}

TEST(Identification, PlantedPairHasHigherHardPrecision) {
    // Mirrors the pseudo-label quality comparison: averaged over seeds, the
    // identified hard classes hold more precise pseudo labels than the rest.
    double hard = 0, easy = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        BenchmarkSpec spec;
        spec.seed = seed;
        auto b = make_benchmark(spec);
        auto model = fit_embedding(b.bundle.train_seen, b.bundle.semantics, 0.1);
        auto preds = predict_embedding(model, b.bundle.test_unseen, b.bundle.split.unseen, b.bundle.semantics);
        auto r = evaluate(preds, b.bundle.test_unseen.labels(), b.bundle.split);
        auto pred_hard = identify_cf(preds, b.bundle.split, b.planted_hard.size(), HardnessMetric::cf, nullptr).hard;
        auto q = identification_quality(pred_hard, r, b.bundle.split);
        hard += q.app_hard.value_or(0.0);
        easy += q.app_easy.value_or(0.0);
    }
    EXPECT_GT(hard, easy);
}

TEST(Serialization, ReportJsonAndConfusionCsv) {
    auto split = ClassSplit::make({"s"}, {"a", "b"});
    auto r = evaluate(PseudoLabelSet{{"a", "a"}}, {"a", "b"}, split);
    auto j = to_json(r);
    EXPECT_DOUBLE_EQ(j["acc_u"].get<double>(), 0.5);
    EXPECT_TRUE(j["h"].is_null());
    EXPECT_EQ(encode_confusion_csv(r.confusion), "true\\predicted,a,b\na,1,0\nb,1,0\n");
}
