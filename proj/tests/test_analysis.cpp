#include <gtest/gtest.h>

#include "hardboost/analysis.hpp"
#include "hardboost/bench.hpp"

using namespace hardboost;

namespace {

HardEasyOracle fixed_oracle() { return {{"h1", "h2"}, {"e1", "e2", "e3"}}; }

std::size_t total(const std::map<ClassId, std::size_t>& m) {
    std::size_t n = 0;
    for (const auto& [c, k] : m) n += k;
    return n;
}

}  // namespace

TEST(GroupPlan, InductiveCounts) {
    auto plan = detail::group_plan(AnalysisVariant::inductive, fixed_oracle(), 10);
    EXPECT_EQ(plan["easy"].at("h1"), 10u);
    EXPECT_EQ(plan["easy"].at("e1"), 20u);
    EXPECT_EQ(plan["hard"].at("h2"), 20u);
    EXPECT_EQ(plan["hard"].at("e3"), 10u);
    EXPECT_EQ(plan["all"].at("h1"), 15u);
    EXPECT_EQ(plan["all"].at("e2"), 15u);
}

TEST(GroupPlan, TransductiveCounts) {
    auto plan = detail::group_plan(AnalysisVariant::transductive, fixed_oracle(), 7);
    EXPECT_EQ(plan["easy"].at("h1"), 0u);
    EXPECT_EQ(plan["easy"].at("e1"), 7u);
    EXPECT_EQ(plan["hard"].at("h1"), 7u);
    EXPECT_EQ(plan["hard"].at("e1"), 0u);
    EXPECT_EQ(plan["all"].at("h1"), 4u);  // 3.5 rounds half away from zero
    EXPECT_EQ(total(plan["easy"]), 21u);
    EXPECT_EQ(total(plan["hard"]), 14u);
}

TEST(DrawRows, WithoutReplacementWhenPossible) {
    std::vector<std::size_t> pool{3, 5, 7, 9};
    auto rng = substream(1, "t");
    auto rows = detail::draw_class_rows(pool, "c", 4, rng);
    std::sort(rows.begin(), rows.end());
    EXPECT_EQ(rows, pool);
}

TEST(DrawRows, WithReplacementWarns) {
    std::vector<std::string> warnings;
    ScopedWarningHandler h([&](const std::string& m) { warnings.push_back(m); });
    auto rng = substream(1, "t");
    auto rows = detail::draw_class_rows({2, 4}, "c", 9, rng);
    EXPECT_EQ(rows.size(), 9u);
    for (auto r : rows) EXPECT_TRUE(r == 2 || r == 4);
    EXPECT_EQ(warnings.size(), 1u);
    EXPECT_THROW(detail::draw_class_rows({}, "c", 1, rng), ValidationError);
}

TEST(Contrastive, ZeroBudgetIsAnError) {
    BenchmarkSpec spec;
    spec.n_per_class = 10;
    auto b = make_benchmark(spec);
    BaseModelConfig base;
    auto oracle = reference_oracle(b.bundle, base, 0);
    EXPECT_THROW(contrastive_analysis(b.bundle, base, AnalysisVariant::transductive, 0, oracle, 0), ValidationError);
    EXPECT_THROW(contrastive_analysis(b.bundle, base, AnalysisVariant::inductive, 5, oracle, 0), ValidationError);
}

TEST(Contrastive, GroupsMatchPlanAndAreDeterministic) {
    BenchmarkSpec spec;
    spec.n_per_class = 20;
    auto b = make_benchmark(spec);
    BaseModelConfig base;
    base.kind = BaseModelKind::generative;
    base.n_unseen = 30;
    base.classifier.epochs = 30;
    auto oracle = reference_oracle(b.bundle, base, 1);
    EXPECT_EQ(oracle.hard.size() + oracle.easy.size(), 8u);
    auto r = contrastive_analysis(b.bundle, base, AnalysisVariant::inductive, 6, oracle, 1);
    ASSERT_EQ(r.groups.size(), 3u);
    EXPECT_EQ(r.groups[0].name, "easy");
    EXPECT_EQ(r.groups[0].rows, 4 * 6u + 4 * 12u);
    EXPECT_EQ(r.groups[2].rows, 8 * 9u);
    for (const auto& g : r.groups) EXPECT_TRUE(g.report.acc_u.has_value());
    auto again = contrastive_analysis(b.bundle, base, AnalysisVariant::inductive, 6, oracle, 1);
    EXPECT_EQ(to_json(r).dump(), to_json(again).dump());
}

TEST(Contrastive, HardWeightedBeatsEasyWeighted) {
    // Transductive variant with the embedding base, averaged over 10 seeds.
    double hard = 0, easy = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        BenchmarkSpec spec;
        spec.seed = seed;
        auto b = make_benchmark(spec);
        BaseModelConfig base;
        auto oracle = reference_oracle(b.bundle, base, seed);
        auto r = contrastive_analysis(b.bundle, base, AnalysisVariant::transductive, 20, oracle, seed);
        easy += *r.groups[0].report.acc_u;
        hard += *r.groups[1].report.acc_u;
    }
    EXPECT_GT(hard, easy);
}

TEST(Precision, GroupMeans) {
    auto split = ClassSplit::make({"s"}, {"a", "b", "c"});
    // a predicted twice (one right), b predicted once (right), c never predicted.
    PseudoLabelSet preds{{"a", "a", "b"}};
    std::vector<ClassId> truths{"a", "c", "b"};
    HardEasyOracle oracle{{"a", "c"}, {"b"}};
    auto p = pseudo_label_precision(preds, truths, split, oracle);
    EXPECT_DOUBLE_EQ(p.per_class.at("a"), 0.5);
    EXPECT_DOUBLE_EQ(*p.hard_mean, 0.5);
    EXPECT_DOUBLE_EQ(*p.easy_mean, 1.0);
    EXPECT_EQ(p.skipped, (std::vector<ClassId>{"c"}));
    EXPECT_TRUE(to_json(p)["per_class"].contains("b"));
}

TEST(Variant, Parse) {
    EXPECT_EQ(parse_variant("inductive"), AnalysisVariant::inductive);
    EXPECT_THROW(parse_variant("both"), ValidationError);
}
