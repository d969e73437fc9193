// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "cli_support.hpp"
#include "hand_matrices.hpp"
#include "hardboost/hardboost.hpp"
#include "oracles.hpp"

using namespace hardboost;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

// Collects failures without stopping at the first one.
class Check {
public:
    void expect(bool ok, const std::string& what) {
        if (!ok && failures_++ < 5) note_ += (note_.empty() ? "" : "; ") + what;
        else if (!ok) ++suppressed_;
    }
    Outcome result(std::string summary) const {
        if (failures_ == 0) return {true, std::move(summary)};
        std::string d = summary + " | failures: " + note_;
        if (suppressed_) d += " (+" + std::to_string(suppressed_) + " more)";
        return {false, d};
    }

private:
    std::size_t failures_ = 0, suppressed_ = 0;
    std::string note_;
};

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os.setf(std::ios::fixed);
    os.precision(digits);
    os << v;
    return os.str();
}

std::vector<ClassId> repeat(const ClassId& c, std::size_t n) { return std::vector<ClassId>(n, c); }

// ---- 1 ------------------------------------------------------------------------

Outcome harmonic_mean_fidelity() {
    Check check;
    struct Row {
        double acc_u, acc_s, h;
    };
    std::string summary;
    for (auto row : {Row{94.9, 92.3, 93.6}, Row{57.9, 61.4, 59.6}}) {
        // 1000 rows per class realize the one-decimal accuracies exactly.
        auto split = ClassSplit::make({"s"}, {"u"});
        auto cu = static_cast<std::size_t>(std::lround(row.acc_u * 10));
        auto cs = static_cast<std::size_t>(std::lround(row.acc_s * 10));
        PseudoLabelSet preds;
        std::vector<ClassId> truths;
        for (auto& l : repeat("u", cu)) preds.labels.push_back(l);
        for (auto& l : repeat("s", 1000 - cu)) preds.labels.push_back(l);
        for (auto& l : repeat("s", cs)) preds.labels.push_back(l);
        for (auto& l : repeat("u", 1000 - cs)) preds.labels.push_back(l);
        for (auto& l : repeat("u", 1000)) truths.push_back(l);
        for (auto& l : repeat("s", 1000)) truths.push_back(l);
        auto r = evaluate(preds, truths, split);
        double h = r.h ? 100.0 * *r.h : -1.0;
        check.expect(std::abs(h - row.h) <= 0.05, "H(" + fmt(row.acc_u, 1) + ", " + fmt(row.acc_s, 1) + ") = " + fmt(h));
        summary += (summary.empty() ? "" : ", ") + fmt(h, 2) + " vs " + fmt(row.h, 1);
    }
    return check.result("H = " + summary);
}

// ---- 2 ------------------------------------------------------------------------

Outcome ss_soundness() {
    Check check;
    std::mt19937_64 rng(20240601);
    std::size_t recovered = 0;
    const std::size_t trials = 100;
    for (std::size_t i = 0; i < trials; ++i) {
        BenchmarkSpec spec;
        spec.seed = rng();
        spec.seen_count = 6 + rng() % 15;
        spec.unseen_count = 4 + rng() % 9;
        spec.hard_pairs = 1 + rng() % std::min<std::size_t>(3, spec.unseen_count / 2);
        spec.semantic_dim = 12 + rng() % 13;
        spec.visual_dim = 8;
        spec.n_per_class = 1;
        spec.pair_distance = 0.01 + 0.04 * static_cast<double>(rng() % 100) / 100.0;
        spec.affinity_gap = 0.1 + 0.2 * static_cast<double>(rng() % 100) / 100.0;
        try {
            auto b = make_benchmark(spec);
            auto hard = rank_hard(ss_scores(b.bundle.semantics, b.bundle.split), b.planted_hard.size());
            std::sort(hard.begin(), hard.end());
            bool ok = hard == b.planted_hard;
            recovered += ok;
            check.expect(ok, "spec " + std::to_string(i) + " recall < 1");
        } catch (const std::exception& e) {
            check.expect(false, "spec " + std::to_string(i) + ": " + e.what());
        }
    }
    return check.result("recall 1.0 on " + std::to_string(recovered) + "/" + std::to_string(trials) + " specs");
}

// ---- 3 ------------------------------------------------------------------------

Outcome cf_pncf_correctness() {
    Check check;
    std::vector<ClassId> unseen;
    for (int i = 0; i < 20; ++i) unseen.push_back("u" + std::to_string(i));
    auto split = ClassSplit::make({"s"}, unseen);
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        // Skewed label distribution so that frequencies differ.
        std::discrete_distribution<std::size_t> pick(unseen.size(), 0.0, 1.0, [](double x) { return 0.2 + x; });
        PseudoLabelSet p;
        for (int i = 0; i < 100000; ++i) p.labels.push_back(unseen[pick(rng)]);
        check.expect(pseudo_label_histogram(p, split) == oracle::count_labels(p.labels, split.unseen),
                     "histogram differs from recount");
        ClassPriors uniform;
        for (const auto& c : unseen) uniform[c] = 1.0 / static_cast<double>(unseen.size());
        for (std::size_t k : {1u, 5u, 20u}) {
            auto cf = select_cfbs(p, split, k, 3, nullptr, HardnessMetric::cf, 11);
            auto pn = select_cfbs(p, split, k, 3, &uniform, HardnessMetric::pncf, 11);
            check.expect(cf.hardness.hard == pn.hardness.hard && cf.rows == pn.rows,
                         "uniform PnCF differs from CF at K=" + std::to_string(k));
        }
    }

    std::size_t cf_flags = 0, pncf_flags = 0;
    const std::size_t seeds = 10;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        BenchmarkSpec spec;
        spec.seed = seed;
        spec.unbalanced = true;
        auto b = make_benchmark(spec);
        const auto& bundle = b.bundle;
        BaseModelConfig base;
        auto p0 = train_and_predict(bundle.train_seen, bundle.semantics, bundle.split.unseen, bundle.test_unseen, base,
                                    substream_seed(seed, "fit"));
        // One member of each planted pair absorbs the other, so only hard_pairs classes
        // are under-predicted; a larger K makes PnCF pick among easy classes tied at f/p = N.
        const std::size_t k = spec.hard_pairs;
        auto cf = identify_cf(p0, bundle.split, k, HardnessMetric::cf, nullptr).hard;
        auto pn = identify_cf(p0, bundle.split, k, HardnessMetric::pncf, &*bundle.class_priors).hard;
        bool cf_flag = std::count(cf.begin(), cf.end(), *b.shrunken_class) > 0;
        bool pn_flag = std::count(pn.begin(), pn.end(), *b.shrunken_class) > 0;
        cf_flags += cf_flag;
        pncf_flags += pn_flag;
        check.expect(cf_flag && !pn_flag, "seed " + std::to_string(seed) + ": CF flags shrunken class " +
                                              (cf_flag ? "yes" : "no") + ", PnCF " + (pn_flag ? "yes" : "no"));
    }
    return check.result("histogram exact on 5x10^5 labels; uniform PnCF == CF; shrunken class flagged by CF in " +
                        std::to_string(cf_flags) + "/" + std::to_string(seeds) + " seeds, by PnCF in " +
                        std::to_string(pncf_flags) + "/" + std::to_string(seeds));
}

// ---- 4 ------------------------------------------------------------------------

// Support classes by exhaustive cosine ranking (independent of the library).
std::vector<ClassId> oracle_support(const ClassId& h, const SemanticTable& sem, const ClassSplit& split, std::size_t s) {
    std::vector<std::pair<double, ClassId>> order;
    for (const auto& c : split.seen) order.emplace_back(oracle::cosine_distance(sem.at(h), sem.at(c)), c);
    std::sort(order.begin(), order.end());
    std::vector<ClassId> out;
    for (std::size_t i = 0; i < s; ++i) out.push_back(order[i].second);
    return out;
}

Outcome synthesis_provenance() {
    Check check;
    BenchmarkSpec spec;
    spec.seed = 17;
    spec.unbalanced = false;
    auto b = make_benchmark(spec);
    const auto& bundle = b.bundle;
    const auto& sem = bundle.semantics;
    std::map<ClassId, std::size_t> train_counts = oracle::count_labels(bundle.train_seen.labels(), bundle.split.seen);
    // Uneven class sizes make N_s depend on which support classes are chosen.
    FeatureTable train(bundle.train_seen.dim());
    for (std::size_t r = 0; r < bundle.train_seen.rows(); ++r) {
        const auto& l = bundle.train_seen.label(r);
        auto idx = static_cast<std::size_t>(l.back() - '0');
        if (r % 100 < 40 + 5 * idx) train.add_row(bundle.train_seen.row(r), l);
    }
    train_counts = oracle::count_labels(train.labels(), bundle.split.seen);

    double worst = 0.0;
    std::size_t rows_checked = 0, grid_points = 0;
    auto gen = fit_generator(train, SynthSet{}, sem, 0.1);
    for (double alpha : {0.0, 0.3, 0.5, 1.0, 1.7, 2.0, 3.5}) {
        for (std::size_t support : {1u, 2u, 3u, 5u}) {
            auto synth = synthesize_hard_seen(train, sem, bundle.split, b.planted_hard, alpha, support, 99);
            std::map<ClassId, std::size_t> per;
            for (const auto& row : synth.rows) {
                ++per[row.label];
                ++rows_checked;
                const double g = row.gamma;
                check.expect(g > 0.0 && g < 1.0, "gamma outside (0,1)");
                auto sup = oracle_support(row.label, sem, bundle.split, support);
                check.expect(std::find(sup.begin(), sup.end(), row.sources[0]) != sup.end() &&
                                 std::find(sup.begin(), sup.end(), row.sources[1]) != sup.end(),
                             "source outside the support set");
                check.expect(train.label(row.source_rows[0]) == row.sources[0] &&
                                 train.label(row.source_rows[1]) == row.sources[1],
                             "source row label mismatch");
                auto xi = train.row(row.source_rows[0]), xj = train.row(row.source_rows[1]);
                for (std::size_t d = 0; d < xi.size(); ++d) {
                    double want = g * static_cast<double>(xi[d]) + (1.0 - g) * static_cast<double>(xj[d]);
                    worst = std::max(worst, std::abs(row.visual[d] - want));
                }
                const auto& ei = sem.at(row.sources[0]);
                const auto& ej = sem.at(row.sources[1]);
                for (std::size_t d = 0; d < ei.size(); ++d) {
                    worst = std::max(worst, std::abs(row.semantic[d] - (g * ei[d] + (1.0 - g) * ej[d])));
                }
            }
            for (const auto& h : b.planted_hard) {
                std::size_t n_s = 0;
                for (const auto& c : oracle_support(h, sem, bundle.split, support)) n_s += train_counts.at(c);
                auto want = static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n_s) + 0.5));
                ++grid_points;
                check.expect(per[h] == want, "alpha=" + fmt(alpha, 1) + " S=" + std::to_string(support) + " class " + h +
                                                 ": " + std::to_string(per[h]) + " rows, expected " + std::to_string(want));
            }
        }
    }
    check.expect(worst <= 1e-12, "max provenance error " + std::to_string(worst));

    for (double beta : {1.0, 1.25, 1.5, 2.0, 3.0}) {
        for (std::size_t n_u : {1u, 3u, 10u, 50u, 300u}) {
            auto synth = synthesize_unseen(gen, sem, bundle.split, b.planted_hard, n_u, beta, 5);
            std::map<ClassId, std::size_t> per;
            for (const auto& row : synth.rows) ++per[row.label];
            for (const auto& c : bundle.split.unseen) {
                bool hard = std::binary_search(b.planted_hard.begin(), b.planted_hard.end(), c);
                auto want = hard ? static_cast<std::size_t>(std::floor(beta * static_cast<double>(n_u) + 0.5)) : n_u;
                ++grid_points;
                check.expect(per[c] == want, "beta=" + fmt(beta, 2) + " N_u=" + std::to_string(n_u) + " class " + c);
            }
        }
    }
    return check.result(std::to_string(rows_checked) + " rows recomputed, max error " + fmt(worst, 17) + "; " +
                        std::to_string(grid_points) + " count checks");
}

// ---- 5 ------------------------------------------------------------------------

Outcome reductions() {
    Check check;
    std::size_t hars_cases = 0, harst_cases = 0;
    for (std::uint64_t seed : {0u, 1u, 2u}) {
        BenchmarkSpec spec;
        spec.seed = seed;
        auto b = make_benchmark(spec);
        for (std::size_t k : {1u, 4u, 8u}) {
            HarsConfig cfg;
            cfg.seed = 100 + seed;
            cfg.k = k;
            cfg.alpha = 0.0;
            cfg.beta = 1.0;
            auto r = run_hars(b.bundle, cfg);
            check.expect(r.predictions == run_generative_baseline(b.bundle, cfg),
                         "HarS(alpha=0, beta=1) differs from baseline, seed " + std::to_string(seed) + " K=" +
                             std::to_string(k));
            ++hars_cases;
        }
        // Pool smaller than K: every quota floor(t M / (T K)) is zero.
        DatasetBundle small = b.bundle;
        FeatureTable pool(b.bundle.test_unseen.dim());
        for (std::size_t r = 0; r < 5; ++r) pool.add_row(b.bundle.test_unseen.row(r * 100), b.bundle.test_unseen.label(r * 100));
        small.test_unseen = pool;
        small.class_priors.reset();
        for (std::size_t t : {1u, 3u}) {
            for (auto kind : {BaseModelKind::embedding, BaseModelKind::generative}) {
                HarstConfig cfg;
                cfg.seed = 200 + seed;
                cfg.k = 8;
                cfg.iterations = t;
                cfg.base.kind = kind;
                cfg.base.n_unseen = 50;
                auto r = run_harst(small, cfg);
                auto inductive = train_and_predict(small.train_seen, small.semantics, small.split.unseen, small.test_unseen,
                                                   cfg.base, substream_seed(cfg.seed, "fit"));
                bool empty = true;
                for (const auto& it : r.trace.iterations) empty = empty && it.selection.size() == 0;
                check.expect(empty && r.predictions == inductive,
                             "HarST with zero quota differs from inductive prediction, seed " + std::to_string(seed));
                ++harst_cases;
            }
        }
    }
    return check.result(std::to_string(hars_cases) + " HarS and " + std::to_string(harst_cases) +
                        " HarST reduction cases identical");
}

// ---- 6 ------------------------------------------------------------------------

Outcome improvement_direction() {
    Check check;
    const std::size_t seeds = 10;
    double base = 0, hars = 0, initial = 0, final_cfbs = 0, final_rs = 0;
    std::size_t hars_wins = 0, harst_wins = 0, cfbs_wins = 0;
    for (std::uint64_t seed = 0; seed < seeds; ++seed) {
        BenchmarkSpec spec;
        spec.seed = seed;
        auto b = make_benchmark(spec);
        const std::size_t k = b.planted_hard.size();

        HarsConfig hc;
        hc.seed = seed;
        hc.k = k;
        auto hr = run_hars(b.bundle, hc);
        auto truths = b.bundle.test_unseen.labels();
        double acc_base = *evaluate(run_generative_baseline(b.bundle, hc), truths, b.bundle.split).acc_u;
        double acc_hars = *hr.report->acc_u;

        HarstConfig tc;
        tc.seed = seed;
        tc.k = k;
        tc.iterations = 5;
        auto cf = run_harst(b.bundle, tc);
        tc.selection = SelectionMode::random;
        auto rs = run_harst(b.bundle, tc);
        double acc_init = *cf.trace.initial_report->acc_u;
        double acc_cf = *cf.trace.iterations.back().report->acc_u;
        double acc_rs = *rs.trace.iterations.back().report->acc_u;

        base += acc_base;
        hars += acc_hars;
        initial += acc_init;
        final_cfbs += acc_cf;
        final_rs += acc_rs;
        hars_wins += acc_hars > acc_base;
        harst_wins += acc_cf > acc_init;
        cfbs_wins += acc_cf >= acc_rs;
        std::printf("    seed %llu: base %.4f hars %.4f | harst initial %.4f cfbs %.4f rs %.4f\n",
                    static_cast<unsigned long long>(seed), acc_base, acc_hars, acc_init, acc_cf, acc_rs);
    }
    const double n = static_cast<double>(seeds);
    base /= n;
    hars /= n;
    initial /= n;
    final_cfbs /= n;
    final_rs /= n;
    check.expect(hars > base, "HarS mean " + fmt(hars) + " <= baseline " + fmt(base));
    check.expect(final_cfbs > initial, "HarST final " + fmt(final_cfbs) + " <= initial " + fmt(initial));
    check.expect(final_cfbs >= final_rs, "CFBS final " + fmt(final_cfbs) + " < RS final " + fmt(final_rs));
    return check.result("HarS " + fmt(hars) + " vs baseline " + fmt(base) + " (" + std::to_string(hars_wins) +
                        "/10 seeds); HarST final " + fmt(final_cfbs) + " vs initial " + fmt(initial) + " (" +
                        std::to_string(harst_wins) + "/10); CFBS " + fmt(final_cfbs) + " vs RS " + fmt(final_rs) +
                        " (" + std::to_string(cfbs_wins) + "/10)");
}

// ---- 7 ------------------------------------------------------------------------

Outcome quota_arithmetic() {
    Check check;
    std::size_t cases = 0;
    for (std::size_t T : {4u, 5u, 6u, 9u, 12u}) {
        for (std::size_t t = 1; t <= 12 && t <= T; ++t) {
            for (std::size_t m = 50; m <= 5000; ++m) {
                for (std::size_t k = 3; k <= 36; ++k) {
                    auto want = static_cast<std::size_t>(
                        std::floor(static_cast<long double>(t) * m / (static_cast<long double>(T) * k)));
                    check.expect(selection_quota(t, m, T, k) == want,
                                 "t=" + std::to_string(t) + " M=" + std::to_string(m) + " T=" + std::to_string(T) +
                                     " K=" + std::to_string(k));
                    ++cases;
                }
            }
        }
    }
    return check.result(std::to_string(cases) + " grid points exact");
}

// ---- 8 ------------------------------------------------------------------------

Outcome gradient_check() {
    Check check;
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index k = 2 + trial % 4, v = 1 + trial % 5, n = 3 + trial % 7;
        Eigen::MatrixXd w(k, v), x(n, v);
        Eigen::VectorXd b(k);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = g(rng);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 2.0 * g(rng);
        for (Eigen::Index i = 0; i < k; ++i) b(i) = g(rng);
        std::vector<std::size_t> y;
        for (Eigen::Index i = 0; i < n; ++i) y.push_back(rng() % static_cast<std::size_t>(k));
        auto grad = softmax_cross_entropy_gradient(w, b, x, y);
        // Central differences of the independent plain-loop loss.
        auto loss = [&](const Eigen::MatrixXd& ww, const Eigen::VectorXd& bb) {
            std::vector<std::vector<double>> wv(static_cast<std::size_t>(k)), xv(static_cast<std::size_t>(n));
            for (Eigen::Index c = 0; c < k; ++c)
                for (Eigen::Index d = 0; d < v; ++d) wv[static_cast<std::size_t>(c)].push_back(ww(c, d));
            for (Eigen::Index r = 0; r < n; ++r)
                for (Eigen::Index d = 0; d < v; ++d) xv[static_cast<std::size_t>(r)].push_back(x(r, d));
            std::vector<double> bv(bb.data(), bb.data() + k);
            return oracle::cross_entropy(wv, bv, xv, y);
        };
        const double h = 1e-5;
        auto compare = [&](double analytic, double numeric) {
            double rel = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
            worst = std::max(worst, rel);
            check.expect(rel <= 1e-4, "trial " + std::to_string(trial) + " relative error " + std::to_string(rel));
        };
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            Eigen::MatrixXd wp = w, wm = w;
            wp.data()[i] += h;
            wm.data()[i] -= h;
            compare(grad.weights.data()[i], (loss(wp, b) - loss(wm, b)) / (2 * h));
        }
        for (Eigen::Index i = 0; i < k; ++i) {
            Eigen::VectorXd bp = b, bm = b;
            bp(i) += h;
            bm(i) -= h;
            compare(grad.bias(i), (loss(w, bp) - loss(w, bm)) / (2 * h));
        }
    }
    return check.result("20 instances, max relative error " + fmt(worst, 8));
}

// ---- 9 ------------------------------------------------------------------------

Outcome apr_amr_oracle() {
    Check check;
    ScopedWarningHandler quiet([](const std::string&) {});
    std::size_t values = 0;
    for (const auto& [name, h] : {std::pair{"3-class", fixtures::three_class()}, std::pair{"5-class", fixtures::five_class()}}) {
        for (const auto& [k, v] : h.apr) {
            double got = apr(h.cm, h.sim, k).value;
            check.expect(got == v, std::string(name) + " APR k=" + std::to_string(k) + " = " + fmt(got, 17));
            ++values;
        }
        for (const auto& [k, v] : h.amr) {
            double got = amr(h.cm, h.sim, k).value;
            check.expect(got == v, std::string(name) + " AMR k=" + std::to_string(k) + " = " + fmt(got, 17));
            ++values;
        }
        const std::size_t sat = h.cm.size() - 1;
        check.expect(apr(h.cm, h.sim, sat).value == 1.0 && amr(h.cm, h.sim, sat).value == 1.0,
                     std::string(name) + " k=C-1 does not saturate");
    }
    return check.result(std::to_string(values) + " hand-computed values exact, k=C-1 saturates to 1.0");
}

// ---- 10 -----------------------------------------------------------------------

Outcome determinism() {
    Check check;
    namespace fs = std::filesystem;
    auto root = clitest::fresh_dir("acceptance");
    clitest::write_text(root / "spec.json", R"({"n_per_class": 40, "test_seen_per_class": 10, "seed": 21})");
    clitest::write_text(root / "config.json", R"({"K": 4, "T": 3, "N_u": 100})");
    clitest::write_text(root / "grid.json", R"({"beta": [1, 2], "K": [2, 4]})");
    const auto data = (root / "data").string(), config = (root / "config.json").string();

    std::vector<std::pair<std::string, std::vector<std::string>>> commands = {
        {"synth", {"synth", "--spec", (root / "spec.json").string()}},
        {"identify-ss", {"identify", "--metric", "ss", "--data", data, "--k", "4"}},
        {"hars", {"hars", "--data", data, "--config", config}},
        {"harst", {"harst", "--data", data, "--config", config}},
        {"eval", {"eval", "--data", data, "--cap", "20", "--preds", (root / "hars_a" / "predictions.csv").string()}},
        {"identify-cf", {"identify", "--metric", "cf", "--data", data, "--k", "2", "--preds",
                         (root / "hars_a" / "predictions.csv").string()}},
        {"identify-pncf", {"identify", "--metric", "pncf", "--data", data, "--k", "2", "--preds",
                           (root / "hars_a" / "predictions.csv").string()}},
        {"analyze-inductive", {"analyze", "--data", data, "--variant", "inductive", "--n", "30", "--config", config}},
        {"analyze-transductive", {"analyze", "--data", data, "--variant", "transductive", "--n", "10"}},
        {"sweep", {"sweep", "--data", data, "--grid", (root / "grid.json").string(), "--config", config}},
        {"sweep-harst", {"sweep", "--data", data, "--grid", (root / "grid.json").string(), "--config", config,
                         "--pipeline", "harst"}},
    };
    std::size_t identical = 0;
    for (auto [name, args] : commands) {
        auto a = root / (name + "_a"), b = root / (name + "_b");
        if (name == "synth") a = root / "data";
        auto ra = args, rb = args;
        ra.insert(ra.end(), {"--out", a.string()});
        rb.insert(rb.end(), {"--out", b.string()});
        auto first = clitest::run(ra);
        auto second = clitest::run(rb);
        check.expect(first.code == 0 && second.code == 0, name + " exited " + std::to_string(first.code) + "/" +
                                                              std::to_string(second.code) + ": " + first.err);
        auto sa = clitest::snapshot(a), sb = clitest::snapshot(b);
        if (name == "synth") {
            // The bundle directory also receives later outputs; compare only what synth wrote.
            for (auto it = sa.begin(); it != sa.end();) it = sb.count(it->first) ? std::next(it) : sa.erase(it);
        }
        bool same = !sa.empty() && sa == sb;
        identical += same;
        check.expect(same, name + " outputs differ between runs");
    }

    // Re-running from the recorded manifest config reproduces the outputs.
    auto manifest = parse_json_file(root / "hars_a" / "manifest.json");
    clitest::write_text(root / "manifest_config.json", manifest["config"].dump());
    auto rerun = clitest::run({"hars", "--data", data, "--config", (root / "manifest_config.json").string(), "--out",
                               (root / "hars_manifest").string()});
    check.expect(rerun.code == 0, "manifest rerun failed: " + rerun.err);
    for (auto f : {"predictions.csv", "hardness.json", "report.json"}) {
        check.expect(detail::read_file(root / "hars_a" / f) == detail::read_file(root / "hars_manifest" / f),
                     std::string("manifest rerun differs in ") + f);
    }
    return check.result(std::to_string(identical) + "/" + std::to_string(commands.size()) +
                        " subcommand runs byte-identical (manifest duration excluded); manifest config rerun identical");
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "harmonic mean fidelity", harmonic_mean_fidelity},
        {2, "SS-metric soundness", ss_soundness},
        {3, "CF/PnCF correctness", cf_pncf_correctness},
        {4, "interpolation provenance and counts", synthesis_provenance},
        {5, "reduction properties", reductions},
        {6, "improvement direction", improvement_direction},
        {7, "quota arithmetic", quota_arithmetic},
        {8, "gradient check", gradient_check},
        {9, "APR/AMR oracle", apr_amr_oracle},
        {10, "determinism", determinism},
    };
    ScopedWarningHandler quiet([](const std::string&) {});
    int failed = 0;
    for (const auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] %2d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += !o.pass;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
