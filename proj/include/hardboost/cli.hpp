#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hardboost/analysis.hpp"
#include "hardboost/bench.hpp"
#include "hardboost/config.hpp"
#include "hardboost/error.hpp"
#include "hardboost/eval.hpp"
#include "hardboost/hardness.hpp"
#include "hardboost/hars.hpp"
#include "hardboost/harst.hpp"
#include "hardboost/io.hpp"
#include "hardboost/random.hpp"
#include "hardboost/validate.hpp"

namespace hardboost::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

// Record of one run. Everything except duration_seconds is a pure function of
// the command, the effective config and the input bytes.
struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> inputs;  // path -> FNV-1a 64 digest (hex)
    double duration_seconds = 0.0;
};

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline std::string digest_file(const fs::path& p) { return hex64(fnv1a64(detail::read_file(p))); }

inline void add_input(RunManifest& m, const fs::path& p) {
    if (fs::is_directory(p)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(p)) {
            if (entry.is_regular_file()) files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) m.inputs[(p / f.filename()).generic_string()] = digest_file(f);
    } else {
        m.inputs[p.generic_string()] = digest_file(p);
    }
}

inline nlohmann::json to_json(const RunManifest& m) {
    return {{"command", m.command},
            {"config", m.config},
            {"config_hash", hex64(fnv1a64(m.config.dump()))},
            {"seed", m.seed},
            {"inputs", m.inputs},
            {"version", kVersion},
            {"duration_seconds", m.duration_seconds}};
}

// Worker count for sweeps: HARDBOOST_THREADS when set to a positive integer,
// otherwise the hardware concurrency.
inline std::size_t thread_budget() {
    if (const char* env = std::getenv("HARDBOOST_THREADS")) {
        std::size_t n = 0;
        auto [ptr, ec] = std::from_chars(env, env + std::strlen(env), n);
        if (ec == std::errc() && *ptr == '\0' && n > 0) return n;
        warn("HARDBOOST_THREADS='" + std::string(env) + "' is not a positive integer; ignoring it");
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Runs f(i) for i in [0, n) on up to `threads` workers.
inline void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& f) {
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) f(i);
        });
    }
    for (auto& t : pool) t.join();
}

inline RunConfig load_config(const std::string& path, std::optional<std::uint64_t> seed_override) {
    RunConfig c = path.empty() ? RunConfig{} : config_from_json(parse_json_file(path), path);
    if (seed_override) c.seed = *seed_override;
    return c;
}

inline nlohmann::json report_json(EvalReport report, const SemanticTable& semantics) {
    add_confusion_diagnostics(report, semantics, {1, 2});
    return to_json(report);
}

// Rows the predictions refer to: test_unseen, followed by test_seen when the
// prediction count covers both tables.
inline std::vector<ClassId> eval_truths(const DatasetBundle& b, std::size_t n_preds) {
    std::vector<ClassId> truths = b.test_unseen.labels();
    if (n_preds == truths.size()) return truths;
    if (b.test_seen && n_preds == truths.size() + b.test_seen->rows()) {
        truths.insert(truths.end(), b.test_seen->labels().begin(), b.test_seen->labels().end());
        return truths;
    }
    throw ValidationError("eval: " + std::to_string(n_preds) + " predictions do not match test_unseen (" +
                          std::to_string(b.test_unseen.rows()) + " rows) or test_unseen + test_seen");
}

inline void write_json(const fs::path& p, const nlohmann::json& j) { write_file_atomic(p, dump_json(j)); }

inline void write_manifest(const fs::path& out, RunManifest m, std::chrono::steady_clock::time_point start) {
    m.duration_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_json(out / "manifest.json", to_json(m));
}

// ---- subcommands --------------------------------------------------------------

struct SynthArgs {
    std::string spec, out;
    std::optional<std::uint64_t> seed;
};

inline void run_synth(const SynthArgs& a) {
    auto start = std::chrono::steady_clock::now();
    auto spec = spec_from_json(parse_json_file(a.spec), a.spec);
    if (a.seed) spec.seed = *a.seed;
    auto bench = make_benchmark(spec);
    validate_bundle(bench.bundle);
    save_bundle(a.out, bench.bundle);
    write_json(fs::path(a.out) / "ground_truth.json", ground_truth_json(bench));
    RunManifest m{"synth", to_json(spec), spec.seed, {}, 0.0};
    add_input(m, a.spec);
    write_manifest(a.out, m, start);
}

struct IdentifyArgs {
    std::string metric, data, preds, out = ".";
    std::size_t k = 0;
    std::optional<std::uint64_t> seed;
};

inline void run_identify(const IdentifyArgs& a) {
    auto start = std::chrono::steady_clock::now();
    auto bundle = load_bundle(a.data);
    validate_bundle(bundle);
    const auto metric = parse_metric(a.metric);
    const std::uint64_t seed = a.seed.value_or(0);
    RunManifest m{"identify", {{"metric", a.metric}, {"K", a.k}}, seed, {}, 0.0};
    add_input(m, a.data);
    HardnessReport report;
    if (metric == HardnessMetric::ss) {
        report = identify_ss(bundle.semantics, bundle.split, a.k);
    } else {
        if (a.preds.empty()) throw ValidationError("identify: --preds is required for the cf and pncf metrics");
        add_input(m, a.preds);
        auto preds = decode_predictions_csv(detail::read_file(a.preds), a.preds);
        std::optional<ClassPriors> priors;
        if (metric == HardnessMetric::pncf) {
            if (bundle.class_priors) {
                priors = bundle.class_priors;
            } else {
                auto view = detail::unseen_view(preds, bundle.split);
                if (preds.size() != bundle.test_unseen.rows()) {
                    throw ValidationError("identify: prior estimation needs one prediction per test_unseen row");
                }
                FeatureTable rows(bundle.test_unseen.dim());
                for (auto r : view.pool_rows) rows.add_row(bundle.test_unseen.row(r), kUnlabeled);
                priors = estimate_class_priors(rows, bundle.split, substream_seed(seed, "priors"), view.labels);
                write_json(fs::path(a.out) / "estimated_priors.json", nlohmann::json(*priors));
            }
        }
        report = identify_cf(preds, bundle.split, a.k, metric, priors ? &*priors : nullptr);
    }
    write_json(fs::path(a.out) / "hardness.json", to_json(report));
    write_manifest(a.out, m, start);
}

struct PipelineArgs {
    std::string data, config, out;
    std::optional<std::uint64_t> seed;
};

inline void run_hars_command(const PipelineArgs& a) {
    auto start = std::chrono::steady_clock::now();
    auto cfg = load_config(a.config, a.seed);
    auto bundle = load_bundle(a.data);
    validate_bundle(bundle);
    auto result = run_hars(bundle, hars_config(cfg));
    fs::path out(a.out);
    write_file_atomic(out / "predictions.csv", encode_predictions_csv(result.predictions));
    write_json(out / "hardness.json", to_json(result.hardness));
    if (result.report) write_json(out / "report.json", report_json(*result.report, bundle.semantics));
    RunManifest m{"hars", to_json(cfg), cfg.seed, {}, 0.0};
    add_input(m, a.data);
    if (!a.config.empty()) add_input(m, a.config);
    write_manifest(out, m, start);
}

inline void run_harst_command(const PipelineArgs& a) {
    auto start = std::chrono::steady_clock::now();
    auto cfg = load_config(a.config, a.seed);
    auto bundle = load_bundle(a.data);
    validate_bundle(bundle);
    auto result = run_harst(bundle, harst_config(cfg));
    fs::path out(a.out);
    write_file_atomic(out / "predictions.csv", encode_predictions_csv(result.predictions));
    write_json(out / "trace.json", to_json(result.trace));
    RunManifest m{"harst", to_json(cfg), cfg.seed, {}, 0.0};
    add_input(m, a.data);
    if (!a.config.empty()) add_input(m, a.config);
    write_manifest(out, m, start);
}

struct EvalArgs {
    std::string preds, data, out = ".";
    std::optional<std::size_t> cap;
    std::optional<std::uint64_t> seed;
};

inline void run_eval(const EvalArgs& a) {
    auto start = std::chrono::steady_clock::now();
    auto bundle = load_bundle(a.data);
    validate_bundle(bundle);
    auto preds = decode_predictions_csv(detail::read_file(a.preds), a.preds);
    auto truths = eval_truths(bundle, preds.size());
    for (const auto& t : truths) {
        if (t == kUnlabeled) throw ValidationError("eval: the test tables carry no true labels");
    }
    auto report = evaluate(preds, truths, bundle.split);
    const std::uint64_t seed = a.seed.value_or(0);
    if (a.cap) report.confusion = confusion_matrix(preds, truths, bundle.split, a.cap, seed);
    fs::path out(a.out);
    write_json(out / "report.json", report_json(report, bundle.semantics));
    write_file_atomic(out / "confusion.csv", encode_confusion_csv(report.confusion));
    nlohmann::json cfg = {{"cap", a.cap ? nlohmann::json(*a.cap) : nlohmann::json(nullptr)}};
    RunManifest m{"eval", cfg, seed, {}, 0.0};
    add_input(m, a.data);
    add_input(m, a.preds);
    write_manifest(out, m, start);
}

struct AnalyzeArgs {
    std::string data, config, out, variant = "inductive", base;
    std::size_t n = 0;
    std::optional<std::uint64_t> seed;
};

inline void run_analyze(const AnalyzeArgs& a) {
    auto start = std::chrono::steady_clock::now();
    auto cfg = load_config(a.config, a.seed);
    const auto variant = parse_variant(a.variant);
    if (!a.base.empty()) {
        cfg.base_model = parse_base_model(a.base);
    } else if (variant == AnalysisVariant::inductive) {
        cfg.base_model = BaseModelKind::generative;
    }
    auto bundle = load_bundle(a.data);
    validate_bundle(bundle);
    const auto base = base_config(cfg);
    auto oracle = reference_oracle(bundle, base, cfg.seed);
    auto result = contrastive_analysis(bundle, base, variant, a.n, oracle, cfg.seed);
    auto j = to_json(result);
    if (variant == AnalysisVariant::transductive) {
        auto p0 = train_and_predict(bundle.train_seen, bundle.semantics, bundle.split.unseen, bundle.test_unseen, base,
                                    substream_seed(cfg.seed, "oracle"));
        j["pseudo_label_precision"] = to_json(pseudo_label_precision(p0, bundle.test_unseen.labels(), bundle.split, oracle));
    }
    fs::path out(a.out);
    write_json(out / "contrastive.json", j);
    auto mcfg = to_json(cfg);
    mcfg["variant"] = a.variant;
    mcfg["n"] = a.n;
    RunManifest m{"analyze", mcfg, cfg.seed, {}, 0.0};
    add_input(m, a.data);
    if (!a.config.empty()) add_input(m, a.config);
    write_manifest(out, m, start);
}

struct SweepArgs {
    std::string data, config, grid, out, pipeline = "hars";
    std::optional<std::uint64_t> seed;
};

struct SweepPoint {
    std::size_t k = 0, t = 0;
    double alpha = 0.0, beta = 0.0;
};

// Cartesian product over the grid's K, T, alpha and beta lists (in that
// nesting order); missing keys take the config value.
inline std::vector<SweepPoint> expand_grid(const nlohmann::json& grid, const RunConfig& cfg, const std::string& what) {
    if (!grid.is_object()) throw ValidationError(what + ": expected a JSON object");
    for (auto it = grid.begin(); it != grid.end(); ++it) {
        if (it.key() != "K" && it.key() != "T" && it.key() != "alpha" && it.key() != "beta") {
            throw ValidationError(what + ": unknown grid key '" + it.key() + "' (expected K, T, alpha, beta)");
        }
        if (!it.value().is_array() || it.value().empty()) {
            throw ValidationError(what + ": grid entry '" + it.key() + "' must be a non-empty array");
        }
    }
    auto values = [&](const char* key, auto fallback) {
        using T = decltype(fallback);
        if (!grid.contains(key)) return std::vector<T>{fallback};
        try {
            return grid.at(key).get<std::vector<T>>();
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(what + ": grid entry '" + key + "' has the wrong type: " + e.what());
        }
    };
    std::vector<SweepPoint> points;
    for (auto k : values("K", cfg.k)) {
        for (auto t : values("T", cfg.iterations)) {
            for (auto alpha : values("alpha", cfg.alpha)) {
                for (auto beta : values("beta", cfg.beta)) points.push_back({k, t, alpha, beta});
            }
        }
    }
    return points;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? detail::format_number(*v) : ""; }

inline void run_sweep(const SweepArgs& a) {
    auto start = std::chrono::steady_clock::now();
    auto cfg = load_config(a.config, a.seed);
    if (a.pipeline != "hars" && a.pipeline != "harst") {
        throw ValidationError("sweep: --pipeline must be hars or harst");
    }
    auto points = expand_grid(parse_json_file(a.grid), cfg, a.grid);
    auto bundle = load_bundle(a.data);
    validate_bundle(bundle);
    if (!bundle.test_unseen.is_labeled()) throw ValidationError("sweep: test_unseen must carry true labels");

    std::vector<std::string> rows(points.size());
    parallel_for(points.size(), thread_budget(), [&](std::size_t i) {
        const auto& p = points[i];
        RunConfig c = cfg;
        c.k = p.k;
        c.iterations = p.t;
        c.alpha = p.alpha;
        c.beta = p.beta;
        std::string acc, status = "ok";
        try {
            std::optional<double> value;
            if (a.pipeline == "hars") {
                value = run_hars(bundle, hars_config(c)).report->acc_u;
            } else {
                auto r = run_harst(bundle, harst_config(c));
                value = r.trace.iterations.back().report->acc_u;
            }
            acc = format_optional(value);
        } catch (const std::exception& e) {
            status = e.what();
            std::replace(status.begin(), status.end(), ',', ';');
            std::replace(status.begin(), status.end(), '\n', ' ');
        }
        rows[i] = std::to_string(i) + "," + std::to_string(p.k) + "," + std::to_string(p.t) + "," +
                  detail::format_number(p.alpha) + "," + detail::format_number(p.beta) + "," + acc + "," + status + "\n";
    });
    std::string csv = "point,K,T,alpha,beta,acc_u,status\n";
    for (const auto& r : rows) csv += r;
    fs::path out(a.out);
    write_file_atomic(out / "sweep.csv", csv);
    auto mcfg = to_json(cfg);
    mcfg["pipeline"] = a.pipeline;
    RunManifest m{"sweep", mcfg, cfg.seed, {}, 0.0};
    add_input(m, a.data);
    add_input(m, a.grid);
    if (!a.config.empty()) add_input(m, a.config);
    write_manifest(out, m, start);
}

// ---- dispatch -------------------------------------------------------------------

inline int dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Hard-class toolkit for zero-shot learning", "hardboost"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s_synth = app.add_subcommand("synth", "Generate a planted synthetic benchmark");
    s_synth->add_option("--spec", synth.spec, "Benchmark spec (JSON)")->required();
    s_synth->add_option("--out", synth.out, "Output directory")->required();
    s_synth->add_option("--seed", synth.seed, "Override the spec seed");

    IdentifyArgs identify;
    auto* s_identify = app.add_subcommand("identify", "Rank hard unseen classes");
    s_identify->add_option("--metric", identify.metric, "ss, cf or pncf")->required()->check(CLI::IsMember({"ss", "cf", "pncf"}));
    s_identify->add_option("--data", identify.data, "Dataset directory")->required();
    s_identify->add_option("--k", identify.k, "Number of hard classes")->required();
    s_identify->add_option("--preds", identify.preds, "Pseudo labels (predictions CSV), for cf and pncf");
    s_identify->add_option("--out", identify.out, "Output directory");
    s_identify->add_option("--seed", identify.seed, "Seed for prior estimation");

    PipelineArgs hars, harst;
    auto* s_hars = app.add_subcommand("hars", "Inductive hardness-based synthesizing pipeline");
    auto* s_harst = app.add_subcommand("harst", "Transductive hardness-based selecting pipeline");
    for (auto [sub, pa] : {std::pair{s_hars, &hars}, std::pair{s_harst, &harst}}) {
        sub->add_option("--data", pa->data, "Dataset directory")->required();
        sub->add_option("--config", pa->config, "Run config (JSON)");
        sub->add_option("--out", pa->out, "Output directory")->required();
        sub->add_option("--seed", pa->seed, "Override the config seed");
    }

    EvalArgs eval;
    auto* s_eval = app.add_subcommand("eval", "Evaluate predictions against a dataset");
    s_eval->add_option("--preds", eval.preds, "Predictions CSV")->required();
    s_eval->add_option("--data", eval.data, "Dataset directory")->required();
    s_eval->add_option("--out", eval.out, "Output directory");
    s_eval->add_option("--cap", eval.cap, "Rows per class sampled for the confusion matrix");
    s_eval->add_option("--seed", eval.seed, "Seed for confusion-matrix subsampling");

    AnalyzeArgs analyze;
    auto* s_analyze = app.add_subcommand("analyze", "Contrastive easy/hard analysis");
    s_analyze->add_option("--data", analyze.data, "Dataset directory")->required();
    s_analyze->add_option("--out", analyze.out, "Output directory")->required();
    s_analyze->add_option("--variant", analyze.variant, "inductive or transductive")
        ->check(CLI::IsMember({"inductive", "transductive"}));
    s_analyze->add_option("--n", analyze.n, "N1 (inductive) or N2 (transductive)")->required();
    s_analyze->add_option("--base", analyze.base, "embedding or generative")->check(CLI::IsMember({"embedding", "generative"}));
    s_analyze->add_option("--config", analyze.config, "Run config (JSON)");
    s_analyze->add_option("--seed", analyze.seed, "Override the config seed");

    SweepArgs sweep;
    auto* s_sweep = app.add_subcommand("sweep", "Hyper-parameter sweep over K, T, alpha, beta");
    s_sweep->add_option("--data", sweep.data, "Dataset directory")->required();
    s_sweep->add_option("--grid", sweep.grid, "Grid (JSON object of value lists)")->required();
    s_sweep->add_option("--out", sweep.out, "Output directory")->required();
    s_sweep->add_option("--config", sweep.config, "Base run config (JSON)");
    s_sweep->add_option("--pipeline", sweep.pipeline, "hars or harst")->check(CLI::IsMember({"hars", "harst"}));
    s_sweep->add_option("--seed", sweep.seed, "Override the config seed");

    std::vector<std::string> argv_store = {"hardboost"};
    argv_store.insert(argv_store.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_store) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << "\n";
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    ScopedWarningHandler warnings([&err](const std::string& msg) { err << "warning: " << msg << "\n"; });
    try {
        if (*s_synth) run_synth(synth);
        else if (*s_identify) run_identify(identify);
        else if (*s_hars) run_hars_command(hars);
        else if (*s_harst) run_harst_command(harst);
        else if (*s_eval) run_eval(eval);
        else if (*s_analyze) run_analyze(analyze);
        else if (*s_sweep) run_sweep(sweep);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kRuntime;
    }
    return kOk;
}

inline int dispatch(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args);
}

}  // namespace hardboost::cli
