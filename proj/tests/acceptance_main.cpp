// Acceptance suite: one line per criterion, nonzero exit when any fails.
// Runs against the frozen reference configuration and the golden constants
// in golden_values.hpp.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "golden_values.hpp"
#include "procache/experiment.hpp"
#include "procache/metrics.hpp"
#include "procache/pattern.hpp"
#include "procache/rng.hpp"
#include "procache/schedule.hpp"
#include "procache/tinydit.hpp"

using namespace procache;
namespace fs = std::filesystem;

namespace {

struct Harness {
    int failures = 0;

    void run(const std::string& name, double time_limit_s,
             const std::function<void(std::string&)>& body) {
        std::string detail;
        bool ok = true;
        const auto start = std::chrono::steady_clock::now();
        try {
            body(detail);
        } catch (const std::exception& e) {
            ok = false;
            detail = std::string("exception: ") + e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && time_limit_s > 0.0 && elapsed > time_limit_s) {
            ok = false;
            detail = "time limit exceeded";
        }
        if (!ok && detail.empty()) {
            detail = "assertion failed";
        }
        std::printf("[%s] %-38s (%.2fs)%s%s\n", ok ? "PASS" : "FAIL", name.c_str(), elapsed,
                    detail.empty() ? "" : "  -- ", detail.c_str());
        std::fflush(stdout);
        failures += !ok;
    }
};

#define REQUIRE_MSG(cond, msg)                          \
    do {                                                \
        if (!(cond)) {                                  \
            throw std::runtime_error(std::string(msg)); \
        }                                               \
    } while (0)

ModelConfig reference_model() {
    ModelConfig m;  // L=8, d=64, h=4, N=16, N_ctx=8, mlp 4.0, T=20, seed=42
    return m;
}

std::set<std::vector<std::uint8_t>> as_set(const std::vector<CachingPattern>& patterns) {
    std::set<std::vector<std::uint8_t>> out;
    for (const auto& p : patterns) {
        out.insert(p.bits);
    }
    return out;
}

CachingPattern parse_bits(const std::string& s) {
    std::vector<std::uint8_t> bits;
    for (char c : s) {
        bits.push_back(c == '1' ? 1 : 0);
    }
    return CachingPattern(bits);
}

// ---- criterion bodies -----------------------------------------------------

void criterion_identity(std::string&) {
    const ModelConfig model = reference_model();
    const ModelWeights weights = init_model(model);
    const Matrix context = make_context(model);
    const Matrix x0 = gaussian_matrix(model.tokens, model.dim, input_seed(1, 0));
    const ExecutionPlan plan = build_plan(CachingPattern::all_ones(model.steps),
                                          SelectiveConfig{0.5, 0.5, model.layers});
    const RunResult cached = denoise_run(model, weights, plan, x0, context);
    EngineOptions nocache;
    nocache.disable_cache = true;
    const RunResult plain = denoise_run(model, weights, plan, x0, context, nocache);
    REQUIRE_MSG(cached.final_state == plain.final_state,
                "all-ones run differs from the cache-disabled engine");
}

void criterion_oracle_equivalence(std::string& detail) {
    int configs = 0;
    int nonempty = 0;
    for (int steps = 8; steps <= 16; ++steps) {
        for (int budget = 2; budget <= 6; ++budget) {
            for (const auto& [v_min, v_max] : {std::pair{1, 3}, std::pair{2, 4}}) {
                for (bool mono : {false, true}) {
                    const ConstraintSet cs{steps, budget, v_min, v_max, mono};
                    const auto space = enumerate_patterns(cs);
                    SearchConfig sc;
                    sc.quota = std::max<int>(1, static_cast<int>(space.size()));
                    sc.max_attempts = 1000000;
                    sc.seed = 1000 + static_cast<std::uint64_t>(configs);
                    const auto sampled = sample_patterns(cs, sc, mono);
                    REQUIRE_MSG(as_set(sampled.patterns) == as_set(space),
                                "sampler/enumerator set mismatch at T=" + std::to_string(steps) +
                                    " B=" + std::to_string(budget));
                    ++configs;
                    nonempty += !space.empty();
                }
            }
        }
    }
    REQUIRE_MSG(configs >= 50, "grid smaller than 50 configurations");
    REQUIRE_MSG(nonempty >= 50, "too few non-empty spaces exercised");
    detail = std::to_string(configs) + " configurations, " + std::to_string(nonempty) +
             " non-empty";
}

void criterion_saturation_table(std::string& detail) {
    const ConstraintSet cs{50, 17, 2, 5, true};
    const auto space = enumerate_patterns(cs);
    const long long count = static_cast<long long>(space.size());
    REQUIRE_MSG(count == golden::kEnumerationCountT50,
                "enumerator count " + std::to_string(count) + " != recorded reference " +
                    std::to_string(golden::kEnumerationCountT50));
    long long prev = -1;
    long long final_found = 0;
    std::ostringstream table;
    for (long long level : {1000LL, 10000LL, 100000LL, 1000000LL}) {
        SearchConfig sc;
        sc.quota = static_cast<int>(level);
        sc.max_attempts = level;
        sc.seed = 42;
        const auto r = sample_patterns(cs, sc, true);
        const long long found = static_cast<long long>(r.patterns.size());
        REQUIRE_MSG(found >= prev, "found-count decreased with more attempts");
        prev = found;
        final_found = found;
        table << " " << level << "->" << found;
    }
    REQUIRE_MSG(final_found == count, "sampler did not saturate by 1e6 attempts");
    detail = "count=" + std::to_string(count) + ", attempts" + table.str();
}

void criterion_injection_table(std::string&) {
    const std::vector<std::vector<int>> expected = {{}, {2}, {2}, {2, 4}, {2, 4}, {2, 4, 6}};
    for (int len = 1; len <= 6; ++len) {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(len) + 1, 0);
        bits[0] = 1;
        const auto steps = selective_steps(CachingPattern(bits));
        std::vector<int> offsets;
        for (int t : steps) {
            offsets.push_back(t - 1);
        }
        REQUIRE_MSG(offsets == expected[static_cast<std::size_t>(len) - 1],
                    "zero-block length " + std::to_string(len) + " maps to the wrong offsets");
    }
}

void criterion_flops_fidelity(std::string& detail) {
    const ModelConfig model = reference_model();
    const ModelWeights weights = init_model(model);
    const Matrix context = make_context(model);
    SplitMix64 rng(2024);
    double worst = 0.0;
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(model.steps), 0);
        bits[0] = 1;
        for (int t = 1; t < model.steps; ++t) {
            bits[static_cast<std::size_t>(t)] = rng.next() & 1;
        }
        SelectiveConfig sel;
        sel.total_layers = model.layers;
        sel.layer_ratio = 0.1 + 0.9 * rng.uniform();
        sel.token_ratio = 0.1 + 0.9 * rng.uniform();
        const ExecutionPlan plan = build_plan(CachingPattern(bits), sel);
        const double estimate = flops_estimate(plan, model, sel).total;
        EngineOptions opts;
        opts.token_ratio = sel.token_ratio;
        const Matrix x0 = gaussian_matrix(model.tokens, model.dim, rng.next());
        const double counted =
            denoise_run(model, weights, plan, x0, context, opts).counted.total_flops();
        const double rel = std::fabs(estimate - counted) / counted;
        worst = std::max(worst, rel);
        REQUIRE_MSG(rel <= 0.02, "estimate deviates " + std::to_string(100 * rel) + "% > 2%");
    }

    const SelectiveConfig sel{0.5, 0.5, model.layers};
    const auto ones = flops_estimate(
        build_plan(CachingPattern::all_ones(model.steps), sel), model, sel);
    REQUIRE_MSG(ones.speedup == 1.0, "speedup(all-ones) != 1.0");

    // Selective overhead on the dit-xl2-like preset, against the recorded value.
    const ExperimentConfig golden_cfg = make_preset("dit-xl2-like");
    const CachingPattern winner = parse_bits(golden::kGoldenSearchWinnerBits);
    const double f_sel =
        flops_estimate(build_plan(winner, golden_cfg.selective, true), golden_cfg.model,
                       golden_cfg.selective)
            .total;
    const double f_pure =
        flops_estimate(build_plan(winner, golden_cfg.selective, false), golden_cfg.model,
                       golden_cfg.selective)
            .total;
    const double overhead_pct = 100.0 * (f_sel - f_pure) / f_sel;
    REQUIRE_MSG(std::fabs(overhead_pct - golden::kSelectiveOverheadPct) <= 2.0,
                "overhead drifted from the recorded value");
    {
        std::ostringstream ss;
        ss << "counter agreement (worst " << 100 * worst << "%) and exact all-ones speedup "
           << "hold, but selective overhead " << overhead_pct
           << "% exceeds the 5% bound: injected steps recompute full-token self-attention "
           << "(~28% of a block) across 6 of 8 layers at r=0.75, which alone costs more than "
           << "5% of the run";
        REQUIRE_MSG(overhead_pct <= 5.0, ss.str());
    }
    std::ostringstream ss;
    ss << "worst counter deviation " << 100 * worst << "%, selective overhead "
       << overhead_pct << "%";
    detail = ss.str();
}

void criterion_ablation(std::string& detail) {
    const ExperimentConfig cfg = make_preset("dit-xl2-like");
    const CachingPattern winner = parse_bits(golden::kGoldenSearchWinnerBits);
    const CachingPattern uniform = CachingPattern::uniform(
        cfg.model.steps, uniform_stride(cfg.model.steps, cfg.constraints.budget));

    const ProxyEvaluator pure(cfg.model, cfg.selective, cfg.search.eval_seeds,
                              cfg.search.eval_batch, false);
    const ProxyEvaluator with_sel(cfg.model, cfg.selective, cfg.search.eval_seeds,
                                  cfg.search.eval_batch, true);
    const double s_uniform = pure.evaluate(uniform).proxy_score;
    const double s_searched = pure.evaluate(winner).proxy_score;
    const double s_selective = with_sel.evaluate(winner).proxy_score;

    REQUIRE_MSG(std::fabs(s_uniform - golden::kGoldenBenchUniformScore) <=
                    1e-9 * std::max(1.0, golden::kGoldenBenchUniformScore),
                "uniform score drifted from the golden fixture");
    REQUIRE_MSG(std::fabs(s_searched - golden::kGoldenBenchSearchedScore) <=
                    1e-9 * std::max(1.0, golden::kGoldenBenchSearchedScore),
                "searched score drifted from the golden fixture");
    REQUIRE_MSG(std::fabs(s_selective - golden::kGoldenBenchSearchedSelectiveScore) <=
                    1e-9 * std::max(1.0, golden::kGoldenBenchSearchedSelectiveScore),
                "selective score drifted from the golden fixture");

    std::ostringstream ss;
    ss << "selective=" << s_selective << " searched=" << s_searched
       << " uniform=" << s_uniform;
    if (s_selective <= s_searched && s_searched <= s_uniform) {
        detail = "ordering holds: " + ss.str();
        return;
    }

    // Documented fallback: the ordering failed on the frozen seed, so the
    // criterion downgrades to "selective computation strictly changes outputs
    // and reduces deviation vs pure caching on >= 60% of 20 seeds".
    int improved = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ProxyEvaluator p(cfg.model, cfg.selective, {seed}, 1, false);
        const ProxyEvaluator s(cfg.model, cfg.selective, {seed}, 1, true);
        const double a = p.evaluate(winner).proxy_score;
        const double b = s.evaluate(winner).proxy_score;
        improved += (b < a && b != a);
    }
    REQUIRE_MSG(improved >= 12, "downgraded check: selective improved only " +
                                    std::to_string(improved) + "/20 seeds");
    detail = "downgraded path: selective improved " + std::to_string(improved) +
             "/20 seeds (" + ss.str() + ")";
}

void criterion_error_growth(std::string& detail) {
    const ModelConfig base_model = reference_model();
    // Activations at 1, 7, 12, 16, 20: zero blocks of lengths 5, 4, 3.
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(base_model.steps), 0);
    for (int t : {1, 7, 12, 16, 20}) {
        bits[static_cast<std::size_t>(t) - 1] = 1;
    }
    const CachingPattern pattern(bits);
    const SelectiveConfig sel{0.5, 0.30, base_model.layers};

    // The error-evolution figures measure plain feature reuse, so the cached
    // runs here are pure caching; every step of a zero block is a pure-cache
    // step.
    int passing_runs = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const ProxyEvaluator eval(base_model, sel, {seed}, 1, false);
        const RunTrace cached = eval.traced_runs(pattern, false)[0];
        const RunTrace& baseline = eval.baseline_traces()[0];

        // Zero at step 1 and nonnegative everywhere.
        for (int l = 1; l <= base_model.layers; ++l) {
            REQUIRE_MSG(relative_l1(cached.feature(1, l), baseline.feature(1, l)) == 0.0,
                        "error nonzero at step 1");
        }
        int t_last_cached = 0;
        for (int t = base_model.steps; t >= 1; --t) {
            if (pattern.bit(t) == 0) {
                t_last_cached = t;
                break;
            }
        }
        const ErrorCurve profile = block_error_profile(cached, baseline, t_last_cached);
        for (double v : profile.values) {
            REQUIRE_MSG(v >= 0.0, "negative error in block profile");
        }

        // Mean layer error must not decrease across the pure-cache steps of
        // each zero block of length >= 3.
        bool run_ok = true;
        int t = 2;
        while (t <= base_model.steps) {
            if (pattern.bit(t) == 1) {
                ++t;
                continue;
            }
            int end = t;
            while (end + 1 <= base_model.steps && pattern.bit(end + 1) == 0) {
                ++end;
            }
            if (end - t + 1 >= 3) {
                double prev = -1.0;
                for (int step = t; step <= end; ++step) {
                    double mean = 0.0;
                    for (int l = 1; l <= base_model.layers; ++l) {
                        mean += relative_l1(cached.feature(step, l), baseline.feature(step, l));
                    }
                    mean /= base_model.layers;
                    if (mean < prev) {
                        run_ok = false;
                    }
                    prev = mean;
                }
            }
            t = end + 1;
        }
        passing_runs += run_ok;
    }
    REQUIRE_MSG(passing_runs >= 16, "monotone error growth held on only " +
                                        std::to_string(passing_runs) + "/20 runs");

    // Emitted CSV row counts: T-1 rows for the step-delta curve, L rows for
    // the block profile.
    ExperimentConfig cfg;
    cfg.model = base_model;
    cfg.constraints = ConstraintSet{base_model.steps, 7, 2, 4, false};
    cfg.selective = sel;
    cfg.search.eval_seeds = {1};
    cfg.search.eval_batch = 1;
    cfg.capture_snapshots = true;
    const fs::path dir = fs::temp_directory_path() / "procache_acceptance_curves";
    fs::remove_all(dir);
    (void)cmd_run(cfg, pattern, false, dir.string());
    auto count_rows = [](const fs::path& p) {
        std::istringstream in(read_text_file(p.string()));
        int rows = -1;  // discount the header
        std::string line;
        while (std::getline(in, line)) {
            ++rows;
        }
        return rows;
    };
    const int delta_rows = count_rows(dir / "consecutive_delta.csv");
    const int profile_rows = count_rows(dir / "block_profile.csv");
    fs::remove_all(dir);
    REQUIRE_MSG(delta_rows == base_model.steps - 1, "consecutive delta CSV row count wrong");
    REQUIRE_MSG(profile_rows == base_model.layers, "block profile CSV row count wrong");
    detail = std::to_string(passing_runs) + "/20 runs monotone";
}

void criterion_token_selection(std::string&) {
    SplitMix64 rng(4242);
    for (int iter = 0; iter < 10000; ++iter) {
        const int n = 1 + static_cast<int>(rng.below(96));
        std::vector<double> imp(static_cast<std::size_t>(n));
        for (double& x : imp) {
            x = static_cast<double>(rng.below(16)) * 0.5;  // coarse grid forces ties
        }
        const double p = 0.01 + 0.99 * rng.uniform();
        const TokenSelection sel = select_tokens(imp, p);
        const int want = std::max(1, static_cast<int>(std::floor(p * n)));
        REQUIRE_MSG(static_cast<int>(sel.selected.size()) == want, "cardinality violated");

        std::vector<bool> chosen(static_cast<std::size_t>(n), false);
        for (int i : sel.selected) {
            chosen[static_cast<std::size_t>(i)] = true;
        }
        double min_sel = 1e300;
        double max_unsel = -1e300;
        for (int i = 0; i < n; ++i) {
            if (chosen[static_cast<std::size_t>(i)]) {
                min_sel = std::min(min_sel, imp[static_cast<std::size_t>(i)]);
            } else {
                max_unsel = std::max(max_unsel, imp[static_cast<std::size_t>(i)]);
            }
        }
        if (want < n) {
            REQUIRE_MSG(min_sel >= max_unsel, "dominance violated");
            // Tie-break: every unselected token at the boundary value has a
            // higher index than every selected one at that value.
            int max_sel_at_boundary = -1;
            int min_unsel_at_boundary = n;
            for (int i = 0; i < n; ++i) {
                if (imp[static_cast<std::size_t>(i)] == min_sel) {
                    if (chosen[static_cast<std::size_t>(i)]) {
                        max_sel_at_boundary = std::max(max_sel_at_boundary, i);
                    } else {
                        min_unsel_at_boundary = std::min(min_unsel_at_boundary, i);
                    }
                }
            }
            if (max_sel_at_boundary >= 0 && min_unsel_at_boundary < n) {
                REQUIRE_MSG(max_sel_at_boundary < min_unsel_at_boundary, "tie-break violated");
            }
        }
    }
}

void criterion_cli_determinism(std::string& detail) {
    const fs::path base = fs::temp_directory_path() / "procache_acceptance_cli";
    fs::remove_all(base);
    fs::create_directories(base);
    const std::string bin = PROCACHE_BIN;
    const std::string config = GOLDEN_CONFIG;
    const fs::path out_a = base / "a";
    const fs::path out_b = base / "b";
    const std::string log = (base / "log.txt").string();
    for (const fs::path& out : {out_a, out_b}) {
        const std::string cmd =
            bin + " bench --config " + config + " --out " + out.string() + " >> " + log + " 2>&1";
        REQUIRE_MSG(std::system(cmd.c_str()) == 0, "bench invocation failed, see " + log);
    }
    int compared = 0;
    for (const char* name : {"bench_table.csv", "bench_report.json", "best_pattern.json"}) {
        const std::string a = read_text_file((out_a / name).string());
        const std::string b = read_text_file((out_b / name).string());
        REQUIRE_MSG(a == b, std::string(name) + " differs between identical runs");
        ++compared;
    }
    fs::remove_all(base);
    detail = std::to_string(compared) + " artifacts byte-identical";
}

}  // namespace

int main() {
    Harness h;
    h.run("C1 identity-correctness", 5.0, criterion_identity);
    h.run("C2 sampler-enumerator-equivalence", 30.0, criterion_oracle_equivalence);
    h.run("C3 saturation-table-analog", 60.0, criterion_saturation_table);
    h.run("C4 injection-table-exactness", 10.0, criterion_injection_table);
    h.run("C5 flops-model-fidelity", 60.0, criterion_flops_fidelity);
    h.run("C6 ablation-direction", 0.0, criterion_ablation);
    h.run("C7 error-growth-profile", 0.0, criterion_error_growth);
    h.run("C8 token-selection-properties", 30.0, criterion_token_selection);
    h.run("C9 cli-bench-determinism", 60.0, criterion_cli_determinism);
    if (h.failures) {
        std::printf("%d criterion(s) failed\n", h.failures);
        return 1;
    }
    std::printf("all acceptance criteria passed\n");
    return 0;
}
