// Prints the contents of tests/golden_values.hpp. Rerun after any deliberate
// change to the engine numerics, the weight init, or the sampler, and review
// the diff before committing:
//
//   ./build/tools/freeze_goldens > tests/golden_values.hpp

#include <cinttypes>
#include <cstdio>
#include <string>

#include "procache/experiment.hpp"
#include "procache/metrics.hpp"
#include "procache/pattern.hpp"
#include "procache/schedule.hpp"
#include "procache/tinydit.hpp"

using namespace procache;

namespace {

ModelConfig reference_model() {
    ModelConfig m;  // defaults: L=8, d=64, h=4, N=16, N_ctx=8, mlp 4.0, T=20, seed=42
    return m;
}

void print_doubles(const char* name, const std::vector<double>& values) {
    std::printf("inline constexpr double %s[] = {\n", name);
    for (double v : values) {
        std::printf("    %.17g,\n", v);
    }
    std::printf("};\n\n");
}

}  // namespace

int main() {
    std::printf("// Frozen reference values. Generated by tools/freeze_goldens.cpp; do not\n");
    std::printf("// edit by hand.\n");
    std::printf("#pragma once\n\n#include <cstdint>\n\nnamespace golden {\n\n");

    const ModelConfig model = reference_model();
    const ModelWeights weights = init_model(model);
    std::printf("inline constexpr std::uint64_t kReferenceWeightChecksum = 0x%016" PRIx64
                "ULL;\n\n",
                weights.checksum());

    // Enumeration count for the 50-step monotonic space (the Table analog).
    {
        const ConstraintSet cs{50, 17, 2, 5, true};
        std::printf("inline constexpr long long kEnumerationCountT50 = %lld;\n\n",
                    static_cast<long long>(enumerate_patterns(cs).size()));
    }

    // Alternating pattern deviation on the reference model, pure caching.
    SelectiveConfig ref_selective{0.5, 0.30, model.layers};
    const ProxyEvaluator ref_eval(model, ref_selective, {1}, 1, false);
    {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(model.steps), 0);
        for (int t = 1; t <= model.steps; t += 2) {
            bits[static_cast<std::size_t>(t) - 1] = 1;
        }
        const CandidateEvaluation e = ref_eval.evaluate(CachingPattern(bits));
        std::printf("inline constexpr double kAlternatingPatternScore = %.17g;\n\n",
                    e.proxy_score);
    }

    // Per-layer deviation profile for the uniform stride-3 pattern at the
    // final step, and the baseline's consecutive output deltas.
    {
        const CachingPattern uniform3 = CachingPattern::uniform(model.steps, 3);
        const std::vector<RunTrace> cached = ref_eval.traced_runs(uniform3, false);
        const ErrorCurve profile =
            block_error_profile(cached[0], ref_eval.baseline_traces()[0], model.steps);
        print_doubles("kGoldenBlockProfile", profile.values);

        const ErrorCurve delta = consecutive_output_delta(ref_eval.baseline_traces()[0]);
        print_doubles("kGoldenConsecutiveDelta", delta.values);
    }

    // Reproducible search winner on a small space (seed-pinned fixture).
    {
        const ConstraintSet cs{20, 7, 2, 4, false};
        SearchConfig sc;
        sc.quota = 5;
        sc.max_attempts = 1000000;
        sc.seed = 7;
        const SampleResult sample = sample_patterns(cs, sc, false);
        const CandidateEvaluation winner = select_best_pattern(sample.patterns, ref_eval);
        std::printf("inline constexpr const char* kSmallSearchWinnerBits = \"%s\";\n\n",
                    winner.pattern.to_string().c_str());
    }

    // Golden bench table on the dit-xl2-like preset.
    {
        const ExperimentConfig cfg = make_preset("dit-xl2-like");
        const BenchOutcome bench = cmd_bench(cfg, "");
        std::printf("inline constexpr const char* kGoldenSearchWinnerBits = \"%s\";\n\n",
                    bench.searched.to_string().c_str());
        const char* names[] = {"kGoldenBenchBaseline", "kGoldenBenchUniform",
                               "kGoldenBenchSearched", "kGoldenBenchSearchedSelective"};
        for (std::size_t i = 0; i < bench.rows.size(); ++i) {
            std::printf("inline constexpr double %sScore = %.17g;\n", names[i],
                        bench.rows[i].proxy_score);
            std::printf("inline constexpr double %sRatio = %.17g;\n", names[i],
                        bench.rows[i].flops_ratio);
        }
        std::printf("\n");

        // Selective-step overhead as a share of the selective run's flops.
        const ExecutionPlan with_sel = build_plan(bench.searched, cfg.selective, true);
        const ExecutionPlan without = build_plan(bench.searched, cfg.selective, false);
        const double f_sel = flops_estimate(with_sel, cfg.model, cfg.selective).total;
        const double f_pure = flops_estimate(without, cfg.model, cfg.selective).total;
        std::printf("inline constexpr double kSelectiveOverheadPct = %.17g;\n\n",
                    100.0 * (f_sel - f_pure) / f_sel);
    }

    std::printf("}  // namespace golden\n");
    return 0;
}
