#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "procache/metrics.hpp"
#include "procache/pattern.hpp"
#include "procache/schedule.hpp"
#include "procache/serialize.hpp"
#include "procache/tinydit.hpp"

namespace procache {

/// Everything one experiment needs: the simulator, the constraint space, the
/// search knobs, and the selective-computation settings. Cross-field rules:
/// constraints.steps == model.steps and selective.total_layers == model.layers
/// (both are filled in from the model when omitted in JSON).
struct ExperimentConfig {
    ModelConfig model;
    ConstraintSet constraints;
    SearchConfig search;
    SelectiveConfig selective;
    std::string output_dir = "out";
    bool capture_snapshots = false;

    void validate() const;
};

/// Built-in presets ("dit-xl2-like", "pixart-like"): reference hyperparameter
/// sets scaled onto the toy simulator. Throws ConfigError on unknown names.
ExperimentConfig make_preset(const std::string& name);
std::vector<std::string> preset_names();

ExperimentConfig experiment_config_from_json(const ordered_json& j);
ordered_json experiment_config_to_json(const ExperimentConfig& cfg);
ExperimentConfig load_experiment_config(const std::string& path);

/// Scores candidates by mean relative-L1 of the final state against the
/// full-compute baseline over eval_seeds x eval_batch seeded inputs.
/// Baselines are computed once in the constructor and shared. Evaluation
/// runs pure caching by default (selective off); cmd_bench re-scores the
/// winner with selective computation enabled.
class ProxyEvaluator : public CandidateEvaluator {
public:
    ProxyEvaluator(const ModelConfig& model, const SelectiveConfig& selective,
                   const std::vector<std::uint64_t>& eval_seeds, int eval_batch,
                   bool with_selective = false);

    CandidateEvaluation evaluate(const CachingPattern& pattern) const override;

    /// Per-input traces for a pattern (cached run) alongside the baselines;
    /// used for curve emission.
    std::vector<RunTrace> traced_runs(const CachingPattern& pattern, bool with_selective) const;
    const std::vector<RunTrace>& baseline_traces() const { return baseline_traces_; }
    const ModelConfig& model() const { return model_; }

private:
    ModelConfig model_;
    SelectiveConfig selective_;
    bool with_selective_;
    ModelWeights weights_;
    Matrix context_;
    std::vector<Matrix> inputs_;
    std::vector<Matrix> baseline_finals_;
    std::vector<RunTrace> baseline_traces_;
};

/// Derives the per-input x0 seed for (eval_seed, batch index).
std::uint64_t input_seed(std::uint64_t eval_seed, int batch_index);

struct SamplerComparisonRow {
    long long max_attempts = 0;
    long long found = 0;
    RejectionCounts rejections;
};

struct EnumerateOutcome {
    long long count = 0;
    std::vector<CachingPattern> patterns;       // filled when listing requested
    std::vector<SamplerComparisonRow> sampler;  // filled when comparison requested
};

struct SearchOutcome {
    SampleResult sample;
    std::vector<CandidateEvaluation> evaluations;  // candidate order
    CandidateEvaluation winner;
};

struct RunOutcome {
    EvalReport report;
};

struct BenchRow {
    std::string variant;
    CachingPattern pattern;
    double flops_ratio = 1.0;
    double speedup = 1.0;
    double proxy_score = 0.0;
};

struct BenchOutcome {
    std::vector<BenchRow> rows;  // baseline, uniform, searched, searched+selective
    CachingPattern searched;
};

/// Command cores. Each computes the outcome and, when out_dir is non-empty,
/// writes the artifacts documented in the README. Deterministic under a
/// fixed config; artifacts carry no timestamps.
EnumerateOutcome cmd_enumerate(const ExperimentConfig& cfg, bool list_patterns,
                               bool compare_sampler, const std::string& out_dir);
SearchOutcome cmd_search(const ExperimentConfig& cfg, const std::string& out_dir);
RunOutcome cmd_run(const ExperimentConfig& cfg, const CachingPattern& pattern, bool no_selective,
                   const std::string& out_dir);
BenchOutcome cmd_bench(const ExperimentConfig& cfg, const std::string& out_dir);

/// Stride for the uniform baseline at equal budget: ceil(T / B).
int uniform_stride(int steps, int budget);

}  // namespace procache
