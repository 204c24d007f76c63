#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "procache/schedule.hpp"
#include "procache/tensor.hpp"
#include "procache/tinydit.hpp"

namespace procache {

/// One labelled curve: values over step or layer indices.
struct ErrorCurve {
    std::vector<int> axis;
    std::vector<double> values;
    std::string label;
};

/// Analytic cost report for a plan. Cells' costs are priced with the
/// FlopCounter table; baseline is the all-ones plan on the same model.
struct FlopsReport {
    double full_cell = 0.0;       // flops of one FullCompute (step, layer) cell
    double selective_cell = 0.0;  // flops of one SelectiveCompute cell
    double cache_cell = 0.0;      // flops of one CacheOnly cell (residual adds)
    double step_overhead = 0.0;   // per-step embedding + head + state update
    long long full_cells = 0;
    long long selective_cells = 0;
    long long cache_cells = 0;
    double total = 0.0;
    double baseline = 0.0;
    double ratio = 1.0;    // total / baseline
    double speedup = 1.0;  // baseline / total
};

/// Run-level summary tying together quality, cost, and emitted curves.
struct EvalReport {
    double proxy_score = 0.0;
    FlopsReport flops;
    std::vector<std::uint8_t> pattern_bits;
    double layer_ratio = 1.0;
    double token_ratio = 1.0;
    bool selective_enabled = true;
    std::uint64_t model_seed = 0;
    std::vector<std::uint64_t> eval_seeds;
    int eval_batch = 0;
    std::vector<std::string> curve_files;
};

/// sum |a - b| / sum |b|. Shapes must match; throws NumericError when the
/// baseline norm is zero.
double relative_l1(const Matrix& a, const Matrix& b);

/// L1 distance between consecutive step outputs of one run; axis 2..T.
ErrorCurve consecutive_output_delta(const RunTrace& run);

/// Relative-L1 per layer between two runs' features at step t_star; axis 1..L.
ErrorCurve block_error_profile(const RunTrace& cached_run, const RunTrace& baseline, int t_star);

/// Relative-L1 per step between two runs' features at a fixed layer; axis 1..T.
ErrorCurve step_error_profile(const RunTrace& cached_run, const RunTrace& baseline, int layer);

/// Closed-form cost of executing `plan` with the engine's default options.
/// Mirrors the engine's multiply-accumulate structure term by term, including
/// the p == 1 importance-scoring skip.
FlopsReport flops_estimate(const ExecutionPlan& plan, const ModelConfig& config,
                           const SelectiveConfig& cfg);

}  // namespace procache
