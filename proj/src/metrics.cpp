#include "procache/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "procache/errors.hpp"

namespace procache {

namespace {

// The closed-form model below adds the same bucket counts the engine's call
// sites add, so the two routes share one price table and disagree only if
// the formulas stop matching the code structure.

void count_modulation(int dim, FlopCounter& fc) {
    fc.macs += static_cast<std::uint64_t>(3) * dim * dim;
    fc.adds += static_cast<std::uint64_t>(3) * dim;
}

void count_attention(int q_rows, int kv_rows, int dim, int heads, FlopCounter& fc) {
    fc.macs += static_cast<std::uint64_t>(q_rows) * dim * dim;        // query projection
    fc.macs += 2ULL * static_cast<std::uint64_t>(kv_rows) * dim * dim;  // key/value projections
    fc.muls += static_cast<std::uint64_t>(q_rows) * dim;              // query scaling
    fc.macs += 2ULL * static_cast<std::uint64_t>(q_rows) * kv_rows * dim;  // scores + attend
    fc.softmax_elems += static_cast<std::uint64_t>(heads) * q_rows * kv_rows;
    fc.macs += static_cast<std::uint64_t>(q_rows) * dim * dim;        // output projection
}

// One residual branch over `rows` computed rows: AdaLN params, norm,
// modulate, the submodule body, gate, and the full-width residual add.
void count_branch_common(int rows, int tokens, int dim, FlopCounter& fc) {
    count_modulation(dim, fc);
    fc.layer_norm_elems += static_cast<std::uint64_t>(rows) * dim;
    fc.modulate_elems += static_cast<std::uint64_t>(rows) * dim;
    fc.muls += static_cast<std::uint64_t>(rows) * dim;  // gate
    fc.adds += static_cast<std::uint64_t>(tokens) * dim;  // residual add
}

void count_sa(int tokens, int dim, int heads, FlopCounter& fc) {
    count_branch_common(tokens, tokens, dim, fc);
    count_attention(tokens, tokens, dim, heads, fc);
}

void count_ca(int rows, int tokens, int context_tokens, int dim, int heads, FlopCounter& fc) {
    count_branch_common(rows, tokens, dim, fc);
    count_attention(rows, context_tokens, dim, heads, fc);
}

void count_mlp(int rows, int tokens, int dim, int hidden, FlopCounter& fc) {
    count_branch_common(rows, tokens, dim, fc);
    fc.macs += 2ULL * static_cast<std::uint64_t>(rows) * dim * hidden;
    fc.gelu_elems += static_cast<std::uint64_t>(rows) * hidden;
}

FlopCounter count_full_cell(const ModelConfig& c) {
    FlopCounter fc;
    count_sa(c.tokens, c.dim, c.heads, fc);
    count_ca(c.tokens, c.tokens, c.context_tokens, c.dim, c.heads, fc);
    count_mlp(c.tokens, c.tokens, c.dim, c.mlp_hidden(), fc);
    return fc;
}

FlopCounter count_selective_cell(const ModelConfig& c, int selected) {
    FlopCounter fc;
    count_sa(c.tokens, c.dim, c.heads, fc);
    if (selected < c.tokens) {  // p == 1 skips the scoring pass
        fc.macs += static_cast<std::uint64_t>(c.tokens) * c.dim;  // value norms
        fc.sqrts += static_cast<std::uint64_t>(c.tokens);
    }
    count_ca(selected, c.tokens, c.context_tokens, c.dim, c.heads, fc);
    count_mlp(selected, c.tokens, c.dim, c.mlp_hidden(), fc);
    return fc;
}

FlopCounter count_cache_cell(const ModelConfig& c) {
    FlopCounter fc;
    fc.adds += 3ULL * static_cast<std::uint64_t>(c.tokens) * c.dim;
    return fc;
}

FlopCounter count_step_overhead(const ModelConfig& c) {
    FlopCounter fc;
    fc.embed_elems += static_cast<std::uint64_t>(c.dim);
    fc.layer_norm_elems += static_cast<std::uint64_t>(c.tokens) * c.dim;  // head norm
    fc.macs += static_cast<std::uint64_t>(c.tokens) * c.dim * c.dim;      // head projection
    fc.update_elems += static_cast<std::uint64_t>(c.tokens) * c.dim;
    return fc;
}

double l1_norm_diff(const Matrix& a, const Matrix& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.v.size(); ++i) {
        acc += std::fabs(a.v[i] - b.v[i]);
    }
    return acc;
}

}  // namespace

double relative_l1(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b)) {
        throw ConfigError("relative_l1: shape mismatch");
    }
    double denom = 0.0;
    for (double x : b.v) {
        denom += std::fabs(x);
    }
    if (denom == 0.0) {
        throw NumericError("relative_l1: baseline has zero L1 norm");
    }
    return l1_norm_diff(a, b) / denom;
}

ErrorCurve consecutive_output_delta(const RunTrace& run) {
    if (run.steps < 2) {
        throw ConfigError("consecutive_output_delta: need at least 2 step snapshots");
    }
    ErrorCurve curve;
    curve.label = "output_delta";
    for (int t = 2; t <= run.steps; ++t) {
        curve.axis.push_back(t);
        curve.values.push_back(l1_norm_diff(run.output(t), run.output(t - 1)));
    }
    return curve;
}

ErrorCurve block_error_profile(const RunTrace& cached_run, const RunTrace& baseline, int t_star) {
    if (cached_run.steps != baseline.steps || cached_run.layers != baseline.layers) {
        throw ConfigError("block_error_profile: traces have different shapes");
    }
    if (t_star < 1 || t_star > cached_run.steps) {
        throw ConfigError("block_error_profile: no snapshot for step " + std::to_string(t_star));
    }
    ErrorCurve curve;
    curve.label = "block_error_step_" + std::to_string(t_star);
    for (int l = 1; l <= cached_run.layers; ++l) {
        curve.axis.push_back(l);
        curve.values.push_back(
            relative_l1(cached_run.feature(t_star, l), baseline.feature(t_star, l)));
    }
    return curve;
}

ErrorCurve step_error_profile(const RunTrace& cached_run, const RunTrace& baseline, int layer) {
    if (cached_run.steps != baseline.steps || cached_run.layers != baseline.layers) {
        throw ConfigError("step_error_profile: traces have different shapes");
    }
    if (layer < 1 || layer > cached_run.layers) {
        throw ConfigError("step_error_profile: no snapshot for layer " + std::to_string(layer));
    }
    ErrorCurve curve;
    curve.label = "layer_" + std::to_string(layer);
    for (int t = 1; t <= cached_run.steps; ++t) {
        curve.axis.push_back(t);
        curve.values.push_back(
            relative_l1(cached_run.feature(t, layer), baseline.feature(t, layer)));
    }
    return curve;
}

FlopsReport flops_estimate(const ExecutionPlan& plan, const ModelConfig& config,
                           const SelectiveConfig& cfg) {
    config.validate();
    cfg.validate();
    if (plan.steps != config.steps || plan.layers != config.layers ||
        cfg.total_layers != config.layers) {
        throw ConfigError("flops_estimate: inconsistent dimensions");
    }
    const int selected = std::max(1, static_cast<int>(std::floor(cfg.token_ratio * config.tokens)));

    FlopsReport report;
    report.full_cell = count_full_cell(config).total_flops();
    report.selective_cell = count_selective_cell(config, selected).total_flops();
    report.cache_cell = count_cache_cell(config).total_flops();
    report.step_overhead = count_step_overhead(config).total_flops();
    report.full_cells = plan.count(StepAction::FullCompute);
    report.selective_cells = plan.count(StepAction::SelectiveCompute);
    report.cache_cells = plan.count(StepAction::CacheOnly);
    report.total = report.full_cell * static_cast<double>(report.full_cells) +
                   report.selective_cell * static_cast<double>(report.selective_cells) +
                   report.cache_cell * static_cast<double>(report.cache_cells) +
                   report.step_overhead * config.steps;
    report.baseline = report.full_cell * static_cast<double>(config.steps) * config.layers +
                      report.step_overhead * config.steps;
    report.ratio = report.total / report.baseline;
    report.speedup = report.baseline / report.total;
    return report;
}

}  // namespace procache
