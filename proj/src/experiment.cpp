#include "procache/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>

#include "procache/errors.hpp"
#include "procache/rng.hpp"

namespace procache {

namespace {

namespace fs = std::filesystem;

std::string join_path(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

void ensure_dir(const std::string& dir) {
    if (!dir.empty()) {
        fs::create_directories(dir);
    }
}

ordered_json rejections_to_json(const RejectionCounts& r) {
    return ordered_json{{"budget", r.budget}, {"bounded", r.bounded}, {"monotonic", r.monotonic}};
}

ordered_json constraints_to_json(const ConstraintSet& cs) {
    return ordered_json{{"steps", cs.steps},
                        {"budget", cs.budget},
                        {"v_min", cs.v_min},
                        {"v_max", cs.v_max},
                        {"monotonic", cs.require_monotonic}};
}

ErrorCurve average_curves(const std::vector<ErrorCurve>& curves) {
    ErrorCurve avg = curves.front();
    for (std::size_t c = 1; c < curves.size(); ++c) {
        for (std::size_t i = 0; i < avg.values.size(); ++i) {
            avg.values[i] += curves[c].values[i];
        }
    }
    for (double& v : avg.values) {
        v /= static_cast<double>(curves.size());
    }
    return avg;
}

// Memoizing adapter so select_best_pattern can reuse evaluations
// that were already computed for the per-candidate table.
class MemoEvaluator : public CandidateEvaluator {
public:
    explicit MemoEvaluator(std::map<std::vector<std::uint8_t>, CandidateEvaluation> memo)
        : memo_(std::move(memo)) {}

    CandidateEvaluation evaluate(const CachingPattern& pattern) const override {
        return memo_.at(pattern.bits);
    }

private:
    std::map<std::vector<std::uint8_t>, CandidateEvaluation> memo_;
};

}  // namespace

void ExperimentConfig::validate() const {
    model.validate();
    constraints.validate();
    search.validate();
    selective.validate();
    if (constraints.steps != model.steps) {
        throw ConfigError("experiment config: constraints.steps must equal model.steps");
    }
    if (selective.total_layers != model.layers) {
        throw ConfigError("experiment config: selective.total_layers must equal model.layers");
    }
    if (search.eval_seeds.empty()) {
        throw ConfigError("experiment config: search.eval_seeds must be non-empty");
    }
    if (search.eval_batch < 1) {
        throw ConfigError("experiment config: search.eval_batch must be >= 1");
    }
}

ExperimentConfig make_preset(const std::string& name) {
    ExperimentConfig cfg;
    cfg.model = ModelConfig{};  // L=8, d=64, h=4, N=16, N_ctx=8, mlp 4.0, T=20, seed=42
    cfg.search = SearchConfig{};
    cfg.search.quota = 5;
    cfg.search.max_attempts = 1000000;
    cfg.search.seed = 42;
    cfg.search.eval_seeds = {1, 2};
    cfg.search.eval_batch = 2;
    if (name == "dit-xl2-like") {
        // B=17, v in [2,5], p=7%, r=75% at 50 steps, scaled onto the toy
        // model (8 layers, 16 tokens).
        cfg.model.steps = 50;
        cfg.constraints = ConstraintSet{50, 17, 2, 5, true};
        cfg.selective = SelectiveConfig{0.75, 0.07, cfg.model.layers};
    } else if (name == "pixart-like") {
        // B=7, v in [2,3], p=30%, r=50% at 20 steps.
        cfg.model.steps = 20;
        cfg.constraints = ConstraintSet{20, 7, 2, 3, true};
        cfg.selective = SelectiveConfig{0.5, 0.30, cfg.model.layers};
    } else {
        throw ConfigError("unknown preset: " + name + " (available: dit-xl2-like, pixart-like)");
    }
    cfg.validate();
    return cfg;
}

std::vector<std::string> preset_names() { return {"dit-xl2-like", "pixart-like"}; }

ExperimentConfig experiment_config_from_json(const ordered_json& j) {
    try {
        if (j.value("schema", 0) != 1) {
            throw ConfigError("experiment config: expected \"schema\": 1");
        }
        ExperimentConfig cfg;
        if (j.contains("model")) {
            const auto& m = j.at("model");
            cfg.model.layers = m.value("layers", cfg.model.layers);
            cfg.model.dim = m.value("dim", cfg.model.dim);
            cfg.model.heads = m.value("heads", cfg.model.heads);
            cfg.model.tokens = m.value("tokens", cfg.model.tokens);
            cfg.model.context_tokens = m.value("context_tokens", cfg.model.context_tokens);
            cfg.model.mlp_ratio = m.value("mlp_ratio", cfg.model.mlp_ratio);
            cfg.model.steps = m.value("steps", cfg.model.steps);
            cfg.model.seed = m.value("seed", cfg.model.seed);
            if (m.contains("schedule")) {
                const auto& s = m.at("schedule");
                cfg.model.schedule.alpha_start =
                    s.value("alpha_start", cfg.model.schedule.alpha_start);
                cfg.model.schedule.alpha_end = s.value("alpha_end", cfg.model.schedule.alpha_end);
                cfg.model.schedule.beta_start =
                    s.value("beta_start", cfg.model.schedule.beta_start);
                cfg.model.schedule.beta_end = s.value("beta_end", cfg.model.schedule.beta_end);
            }
        }
        cfg.constraints.steps = cfg.model.steps;
        cfg.constraints.budget = std::max(1, cfg.model.steps / 3);
        if (j.contains("constraints")) {
            const auto& c = j.at("constraints");
            cfg.constraints.steps = c.value("steps", cfg.model.steps);
            cfg.constraints.budget = c.value("budget", cfg.constraints.budget);
            cfg.constraints.v_min = c.value("v_min", cfg.constraints.v_min);
            cfg.constraints.v_max = c.value("v_max", cfg.constraints.v_max);
            cfg.constraints.require_monotonic = c.value("monotonic", false);
        }
        if (j.contains("search")) {
            const auto& s = j.at("search");
            cfg.search.quota = s.value("quota", cfg.search.quota);
            cfg.search.max_attempts = s.value("max_attempts", cfg.search.max_attempts);
            cfg.search.seed = s.value("seed", cfg.search.seed);
            if (s.contains("eval_seeds")) {
                cfg.search.eval_seeds = s.at("eval_seeds").get<std::vector<std::uint64_t>>();
            }
            cfg.search.eval_batch = s.value("eval_batch", cfg.search.eval_batch);
        }
        cfg.selective.total_layers = cfg.model.layers;
        if (j.contains("selective")) {
            const auto& s = j.at("selective");
            cfg.selective.layer_ratio = s.value("layer_ratio", cfg.selective.layer_ratio);
            cfg.selective.token_ratio = s.value("token_ratio", cfg.selective.token_ratio);
        }
        cfg.output_dir = j.value("output_dir", cfg.output_dir);
        cfg.capture_snapshots = j.value("capture_snapshots", cfg.capture_snapshots);
        cfg.validate();
        return cfg;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
}

ordered_json experiment_config_to_json(const ExperimentConfig& cfg) {
    ordered_json j;
    j["schema"] = 1;
    j["model"] = {{"layers", cfg.model.layers},
                  {"dim", cfg.model.dim},
                  {"heads", cfg.model.heads},
                  {"tokens", cfg.model.tokens},
                  {"context_tokens", cfg.model.context_tokens},
                  {"mlp_ratio", cfg.model.mlp_ratio},
                  {"steps", cfg.model.steps},
                  {"seed", cfg.model.seed},
                  {"schedule",
                   {{"alpha_start", cfg.model.schedule.alpha_start},
                    {"alpha_end", cfg.model.schedule.alpha_end},
                    {"beta_start", cfg.model.schedule.beta_start},
                    {"beta_end", cfg.model.schedule.beta_end}}}};
    j["constraints"] = constraints_to_json(cfg.constraints);
    j["search"] = {{"quota", cfg.search.quota},
                   {"max_attempts", cfg.search.max_attempts},
                   {"seed", cfg.search.seed},
                   {"eval_seeds", cfg.search.eval_seeds},
                   {"eval_batch", cfg.search.eval_batch}};
    j["selective"] = {{"layer_ratio", cfg.selective.layer_ratio},
                      {"token_ratio", cfg.selective.token_ratio}};
    // Invocation-specific fields (output_dir, capture_snapshots) are left
    // out: this echo lands in artifacts, which must not depend on where a
    // run happened to write.
    return j;
}

ExperimentConfig load_experiment_config(const std::string& path) {
    try {
        return experiment_config_from_json(ordered_json::parse(read_text_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::uint64_t input_seed(std::uint64_t eval_seed, int batch_index) {
    SplitMix64 rng(eval_seed);
    for (int i = 0; i < batch_index; ++i) {
        rng.next();
    }
    return rng.next();
}

ProxyEvaluator::ProxyEvaluator(const ModelConfig& model, const SelectiveConfig& selective,
                               const std::vector<std::uint64_t>& eval_seeds, int eval_batch,
                               bool with_selective)
    : model_(model),
      selective_(selective),
      with_selective_(with_selective),
      weights_(init_model(model)),
      context_(make_context(model)) {
    if (eval_seeds.empty() || eval_batch < 1) {
        throw ConfigError("proxy evaluator: need at least one eval seed and batch >= 1");
    }
    const ExecutionPlan baseline_plan =
        build_plan(CachingPattern::all_ones(model.steps), selective_, false);
    EngineOptions opts;
    opts.capture_snapshots = true;
    for (std::uint64_t seed : eval_seeds) {
        for (int b = 0; b < eval_batch; ++b) {
            inputs_.push_back(gaussian_matrix(model.tokens, model.dim, input_seed(seed, b)));
            RunResult r = denoise_run(model_, weights_, baseline_plan, inputs_.back(), context_,
                                      opts);
            baseline_finals_.push_back(std::move(r.final_state));
            baseline_traces_.push_back(std::move(*r.trace));
        }
    }
}

CandidateEvaluation ProxyEvaluator::evaluate(const CachingPattern& pattern) const {
    const ExecutionPlan plan = build_plan(pattern, selective_, with_selective_);
    EngineOptions opts;
    opts.token_ratio = selective_.token_ratio;
    double score = 0.0;
    for (std::size_t i = 0; i < inputs_.size(); ++i) {
        const RunResult r = denoise_run(model_, weights_, plan, inputs_[i], context_, opts);
        score += relative_l1(r.final_state, baseline_finals_[i]);
    }
    CandidateEvaluation eval;
    eval.pattern = pattern;
    eval.proxy_score = score / static_cast<double>(inputs_.size());
    eval.flops_ratio = flops_estimate(plan, model_, selective_).ratio;
    return eval;
}

std::vector<RunTrace> ProxyEvaluator::traced_runs(const CachingPattern& pattern,
                                                  bool with_selective) const {
    const ExecutionPlan plan = build_plan(pattern, selective_, with_selective);
    EngineOptions opts;
    opts.token_ratio = selective_.token_ratio;
    opts.capture_snapshots = true;
    std::vector<RunTrace> traces;
    traces.reserve(inputs_.size());
    for (const Matrix& x0 : inputs_) {
        RunResult r = denoise_run(model_, weights_, plan, x0, context_, opts);
        traces.push_back(std::move(*r.trace));
    }
    return traces;
}

int uniform_stride(int steps, int budget) { return (steps + budget - 1) / budget; }

EnumerateOutcome cmd_enumerate(const ExperimentConfig& cfg, bool list_patterns,
                               bool compare_sampler, const std::string& out_dir) {
    cfg.validate();
    EnumerateOutcome outcome;
    std::vector<CachingPattern> patterns = enumerate_patterns(cfg.constraints);
    outcome.count = static_cast<long long>(patterns.size());
    if (compare_sampler) {
        for (long long level : {1000LL, 10000LL, 100000LL, 1000000LL}) {
            SearchConfig sc = cfg.search;
            sc.max_attempts = level;
            sc.quota = static_cast<int>(std::min<long long>(level, 1000000));
            const SampleResult r =
                sample_patterns(cfg.constraints, sc, cfg.constraints.require_monotonic);
            outcome.sampler.push_back(
                {level, static_cast<long long>(r.patterns.size()), r.rejections});
        }
    }
    if (list_patterns) {
        outcome.patterns = patterns;
    }

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        ordered_json report;
        report["count"] = outcome.count;
        report["attempts"] = outcome.sampler.empty() ? 0 : outcome.sampler.back().max_attempts;
        report["rejections"] = outcome.sampler.empty()
                                   ? rejections_to_json(RejectionCounts{})
                                   : rejections_to_json(outcome.sampler.back().rejections);
        report["constraints"] = constraints_to_json(cfg.constraints);
        if (!outcome.sampler.empty()) {
            ordered_json rows = ordered_json::array();
            for (const auto& row : outcome.sampler) {
                rows.push_back({{"max_attempts", row.max_attempts},
                                {"found", row.found},
                                {"rejections", rejections_to_json(row.rejections)}});
            }
            report["sampler_comparison"] = rows;
        }
        write_text_file(join_path(out_dir, "enumeration.json"), report.dump(2) + "\n");
        if (compare_sampler) {
            std::ostringstream csv;
            csv << "attempts,found,budget_rejected,bounded_rejected,monotonic_rejected\n";
            for (const auto& row : outcome.sampler) {
                csv << row.max_attempts << ',' << row.found << ',' << row.rejections.budget << ','
                    << row.rejections.bounded << ',' << row.rejections.monotonic << '\n';
            }
            write_text_file(join_path(out_dir, "sampler_comparison.csv"), csv.str());
        }
        if (list_patterns) {
            ordered_json listing;
            listing["count"] = outcome.count;
            ordered_json arr = ordered_json::array();
            for (const auto& p : patterns) {
                arr.push_back(p.bits);
            }
            listing["patterns"] = arr;
            write_text_file(join_path(out_dir, "patterns.json"), listing.dump() + "\n");
        }
    }
    return outcome;
}

SearchOutcome cmd_search(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    SearchOutcome outcome;
    outcome.sample =
        sample_patterns(cfg.constraints, cfg.search, cfg.constraints.require_monotonic);

    if (outcome.sample.patterns.empty()) {
        if (!out_dir.empty()) {
            ensure_dir(out_dir);
            ordered_json report;
            report["found"] = 0;
            report["attempts"] = outcome.sample.attempts;
            report["rejections"] = rejections_to_json(outcome.sample.rejections);
            report["constraints"] = constraints_to_json(cfg.constraints);
            write_text_file(join_path(out_dir, "search_report.json"), report.dump(2) + "\n");
        }
        std::ostringstream msg;
        msg << "no valid pattern within " << outcome.sample.attempts
            << " attempts (rejections: budget=" << outcome.sample.rejections.budget
            << ", bounded=" << outcome.sample.rejections.bounded
            << ", monotonic=" << outcome.sample.rejections.monotonic << ")";
        throw InfeasibleError(msg.str());
    }

    // Candidates are ranked by pure-caching deviation; selective computation
    // is layered onto the winner afterwards (see cmd_bench / cmd_run).
    const ProxyEvaluator evaluator(cfg.model, cfg.selective, cfg.search.eval_seeds,
                                   cfg.search.eval_batch, false);
    std::map<std::vector<std::uint8_t>, CandidateEvaluation> memo;
    for (const CachingPattern& p : outcome.sample.patterns) {
        CandidateEvaluation e = evaluator.evaluate(p);
        outcome.evaluations.push_back(e);
        memo.emplace(p.bits, std::move(e));
    }
    outcome.winner = select_best_pattern(outcome.sample.patterns, MemoEvaluator(std::move(memo)));

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_text_file(
            join_path(out_dir, "best_pattern.json"),
            pattern_to_json(outcome.winner.pattern, cfg.constraints, cfg.search.seed).dump(2) +
                "\n");
        std::ostringstream csv;
        csv << "index,bits,proxy_score,flops_ratio\n";
        for (std::size_t i = 0; i < outcome.evaluations.size(); ++i) {
            const auto& e = outcome.evaluations[i];
            csv << i << ',' << e.pattern.to_string() << ',' << format_double(e.proxy_score)
                << ',' << format_double(e.flops_ratio) << '\n';
        }
        write_text_file(join_path(out_dir, "candidates.csv"), csv.str());
        ordered_json report;
        report["found"] = outcome.sample.patterns.size();
        report["attempts"] = outcome.sample.attempts;
        report["rejections"] = rejections_to_json(outcome.sample.rejections);
        report["constraints"] = constraints_to_json(cfg.constraints);
        report["winner"] = {{"bits", outcome.winner.pattern.bits},
                            {"proxy_score", outcome.winner.proxy_score},
                            {"flops_ratio", outcome.winner.flops_ratio}};
        write_text_file(join_path(out_dir, "search_report.json"), report.dump(2) + "\n");
    }
    return outcome;
}

RunOutcome cmd_run(const ExperimentConfig& cfg, const CachingPattern& pattern, bool no_selective,
                   const std::string& out_dir) {
    cfg.validate();
    pattern.validate();
    if (pattern.length() != cfg.model.steps) {
        throw ConfigError("run: pattern length does not match model steps");
    }
    const bool with_selective = !no_selective;
    const ProxyEvaluator evaluator(cfg.model, cfg.selective, cfg.search.eval_seeds,
                                   cfg.search.eval_batch, with_selective);
    const CandidateEvaluation eval = evaluator.evaluate(pattern);
    const ExecutionPlan plan = build_plan(pattern, cfg.selective, with_selective);

    RunOutcome outcome;
    outcome.report.proxy_score = eval.proxy_score;
    outcome.report.flops = flops_estimate(plan, cfg.model, cfg.selective);
    outcome.report.pattern_bits = pattern.bits;
    outcome.report.layer_ratio = cfg.selective.layer_ratio;
    outcome.report.token_ratio = cfg.selective.token_ratio;
    outcome.report.selective_enabled = with_selective;
    outcome.report.model_seed = cfg.model.seed;
    outcome.report.eval_seeds = cfg.search.eval_seeds;
    outcome.report.eval_batch = cfg.search.eval_batch;

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_text_file(join_path(out_dir, "config.json"),
                        experiment_config_to_json(cfg).dump(2) + "\n");
        write_text_file(join_path(out_dir, "plan.csv"), plan_to_csv(plan));
        write_text_file(join_path(out_dir, "plan_summary.json"),
                        plan_summary_json(plan).dump(2) + "\n");
        if (cfg.capture_snapshots) {
            const std::vector<RunTrace> cached = evaluator.traced_runs(pattern, with_selective);
            const std::vector<RunTrace>& base = evaluator.baseline_traces();

            std::vector<ErrorCurve> deltas;
            for (const RunTrace& t : base) {
                deltas.push_back(consecutive_output_delta(t));
            }
            write_text_file(join_path(out_dir, "consecutive_delta.csv"),
                            curves_to_csv({average_curves(deltas)}));

            // Profile at the last cached step (falls back to T for all-ones).
            int t_star = cfg.model.steps;
            for (int t = cfg.model.steps; t >= 1; --t) {
                if (pattern.bit(t) == 0) {
                    t_star = t;
                    break;
                }
            }
            std::vector<ErrorCurve> profiles;
            for (std::size_t i = 0; i < cached.size(); ++i) {
                profiles.push_back(block_error_profile(cached[i], base[i], t_star));
            }
            write_text_file(join_path(out_dir, "block_profile.csv"),
                            curves_to_csv({average_curves(profiles)}));

            std::vector<ErrorCurve> step_curves;
            for (int l = 1; l <= cfg.model.layers; ++l) {
                std::vector<ErrorCurve> per_input;
                for (std::size_t i = 0; i < cached.size(); ++i) {
                    per_input.push_back(step_error_profile(cached[i], base[i], l));
                }
                step_curves.push_back(average_curves(per_input));
            }
            write_text_file(join_path(out_dir, "step_errors.csv"), curves_to_csv(step_curves));

            outcome.report.curve_files = {"consecutive_delta.csv", "block_profile.csv",
                                          "step_errors.csv"};
        }
        write_text_file(join_path(out_dir, "eval_report.json"),
                        eval_report_to_json(outcome.report).dump(2) + "\n");
    }
    return outcome;
}

BenchOutcome cmd_bench(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    const SearchOutcome search = cmd_search(cfg, "");
    BenchOutcome outcome;
    outcome.searched = search.winner.pattern;

    const ProxyEvaluator evaluator(cfg.model, cfg.selective, cfg.search.eval_seeds,
                                   cfg.search.eval_batch, false);
    const ProxyEvaluator evaluator_sel(cfg.model, cfg.selective, cfg.search.eval_seeds,
                                       cfg.search.eval_batch, true);

    const CachingPattern baseline = CachingPattern::all_ones(cfg.model.steps);
    const CachingPattern uniform = CachingPattern::uniform(
        cfg.model.steps, uniform_stride(cfg.model.steps, cfg.constraints.budget));

    auto to_row = [](const std::string& name, const CandidateEvaluation& e) {
        return BenchRow{name, e.pattern, e.flops_ratio, 1.0 / e.flops_ratio, e.proxy_score};
    };
    outcome.rows.push_back(to_row("baseline", evaluator.evaluate(baseline)));
    outcome.rows.push_back(to_row("uniform", evaluator.evaluate(uniform)));
    outcome.rows.push_back(to_row("searched", evaluator.evaluate(outcome.searched)));
    outcome.rows.push_back(
        to_row("searched+selective", evaluator_sel.evaluate(outcome.searched)));

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::ostringstream csv;
        csv << "variant,flops_ratio,speedup,proxy_score\n";
        for (const auto& row : outcome.rows) {
            csv << row.variant << ',' << format_double(row.flops_ratio) << ','
                << format_double(row.speedup) << ',' << format_double(row.proxy_score) << '\n';
        }
        write_text_file(join_path(out_dir, "bench_table.csv"), csv.str());
        ordered_json report;
        ordered_json rows = ordered_json::array();
        for (const auto& row : outcome.rows) {
            rows.push_back({{"variant", row.variant},
                            {"bits", row.pattern.bits},
                            {"flops_ratio", row.flops_ratio},
                            {"speedup", row.speedup},
                            {"proxy_score", row.proxy_score}});
        }
        report["rows"] = rows;
        report["config"] = experiment_config_to_json(cfg);
        write_text_file(join_path(out_dir, "bench_report.json"), report.dump(2) + "\n");
        write_text_file(
            join_path(out_dir, "best_pattern.json"),
            pattern_to_json(outcome.searched, cfg.constraints, cfg.search.seed).dump(2) + "\n");
    }
    return outcome;
}

}  // namespace procache
