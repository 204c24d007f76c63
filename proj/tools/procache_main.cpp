// procache: constraint-aware caching-pattern search and selective-computation
// scheduling, run against a small deterministic diffusion-transformer
// simulator. Subcommands: enumerate | search | run | bench | report.

#include <chrono>
#include <cstdio>
#include <exception>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "procache/errors.hpp"
#include "procache/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumeric = 4;

struct CommonOpts {
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "Experiment config JSON (schema 1)");
    cmd->add_option("--preset", opts.preset, "Built-in preset: dit-xl2-like | pixart-like");
    cmd->add_option("--out", opts.out_dir, "Artifact directory (overrides config output_dir)");
    cmd->add_option("--seed", opts.seed, "Override the search seed")
        ->each([&opts](const std::string&) { opts.seed_set = true; });
}

procache::ExperimentConfig resolve_config(const CommonOpts& opts) {
    if (!opts.config_path.empty() && !opts.preset.empty()) {
        throw procache::ConfigError("pass either --config or --preset, not both");
    }
    procache::ExperimentConfig cfg;
    if (!opts.config_path.empty()) {
        cfg = procache::load_experiment_config(opts.config_path);
    } else if (!opts.preset.empty()) {
        cfg = procache::make_preset(opts.preset);
    } else {
        throw procache::ConfigError("one of --config or --preset is required");
    }
    if (!opts.out_dir.empty()) {
        cfg.output_dir = opts.out_dir;
    }
    if (opts.seed_set) {
        cfg.search.seed = opts.seed;
    }
    return cfg;
}

class WallTimer {
public:
    WallTimer() : start_(std::chrono::steady_clock::now()) {}
    // Informational only; never written into artifacts.
    void report() const {
        const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                           start_)
                                 .count();
        std::printf("wall time: %.3f s\n", elapsed);
    }

private:
    std::chrono::steady_clock::time_point start_;
};

int run_enumerate(const CommonOpts& common, bool list, bool compare) {
    const auto cfg = resolve_config(common);
    WallTimer timer;
    const auto outcome = procache::cmd_enumerate(cfg, list, compare, cfg.output_dir);
    std::printf("valid patterns: %lld\n", outcome.count);
    for (const auto& row : outcome.sampler) {
        std::printf("  attempts=%-8lld found=%lld\n", row.max_attempts, row.found);
    }
    std::printf("artifacts: %s\n", cfg.output_dir.c_str());
    timer.report();
    return kExitOk;
}

int run_search(const CommonOpts& common) {
    const auto cfg = resolve_config(common);
    WallTimer timer;
    const auto outcome = procache::cmd_search(cfg, cfg.output_dir);
    std::printf("candidates evaluated: %zu (attempts %lld)\n", outcome.evaluations.size(),
                outcome.sample.attempts);
    std::printf("winner: %s  proxy_score=%.6g  flops_ratio=%.4f\n",
                outcome.winner.pattern.to_string().c_str(), outcome.winner.proxy_score,
                outcome.winner.flops_ratio);
    std::printf("artifacts: %s\n", cfg.output_dir.c_str());
    timer.report();
    return kExitOk;
}

int run_run(const CommonOpts& common, const std::string& pattern_path, bool no_selective) {
    const auto cfg = resolve_config(common);
    if (pattern_path.empty()) {
        throw procache::ConfigError("run: --pattern is required");
    }
    const auto pattern = procache::load_pattern_file(pattern_path);
    WallTimer timer;
    const auto outcome = procache::cmd_run(cfg, pattern, no_selective, cfg.output_dir);
    std::printf("proxy_score=%.6g  flops_ratio=%.4f  speedup=%.3fx\n",
                outcome.report.proxy_score, outcome.report.flops.ratio,
                outcome.report.flops.speedup);
    std::printf("artifacts: %s\n", cfg.output_dir.c_str());
    timer.report();
    return kExitOk;
}

int run_bench(const CommonOpts& common) {
    const auto cfg = resolve_config(common);
    WallTimer timer;
    const auto outcome = procache::cmd_bench(cfg, cfg.output_dir);
    std::printf("%-20s %-12s %-9s %s\n", "variant", "flops_ratio", "speedup", "proxy_score");
    for (const auto& row : outcome.rows) {
        std::printf("%-20s %-12.4f %-9.3f %.6g\n", row.variant.c_str(), row.flops_ratio,
                    row.speedup, row.proxy_score);
    }
    std::printf("artifacts: %s\n", cfg.output_dir.c_str());
    timer.report();
    return kExitOk;
}

int run_report(const std::string& path) {
    const auto j = nlohmann::ordered_json::parse(procache::read_text_file(path));
    if (j.contains("rows")) {  // bench report
        std::printf("%-20s %-12s %-9s %s\n", "variant", "flops_ratio", "speedup", "proxy_score");
        for (const auto& row : j.at("rows")) {
            std::printf("%-20s %-12.4f %-9.3f %.6g\n",
                        row.at("variant").get<std::string>().c_str(),
                        row.at("flops_ratio").get<double>(), row.at("speedup").get<double>(),
                        row.at("proxy_score").get<double>());
        }
        return kExitOk;
    }
    if (j.contains("proxy_score")) {  // eval report
        std::printf("proxy_score: %.6g\n", j.at("proxy_score").get<double>());
        const auto& flops = j.at("flops");
        std::printf("flops: total=%.6g baseline=%.6g ratio=%.4f speedup=%.3fx\n",
                    flops.at("total").get<double>(), flops.at("baseline").get<double>(),
                    flops.at("ratio").get<double>(), flops.at("speedup").get<double>());
        for (const auto& f : j.value("curves", std::vector<std::string>{})) {
            std::printf("curve: %s\n", f.c_str());
        }
        return kExitOk;
    }
    if (j.contains("count")) {  // enumeration report
        std::printf("valid patterns: %lld\n", j.at("count").get<long long>());
        return kExitOk;
    }
    throw procache::ConfigError(path + ": not a recognized report file");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"constraint-aware feature-caching schedule search on a toy DiT simulator"};
    app.require_subcommand(1);

    CommonOpts enum_opts, search_opts, run_opts, bench_opts;
    bool list_patterns = false;
    bool compare_sampler = false;
    std::string pattern_path;
    bool no_selective = false;
    std::string report_path;

    auto* cmd_enum = app.add_subcommand("enumerate", "Exhaustively count the valid pattern space");
    add_common(cmd_enum, enum_opts);
    cmd_enum->add_flag("--list", list_patterns, "Also write every valid pattern");
    cmd_enum->add_flag("--compare-sampler", compare_sampler,
                       "Tabulate sampler found-counts at 1e3..1e6 attempts");

    auto* cmd_sea = app.add_subcommand("search", "Sample candidates and pick the best pattern");
    add_common(cmd_sea, search_opts);

    auto* cmd_run_ = app.add_subcommand("run", "Evaluate one pattern against the baseline");
    add_common(cmd_run_, run_opts);
    cmd_run_->add_option("--pattern", pattern_path, "Pattern JSON file")->required();
    cmd_run_->add_flag("--no-selective", no_selective, "Pure caching, no injected computation");

    auto* cmd_ben = app.add_subcommand("bench", "Compare baseline / uniform / searched variants");
    add_common(cmd_ben, bench_opts);

    auto* cmd_rep = app.add_subcommand("report", "Pretty-print a report JSON");
    cmd_rep->add_option("file", report_path, "Report file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (cmd_enum->parsed()) {
            return run_enumerate(enum_opts, list_patterns, compare_sampler);
        }
        if (cmd_sea->parsed()) {
            return run_search(search_opts);
        }
        if (cmd_run_->parsed()) {
            return run_run(run_opts, pattern_path, no_selective);
        }
        if (cmd_ben->parsed()) {
            return run_bench(bench_opts);
        }
        if (cmd_rep->parsed()) {
            return run_report(report_path);
        }
    } catch (const procache::InfeasibleError& e) {
        std::fprintf(stderr, "infeasible: %s\n", e.what());
        return kExitInfeasible;
    } catch (const procache::NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const procache::RunStateError& e) {
        std::fprintf(stderr, "run-state failure: %s\n", e.what());
        return kExitNumeric;
    } catch (const procache::ConfigError& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "configuration error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitNumeric;
    }
    return kExitOk;
}
