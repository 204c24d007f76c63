#include "procache/serialize.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "procache/errors.hpp"

namespace procache {

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

ordered_json pattern_to_json(const CachingPattern& pattern, const ConstraintSet& cs,
                             std::uint64_t seed) {
    ordered_json j;
    j["steps"] = pattern.length();
    j["bits"] = pattern.bits;
    j["meta"] = {{"budget", cs.budget},
                 {"v_min", cs.v_min},
                 {"v_max", cs.v_max},
                 {"seed", seed}};
    return j;
}

CachingPattern pattern_from_json(const ordered_json& j) {
    try {
        CachingPattern p;
        p.bits = j.at("bits").get<std::vector<std::uint8_t>>();
        if (j.contains("steps") && j.at("steps").get<int>() != p.length()) {
            throw ConfigError("pattern file: steps field does not match bits length");
        }
        p.validate();
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("pattern file: ") + e.what());
    }
}

CachingPattern load_pattern_file(const std::string& path) {
    try {
        return pattern_from_json(ordered_json::parse(read_text_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

std::string plan_to_csv(const ExecutionPlan& plan) {
    std::ostringstream out;
    out << "step,layer,action\n";
    for (int t = 1; t <= plan.steps; ++t) {
        for (int l = 1; l <= plan.layers; ++l) {
            out << t << ',' << l << ',' << step_action_name(plan.action(t, l)) << '\n';
        }
    }
    return out.str();
}

ordered_json plan_summary_json(const ExecutionPlan& plan) {
    int full_steps = 0;
    for (int t = 1; t <= plan.steps; ++t) {
        full_steps += plan.row_all(t, StepAction::FullCompute);
    }
    ordered_json j;
    j["full_steps"] = full_steps;
    j["selective_steps"] = plan.selective_steps.size();
    j["cache_cells"] = plan.count(StepAction::CacheOnly);
    return j;
}

std::string curves_to_csv(const std::vector<ErrorCurve>& curves) {
    std::ostringstream out;
    out << "axis,label,value\n";
    for (const auto& curve : curves) {
        for (std::size_t i = 0; i < curve.axis.size(); ++i) {
            out << curve.axis[i] << ',' << curve.label << ',' << format_double(curve.values[i])
                << '\n';
        }
    }
    return out.str();
}

ordered_json flops_report_to_json(const FlopsReport& report) {
    ordered_json j;
    j["per_action"] = {
        {"full", {{"cell_flops", report.full_cell}, {"cells", report.full_cells}}},
        {"selective", {{"cell_flops", report.selective_cell}, {"cells", report.selective_cells}}},
        {"cache_only", {{"cell_flops", report.cache_cell}, {"cells", report.cache_cells}}},
        {"step_overhead", report.step_overhead},
    };
    j["total"] = report.total;
    j["baseline"] = report.baseline;
    j["ratio"] = report.ratio;
    j["speedup"] = report.speedup;
    return j;
}

ordered_json eval_report_to_json(const EvalReport& report) {
    ordered_json j;
    j["proxy_score"] = report.proxy_score;
    j["flops"] = flops_report_to_json(report.flops);
    j["pattern"] = {{"steps", report.pattern_bits.size()}, {"bits", report.pattern_bits}};
    j["selective"] = {{"enabled", report.selective_enabled},
                      {"layer_ratio", report.layer_ratio},
                      {"token_ratio", report.token_ratio}};
    j["seeds"] = {{"model", report.model_seed},
                  {"eval_seeds", report.eval_seeds},
                  {"eval_batch", report.eval_batch}};
    j["curves"] = report.curve_files;
    return j;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw ConfigError("cannot open for writing: " + path);
    }
    out << content;
    if (!out) {
        throw ConfigError("write failed: " + path);
    }
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("cannot open: " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace procache
