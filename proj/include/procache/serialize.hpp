#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "procache/metrics.hpp"
#include "procache/pattern.hpp"
#include "procache/schedule.hpp"

namespace procache {

using ordered_json = nlohmann::ordered_json;

/// Shortest-round-trip decimal for CSV cells; bit-stable for equal doubles.
std::string format_double(double x);

/// {"steps": T, "bits": [...], "meta": {"budget", "v_min", "v_max", "seed"}}
ordered_json pattern_to_json(const CachingPattern& pattern, const ConstraintSet& cs,
                             std::uint64_t seed);
CachingPattern pattern_from_json(const ordered_json& j);
CachingPattern load_pattern_file(const std::string& path);

/// CSV with header "step,layer,action"; actions named FullCompute /
/// SelectiveCompute / CacheOnly.
std::string plan_to_csv(const ExecutionPlan& plan);
/// {"full_steps", "selective_steps", "cache_cells"}
ordered_json plan_summary_json(const ExecutionPlan& plan);

/// CSV with header "axis,label,value"; one row per curve point.
std::string curves_to_csv(const std::vector<ErrorCurve>& curves);

/// {"per_action": {...}, "total", "baseline", "ratio", "speedup"}
ordered_json flops_report_to_json(const FlopsReport& report);

ordered_json eval_report_to_json(const EvalReport& report);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace procache
