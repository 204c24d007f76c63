#include "procache/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "procache/errors.hpp"

namespace procache {

void SelectiveConfig::validate() const {
    if (!(layer_ratio > 0.0 && layer_ratio <= 1.0)) {
        throw ConfigError("selective config: layer_ratio must be in (0, 1]");
    }
    if (!(token_ratio > 0.0 && token_ratio <= 1.0)) {
        throw ConfigError("selective config: token_ratio must be in (0, 1]");
    }
    if (total_layers < 1) {
        throw ConfigError("selective config: total_layers must be >= 1");
    }
}

int SelectiveConfig::selected_layer_count() const {
    // Round half up; clamp into [1, L].
    const int d = static_cast<int>(std::floor(layer_ratio * total_layers + 0.5));
    return std::min(total_layers, std::max(1, d));
}

const char* step_action_name(StepAction a) {
    switch (a) {
        case StepAction::FullCompute: return "FullCompute";
        case StepAction::SelectiveCompute: return "SelectiveCompute";
        case StepAction::CacheOnly: return "CacheOnly";
    }
    return "?";
}

bool ExecutionPlan::row_all(int t, StepAction a) const {
    for (int l = 1; l <= layers; ++l) {
        if (action(t, l) != a) {
            return false;
        }
    }
    return true;
}

long long ExecutionPlan::count(StepAction a) const {
    long long n = 0;
    for (StepAction x : actions) {
        n += (x == a);
    }
    return n;
}

long long ExecutionPlan::computed_cells() const {
    return count(StepAction::FullCompute) + count(StepAction::SelectiveCompute);
}

int zero_block_start(const CachingPattern& pattern, int t) {
    if (t < 1 || t > pattern.length()) {
        throw ConfigError("zero_block_start: step index out of range");
    }
    if (pattern.bit(t) == 1) {
        return t;
    }
    for (int tau = t; tau >= 1; --tau) {
        if (pattern.bit(tau) == 1) {
            return tau + 1;
        }
    }
    return 1;
}

std::vector<int> selective_steps(const CachingPattern& pattern) {
    std::vector<int> steps;
    int block_start = 1;
    for (int t = 1; t <= pattern.length(); ++t) {
        if (pattern.bit(t) == 1) {
            block_start = t + 1;
        } else if ((t - block_start + 1) % 2 == 0) {
            steps.push_back(t);
        }
    }
    return steps;
}

std::vector<int> selective_layers(const SelectiveConfig& cfg) {
    cfg.validate();
    const int d = cfg.selected_layer_count();
    std::vector<int> layers;
    layers.reserve(static_cast<std::size_t>(d));
    for (int l = cfg.total_layers - d + 1; l <= cfg.total_layers; ++l) {
        layers.push_back(l);
    }
    return layers;
}

ExecutionPlan build_plan(const CachingPattern& pattern, const SelectiveConfig& cfg,
                         bool enable_selective) {
    pattern.validate();
    cfg.validate();
    ExecutionPlan plan;
    plan.steps = pattern.length();
    plan.layers = cfg.total_layers;
    plan.actions.assign(static_cast<std::size_t>(plan.steps) * plan.layers,
                        StepAction::CacheOnly);
    if (enable_selective) {
        plan.selective_steps = selective_steps(pattern);
        plan.selective_layers = selective_layers(cfg);
    }
    std::vector<bool> is_selective_layer(static_cast<std::size_t>(plan.layers) + 1, false);
    for (int l : plan.selective_layers) {
        is_selective_layer[static_cast<std::size_t>(l)] = true;
    }
    std::vector<bool> is_selective_step(static_cast<std::size_t>(plan.steps) + 1, false);
    for (int t : plan.selective_steps) {
        is_selective_step[static_cast<std::size_t>(t)] = true;
    }
    for (int t = 1; t <= plan.steps; ++t) {
        for (int l = 1; l <= plan.layers; ++l) {
            StepAction a = StepAction::CacheOnly;
            if (pattern.bit(t) == 1) {
                a = StepAction::FullCompute;
            } else if (is_selective_step[static_cast<std::size_t>(t)] &&
                       is_selective_layer[static_cast<std::size_t>(l)]) {
                a = StepAction::SelectiveCompute;
            }
            plan.actions[static_cast<std::size_t>(t - 1) * plan.layers + (l - 1)] = a;
        }
    }
    return plan;
}

}  // namespace procache
