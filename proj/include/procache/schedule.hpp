#pragma once

#include <cstdint>
#include <vector>

#include "procache/pattern.hpp"

namespace procache {

/// Selective-computation knobs: on injected steps, recompute the deepest
/// layer_ratio * L layers, and within cross-attention / MLP only the top
/// token_ratio share of tokens.
struct SelectiveConfig {
    double layer_ratio = 1.0;  // r in (0, 1]
    double token_ratio = 1.0;  // p in (0, 1]
    int total_layers = 1;      // L

    void validate() const;
    /// D = max(1, round-half-up(r * L)), clamped to L.
    int selected_layer_count() const;
};

enum class StepAction : std::uint8_t { FullCompute, SelectiveCompute, CacheOnly };

const char* step_action_name(StepAction a);

/// Per-timestep, per-layer action table. Row t is all FullCompute iff the
/// pattern has bit(t) == 1; SelectiveCompute appears exactly on the cells
/// (t in selective_steps) x (l in selective_layers); everything else is
/// CacheOnly. Steps and layers are 1-based.
struct ExecutionPlan {
    int steps = 0;
    int layers = 0;
    std::vector<StepAction> actions;   // steps * layers, row-major
    std::vector<int> selective_steps;  // sorted ascending
    std::vector<int> selective_layers; // sorted ascending

    StepAction action(int t, int l) const {
        return actions[static_cast<std::size_t>(t - 1) * layers + (l - 1)];
    }
    bool row_all(int t, StepAction a) const;
    long long count(StepAction a) const;
    /// FullCompute plus SelectiveCompute cells.
    long long computed_cells() const;
};

/// First step of the maximal contiguous zero block containing t: one past
/// the latest activation at or before t, or 1 when no activation precedes t.
/// For a computed step (bit(t) == 1) returns t itself.
int zero_block_start(const CachingPattern& pattern, int t);

/// Cached steps selected for injected partial computation: every second
/// position inside each zero block, i.e. { t | bit(t) == 0 and
/// t - zero_block_start(t) + 1 is even }. Sorted ascending.
std::vector<int> selective_steps(const CachingPattern& pattern);

/// The D deepest layer indices {L-D+1, ..., L}, D per cfg. Sorted ascending.
std::vector<int> selective_layers(const SelectiveConfig& cfg);

/// Expands a pattern into the action table. With enable_selective == false
/// every cached step is pure CacheOnly (used for pure-caching ablations).
ExecutionPlan build_plan(const CachingPattern& pattern, const SelectiveConfig& cfg,
                         bool enable_selective = true);

}  // namespace procache
