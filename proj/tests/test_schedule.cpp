#include <algorithm>
#include <vector>

#include "doctest.h"
#include "procache/errors.hpp"
#include "procache/rng.hpp"
#include "procache/schedule.hpp"

using namespace procache;

namespace {

CachingPattern pat(std::vector<std::uint8_t> bits) { return CachingPattern(std::move(bits)); }

CachingPattern random_pattern(SplitMix64& rng, int max_steps = 40) {
    const int steps = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_steps - 1)));
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(steps), 0);
    bits[0] = 1;
    for (int t = 1; t < steps; ++t) {
        bits[static_cast<std::size_t>(t)] = rng.next() & 1;
    }
    return CachingPattern(std::move(bits));
}

}  // namespace

TEST_CASE("zero_block_start finds the block head") {
    const auto p = pat({1, 0, 0, 0, 1, 0});
    CHECK(zero_block_start(p, 3) == 2);
    CHECK(zero_block_start(p, 6) == 6);
    CHECK(zero_block_start(p, 2) == 2);
    CHECK(zero_block_start(p, 4) == 2);
    // Computed steps map to themselves.
    CHECK(zero_block_start(p, 1) == 1);
    CHECK(zero_block_start(p, 5) == 5);
    // No prior activation: reachable only when the leading-1 convention is
    // off, so build the raw pattern without validating it.
    CHECK(zero_block_start(pat({0, 0, 1}), 2) == 1);
    CHECK_THROWS_AS(zero_block_start(p, 0), ConfigError);
    CHECK_THROWS_AS(zero_block_start(p, 7), ConfigError);
}

TEST_CASE("selective_steps selects even offsets inside zero blocks") {
    CHECK(selective_steps(pat({1, 0, 0, 0, 0, 0, 1})) == std::vector<int>{3, 5});
    CHECK(selective_steps(pat({1, 0, 1, 0})).empty());
    CHECK(selective_steps(CachingPattern::all_ones(6)).empty());
}

TEST_CASE("selective_steps reproduces the injection table for block lengths 1..6") {
    // [0] -> [0], [0,0] -> [0,a], ..., [0,0,0,0,0,0] -> [0,a,0,a,0,a]
    const std::vector<std::vector<int>> expected_offsets = {
        {}, {2}, {2}, {2, 4}, {2, 4}, {2, 4, 6},
    };
    for (int len = 1; len <= 6; ++len) {
        std::vector<std::uint8_t> bits(static_cast<std::size_t>(len) + 1, 0);
        bits[0] = 1;
        const auto steps = selective_steps(pat(bits));
        std::vector<int> offsets;
        for (int t : steps) {
            offsets.push_back(t - 1);  // position within the zero block
        }
        CAPTURE(len);
        CHECK(offsets == expected_offsets[static_cast<std::size_t>(len) - 1]);
    }
}

TEST_CASE("selective_layers picks the deepest block indices") {
    CHECK(selective_layers({0.25, 1.0, 12}) == std::vector<int>{10, 11, 12});
    const auto half = selective_layers({0.5, 1.0, 28});
    REQUIRE(half.size() == 14);
    CHECK(half.front() == 15);
    CHECK(half.back() == 28);
    // round(0.4) = 0 clamps up to a single layer.
    CHECK(selective_layers({0.1, 1.0, 4}) == std::vector<int>{4});
    CHECK(selective_layers({1.0, 1.0, 5}) == std::vector<int>{1, 2, 3, 4, 5});
}

TEST_CASE("selective config validation") {
    CHECK_THROWS_AS(SelectiveConfig({0.0, 0.5, 4}).validate(), ConfigError);
    CHECK_THROWS_AS(SelectiveConfig({0.5, 1.5, 4}).validate(), ConfigError);
    CHECK_THROWS_AS(SelectiveConfig({0.5, 0.5, 0}).validate(), ConfigError);
    CHECK(SelectiveConfig({0.75, 0.07, 8}).selected_layer_count() == 6);
}

TEST_CASE("build_plan expands patterns into action tables") {
    SUBCASE("all ones is all FullCompute") {
        const auto plan = build_plan(CachingPattern::all_ones(3), {0.5, 0.5, 4});
        for (int t = 1; t <= 3; ++t) {
            CHECK(plan.row_all(t, StepAction::FullCompute));
        }
        CHECK(plan.selective_steps.empty());
    }
    SUBCASE("pinned 4-step example") {
        const auto plan = build_plan(pat({1, 0, 0, 0}), {0.5, 0.5, 4});
        CHECK(plan.row_all(1, StepAction::FullCompute));
        CHECK(plan.row_all(2, StepAction::CacheOnly));
        CHECK(plan.row_all(4, StepAction::CacheOnly));
        CHECK(plan.action(3, 1) == StepAction::CacheOnly);
        CHECK(plan.action(3, 2) == StepAction::CacheOnly);
        CHECK(plan.action(3, 3) == StepAction::SelectiveCompute);
        CHECK(plan.action(3, 4) == StepAction::SelectiveCompute);
        CHECK(plan.selective_steps == std::vector<int>{3});
        CHECK(plan.selective_layers == std::vector<int>{3, 4});
    }
    SUBCASE("selective disabled leaves pure caching") {
        const auto plan = build_plan(pat({1, 0, 0, 0}), {0.5, 0.5, 4}, false);
        CHECK(plan.count(StepAction::SelectiveCompute) == 0);
        CHECK(plan.count(StepAction::FullCompute) == 4);
        CHECK(plan.selective_steps.empty());
    }
}

TEST_CASE("plan invariants hold on random patterns") {
    SplitMix64 rng(21);
    for (int iter = 0; iter < 300; ++iter) {
        const auto pattern = random_pattern(rng);
        SelectiveConfig cfg;
        cfg.total_layers = 1 + static_cast<int>(rng.below(10));
        cfg.layer_ratio = 0.05 + 0.95 * rng.uniform();
        cfg.token_ratio = 1.0;
        const auto plan = build_plan(pattern, cfg);

        // Partition: rows of computed steps are fully FullCompute, and the
        // FullCompute count is exactly M * L.
        const auto profile = activation_profile(pattern);
        CHECK(plan.count(StepAction::FullCompute) ==
              static_cast<long long>(profile.count()) * cfg.total_layers);
        CHECK(plan.count(StepAction::FullCompute) + plan.count(StepAction::SelectiveCompute) +
                  plan.count(StepAction::CacheOnly) ==
              static_cast<long long>(plan.steps) * plan.layers);

        // Parity: t in T^cmpt iff the offset inside its zero block is even.
        std::vector<bool> is_selective(static_cast<std::size_t>(plan.steps) + 1, false);
        for (int t : plan.selective_steps) {
            is_selective[static_cast<std::size_t>(t)] = true;
        }
        for (int t = 1; t <= plan.steps; ++t) {
            if (pattern.bit(t) == 1) {
                continue;
            }
            const int offset = t - zero_block_start(pattern, t) + 1;
            CHECK(is_selective[static_cast<std::size_t>(t)] == (offset % 2 == 0));
        }

        // Inside a zero block, two neighbouring steps are never both pure
        // cache: the injected steps alternate with single cached steps.
        for (int t = 1; t < plan.steps; ++t) {
            if (pattern.bit(t) == 0 && pattern.bit(t + 1) == 0) {
                const bool either = is_selective[static_cast<std::size_t>(t)] ||
                                    is_selective[static_cast<std::size_t>(t) + 1];
                CHECK(either);
            }
        }

        // Idempotence.
        const auto again = build_plan(pattern, cfg);
        CHECK(again.actions == plan.actions);
    }
}

TEST_CASE("computed cells grow monotonically with r and bit density") {
    SplitMix64 rng(31);
    for (int iter = 0; iter < 200; ++iter) {
        const auto pattern = random_pattern(rng, 30);
        SelectiveConfig cfg;
        cfg.total_layers = 2 + static_cast<int>(rng.below(8));
        cfg.layer_ratio = 0.05 + 0.6 * rng.uniform();
        const auto base_cells = build_plan(pattern, cfg).computed_cells();

        SelectiveConfig deeper = cfg;
        deeper.layer_ratio = cfg.layer_ratio + (1.0 - cfg.layer_ratio) * rng.uniform();
        CHECK(build_plan(pattern, deeper).computed_cells() >= base_cells);

        std::vector<int> zeros;
        for (int t = 1; t <= pattern.length(); ++t) {
            if (pattern.bit(t) == 0) {
                zeros.push_back(t);
            }
        }
        if (!zeros.empty()) {
            auto denser = pattern;
            const int flip = zeros[static_cast<std::size_t>(
                rng.below(static_cast<std::uint64_t>(zeros.size())))];
            denser.bits[static_cast<std::size_t>(flip) - 1] = 1;
            CHECK(build_plan(denser, cfg).computed_cells() >= base_cells);
        }
    }
}
