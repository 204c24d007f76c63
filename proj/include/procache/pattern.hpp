#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace procache {

/// Binary caching schedule over T denoising steps. bit(t) == 1 means step t
/// recomputes every block and refreshes the caches; 0 means the step reuses
/// cached residual-branch outputs. Steps are 1-based throughout the API.
///
/// Invariants: length >= 1, every element 0/1, and bit(1) == 1 — the first
/// step has no cache to reuse. Trailing zeros after the last activation are
/// allowed up to v_max of the governing ConstraintSet.
struct CachingPattern {
    std::vector<std::uint8_t> bits;

    CachingPattern() = default;
    explicit CachingPattern(std::vector<std::uint8_t> b) : bits(std::move(b)) {}

    int length() const { return static_cast<int>(bits.size()); }
    int bit(int t) const { return bits[static_cast<std::size_t>(t) - 1]; }
    int activation_count() const;

    /// Throws ConfigError when a type invariant is broken.
    void validate() const;

    static CachingPattern all_ones(int steps);
    /// FORA-style uniform schedule: activations at 1, 1+stride, 1+2*stride, ...
    static CachingPattern uniform(int steps, int stride);

    std::string to_string() const;  // e.g. "1001001"
    bool operator==(const CachingPattern& o) const { return bits == o.bits; }
    bool operator<(const CachingPattern& o) const { return bits < o.bits; }
};

/// Activation timestamps t_1 < ... < t_M and the reuse intervals between
/// them, v_i = t_{i+1} - t_i - 1 (number of cached steps in gap i).
struct ActivationProfile {
    std::vector<int> timestamps;
    std::vector<int> intervals;

    int count() const { return static_cast<int>(timestamps.size()); }
    /// Cached steps after the last activation (not an interval; bounded
    /// separately by v_max).
    int tail(int steps) const { return timestamps.empty() ? steps : steps - timestamps.back(); }
};

/// Feasibility constraints defining the searchable pattern space: at most
/// `budget` activations, every reuse interval within [v_min, v_max] (the
/// trailing run only has the upper bound), optionally non-increasing
/// intervals from early to late steps.
struct ConstraintSet {
    int steps = 0;
    int budget = 0;
    int v_min = 0;
    int v_max = 0;
    bool require_monotonic = false;

    void validate() const;  // 0 <= v_min <= v_max < steps, 1 <= budget <= steps
};

enum class Constraint { Budget, Monotonic, Bounded };

const char* constraint_name(Constraint c);

struct ConstraintCheck {
    std::vector<Constraint> violations;
    bool ok() const { return violations.empty(); }
};

/// Sampling/search knobs. `quota` is the number of distinct candidates to
/// collect, `max_attempts` caps the number of generated candidates. The
/// eval_* fields drive proxy evaluation of candidates.
struct SearchConfig {
    int quota = 5;
    long long max_attempts = 1000000;
    std::uint64_t seed = 0;
    std::vector<std::uint64_t> eval_seeds = {1};
    int eval_batch = 1;

    void validate() const;  // quota >= 1, max_attempts >= quota
};

struct RejectionCounts {
    long long budget = 0;
    long long bounded = 0;
    long long monotonic = 0;
    long long total() const { return budget + bounded + monotonic; }
};

struct SampleResult {
    std::vector<CachingPattern> patterns;
    long long attempts = 0;
    RejectionCounts rejections;
};

struct CandidateEvaluation {
    CachingPattern pattern;
    double proxy_score = 0.0;  // mean relative-L1 of final output vs full compute
    double flops_ratio = 1.0;
};

/// Scores one candidate pattern against the full-compute baseline. Concrete
/// implementations bundle the simulator plus evaluation seeds.
class CandidateEvaluator {
public:
    virtual ~CandidateEvaluator() = default;
    virtual CandidateEvaluation evaluate(const CachingPattern& pattern) const = 0;
};

ActivationProfile activation_profile(const CachingPattern& pattern);

/// Checks budget / bounded / monotonic against cs. Monotonic is only checked
/// when cs.require_monotonic; patterns with at most one activation satisfy
/// bounded and monotonic vacuously (except for the trailing-run bound).
ConstraintCheck check_constraints(const CachingPattern& pattern, const ConstraintSet& cs);

/// Draws distinct candidate patterns from the constrained space.
///
/// Proposal: activation count M uniform in [1, budget], reuse intervals
/// uniform in [v_min, v_max] (budget holds by construction, so budget
/// rejections stay zero); candidates that do not fit in T steps or leave a
/// trailing run longer than v_max are rejected as "bounded". With
/// filter_monotonic the interval sequence is drawn as a uniformly random
/// non-increasing multiset via combinatorial unranking, so that every
/// monotonic pattern — including all-minimal-interval corners a sorted
/// i.i.d. draw would essentially never produce — is reachable within a
/// realistic attempt budget. Deterministic given sc.seed; stops at quota or
/// max_attempts. The monotonic proposal requires cs.steps <= 64.
SampleResult sample_patterns(const ConstraintSet& cs, const SearchConfig& sc,
                             bool filter_monotonic = false);

/// Exhaustive valid set by depth-first composition over (t_1 = 1, interval
/// sequence), honoring cs.require_monotonic. Result is sorted by bit
/// sequence. Refuses cs.steps > 64.
std::vector<CachingPattern> enumerate_patterns(const ConstraintSet& cs);

/// Returns the candidate with the lowest proxy score; ties broken by lower
/// flops_ratio, then lexicographically smaller bit sequence. Candidates are
/// evaluated in order, so the winner is deterministic.
CandidateEvaluation select_best_pattern(const std::vector<CachingPattern>& candidates,
                                        const CandidateEvaluator& evaluator);

}  // namespace procache
