#include "procache/pattern.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include "procache/errors.hpp"
#include "procache/rng.hpp"

namespace procache {

namespace {

using u128 = unsigned __int128;

// Pascal's triangle in 128-bit, rows 0..126. C(126, 63) ~ 4.3e36 fits with
// two orders of magnitude to spare; the monotonic sampler and the enumerator
// never need larger arguments under the T <= 64 guard.
constexpr int kMaxBinomialRow = 127;

const u128* binomial_row(int n) {
    static const std::vector<u128> table = [] {
        std::vector<u128> t(static_cast<std::size_t>(kMaxBinomialRow) * kMaxBinomialRow, 0);
        for (int n = 0; n < kMaxBinomialRow; ++n) {
            t[static_cast<std::size_t>(n) * kMaxBinomialRow] = 1;
            for (int k = 1; k <= n; ++k) {
                const std::size_t prev = static_cast<std::size_t>(n - 1) * kMaxBinomialRow;
                t[static_cast<std::size_t>(n) * kMaxBinomialRow + k] =
                    t[prev + k - 1] + (k <= n - 1 ? t[prev + k] : 0);
            }
        }
        return t;
    }();
    return table.data() + static_cast<std::size_t>(n) * kMaxBinomialRow;
}

u128 binomial(int n, int k) {
    if (k < 0 || k > n) {
        return 0;
    }
    return binomial_row(n)[k];
}

// Number of size-m multisets over `choices` distinct values.
u128 multiset_count(int m, int choices) { return binomial(m + choices - 1, choices - 1); }

// Decodes rank -> the unique non-increasing interval sequence of length m
// with values in [v_min, v_max]. Value positions are indexed from the top
// (position 0 = v_max); walking positions in non-decreasing order yields a
// non-increasing sequence.
std::vector<int> unrank_monotonic_intervals(u128 rank, int m, int v_min, int v_max) {
    const int width = v_max - v_min + 1;
    std::vector<int> seq(static_cast<std::size_t>(m));
    int lo = 0;
    for (int j = 0; j < m; ++j) {
        const int remaining = m - j - 1;
        for (int q = lo; q < width; ++q) {
            const u128 block = multiset_count(remaining, width - q);
            if (rank < block) {
                seq[static_cast<std::size_t>(j)] = v_max - q;
                lo = q;
                break;
            }
            rank -= block;
        }
    }
    return seq;
}

std::vector<std::uint8_t> bits_from_intervals(int steps, const std::vector<int>& intervals) {
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(steps), 0);
    bits[0] = 1;
    int t = 1;
    for (int v : intervals) {
        t += v + 1;
        bits[static_cast<std::size_t>(t) - 1] = 1;
    }
    return bits;
}

constexpr std::size_t kMaxEnumeration = 4'000'000;

}  // namespace

int CachingPattern::activation_count() const {
    int m = 0;
    for (auto b : bits) {
        m += b;
    }
    return m;
}

void CachingPattern::validate() const {
    if (bits.empty()) {
        throw ConfigError("caching pattern must have at least one step");
    }
    for (auto b : bits) {
        if (b != 0 && b != 1) {
            throw ConfigError("caching pattern bits must be 0 or 1");
        }
    }
    if (bits[0] != 1) {
        throw ConfigError("caching pattern must start with 1 (no cache exists at step 1)");
    }
}

CachingPattern CachingPattern::all_ones(int steps) {
    return CachingPattern(std::vector<std::uint8_t>(static_cast<std::size_t>(steps), 1));
}

CachingPattern CachingPattern::uniform(int steps, int stride) {
    if (stride < 1) {
        throw ConfigError("uniform pattern stride must be >= 1");
    }
    std::vector<std::uint8_t> bits(static_cast<std::size_t>(steps), 0);
    for (int t = 1; t <= steps; t += stride) {
        bits[static_cast<std::size_t>(t) - 1] = 1;
    }
    return CachingPattern(std::move(bits));
}

std::string CachingPattern::to_string() const {
    std::string s;
    s.reserve(bits.size());
    for (auto b : bits) {
        s.push_back(b ? '1' : '0');
    }
    return s;
}

void ConstraintSet::validate() const {
    if (steps < 1) {
        throw ConfigError("constraint set: steps must be >= 1");
    }
    if (budget < 1 || budget > steps) {
        throw ConfigError("constraint set: budget must be in [1, steps]");
    }
    if (v_min < 0 || v_min > v_max || v_max >= steps) {
        throw ConfigError("constraint set: need 0 <= v_min <= v_max < steps");
    }
}

void SearchConfig::validate() const {
    if (quota < 1) {
        throw ConfigError("search config: quota must be >= 1");
    }
    if (max_attempts < quota) {
        throw ConfigError("search config: max_attempts must be >= quota");
    }
}

const char* constraint_name(Constraint c) {
    switch (c) {
        case Constraint::Budget: return "budget";
        case Constraint::Monotonic: return "monotonic";
        case Constraint::Bounded: return "bounded";
    }
    return "?";
}

ActivationProfile activation_profile(const CachingPattern& pattern) {
    ActivationProfile profile;
    for (int t = 1; t <= pattern.length(); ++t) {
        if (pattern.bit(t) == 1) {
            if (!profile.timestamps.empty()) {
                profile.intervals.push_back(t - profile.timestamps.back() - 1);
            }
            profile.timestamps.push_back(t);
        }
    }
    return profile;
}

ConstraintCheck check_constraints(const CachingPattern& pattern, const ConstraintSet& cs) {
    cs.validate();
    pattern.validate();
    if (pattern.length() != cs.steps) {
        throw ConfigError("pattern length does not match constraint set steps");
    }
    const ActivationProfile profile = activation_profile(pattern);
    ConstraintCheck check;
    if (profile.count() > cs.budget) {
        check.violations.push_back(Constraint::Budget);
    }
    if (cs.require_monotonic) {
        for (std::size_t i = 1; i < profile.intervals.size(); ++i) {
            if (profile.intervals[i] > profile.intervals[i - 1]) {
                check.violations.push_back(Constraint::Monotonic);
                break;
            }
        }
    }
    bool bounded_ok = profile.tail(cs.steps) <= cs.v_max;
    for (int v : profile.intervals) {
        if (v < cs.v_min || v > cs.v_max) {
            bounded_ok = false;
            break;
        }
    }
    if (!bounded_ok) {
        check.violations.push_back(Constraint::Bounded);
    }
    return check;
}

SampleResult sample_patterns(const ConstraintSet& cs, const SearchConfig& sc,
                             bool filter_monotonic) {
    cs.validate();
    sc.validate();
    if (filter_monotonic && cs.steps > 64) {
        throw ConfigError("monotonic sampling is limited to steps <= 64");
    }
    const int width = cs.v_max - cs.v_min + 1;
    SplitMix64 rng(sc.seed);
    SampleResult result;
    std::set<std::vector<std::uint8_t>> seen;
    std::vector<int> intervals;

    while (static_cast<int>(result.patterns.size()) < sc.quota &&
           result.attempts < sc.max_attempts) {
        ++result.attempts;
        const int m = static_cast<int>(rng.below(static_cast<std::uint64_t>(cs.budget)));
        if (filter_monotonic) {
            const u128 count = multiset_count(m, width);
            intervals = unrank_monotonic_intervals(rng.below128(count), m, cs.v_min, cs.v_max);
        } else {
            intervals.assign(static_cast<std::size_t>(m), 0);
            for (int& v : intervals) {
                v = cs.v_min + static_cast<int>(rng.below(static_cast<std::uint64_t>(width)));
            }
        }
        int t = 1;
        bool fits = true;
        for (int v : intervals) {
            t += v + 1;
            if (t > cs.steps) {
                fits = false;
                break;
            }
        }
        if (!fits || cs.steps - t > cs.v_max) {
            ++result.rejections.bounded;
            continue;
        }
        auto bits = bits_from_intervals(cs.steps, intervals);
        if (seen.insert(bits).second) {
            result.patterns.emplace_back(std::move(bits));
        }
    }
    return result;
}

namespace {

struct Enumerator {
    const ConstraintSet& cs;
    std::vector<std::uint8_t> bits;
    std::vector<CachingPattern> out;

    void visit(int t_last, int count, int last_v) {
        if (cs.steps - t_last <= cs.v_max) {
            if (out.size() >= kMaxEnumeration) {
                throw ConfigError("enumeration exceeds the 4e6 pattern safety cap");
            }
            out.emplace_back(bits);
        }
        if (count >= cs.budget) {
            return;
        }
        const int v_hi = cs.require_monotonic ? std::min(cs.v_max, last_v) : cs.v_max;
        for (int v = cs.v_min; v <= v_hi; ++v) {
            const int t_next = t_last + v + 1;
            if (t_next > cs.steps) {
                break;
            }
            bits[static_cast<std::size_t>(t_next) - 1] = 1;
            visit(t_next, count + 1, v);
            bits[static_cast<std::size_t>(t_next) - 1] = 0;
        }
    }
};

}  // namespace

std::vector<CachingPattern> enumerate_patterns(const ConstraintSet& cs) {
    cs.validate();
    if (cs.steps > 64) {
        throw ConfigError("enumeration is limited to steps <= 64");
    }
    Enumerator e{cs, std::vector<std::uint8_t>(static_cast<std::size_t>(cs.steps), 0), {}};
    e.bits[0] = 1;
    e.visit(1, 1, std::numeric_limits<int>::max());
    std::sort(e.out.begin(), e.out.end());
    return e.out;
}

CandidateEvaluation select_best_pattern(const std::vector<CachingPattern>& candidates,
                                        const CandidateEvaluator& evaluator) {
    if (candidates.empty()) {
        throw ConfigError("select_best_pattern: no candidates");
    }
    CandidateEvaluation best = evaluator.evaluate(candidates.front());
    for (std::size_t i = 1; i < candidates.size(); ++i) {
        CandidateEvaluation e = evaluator.evaluate(candidates[i]);
        const bool better =
            e.proxy_score < best.proxy_score ||
            (e.proxy_score == best.proxy_score &&
             (e.flops_ratio < best.flops_ratio ||
              (e.flops_ratio == best.flops_ratio && e.pattern.bits < best.pattern.bits)));
        if (better) {
            best = std::move(e);
        }
    }
    return best;
}

}  // namespace procache
