#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "procache/schedule.hpp"
#include "procache/tensor.hpp"

namespace procache {

/// Linear schedules for the denoising update x <- (x - beta_t * eps) / alpha_t,
/// interpolated over t = 1..T. alpha stays >= 1 so the map cannot blow up;
/// beta ramps up so the state moves slowly in early steps and quickly in
/// late ones, which is the regime feature caching targets.
struct UpdateSchedule {
    double alpha_start = 1.0;
    double alpha_end = 1.02;
    double beta_start = 0.005;
    double beta_end = 0.35;

    double alpha(int t, int steps) const;
    double beta(int t, int steps) const;
};

struct ModelConfig {
    int layers = 8;
    int dim = 64;
    int heads = 4;
    int tokens = 16;
    int context_tokens = 8;
    double mlp_ratio = 4.0;
    int steps = 20;
    std::uint64_t seed = 42;
    UpdateSchedule schedule;

    int mlp_hidden() const { return static_cast<int>(mlp_ratio * dim); }
    void validate() const;  // dim divisible by heads, all counts >= 1
};

struct AdaLnMap {
    Matrix weight;             // dim x 3*dim -> [shift | scale | gate]
    std::vector<double> bias;  // 3*dim; init shift 0, scale 0, gate 1
};

struct AttentionWeights {
    Matrix wq, wk, wv, wo;  // dim x dim each
};

struct MlpWeights {
    Matrix w1;  // dim x hidden
    Matrix w2;  // hidden x dim
};

struct LayerWeights {
    AttentionWeights sa;
    AttentionWeights ca;
    MlpWeights mlp;
    AdaLnMap mod_sa, mod_ca, mod_mlp;
};

/// Deterministic function of (seed, config): matrices are filled from one
/// SplitMix64 stream in declaration order (per layer: sa q,k,v,o; ca q,k,v,o;
/// mlp w1,w2; mod_sa, mod_ca, mod_mlp weights), then the output head.
/// Entries ~ U(-sqrt(3)/sqrt(fan_in), +sqrt(3)/sqrt(fan_in)).
struct ModelWeights {
    std::vector<LayerWeights> layers;
    Matrix head;  // dim x dim

    /// FNV-1a over the raw little-endian bytes of every matrix in init order.
    std::uint64_t checksum() const;
};

enum class Submodule : int { SA = 0, CA = 1, MLP = 2 };

const char* submodule_name(Submodule m);

/// Per-(layer, submodule) stored residual-branch outputs, token-addressable.
/// last_refresh tracks, per token row, the step that last wrote the row.
struct BlockCache {
    struct Entry {
        bool present = false;
        Matrix value;                   // tokens x dim
        std::vector<int> last_refresh;  // per token, 0 = never
    };

    int layers = 0;
    BlockCache() = default;
    BlockCache(int layer_count, int tokens, int dim);

    Entry& entry(int layer, Submodule m) { return entries_[index(layer, m)]; }
    const Entry& entry(int layer, Submodule m) const { return entries_[index(layer, m)]; }

private:
    std::size_t index(int layer, Submodule m) const {
        return static_cast<std::size_t>(layer - 1) * 3 + static_cast<int>(m);
    }
    std::vector<Entry> entries_;
};

/// Value-norm token importance and the resulting top-share selection.
/// Token indices are 0-based matrix rows.
struct TokenSelection {
    std::vector<double> importance;
    std::vector<int> selected;  // sorted ascending, size max(1, floor(p * N))
};

/// Behaviour switches for cached steps. Defaults follow the documented
/// semantics; the alternates exist because either reading is defensible.
struct EngineOptions {
    double token_ratio = 1.0;        // p for SelectiveCompute steps
    bool selective_sa_recompute = true;  // false: reuse cached SA, score from a value projection only
    bool remodulate_cached = false;  // true: cache pre-gate branches, gate at reuse time
    bool disable_cache = false;      // no cache reads/writes; plan must be all-FullCompute
    bool capture_snapshots = false;
};

/// Captured per-step state: x after every layer and the head output eps_t.
struct RunTrace {
    int steps = 0;
    int layers = 0;
    std::vector<Matrix> layer_features;  // steps * layers
    std::vector<Matrix> step_outputs;    // steps

    const Matrix& feature(int t, int l) const {
        return layer_features[static_cast<std::size_t>(t - 1) * layers + (l - 1)];
    }
    const Matrix& output(int t) const { return step_outputs[static_cast<std::size_t>(t - 1)]; }
};

struct RunResult {
    Matrix final_state;
    std::optional<RunTrace> trace;
    FlopCounter counted;
};

ModelWeights init_model(const ModelConfig& config);

/// Sinusoidal embedding of step t, length dim.
std::vector<double> timestep_embedding(int t, int dim);

/// Row L2 norms of the value matrix (multi-head values are concatenated per
/// row, so the row norm covers all heads).
std::vector<double> token_importance(const Matrix& values);

/// Top max(1, floor(p * N)) rows by importance, descending; ties broken by
/// lower row index. Selection comes back sorted ascending.
TokenSelection select_tokens(const std::vector<double>& importance, double p);

/// Runs one block (SA -> CA -> MLP, each x + gate * f(modulate(norm(x)))) under
/// the given action. FullCompute refreshes all cache rows; SelectiveCompute
/// recomputes SA in full, scores tokens by value norm, and recomputes only the
/// selected rows of CA/MLP, scattering them into the cache; CacheOnly replays
/// x + cache. Throws RunStateError when a needed cache entry is absent.
Matrix block_forward(const Matrix& x, int layer, StepAction action, BlockCache& cache, int t,
                     const std::vector<double>& t_embed, const Matrix& context,
                     const ModelConfig& config, const ModelWeights& weights,
                     const EngineOptions& opts, FlopCounter& fc);

/// Full denoising run over plan: per step, all layers via block_forward, then
/// eps = head(norm(x)) and x <- (x - beta_t * eps) / alpha_t. Throws
/// NumericError with the (step, layer) location on non-finite intermediates.
RunResult denoise_run(const ModelConfig& config, const ModelWeights& weights,
                      const ExecutionPlan& plan, const Matrix& x0, const Matrix& context,
                      const EngineOptions& opts = {});

/// Seeded standard-normal matrix; the stand-ins for the initial latent and
/// the conditioning context.
Matrix gaussian_matrix(int rows, int cols, std::uint64_t seed);

/// Context stream salt: context = gaussian_matrix(N_ctx, d, seed ^ kContextSalt).
inline constexpr std::uint64_t kContextSalt = 0x636F6E74657874ULL;  // "context"

Matrix make_context(const ModelConfig& config);

}  // namespace procache
