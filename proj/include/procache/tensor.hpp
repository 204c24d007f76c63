#pragma once

#include <cstdint>
#include <vector>

namespace procache {

/// Dense row-major matrix of doubles. Rows are tokens, columns are feature
/// channels everywhere in the engine.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), v(static_cast<std::size_t>(r) * c, 0.0) {}

    double& at(int r, int c) { return v[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<std::size_t>(r) * cols + c]; }
    double* row(int r) { return v.data() + static_cast<std::size_t>(r) * cols; }
    const double* row(int r) const { return v.data() + static_cast<std::size_t>(r) * cols; }
    std::size_t size() const { return v.size(); }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    bool operator==(const Matrix& o) const { return rows == o.rows && cols == o.cols && v == o.v; }
};

/// Operation tally kept by the engine while it runs. Buckets are raw counts;
/// total_flops() prices them with the cost table below. The analytic model in
/// metrics uses the same table, so the two routes are comparable.
struct FlopCounter {
    std::uint64_t macs = 0;             // fused multiply-accumulate
    std::uint64_t adds = 0;             // plain additions (residual, bias)
    std::uint64_t muls = 0;             // plain multiplications (gate, scaling)
    std::uint64_t sqrts = 0;            // square roots (value-norm scores)
    std::uint64_t layer_norm_elems = 0;
    std::uint64_t modulate_elems = 0;   // AdaLN shift/scale application
    std::uint64_t softmax_elems = 0;
    std::uint64_t gelu_elems = 0;
    std::uint64_t embed_elems = 0;      // sinusoidal timestep embedding
    std::uint64_t update_elems = 0;     // denoising state update

    // Cost table, flops per counted unit. One place, so the model is auditable.
    static constexpr int kMac = 2;
    static constexpr int kAdd = 1;
    static constexpr int kMul = 1;
    static constexpr int kSqrt = 1;
    static constexpr int kLayerNorm = 5;
    static constexpr int kModulate = 5;
    static constexpr int kSoftmax = 5;
    static constexpr int kGelu = 5;
    static constexpr int kEmbed = 5;
    static constexpr int kUpdate = 3;   // subtract, scale, divide

    double total_flops() const {
        return static_cast<double>(macs) * kMac + static_cast<double>(adds) * kAdd +
               static_cast<double>(muls) * kMul + static_cast<double>(sqrts) * kSqrt +
               static_cast<double>(layer_norm_elems) * kLayerNorm +
               static_cast<double>(modulate_elems) * kModulate +
               static_cast<double>(softmax_elems) * kSoftmax +
               static_cast<double>(gelu_elems) * kGelu +
               static_cast<double>(embed_elems) * kEmbed +
               static_cast<double>(update_elems) * kUpdate;
    }
};

/// out = a * b. Shapes must agree; counts a.rows * a.cols * b.cols MACs.
Matrix matmul(const Matrix& a, const Matrix& b, FlopCounter* fc = nullptr);

/// out = a * b^T, for attention scores without materializing transposes.
Matrix matmul_bt(const Matrix& a, const Matrix& b, FlopCounter* fc = nullptr);

/// x += y elementwise; counts adds.
void add_inplace(Matrix& x, const Matrix& y, FlopCounter* fc = nullptr);

bool all_finite(const Matrix& m);

}  // namespace procache
