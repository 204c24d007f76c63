#include "procache/tensor.hpp"

#include <cassert>
#include <cmath>

namespace procache {

Matrix matmul(const Matrix& a, const Matrix& b, FlopCounter* fc) {
    assert(a.cols == b.rows);
    Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        double* oi = out.row(i);
        for (int k = 0; k < a.cols; ++k) {
            const double av = ai[k];
            const double* bk = b.row(k);
            for (int j = 0; j < b.cols; ++j) {
                oi[j] += av * bk[j];
            }
        }
    }
    if (fc) {
        fc->macs += static_cast<std::uint64_t>(a.rows) * a.cols * b.cols;
    }
    return out;
}

Matrix matmul_bt(const Matrix& a, const Matrix& b, FlopCounter* fc) {
    assert(a.cols == b.cols);
    Matrix out(a.rows, b.rows);
    for (int i = 0; i < a.rows; ++i) {
        const double* ai = a.row(i);
        for (int j = 0; j < b.rows; ++j) {
            const double* bj = b.row(j);
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) {
                acc += ai[k] * bj[k];
            }
            out.at(i, j) = acc;
        }
    }
    if (fc) {
        fc->macs += static_cast<std::uint64_t>(a.rows) * b.rows * a.cols;
    }
    return out;
}

void add_inplace(Matrix& x, const Matrix& y, FlopCounter* fc) {
    assert(x.same_shape(y));
    for (std::size_t i = 0; i < x.v.size(); ++i) {
        x.v[i] += y.v[i];
    }
    if (fc) {
        fc->adds += x.v.size();
    }
}

bool all_finite(const Matrix& m) {
    for (double x : m.v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

}  // namespace procache
