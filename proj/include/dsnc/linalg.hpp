#ifndef DSNC_LINALG_HPP
#define DSNC_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dsnc/errors.hpp"

namespace dsnc {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
  public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
        : rows_(rows), cols_(cols), values_(std::move(values)) {
        if (values_.size() != rows_ * cols_) {
            throw ArgumentError("Matrix: " + std::to_string(values_.size()) + " values for a " +
                                std::to_string(rows_) + "x" + std::to_string(cols_) + " shape");
        }
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return values_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols_, cols_}; }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    void fill(double v) { std::fill(values_.begin(), values_.end(), v); }

    bool all_finite() const {
        return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Sparse vector as parallel (index, value) arrays with strictly increasing
/// indices. Missing indices are zero.
struct SparseVector {
    std::vector<std::uint32_t> indices;
    std::vector<double> values;

    std::size_t nnz() const { return indices.size(); }

    static SparseVector from_dense(std::span<const double> dense) {
        SparseVector s;
        for (std::size_t i = 0; i < dense.size(); ++i) {
            if (dense[i] != 0.0) {
                s.indices.push_back(static_cast<std::uint32_t>(i));
                s.values.push_back(dense[i]);
            }
        }
        return s;
    }

    Vector to_dense(std::size_t dim) const {
        Vector d(dim, 0.0);
        for (std::size_t k = 0; k < indices.size(); ++k) {
            d[indices[k]] = values[k];
        }
        return d;
    }

    friend bool operator==(const SparseVector&, const SparseVector&) = default;
};

namespace detail {

inline void check_affine_shape(const Matrix& w, std::span<const double> bias) {
    if (bias.size() != w.rows()) {
        throw ArgumentError("affine: bias has " + std::to_string(bias.size()) + " entries, matrix has " +
                            std::to_string(w.rows()) + " rows");
    }
}

} // namespace detail

/// Wx + bias for dense x.
inline Vector affine(const Matrix& w, std::span<const double> bias, std::span<const double> x) {
    detail::check_affine_shape(w, bias);
    if (x.size() != w.cols()) {
        throw ArgumentError("affine: input has " + std::to_string(x.size()) + " entries, matrix has " +
                            std::to_string(w.cols()) + " columns");
    }
    Vector out(bias.begin(), bias.end());
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        double acc = 0.0;
        for (std::size_t c = 0; c < x.size(); ++c) {
            acc += row[c] * x[c];
        }
        out[r] += acc;
    }
    return out;
}

/// Wx + bias for sparse x.
inline Vector affine(const Matrix& w, std::span<const double> bias, const SparseVector& x) {
    detail::check_affine_shape(w, bias);
    if (!x.indices.empty() && x.indices.back() >= w.cols()) {
        throw ArgumentError("affine: sparse index " + std::to_string(x.indices.back()) +
                            " out of range for " + std::to_string(w.cols()) + " columns");
    }
    Vector out(bias.begin(), bias.end());
    for (std::size_t r = 0; r < w.rows(); ++r) {
        const auto row = w.row(r);
        double acc = 0.0;
        for (std::size_t k = 0; k < x.indices.size(); ++k) {
            acc += row[x.indices[k]] * x.values[k];
        }
        out[r] += acc;
    }
    return out;
}

inline double sigmoid(double v) {
    if (v >= 0.0) {
        return 1.0 / (1.0 + std::exp(-v));
    }
    const double e = std::exp(v);
    return e / (1.0 + e);
}

inline Vector sigmoid(std::span<const double> v) {
    Vector out(v.size());
    std::transform(v.begin(), v.end(), out.begin(), [](double a) { return sigmoid(a); });
    return out;
}

struct SoftmaxNll {
    double loss = 0.0;
    Vector probs;
};

/// Softmax over logits and negative log-likelihood of class y, using
/// max-shifted exponentials.
inline SoftmaxNll softmax_nll(std::span<const double> logits, std::size_t y) {
    if (y >= logits.size()) {
        throw ArgumentError("softmax_nll: class " + std::to_string(y) + " out of range for " +
                            std::to_string(logits.size()) + " logits");
    }
    const double mx = *std::max_element(logits.begin(), logits.end());
    SoftmaxNll out;
    out.probs.resize(logits.size());
    double z = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out.probs[k] = std::exp(logits[k] - mx);
        z += out.probs[k];
    }
    for (auto& p : out.probs) {
        p /= z;
    }
    out.loss = std::log(z) - (logits[y] - mx);
    return out;
}

inline std::size_t argmax(std::span<const double> v) {
    // First maximum wins, i.e. ties go to the smallest index.
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

struct AdamState {
    Vector m;
    Vector v;
    std::uint64_t t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    explicit AdamState(std::size_t size, double learning_rate = 1e-3)
        : m(size, 0.0), v(size, 0.0), lr(learning_rate) {}
};

/// One bias-corrected Adam update. `block` names the parameter block in
/// error messages.
inline void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads,
                      std::string_view block = "params") {
    if (params.size() != grads.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
        throw ArgumentError("adam_step: shape mismatch in block " + std::string(block));
    }
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw NumericError("adam_step: non-finite gradient in block " + std::string(block) + " at index " +
                               std::to_string(i));
        }
    }
    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
}

/// Central finite differences of a scalar function.
template <typename F>
Vector finite_diff_grad(F&& f, std::span<const double> x, double h) {
    Vector probe(x.begin(), x.end());
    Vector grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = probe[i];
        probe[i] = orig + h;
        const double fp = f(std::span<const double>(probe));
        probe[i] = orig - h;
        const double fm = f(std::span<const double>(probe));
        probe[i] = orig;
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). With the default floor of 1
/// entries of magnitude below one are compared absolutely.
inline double max_rel_error(std::span<const double> a, std::span<const double> b, double floor = 1.0) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

} // namespace dsnc

#endif
