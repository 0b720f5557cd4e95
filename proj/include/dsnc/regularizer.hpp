#ifndef DSNC_REGULARIZER_HPP
#define DSNC_REGULARIZER_HPP

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsnc/errors.hpp"
#include "dsnc/linalg.hpp"

namespace dsnc {

/// Intra-class (beta) and inter-class (gamma) weights with their clamp bounds.
struct RegCoeffs {
    double beta = 0.0;
    double gamma = 0.0;
    double beta_min = 1e-6;
    double beta_max = 10.0;
    double gamma_min = 1e-6;
    double gamma_max = 10.0;

    void validate() const {
        if (beta_min < 0.0 || gamma_min < 0.0 || beta_min > beta_max || gamma_min > gamma_max) {
            throw ArgumentError("RegCoeffs: bad clamp interval");
        }
    }

    friend bool operator==(const RegCoeffs&, const RegCoeffs&) = default;
};

struct PairPenalty {
    double penalty = 0.0;
    std::vector<Vector> grads; // d penalty / d phi for each batch element
    std::size_t intra_pairs = 0;
    std::size_t inter_pairs = 0;
};

/// beta * mean_{intra pairs} |phi - phi'|^2 - gamma * mean_{inter pairs} |phi - phi'|^2
/// over the unordered pairs of a batch. A term whose pair set is empty is 0.
inline PairPenalty pair_penalty(std::span<const Vector> probs, std::span<const std::uint32_t> labels,
                                const RegCoeffs& coeffs) {
    if (probs.size() != labels.size()) {
        throw ArgumentError("pair_penalty: probs/labels size mismatch");
    }
    if (probs.size() < 2) {
        throw ArgumentError("pair_penalty: batch needs at least 2 examples");
    }
    const std::size_t B = probs.size();
    const std::size_t c = probs[0].size();
    PairPenalty out;
    for (std::size_t i = 0; i < B; ++i) {
        if (probs[i].size() != c) {
            throw ArgumentError("pair_penalty: inconsistent code sizes");
        }
        for (std::size_t j = i + 1; j < B; ++j) {
            (labels[i] == labels[j] ? out.intra_pairs : out.inter_pairs) += 1;
        }
    }
    const double w_intra = out.intra_pairs ? coeffs.beta / static_cast<double>(out.intra_pairs) : 0.0;
    const double w_inter = out.inter_pairs ? -coeffs.gamma / static_cast<double>(out.inter_pairs) : 0.0;

    out.grads.assign(B, Vector(c, 0.0));
    double intra_sum = 0.0;
    double inter_sum = 0.0;
    for (std::size_t i = 0; i < B; ++i) {
        for (std::size_t j = i + 1; j < B; ++j) {
            const bool same = labels[i] == labels[j];
            const double w = same ? w_intra : w_inter;
            double d2 = 0.0;
            for (std::size_t k = 0; k < c; ++k) {
                const double diff = probs[i][k] - probs[j][k];
                d2 += diff * diff;
                out.grads[i][k] += 2.0 * w * diff;
                out.grads[j][k] -= 2.0 * w * diff;
            }
            (same ? intra_sum : inter_sum) += d2;
        }
    }
    out.penalty = w_intra * intra_sum + w_inter * inter_sum;
    return out;
}

/// Doubles both coefficients when validation accuracy went up, halves them
/// when it went down, leaves them alone on a tie; results are clamped.
inline RegCoeffs adapt_coeffs(RegCoeffs coeffs, double val_acc_prev, double val_acc_now) {
    double factor = 1.0;
    if (val_acc_now > val_acc_prev) {
        factor = 2.0;
    } else if (val_acc_now < val_acc_prev) {
        factor = 0.5;
    }
    coeffs.beta = std::clamp(coeffs.beta * factor, coeffs.beta_min, coeffs.beta_max);
    coeffs.gamma = std::clamp(coeffs.gamma * factor, coeffs.gamma_min, coeffs.gamma_max);
    return coeffs;
}

} // namespace dsnc

#endif
