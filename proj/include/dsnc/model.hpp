#ifndef DSNC_MODEL_HPP
#define DSNC_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dsnc/binary_code.hpp"
#include "dsnc/errors.hpp"
#include "dsnc/linalg.hpp"
#include "dsnc/random.hpp"

namespace dsnc {

inline constexpr double kProbClamp = 1e-12;

/// Parameters of the encoder (linear map + sigmoid onto c code bits) and the
/// linear-softmax decoder over K classes. Shared by the stochastic DSNC
/// network and the deterministic MLP baseline.
struct NetworkParams {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t K = 0;
    Matrix enc_w; // c x n
    Vector enc_b; // c
    Matrix dec_w; // K x c
    Vector dec_b; // K

    NetworkParams() = default;
    NetworkParams(std::size_t n_in, std::size_t code_size, std::size_t classes)
        : n(n_in), c(code_size), K(classes), enc_w(code_size, n_in), enc_b(code_size, 0.0),
          dec_w(classes, code_size), dec_b(classes, 0.0) {
        if (c < 1 || n < 1 || K < 1) {
            throw ArgumentError("NetworkParams: n, c and K must all be >= 1");
        }
    }

    // Weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    void initialize(std::uint64_t seed) {
        RandomStream rng(derive_seed(seed, {0x1417ULL}));
        const double enc_limit = std::sqrt(6.0 / static_cast<double>(n + c));
        for (auto& w : enc_w.values()) {
            w = rng.uniform(-enc_limit, enc_limit);
        }
        const double dec_limit = std::sqrt(6.0 / static_cast<double>(c + K));
        for (auto& w : dec_w.values()) {
            w = rng.uniform(-dec_limit, dec_limit);
        }
        std::fill(enc_b.begin(), enc_b.end(), 0.0);
        std::fill(dec_b.begin(), dec_b.end(), 0.0);
    }

    void validate() const {
        if (enc_w.rows() != c || enc_w.cols() != n || enc_b.size() != c || dec_w.rows() != K ||
            dec_w.cols() != c || dec_b.size() != K) {
            throw ArgumentError("NetworkParams: inconsistent parameter shapes");
        }
        const auto finite = [](double v) { return std::isfinite(v); };
        if (!enc_w.all_finite() || !dec_w.all_finite() || !std::all_of(enc_b.begin(), enc_b.end(), finite) ||
            !std::all_of(dec_b.begin(), dec_b.end(), finite)) {
            throw NumericError("NetworkParams: non-finite parameter");
        }
    }

    // Rounds every parameter to the nearest 32-bit float, the precision of
    // the model file.
    void round_to_float() {
        const auto round = [](std::span<double> v) {
            for (auto& x : v) {
                x = static_cast<double>(static_cast<float>(x));
            }
        };
        round(enc_w.values());
        round(enc_b);
        round(dec_w.values());
        round(dec_b);
    }

    friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

struct DsncModel : NetworkParams {
    using NetworkParams::NetworkParams;
};

/// Per-bit Bernoulli parameters phi(x).
struct CodeDistribution {
    Vector probs;

    std::size_t size() const { return probs.size(); }
};

struct Encoding {
    Vector pre_activation;
    CodeDistribution distribution;
};

template <typename Input>
Encoding encode_probs(const NetworkParams& model, const Input& x) {
    Encoding e;
    e.pre_activation = affine(model.enc_w, model.enc_b, x);
    e.distribution.probs = sigmoid(e.pre_activation);
    return e;
}

inline BinaryCode sample_code(const CodeDistribution& dist, RandomStream& rng) {
    BinaryCode code(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        code.set(i, rng.uniform() < dist.probs[i]);
    }
    return code;
}

/// Most probable code; a probability of exactly 0.5 maps to bit 1.
inline BinaryCode threshold_code(const CodeDistribution& dist) {
    BinaryCode code(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        code.set(i, dist.probs[i] >= 0.5);
    }
    return code;
}

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

/// log P(b | x) under independent Bernoulli bits.
inline double code_log_prob(const CodeDistribution& dist, const BinaryCode& code) {
    if (code.size() != dist.size()) {
        throw ArgumentError("code_log_prob: code size mismatch");
    }
    double lp = 0.0;
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double p = clamp_prob(dist.probs[i]);
        lp += code.get(i) ? std::log(p) : std::log(1.0 - p);
    }
    return lp;
}

/// d log P(b|x) / d phi_i, with phi clamped as in code_log_prob.
inline Vector code_score_wrt_probs(const CodeDistribution& dist, const BinaryCode& code) {
    Vector s(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        const double p = clamp_prob(dist.probs[i]);
        s[i] = code.get(i) ? 1.0 / p : -1.0 / (1.0 - p);
    }
    return s;
}

/// d log P(b|x) / d a_i where phi = sigmoid(a); equals b_i - phi_i.
inline Vector code_score_wrt_preactivation(const CodeDistribution& dist, const BinaryCode& code) {
    Vector s(dist.size());
    for (std::size_t i = 0; i < dist.size(); ++i) {
        s[i] = (code.get(i) ? 1.0 : 0.0) - dist.probs[i];
    }
    return s;
}

/// Decoder logits for a binary code: bias plus the columns of W_dec selected
/// by the set bits, accumulated in increasing bit order. Linear decoding and
/// the code table both go through here.
inline Vector decode_logits(const NetworkParams& model, const BinaryCode& code) {
    if (code.size() != model.c) {
        throw ArgumentError("decode_logits: code has " + std::to_string(code.size()) + " bits, model expects " +
                            std::to_string(model.c));
    }
    Vector logits(model.dec_b);
    for (std::size_t k = 0; k < model.K; ++k) {
        const auto row = model.dec_w.row(k);
        double acc = 0.0;
        for (std::size_t i = 0; i < model.c; ++i) {
            if (code.get(i)) {
                acc += row[i];
            }
        }
        logits[k] += acc;
    }
    return logits;
}

inline std::size_t linear_decode(const NetworkParams& model, const BinaryCode& code) {
    return argmax(decode_logits(model, code));
}

struct DecodeResult {
    double loss = 0.0;
    Vector probs;       // softmax over classes
    Vector grad_logits; // probs - onehot(y)
    Matrix grad_w;      // K x c
    Vector grad_bias;   // K
    Vector grad_b;      // c
};

/// Linear-softmax decoder loss and gradients at a (possibly relaxed) code
/// b in R^c.
inline DecodeResult decode_train(const NetworkParams& model, std::span<const double> b, std::size_t y) {
    if (b.size() != model.c) {
        throw ArgumentError("decode_train: code has " + std::to_string(b.size()) + " entries, model expects " +
                            std::to_string(model.c));
    }
    const Vector logits = affine(model.dec_w, model.dec_b, b);
    auto sm = softmax_nll(logits, y);
    DecodeResult r;
    r.loss = sm.loss;
    r.probs = std::move(sm.probs);
    r.grad_logits = r.probs;
    r.grad_logits[y] -= 1.0;
    r.grad_w = Matrix(model.K, model.c);
    r.grad_bias = r.grad_logits;
    r.grad_b.assign(model.c, 0.0);
    for (std::size_t k = 0; k < model.K; ++k) {
        const double g = r.grad_logits[k];
        const auto wrow = model.dec_w.row(k);
        auto grow = r.grad_w.row(k);
        for (std::size_t i = 0; i < model.c; ++i) {
            grow[i] = g * b[i];
            r.grad_b[i] += wrow[i] * g;
        }
    }
    return r;
}

inline DecodeResult decode_train(const NetworkParams& model, const BinaryCode& code, std::size_t y) {
    const Vector b = code.to_vector();
    return decode_train(model, b, y);
}

/// Intermediates of one stochastic forward pass.
struct ForwardTrace {
    SparseVector x;
    Vector pre_activation;
    Vector probs;
    BinaryCode code;
    Vector logits;
    double loss = 0.0;
};

inline ForwardTrace forward(const NetworkParams& model, const SparseVector& x, std::size_t y, RandomStream& rng) {
    ForwardTrace t;
    t.x = x;
    auto enc = encode_probs(model, x);
    t.pre_activation = std::move(enc.pre_activation);
    t.probs = std::move(enc.distribution.probs);
    t.code = sample_code(CodeDistribution{t.probs}, rng);
    t.logits = decode_logits(model, t.code);
    t.loss = softmax_nll(t.logits, y).loss;
    return t;
}

struct EncoderGrads {
    Vector grad_probs; // c
    Vector grad_pre;   // c
    Matrix grad_w;     // c x n
    Vector grad_bias;  // c
};

/// grad_pre = grad_probs * sigma'(a), with sigma' written via the cached probs.
inline Vector sigmoid_backward(std::span<const double> grad_probs, std::span<const double> probs) {
    Vector g(grad_probs.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        g[i] = grad_probs[i] * probs[i] * (1.0 - probs[i]);
    }
    return g;
}

/// grad_w += scale * grad_pre x^T over the nonzeros of x.
inline void accumulate_outer(Matrix& grad_w, std::span<const double> grad_pre, const SparseVector& x,
                             double scale = 1.0) {
    for (std::size_t i = 0; i < grad_pre.size(); ++i) {
        const double g = scale * grad_pre[i];
        if (g == 0.0) {
            continue;
        }
        auto row = grad_w.row(i);
        for (std::size_t k = 0; k < x.nnz(); ++k) {
            row[x.indices[k]] += g * x.values[k];
        }
    }
}

inline EncoderGrads encoder_backward(std::span<const double> grad_probs, std::span<const double> probs,
                                     const SparseVector& x, std::size_t n) {
    EncoderGrads g;
    g.grad_probs.assign(grad_probs.begin(), grad_probs.end());
    g.grad_pre = sigmoid_backward(grad_probs, probs);
    g.grad_w = Matrix(grad_probs.size(), n);
    accumulate_outer(g.grad_w, g.grad_pre, x);
    g.grad_bias = g.grad_pre;
    return g;
}

/// Straight-through backward pass: the sampling step is treated as the
/// identity, so the gradient reaching phi(x) is grad_b unchanged.
inline EncoderGrads ste_backward(std::span<const double> grad_b, const ForwardTrace& trace, std::size_t n) {
    if (grad_b.size() != trace.probs.size()) {
        throw ArgumentError("ste_backward: gradient size mismatch");
    }
    return encoder_backward(grad_b, trace.probs, trace.x, n);
}

struct ReinforceEstimate {
    Vector grad_probs; // d E[L] / d phi estimate
    Vector grad_pre;   // d E[L] / d a estimate
    double mean_loss = 0.0;
};

/// Score-function estimate (1/M) sum_m grad log P(b_m|x) L(b_m), b_m ~ phi.
/// With `baseline`, each sample's loss is centered by the mean loss of the
/// other M-1 samples, which keeps the estimator unbiased (no-op for M = 1).
template <typename LossFn>
ReinforceEstimate reinforce_estimate(const CodeDistribution& dist, LossFn&& loss_fn, std::size_t M,
                                     RandomStream& rng, bool baseline = false) {
    if (M < 1) {
        throw ArgumentError("reinforce_estimate: M must be >= 1");
    }
    std::vector<BinaryCode> codes;
    std::vector<double> losses;
    codes.reserve(M);
    losses.reserve(M);
    double total = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        codes.push_back(sample_code(dist, rng));
        losses.push_back(loss_fn(codes.back()));
        total += losses.back();
    }
    ReinforceEstimate est;
    est.grad_probs.assign(dist.size(), 0.0);
    est.grad_pre.assign(dist.size(), 0.0);
    est.mean_loss = total / static_cast<double>(M);
    for (std::size_t m = 0; m < M; ++m) {
        double weight = losses[m];
        if (baseline && M > 1) {
            weight -= (total - losses[m]) / static_cast<double>(M - 1);
        }
        const Vector sp = code_score_wrt_probs(dist, codes[m]);
        const Vector sa = code_score_wrt_preactivation(dist, codes[m]);
        for (std::size_t i = 0; i < dist.size(); ++i) {
            est.grad_probs[i] += sp[i] * weight;
            est.grad_pre[i] += sa[i] * weight;
        }
    }
    for (std::size_t i = 0; i < dist.size(); ++i) {
        est.grad_probs[i] /= static_cast<double>(M);
        est.grad_pre[i] /= static_cast<double>(M);
    }
    return est;
}

struct ReinforceGradient {
    EncoderGrads encoder;
    Matrix dec_grad_w;
    Vector dec_grad_b;
    double mean_loss = 0.0;
};

/// Monte-Carlo gradient over M sampled codes: the score-function term for
/// the encoder plus the averaged decoder gradient at each sample.
inline ReinforceGradient reinforce_gradient(const NetworkParams& model, const SparseVector& x, std::size_t y,
                                            std::size_t M, RandomStream& rng, bool baseline = false) {
    const auto enc = encode_probs(model, x);
    ReinforceGradient out;
    out.dec_grad_w = Matrix(model.K, model.c);
    out.dec_grad_b.assign(model.K, 0.0);
    const double inv_m = 1.0 / static_cast<double>(M);
    auto loss_fn = [&](const BinaryCode& code) {
        const auto d = decode_train(model, code, y);
        for (std::size_t k = 0; k < model.K; ++k) {
            out.dec_grad_b[k] += inv_m * d.grad_bias[k];
            auto dst = out.dec_grad_w.row(k);
            const auto src = d.grad_w.row(k);
            for (std::size_t i = 0; i < model.c; ++i) {
                dst[i] += inv_m * src[i];
            }
        }
        return d.loss;
    };
    const auto est = reinforce_estimate(enc.distribution, loss_fn, M, rng, baseline);
    out.mean_loss = est.mean_loss;
    out.encoder.grad_probs = est.grad_probs;
    out.encoder.grad_pre = est.grad_pre;
    out.encoder.grad_w = Matrix(model.c, model.n);
    accumulate_outer(out.encoder.grad_w, est.grad_pre, x);
    out.encoder.grad_bias = est.grad_pre;
    return out;
}

} // namespace dsnc

#endif
