#include <cmath>
#include <functional>

#include <gtest/gtest.h>

#include "dsnc/model.hpp"

namespace dsnc {
namespace {

DsncModel random_model(std::size_t n, std::size_t c, std::size_t K, RandomStream& rng) {
    DsncModel m(n, c, K);
    for (auto& v : m.enc_w.values()) {
        v = rng.uniform(-1, 1);
    }
    for (auto& v : m.enc_b) {
        v = rng.uniform(-1, 1);
    }
    for (auto& v : m.dec_w.values()) {
        v = rng.uniform(-1, 1);
    }
    for (auto& v : m.dec_b) {
        v = rng.uniform(-1, 1);
    }
    return m;
}

SparseVector dense(std::initializer_list<double> v) { return SparseVector::from_dense(Vector(v)); }

TEST(EncodeProbs, ZeroModelGivesHalf) {
    const DsncModel m(3, 4, 2);
    const auto e = encode_probs(m, dense({1, 2, 3}));
    EXPECT_EQ(e.distribution.probs, Vector(4, 0.5));
}

TEST(EncodeProbs, SaturatedBias) {
    DsncModel m(2, 2, 2);
    m.enc_b = {1000.0, -1000.0};
    const auto p = encode_probs(m, dense({0.3, -0.7})).distribution.probs;
    EXPECT_NEAR(p[0], 1.0, 1e-12);
    EXPECT_NEAR(p[1], 0.0, 1e-12);
}

TEST(EncodeProbs, ClosedForm) {
    DsncModel m(2, 1, 2);
    m.enc_w(0, 0) = 1.0;
    m.enc_w(0, 1) = 1.0;
    const auto e = encode_probs(m, Vector{std::log(3.0), 0.0});
    EXPECT_NEAR(e.distribution.probs[0], 0.75, 1e-15);
    EXPECT_NEAR(e.pre_activation[0], std::log(3.0), 1e-15);
}

TEST(EncodeProbs, DimensionMismatchThrows) {
    const DsncModel m(2, 1, 2);
    EXPECT_THROW(encode_probs(m, Vector{1.0, 2.0, 3.0}), ArgumentError);
}

TEST(SampleCode, DegenerateDistributions) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        RandomStream rng(seed);
        const auto ones = sample_code(CodeDistribution{Vector(70, 1.0)}, rng);
        const auto zeros = sample_code(CodeDistribution{Vector(70, 0.0)}, rng);
        for (std::size_t i = 0; i < 70; ++i) {
            EXPECT_TRUE(ones.get(i));
            EXPECT_FALSE(zeros.get(i));
        }
    }
}

TEST(SampleCode, FairBitsConcentrate) {
    RandomStream rng(9);
    const std::size_t c = 8, draws = 100000;
    std::vector<double> mean(c, 0.0);
    const CodeDistribution dist{Vector(c, 0.5)};
    for (std::size_t d = 0; d < draws; ++d) {
        const auto code = sample_code(dist, rng);
        for (std::size_t i = 0; i < c; ++i) {
            mean[i] += code.get(i) ? 1.0 : 0.0;
        }
    }
    for (double m : mean) {
        EXPECT_NEAR(m / static_cast<double>(draws), 0.5, 0.01);
    }
}

TEST(SampleCode, DeterministicGivenStream) {
    const CodeDistribution dist{Vector{0.1, 0.5, 0.9, 0.3}};
    RandomStream a(4), b(4);
    for (int i = 0; i < 50; ++i) {
        EXPECT_EQ(sample_code(dist, a), sample_code(dist, b));
    }
}

TEST(ThresholdCode, Rule) {
    EXPECT_EQ(threshold_code(CodeDistribution{{0.7, 0.2, 0.5}}).to_string(), "101");
    EXPECT_EQ(threshold_code(CodeDistribution{Vector(5, 0.5)}).to_string(), "11111");
}

TEST(ThresholdCode, EqualsSampleOnBinaryProbs) {
    RandomStream rng(10);
    for (int i = 0; i < 100; ++i) {
        Vector p(1 + rng.below(100));
        for (auto& v : p) {
            v = static_cast<double>(rng.below(2));
        }
        const CodeDistribution dist{p};
        EXPECT_EQ(sample_code(dist, rng), threshold_code(dist));
    }
}

TEST(ThresholdCode, SaturatedEncoderMatchesSample) {
    DsncModel m(1, 3, 2);
    m.enc_b = {800.0, -800.0, 900.0};
    const auto dist = encode_probs(m, Vector{0.0}).distribution;
    RandomStream rng(11);
    EXPECT_EQ(sample_code(dist, rng), threshold_code(dist));
}

TEST(CodeLogProb, Examples) {
    const auto any = BinaryCode::from_integer(4, 0b1001);
    EXPECT_NEAR(code_log_prob(CodeDistribution{Vector(4, 0.5)}, any), std::log(1.0 / 16.0), 1e-15);
    EXPECT_NEAR(code_log_prob(CodeDistribution{{1.0, 0.0}}, BinaryCode::from_integer(2, 0b01)), 0.0, 1e-11);
    EXPECT_NEAR(code_log_prob(CodeDistribution{{0.75, 0.25}}, BinaryCode::from_integer(2, 0b11)),
                std::log(0.75) + std::log(0.25), 1e-15);
}

TEST(CodeLogProb, ClampKeepsImpossibleCodesFinite) {
    const double lp = code_log_prob(CodeDistribution{{1.0, 0.0}}, BinaryCode::from_integer(2, 0b10));
    EXPECT_TRUE(std::isfinite(lp));
    EXPECT_NEAR(lp, 2.0 * std::log(1e-12), 1e-3); // 1 - (1 - 1e-12) is not exactly 1e-12
}

TEST(DecodeTrain, ZeroDecoderGivesUniformLoss) {
    const DsncModel m(2, 3, 5);
    const auto r = decode_train(m, BinaryCode::from_integer(3, 0b101), 2);
    EXPECT_NEAR(r.loss, std::log(5.0), 1e-15);
    EXPECT_EQ(r.grad_b, Vector(3, 0.0));
}

// Central differences computed here rather than with the library helper.
Vector numeric_grad(const std::function<double(Vector&)>& f, Vector x, double h = 1e-5) {
    Vector g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double o = x[i];
        x[i] = o + h;
        const double fp = f(x);
        x[i] = o - h;
        const double fm = f(x);
        x[i] = o;
        g[i] = (fp - fm) / (2 * h);
    }
    return g;
}

double rel(const Vector& a, const Vector& b) { return max_rel_error(a, b, 1e-6); }

TEST(DecodeTrain, GradientsMatchFiniteDifferences) {
    RandomStream rng(12);
    for (int inst = 0; inst < 50; ++inst) {
        const std::size_t n = 1 + rng.below(5), c = 1 + rng.below(4), K = 2 + rng.below(4);
        const auto model = random_model(n, c, K, rng);
        Vector b(c);
        for (auto& v : b) {
            v = rng.uniform(-1, 2);
        }
        const std::size_t y = rng.below(K);
        const auto r = decode_train(model, b, y);

        const auto gb = numeric_grad(
            [&](Vector& bb) { return softmax_nll(affine(model.dec_w, model.dec_b, bb), y).loss; }, b);
        EXPECT_LE(rel(r.grad_b, gb), 1e-5);

        Vector w(model.dec_w.values().begin(), model.dec_w.values().end());
        const auto gw = numeric_grad(
            [&](Vector& ww) {
                DsncModel m = model;
                std::copy(ww.begin(), ww.end(), m.dec_w.values().begin());
                return decode_train(m, b, y).loss;
            },
            w);
        EXPECT_LE(rel(Vector(r.grad_w.values().begin(), r.grad_w.values().end()), gw), 1e-5);

        const auto gbias = numeric_grad(
            [&](Vector& bias) { return softmax_nll(affine(model.dec_w, bias, b), y).loss; }, model.dec_b);
        EXPECT_LE(rel(r.grad_bias, gbias), 1e-5);
    }
}

TEST(DecodeTrain, SizeMismatchThrows) {
    const DsncModel m(2, 3, 2);
    EXPECT_THROW(decode_train(m, Vector{1.0, 0.0}, 0), ArgumentError);
    EXPECT_THROW(decode_logits(m, BinaryCode(4)), ArgumentError);
}

TEST(DecodeLogits, MatchesAffineOnBinaryCodes) {
    RandomStream rng(13);
    const auto m = random_model(2, 6, 4, rng);
    for (std::uint64_t i = 0; i < 64; ++i) {
        const auto code = BinaryCode::from_integer(6, i);
        const auto a = decode_logits(m, code);
        const auto b = affine(m.dec_w, m.dec_b, code.to_vector());
        for (std::size_t k = 0; k < 4; ++k) {
            EXPECT_NEAR(a[k], b[k], 1e-14);
        }
    }
}

TEST(SteBackward, IdentityPassThrough) {
    DsncModel m(2, 2, 2);
    RandomStream rng(1);
    const auto trace = forward(m, dense({1.0, 2.0}), 0, rng);
    const auto g = ste_backward(Vector{1.0, -2.0}, trace, 2);
    EXPECT_EQ(g.grad_probs, (Vector{1.0, -2.0}));
}

TEST(SteBackward, SaturatedEncoderHasNoGradient) {
    DsncModel m(2, 2, 3);
    m.enc_b = {1000.0, -1000.0};
    RandomStream rng(2);
    const auto trace = forward(m, dense({0.5, 1.0}), 1, rng);
    const auto g = ste_backward(Vector{3.0, -4.0}, trace, 2);
    for (double v : g.grad_w.values()) {
        EXPECT_NEAR(v, 0.0, 1e-300);
    }
    for (double v : g.grad_bias) {
        EXPECT_NEAR(v, 0.0, 1e-300);
    }
}

TEST(SteBackward, MatchesSurrogateChainRule) {
    RandomStream rng(14);
    for (int inst = 0; inst < 200; ++inst) {
        const std::size_t n = 2, c = 2, K = 3;
        const auto model = random_model(n, c, K, rng);
        const Vector x{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const std::size_t y = rng.below(K);
        RandomStream srng(inst);
        const auto trace = forward(model, SparseVector::from_dense(x), y, srng);
        const auto grad_b = decode_train(model, trace.code, y).grad_b;
        const auto g = ste_backward(grad_b, trace, n);
        for (std::size_t i = 0; i < c; ++i) {
            const double a = model.enc_b[i] + model.enc_w(i, 0) * x[0] + model.enc_w(i, 1) * x[1];
            const double s = 1.0 / (1.0 + std::exp(-a));
            const double ga = grad_b[i] * s * (1 - s);
            EXPECT_NEAR(g.grad_bias[i], ga, 1e-12);
            EXPECT_NEAR(g.grad_w(i, 0), ga * x[0], 1e-12);
            EXPECT_NEAR(g.grad_w(i, 1), ga * x[1], 1e-12);
        }
    }
}

TEST(SteBackward, SizeMismatchThrows) {
    DsncModel m(2, 2, 2);
    RandomStream rng(1);
    const auto trace = forward(m, dense({1.0, 2.0}), 0, rng);
    EXPECT_THROW(ste_backward(Vector{1.0}, trace, 2), ArgumentError);
}

TEST(Forward, TraceIsConsistent) {
    RandomStream rng(15);
    const auto m = random_model(3, 5, 4, rng);
    const auto x = dense({0.2, 0.0, -1.5});
    const auto t = forward(m, x, 2, rng);
    EXPECT_EQ(t.probs, sigmoid(t.pre_activation));
    EXPECT_EQ(t.logits, decode_logits(m, t.code));
    EXPECT_EQ(t.loss, softmax_nll(t.logits, 2).loss);
}

TEST(Reinforce, OneBitToySampledMean) {
    RandomStream rng(16);
    const CodeDistribution dist{{0.5}};
    const auto est = reinforce_estimate(
        dist, [](const BinaryCode& b) { return b.get(0) ? 1.0 : 0.0; }, 100000, rng);
    EXPECT_NEAR(est.grad_probs[0], 1.0, 0.02);
    EXPECT_NEAR(est.mean_loss, 0.5, 0.01);
}

TEST(Reinforce, TwoBitToySampledMeanMatchesEnumeration) {
    const CodeDistribution dist{{0.3, 0.8}};
    const double L[4] = {0.5, 2.0, 1.0, 3.5};
    const auto loss = [&](const BinaryCode& b) { return L[b.extract(0, 2)]; };
    // Exhaustive expectation of score * loss.
    Vector exact(2, 0.0);
    for (std::uint64_t v = 0; v < 4; ++v) {
        const auto code = BinaryCode::from_integer(2, v);
        const double p = std::exp(code_log_prob(dist, code));
        const auto s = code_score_wrt_probs(dist, code);
        exact[0] += p * s[0] * L[v];
        exact[1] += p * s[1] * L[v];
    }
    RandomStream rng(17);
    const auto est = reinforce_estimate(dist, loss, 100000, rng);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(est.grad_probs[i], exact[i], 0.02 * std::abs(exact[i]));
    }
}

TEST(Reinforce, SaturatedDistributionGivesFiniteGradient) {
    RandomStream rng(18);
    const CodeDistribution dist{{1.0, 1.0}};
    const auto est = reinforce_estimate(dist, [](const BinaryCode&) { return 2.0; }, 10, rng);
    for (double g : est.grad_probs) {
        EXPECT_TRUE(std::isfinite(g));
    }
    for (double g : est.grad_pre) {
        EXPECT_TRUE(std::isfinite(g));
    }
}

// The estimator's expectation, computed by enumerating codes, equals the
// exact gradient of E[L], obtained from multilinearity of E[L] in phi.
TEST(Reinforce, UnbiasedOnEnumerableInstances) {
    RandomStream rng(19);
    for (int inst = 0; inst < 100; ++inst) {
        const std::size_t c = 1 + rng.below(3);
        CodeDistribution dist;
        for (std::size_t i = 0; i < c; ++i) {
            dist.probs.push_back(rng.uniform(0.05, 0.95));
        }
        Vector L(std::size_t{1} << c);
        for (auto& l : L) {
            l = rng.uniform(0, 4);
        }
        const auto prob = [&](std::uint64_t v) {
            double p = 1.0;
            for (std::size_t i = 0; i < c; ++i) {
                p *= (v >> i & 1) ? dist.probs[i] : 1 - dist.probs[i];
            }
            return p;
        };
        for (std::size_t i = 0; i < c; ++i) {
            double expectation = 0.0, exact = 0.0;
            for (std::uint64_t v = 0; v < L.size(); ++v) {
                const auto s = code_score_wrt_probs(dist, BinaryCode::from_integer(c, v));
                expectation += prob(v) * s[i] * L[v];
                if (v >> i & 1) {
                    exact += prob(v) / dist.probs[i] * (L[v] - L[v & ~(std::uint64_t{1} << i)]);
                }
            }
            EXPECT_NEAR(expectation, exact, 1e-10);
        }
    }
}

// With M = 2 and the leave-one-out baseline, the expectation over all
// ordered sample pairs still equals the exact gradient.
TEST(Reinforce, BaselineKeepsEstimatorUnbiased) {
    const CodeDistribution dist{{0.35, 0.6}};
    const double L[4] = {1.0, 0.2, 2.5, 1.7};
    const auto prob = [&](std::uint64_t v) {
        return ((v & 1) ? 0.35 : 0.65) * ((v & 2) ? 0.6 : 0.4);
    };
    Vector expectation(2, 0.0);
    for (std::uint64_t a = 0; a < 4; ++a) {
        for (std::uint64_t b = 0; b < 4; ++b) {
            const auto sa = code_score_wrt_probs(dist, BinaryCode::from_integer(2, a));
            const auto sb = code_score_wrt_probs(dist, BinaryCode::from_integer(2, b));
            for (std::size_t i = 0; i < 2; ++i) {
                const double g = 0.5 * (sa[i] * (L[a] - L[b]) + sb[i] * (L[b] - L[a]));
                expectation[i] += prob(a) * prob(b) * g;
            }
        }
    }
    const double exact0 = 0.4 * (L[1] - L[0]) + 0.6 * (L[3] - L[2]);
    const double exact1 = 0.65 * (L[2] - L[0]) + 0.35 * (L[3] - L[1]);
    EXPECT_NEAR(expectation[0], exact0, 1e-12);
    EXPECT_NEAR(expectation[1], exact1, 1e-12);

    // The library's weights for a fixed stream match the pairwise form.
    RandomStream r1(20), r2(20);
    const auto loss = [&](const BinaryCode& code) { return L[code.extract(0, 2)]; };
    const auto est = reinforce_estimate(dist, loss, 2, r1, true);
    const auto c0 = sample_code(dist, r2);
    const auto c1 = sample_code(dist, r2);
    const auto s0 = code_score_wrt_probs(dist, c0);
    const auto s1 = code_score_wrt_probs(dist, c1);
    const double l0 = loss(c0), l1 = loss(c1);
    for (std::size_t i = 0; i < 2; ++i) {
        EXPECT_NEAR(est.grad_probs[i], 0.5 * (s0[i] * (l0 - l1) + s1[i] * (l1 - l0)), 1e-15);
    }
}

TEST(Reinforce, PreactivationScoreIsBitMinusProb) {
    const CodeDistribution dist{{0.2, 0.9, 0.5}};
    const auto code = BinaryCode::from_integer(3, 0b101);
    const auto s = code_score_wrt_preactivation(dist, code);
    EXPECT_NEAR(s[0], 0.8, 1e-15);
    EXPECT_NEAR(s[1], -0.9, 1e-15);
    EXPECT_NEAR(s[2], 0.5, 1e-15);
}

TEST(Reinforce, GradientAssemblesEncoderAndDecoder) {
    RandomStream rng(21);
    const auto model = random_model(3, 4, 5, rng);
    const auto x = dense({0.5, -1.0, 2.0});
    RandomStream a(22), b(22);
    const auto g = reinforce_gradient(model, x, 3, 4, a);
    // Replay the same four samples by hand.
    const auto enc = encode_probs(model, x);
    Vector grad_pre(4, 0.0);
    Vector dec_b(5, 0.0);
    double mean = 0.0;
    for (int m = 0; m < 4; ++m) {
        const auto code = sample_code(enc.distribution, b);
        const auto d = decode_train(model, code, 3);
        const auto s = code_score_wrt_preactivation(enc.distribution, code);
        for (std::size_t i = 0; i < 4; ++i) {
            grad_pre[i] += s[i] * d.loss / 4.0;
        }
        for (std::size_t k = 0; k < 5; ++k) {
            dec_b[k] += d.grad_bias[k] / 4.0;
        }
        mean += d.loss / 4.0;
    }
    EXPECT_NEAR(g.mean_loss, mean, 1e-12);
    for (std::size_t i = 0; i < 4; ++i) {
        EXPECT_NEAR(g.encoder.grad_pre[i], grad_pre[i], 1e-12);
        EXPECT_NEAR(g.encoder.grad_bias[i], grad_pre[i], 1e-12);
        EXPECT_NEAR(g.encoder.grad_w(i, 2), grad_pre[i] * 2.0, 1e-12);
    }
    for (std::size_t k = 0; k < 5; ++k) {
        EXPECT_NEAR(g.dec_grad_b[k], dec_b[k], 1e-12);
    }
}

TEST(Reinforce, ZeroSamplesThrows) {
    RandomStream rng(1);
    EXPECT_THROW(reinforce_estimate(CodeDistribution{{0.5}}, [](const BinaryCode&) { return 0.0; }, 0, rng),
                 ArgumentError);
}

TEST(NetworkParams, InitializationIsBoundedAndSeeded) {
    DsncModel a(10, 6, 4), b(10, 6, 4), c(10, 6, 4);
    a.initialize(3);
    b.initialize(3);
    c.initialize(4);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    const double lim = std::sqrt(6.0 / 16.0);
    for (double v : a.enc_w.values()) {
        EXPECT_LE(std::abs(v), lim);
    }
    EXPECT_EQ(a.enc_b, Vector(6, 0.0));
    EXPECT_NO_THROW(a.validate());
    a.dec_b[0] = NAN;
    EXPECT_THROW(a.validate(), NumericError);
}

} // namespace
} // namespace dsnc
