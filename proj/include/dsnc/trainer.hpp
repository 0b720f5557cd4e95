#ifndef DSNC_TRAINER_HPP
#define DSNC_TRAINER_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "dsnc/binary_code.hpp"
#include "dsnc/data.hpp"
#include "dsnc/errors.hpp"
#include "dsnc/hamming.hpp"
#include "dsnc/linalg.hpp"
#include "dsnc/model.hpp"
#include "dsnc/parallel.hpp"
#include "dsnc/random.hpp"
#include "dsnc/regularizer.hpp"

namespace dsnc {

enum class Estimator { ste, reinforce };

// stochastic: sampled binary hidden layer (DSNC); deterministic: continuous
// sigmoid hidden layer with exact backprop (MLP baseline).
enum class HiddenMode { stochastic, deterministic };

inline std::string to_string(Estimator e) { return e == Estimator::ste ? "ste" : "reinforce"; }

struct TrainConfig {
    std::size_t code_size = 16;
    std::size_t batch_size = 100;
    std::size_t epochs = 50;
    double lr = 1e-2;
    Estimator estimator = Estimator::ste;
    std::size_t reinforce_samples = 1;
    bool reinforce_baseline = false;
    std::uint64_t seed = 0;
    bool regularize = true;
    RegCoeffs coeffs{.beta = 0.05, .gamma = 0.01};
    std::size_t val_every = 1;       // epochs between validation evaluations
    std::size_t patience = 20;       // evaluations without improvement before stopping
    std::size_t threads = 1;
    bool record_wall_time = false;
    HiddenMode hidden = HiddenMode::stochastic;

    void validate() const {
        if (epochs < 1) {
            throw ArgumentError("TrainConfig: epochs must be >= 1");
        }
        if (batch_size < 1) {
            throw ArgumentError("TrainConfig: batch size must be >= 1");
        }
        if (regularize && batch_size < 2) {
            throw ArgumentError("TrainConfig: regularization needs batch size >= 2");
        }
        if (code_size < 1) {
            throw ArgumentError("TrainConfig: code size must be >= 1");
        }
        if (reinforce_samples < 1) {
            throw ArgumentError("TrainConfig: reinforce samples must be >= 1");
        }
        if (val_every < 1) {
            throw ArgumentError("TrainConfig: validation cadence must be >= 1");
        }
        if (!(lr > 0.0)) {
            throw ArgumentError("TrainConfig: learning rate must be positive");
        }
        coeffs.validate();
    }
};

struct CodeStats {
    std::optional<double> intra_mean;
    std::optional<double> intra_std;
    std::optional<double> inter_mean;
    std::optional<double> inter_std;
    std::size_t distinct_codes = 0;
    std::size_t intra_pairs = 0;
    std::size_t inter_pairs = 0;
    bool sampled = false;
};

struct CodeStatsOptions {
    std::size_t exact_limit = 5000;
    std::size_t sampled_pairs = 1'000'000;
    std::uint64_t seed = 0;
};

/// Hamming distance statistics over same-label and different-label pairs,
/// exact over all pairs up to `exact_limit` codes, otherwise over seeded
/// random pairs. Statistics of an empty pair class are absent.
inline CodeStats code_stats(std::span<const BinaryCode> codes, std::span<const std::uint32_t> labels,
                            const CodeStatsOptions& opts = {}) {
    if (codes.size() != labels.size()) {
        throw ArgumentError("code_stats: codes/labels size mismatch");
    }
    if (codes.size() < 2) {
        throw ArgumentError("code_stats: need at least 2 examples");
    }
    CodeStats s;
    std::unordered_set<BinaryCode, BinaryCodeHash> distinct(codes.begin(), codes.end());
    s.distinct_codes = distinct.size();

    double sum[2] = {0.0, 0.0};
    double sum_sq[2] = {0.0, 0.0};
    std::size_t count[2] = {0, 0};
    const auto add = [&](std::size_t i, std::size_t j) {
        const int inter = labels[i] != labels[j] ? 1 : 0;
        const auto d = static_cast<double>(hamming_distance(codes[i], codes[j]));
        sum[inter] += d;
        sum_sq[inter] += d * d;
        ++count[inter];
    };
    const std::size_t N = codes.size();
    if (N <= opts.exact_limit) {
        for (std::size_t i = 0; i < N; ++i) {
            for (std::size_t j = i + 1; j < N; ++j) {
                add(i, j);
            }
        }
    } else {
        s.sampled = true;
        RandomStream rng(derive_seed(opts.seed, {0x57a75ULL}));
        for (std::size_t p = 0; p < opts.sampled_pairs; ++p) {
            const auto i = static_cast<std::size_t>(rng.below(N));
            auto j = static_cast<std::size_t>(rng.below(N - 1));
            if (j >= i) {
                ++j;
            }
            add(i, j);
        }
    }
    const auto finish = [&](int k, std::optional<double>& mean, std::optional<double>& sd) {
        if (count[k] == 0) {
            return;
        }
        const double m = sum[k] / static_cast<double>(count[k]);
        mean = m;
        sd = std::sqrt(std::max(0.0, sum_sq[k] / static_cast<double>(count[k]) - m * m));
    };
    finish(0, s.intra_mean, s.intra_std);
    finish(1, s.inter_mean, s.inter_std);
    s.intra_pairs = count[0];
    s.inter_pairs = count[1];
    return s;
}

inline std::vector<BinaryCode> threshold_codes(const NetworkParams& model, const Dataset& data,
                                               std::size_t threads = 1) {
    std::vector<BinaryCode> codes(data.size());
    parallel_for(data.size(), threads, [&](std::size_t i) {
        codes[i] = threshold_code(encode_probs(model, data.examples[i].x).distribution);
    });
    return codes;
}

inline std::vector<std::uint32_t> labels_of(const Dataset& data) {
    std::vector<std::uint32_t> y(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        y[i] = data.examples[i].y;
    }
    return y;
}

inline CodeStats code_stats(const NetworkParams& model, const Dataset& data, const CodeStatsOptions& opts = {}) {
    const auto codes = threshold_codes(model, data);
    const auto labels = labels_of(data);
    return code_stats(codes, labels, opts);
}

enum class Decoder { linear, nn, mih, table };

inline std::string to_string(Decoder d) {
    switch (d) {
    case Decoder::linear:
        return "linear";
    case Decoder::nn:
        return "nn";
    case Decoder::mih:
        return "mih";
    case Decoder::table:
        return "table";
    }
    return "?";
}

/// Lookup structures for the non-linear decoders; all optional.
struct DecoderSet {
    const CodeIndex* index = nullptr;
    const MihIndex* mih = nullptr;
    const CodeTable* table = nullptr;
};

struct EvalResult {
    double accuracy = 0.0;
    std::size_t correct = 0;
    std::size_t total = 0;
    double mean_candidates = 0.0;
};

/// Accuracy of threshold-code inference followed by the chosen decoder.
inline EvalResult evaluate_detailed(const NetworkParams& model, const Dataset& data, Decoder decoder,
                                    const DecoderSet& res = {}, std::size_t threads = 1) {
    if (data.empty()) {
        throw ArgumentError("evaluate: empty dataset");
    }
    if ((decoder == Decoder::nn && res.index == nullptr) ||
        (decoder == Decoder::mih && (res.index == nullptr || res.mih == nullptr))) {
        throw ArgumentError("evaluate: " + to_string(decoder) + " decoding needs a code index");
    }
    if (decoder == Decoder::table && res.table == nullptr) {
        throw ArgumentError("evaluate: table decoding needs a code table");
    }
    std::vector<std::uint8_t> hit(data.size(), 0);
    std::vector<std::size_t> candidates(data.size(), 0);
    parallel_for(data.size(), threads, [&](std::size_t i) {
        const auto& e = data.examples[i];
        const BinaryCode code = threshold_code(encode_probs(model, e.x).distribution);
        std::size_t predicted = 0;
        switch (decoder) {
        case Decoder::linear:
            predicted = linear_decode(model, code);
            candidates[i] = model.K;
            break;
        case Decoder::nn: {
            const auto r = nn_decode(*res.index, code);
            predicted = r.label;
            candidates[i] = r.candidates;
            break;
        }
        case Decoder::mih: {
            const auto r = res.mih->query(*res.index, code);
            predicted = r.label;
            candidates[i] = r.candidates;
            break;
        }
        case Decoder::table:
            predicted = res.table->lookup(code);
            break;
        }
        hit[i] = predicted == e.y ? 1 : 0;
    });
    EvalResult r;
    r.total = data.size();
    double cand = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        r.correct += hit[i];
        cand += static_cast<double>(candidates[i]);
    }
    r.accuracy = static_cast<double>(r.correct) / static_cast<double>(r.total);
    r.mean_candidates = cand / static_cast<double>(r.total);
    return r;
}

inline double evaluate(const NetworkParams& model, const Dataset& data, Decoder decoder, const DecoderSet& res = {},
                       std::size_t threads = 1) {
    return evaluate_detailed(model, data, decoder, res, threads).accuracy;
}

/// Prediction of the deterministic network: argmax of the decoder applied
/// to the continuous sigmoid layer.
inline std::size_t mlp_predict(const NetworkParams& model, const SparseVector& x) {
    const auto enc = encode_probs(model, x);
    return argmax(affine(model.dec_w, model.dec_b, enc.distribution.probs));
}

inline double validation_accuracy(const NetworkParams& model, const Dataset& data, HiddenMode hidden,
                                  std::size_t threads) {
    if (hidden == HiddenMode::stochastic) {
        return evaluate(model, data, Decoder::linear, {}, threads);
    }
    std::vector<std::uint8_t> hit(data.size(), 0);
    parallel_for(data.size(), threads, [&](std::size_t i) {
        hit[i] = mlp_predict(model, data.examples[i].x) == data.examples[i].y ? 1 : 0;
    });
    std::size_t correct = 0;
    for (auto h : hit) {
        correct += h;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    std::optional<double> val_acc; // absent on epochs without validation
    double beta = 0.0;
    double gamma = 0.0;
    std::size_t distinct_codes = 0;
    std::optional<double> intra_mean;
    std::optional<double> inter_mean;
    std::optional<double> wall_ms;
};

inline const char* kMetricsHeader = "epoch,train_loss,val_acc_linear,beta,gamma,distinct_codes,intra_mean,inter_mean,wall_ms";

inline std::string metrics_csv(const std::vector<EpochMetrics>& log) {
    const auto num = [](double v) { return detail::format_double(v); };
    const auto opt = [&](const std::optional<double>& v) { return v ? num(*v) : std::string("NA"); };
    std::string out = std::string(kMetricsHeader) + "\n";
    for (const auto& m : log) {
        out += std::to_string(m.epoch) + "," + num(m.train_loss) + "," + opt(m.val_acc) + "," + num(m.beta) + "," +
               num(m.gamma) + "," + std::to_string(m.distinct_codes) + "," + opt(m.intra_mean) + "," +
               opt(m.inter_mean) + "," + opt(m.wall_ms) + "\n";
    }
    return out;
}

template <typename Model>
struct FitResult {
    Model model;
    std::vector<EpochMetrics> log;
    std::size_t best_epoch = 0;
    double best_val_acc = -1.0;
};

namespace detail {

struct ExampleWork {
    Vector probs;
    Vector hidden;       // code as 0/1 values, or probs for the deterministic network
    Vector grad_logits;  // probs - onehot(y), STE / deterministic paths
    Vector grad_hidden;  // W_dec^T grad_logits
    double loss = 0.0;
    // REINFORCE path
    Vector score_grad_pre;
    Matrix dec_grad_w;
    Vector dec_grad_b;
};

} // namespace detail

/// Mini-batch training with Adam. Each batch: encode, sample (or not, for
/// the deterministic network), decode, add the pair penalty on phi, back-
/// propagate through the chosen estimator. After each validation pass the
/// regularization coefficients are adapted and the float-rounded parameters
/// are checkpointed when validation accuracy improves; the best checkpoint
/// is returned.
///
/// Per-example work may run on `config.threads` workers; every reduction is
/// done afterwards in example order, so results do not depend on the thread
/// count.
template <typename Model>
FitResult<Model> fit(Model model, const Split& split, const TrainConfig& config) {
    config.validate();
    model.validate();
    const Dataset& train = split.train;
    if (train.empty() || split.validation.empty()) {
        throw ArgumentError("fit: empty train or validation set");
    }
    if (train.K != model.K || train.n != model.n) {
        throw ArgumentError("fit: dataset (n=" + std::to_string(train.n) + ", K=" + std::to_string(train.K) +
                            ") does not match model (n=" + std::to_string(model.n) +
                            ", K=" + std::to_string(model.K) + ")");
    }
    if (config.code_size != model.c) {
        throw ArgumentError("fit: config code size differs from model code size");
    }
    const std::size_t n = model.n;
    const std::size_t c = model.c;
    const std::size_t K = model.K;
    const bool stochastic = config.hidden == HiddenMode::stochastic;
    const bool use_reinforce = stochastic && config.estimator == Estimator::reinforce;

    AdamState adam_enc_w(model.enc_w.size(), config.lr);
    AdamState adam_enc_b(c, config.lr);
    AdamState adam_dec_w(model.dec_w.size(), config.lr);
    AdamState adam_dec_b(K, config.lr);
    Matrix g_enc_w(c, n);
    Vector g_enc_b(c);
    Matrix g_dec_w(K, c);
    Vector g_dec_b(K);

    RegCoeffs coeffs = config.coeffs;
    FitResult<Model> result;
    result.model = model;
    std::optional<double> prev_val;
    std::size_t evals_without_improvement = 0;

    std::vector<std::size_t> order(train.size());
    std::vector<detail::ExampleWork> work;

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = 0; i < order.size(); ++i) {
            order[i] = i;
        }
        RandomStream shuffle_rng(derive_seed(config.seed, {0x5eedULL, epoch}));
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t B = std::min(config.batch_size, order.size() - start);
            work.resize(B);
            parallel_for(B, config.threads, [&](std::size_t b) {
                const std::size_t row = order[start + b];
                const auto& ex = train.examples[row];
                auto& w = work[b];
                auto enc = encode_probs(model, ex.x);
                w.probs = std::move(enc.distribution.probs);
                if (use_reinforce) {
                    RandomStream rng(derive_seed(config.seed, {0x5a3b1eULL, epoch, row}));
                    auto rg = reinforce_gradient(model, ex.x, ex.y, config.reinforce_samples, rng,
                                                 config.reinforce_baseline);
                    w.loss = rg.mean_loss;
                    w.score_grad_pre = std::move(rg.encoder.grad_pre);
                    w.dec_grad_w = std::move(rg.dec_grad_w);
                    w.dec_grad_b = std::move(rg.dec_grad_b);
                    return;
                }
                if (stochastic) {
                    RandomStream rng(derive_seed(config.seed, {0x5a3b1eULL, epoch, row}));
                    w.hidden = sample_code(CodeDistribution{w.probs}, rng).to_vector();
                } else {
                    w.hidden = w.probs;
                }
                auto d = decode_train(model, w.hidden, ex.y);
                w.loss = d.loss;
                w.grad_logits = std::move(d.grad_logits);
                w.grad_hidden = std::move(d.grad_b);
            });

            const double inv_b = 1.0 / static_cast<double>(B);
            double batch_loss = 0.0;
            for (const auto& w : work) {
                batch_loss += w.loss;
            }
            if (!std::isfinite(batch_loss)) {
                throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index));
            }
            epoch_loss += batch_loss;

            std::optional<PairPenalty> reg;
            if (config.regularize && B >= 2) {
                std::vector<Vector> probs(B);
                std::vector<std::uint32_t> labels(B);
                for (std::size_t b = 0; b < B; ++b) {
                    probs[b] = work[b].probs;
                    labels[b] = train.examples[order[start + b]].y;
                }
                reg = pair_penalty(probs, labels, coeffs);
                if (!std::isfinite(reg->penalty)) {
                    throw NumericError("fit: non-finite regularization penalty at epoch " + std::to_string(epoch) +
                                       ", batch " + std::to_string(batch_index));
                }
            }

            g_enc_w.fill(0.0);
            std::fill(g_enc_b.begin(), g_enc_b.end(), 0.0);
            g_dec_w.fill(0.0);
            std::fill(g_dec_b.begin(), g_dec_b.end(), 0.0);
            Vector grad_probs(c);
            Vector grad_pre(c);
            for (std::size_t b = 0; b < B; ++b) {
                const auto& w = work[b];
                const auto& x = train.examples[order[start + b]].x;
                if (use_reinforce) {
                    for (std::size_t i = 0; i < c; ++i) {
                        const double p = w.probs[i];
                        grad_pre[i] = inv_b * w.score_grad_pre[i] +
                                      (reg ? reg->grads[b][i] * p * (1.0 - p) : 0.0);
                    }
                    for (std::size_t k = 0; k < K; ++k) {
                        g_dec_b[k] += inv_b * w.dec_grad_b[k];
                        auto dst = g_dec_w.row(k);
                        const auto src = w.dec_grad_w.row(k);
                        for (std::size_t i = 0; i < c; ++i) {
                            dst[i] += inv_b * src[i];
                        }
                    }
                } else {
                    // Straight-through: d loss / d phi is the gradient at the sampled code.
                    for (std::size_t i = 0; i < c; ++i) {
                        grad_probs[i] = inv_b * w.grad_hidden[i] + (reg ? reg->grads[b][i] : 0.0);
                    }
                    for (std::size_t i = 0; i < c; ++i) {
                        grad_pre[i] = grad_probs[i] * w.probs[i] * (1.0 - w.probs[i]);
                    }
                    for (std::size_t k = 0; k < K; ++k) {
                        const double g = inv_b * w.grad_logits[k];
                        g_dec_b[k] += g;
                        auto dst = g_dec_w.row(k);
                        for (std::size_t i = 0; i < c; ++i) {
                            dst[i] += g * w.hidden[i];
                        }
                    }
                }
                accumulate_outer(g_enc_w, grad_pre, x);
                for (std::size_t i = 0; i < c; ++i) {
                    g_enc_b[i] += grad_pre[i];
                }
            }

            try {
                adam_step(adam_enc_w, model.enc_w.values(), g_enc_w.values(), "encoder weights");
                adam_step(adam_enc_b, model.enc_b, g_enc_b, "encoder bias");
                adam_step(adam_dec_w, model.dec_w.values(), g_dec_w.values(), "decoder weights");
                adam_step(adam_dec_b, model.dec_b, g_dec_b, "decoder bias");
            } catch (const NumericError& e) {
                throw NumericError("fit: epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index) +
                                   ": " + e.what());
            }
        }

        EpochMetrics m;
        m.epoch = epoch;
        m.train_loss = epoch_loss / static_cast<double>(train.size());
        m.beta = coeffs.beta;
        m.gamma = coeffs.gamma;
        bool stop = false;
        if (epoch % config.val_every == 0 || epoch == config.epochs) {
            Model snapshot = model;
            snapshot.round_to_float();
            const double val = validation_accuracy(snapshot, split.validation, config.hidden, config.threads);
            m.val_acc = val;
            if (val > result.best_val_acc) {
                result.best_val_acc = val;
                result.best_epoch = epoch;
                result.model = snapshot;
                evals_without_improvement = 0;
            } else if (++evals_without_improvement >= config.patience) {
                stop = true;
            }
            if (config.regularize && prev_val) {
                coeffs = adapt_coeffs(coeffs, *prev_val, val);
            }
            prev_val = val;
            if (split.validation.size() >= 2) {
                const auto stats = code_stats(threshold_codes(snapshot, split.validation, config.threads),
                                              labels_of(split.validation));
                m.distinct_codes = stats.distinct_codes;
                m.intra_mean = stats.intra_mean;
                m.inter_mean = stats.inter_mean;
            }
        }
        if (config.record_wall_time) {
            m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        }
        result.log.push_back(m);
        if (stop) {
            break;
        }
    }
    return result;
}

/// Initializes a DSNC network from `config.seed` and fits it.
inline FitResult<DsncModel> train_dsnc(const Split& split, const TrainConfig& config) {
    config.validate();
    DsncModel model(split.train.n, config.code_size, split.train.K);
    model.initialize(config.seed);
    TrainConfig cfg = config;
    cfg.hidden = HiddenMode::stochastic;
    return fit(std::move(model), split, cfg);
}

} // namespace dsnc

#endif
