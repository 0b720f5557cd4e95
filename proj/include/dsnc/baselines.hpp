#ifndef DSNC_BASELINES_HPP
#define DSNC_BASELINES_HPP

#include <algorithm>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include "dsnc/binary_code.hpp"
#include "dsnc/data.hpp"
#include "dsnc/errors.hpp"
#include "dsnc/hamming.hpp"
#include "dsnc/linalg.hpp"
#include "dsnc/model.hpp"
#include "dsnc/parallel.hpp"
#include "dsnc/random.hpp"
#include "dsnc/trainer.hpp"

namespace dsnc {

/// One-hidden-layer perceptron with a continuous sigmoid layer of c units.
struct MlpModel : NetworkParams {
    using NetworkParams::NetworkParams;
};

/// Same loop, optimizer and checkpointing as the DSNC trainer, with the
/// hidden layer kept deterministic. The pair penalty (when enabled) acts on
/// the hidden activations.
inline FitResult<MlpModel> train_mlp(const Split& split, const TrainConfig& config) {
    config.validate();
    MlpModel model(split.train.n, config.code_size, split.train.K);
    model.initialize(config.seed);
    TrainConfig cfg = config;
    cfg.hidden = HiddenMode::deterministic;
    return fit(std::move(model), split, cfg);
}

inline double mlp_accuracy(const MlpModel& model, const Dataset& data, std::size_t threads = 1) {
    if (data.empty()) {
        throw ArgumentError("mlp_accuracy: empty dataset");
    }
    return validation_accuracy(model, data, HiddenMode::deterministic, threads);
}

/// Random K x c code matrix with pairwise distinct rows and no constant
/// column. Each column is drawn uniformly among non-constant columns, and
/// the whole matrix is redrawn until rows are distinct.
inline std::vector<BinaryCode> generate_code_matrix(std::size_t K, std::size_t c, std::uint64_t seed) {
    if (K < 2) {
        throw ArgumentError("generate_code_matrix: need K >= 2");
    }
    if (c < 64 && (std::uint64_t{1} << c) < K) {
        throw ArgumentError("code space too small: 2^" + std::to_string(c) + " < K=" + std::to_string(K));
    }
    RandomStream rng(derive_seed(seed, {0xec0cULL}));
    std::vector<BinaryCode> rows(K, BinaryCode(c));
    for (;;) {
        for (std::size_t j = 0; j < c; ++j) {
            bool has0 = false;
            bool has1 = false;
            do {
                has0 = has1 = false;
                for (std::size_t k = 0; k < K; ++k) {
                    const bool bit = (rng.next_u64() >> 63) != 0;
                    rows[k].set(j, bit);
                    (bit ? has1 : has0) = true;
                }
            } while (!(has0 && has1));
        }
        std::set<BinaryCode> unique(rows.begin(), rows.end());
        if (unique.size() == K) {
            return rows;
        }
    }
}

/// ECOC classifier: one logistic linear classifier per code bit and a code
/// matrix row per class.
struct EcocModel {
    std::size_t n = 0;
    std::size_t c = 0;
    std::size_t K = 0;
    std::vector<BinaryCode> code_matrix; // K rows of c bits
    Matrix w;                            // c x n
    Vector b;                            // c

    friend bool operator==(const EcocModel&, const EcocModel&) = default;
};

inline BinaryCode ecoc_bits(const EcocModel& model, const SparseVector& x) {
    const Vector logits = affine(model.w, model.b, x);
    BinaryCode code(model.c);
    for (std::size_t j = 0; j < model.c; ++j) {
        code.set(j, logits[j] >= 0.0);
    }
    return code;
}

/// Nearest code-matrix row to the given bits; ties go to the smallest class id.
inline std::size_t ecoc_decode(const EcocModel& model, const BinaryCode& bits) {
    std::size_t best = 0;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < model.K; ++k) {
        const std::size_t d = hamming_distance(model.code_matrix[k], bits);
        if (d < best_d) {
            best_d = d;
            best = k;
        }
    }
    return best;
}

inline std::size_t ecoc_predict(const EcocModel& model, const SparseVector& x) {
    return ecoc_decode(model, ecoc_bits(model, x));
}

inline double ecoc_accuracy(const EcocModel& model, const Dataset& data, std::size_t threads = 1) {
    if (data.empty()) {
        throw ArgumentError("ecoc_accuracy: empty dataset");
    }
    std::vector<std::uint8_t> hit(data.size(), 0);
    parallel_for(data.size(), threads, [&](std::size_t i) {
        hit[i] = ecoc_predict(model, data.examples[i].x) == data.examples[i].y ? 1 : 0;
    });
    std::size_t correct = 0;
    for (auto h : hit) {
        correct += h;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

/// Trains each bit classifier independently with logistic loss and Adam,
/// using the batch size, epochs and learning rate of `config`.
inline EcocModel train_ecoc(const Split& split, std::size_t c, const TrainConfig& config) {
    if (config.epochs < 1) {
        throw ArgumentError("train_ecoc: epochs must be >= 1");
    }
    const Dataset& train = split.train;
    if (train.empty()) {
        throw ArgumentError("train_ecoc: empty training set");
    }
    const auto counts = train.class_counts();
    if (std::count_if(counts.begin(), counts.end(), [](std::size_t k) { return k > 0; }) < 2) {
        throw ArgumentError("train_ecoc: training set has a single class (degenerate bit targets)");
    }
    EcocModel model;
    model.n = train.n;
    model.c = c;
    model.K = train.K;
    model.code_matrix = generate_code_matrix(train.K, c, config.seed);
    model.w = Matrix(c, train.n);
    model.b.assign(c, 0.0);
    for (std::size_t j = 0; j < c; ++j) {
        bool has0 = false;
        bool has1 = false;
        for (const auto& e : train.examples) {
            (model.code_matrix[e.y].get(j) ? has1 : has0) = true;
        }
        if (!(has0 && has1)) {
            throw ArgumentError("train_ecoc: bit " + std::to_string(j) + " has a single target value on train");
        }
    }

    parallel_for(c, config.threads, [&](std::size_t j) {
        Vector w(train.n);
        double bias = 0.0;
        {
            RandomStream init(derive_seed(config.seed, {0xec0c1ULL, j}));
            const double limit = std::sqrt(6.0 / static_cast<double>(train.n + 1));
            for (auto& v : w) {
                v = init.uniform(-limit, limit);
            }
        }
        AdamState adam_w(train.n, config.lr);
        AdamState adam_b(1, config.lr);
        Vector gw(train.n);
        std::vector<std::size_t> order(train.size());
        for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
            for (std::size_t i = 0; i < order.size(); ++i) {
                order[i] = i;
            }
            RandomStream rng(derive_seed(config.seed, {0xec0c2ULL, j, epoch}));
            rng.shuffle(order);
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t B = std::min(config.batch_size, order.size() - start);
                std::fill(gw.begin(), gw.end(), 0.0);
                double gb = 0.0;
                for (std::size_t t = 0; t < B; ++t) {
                    const auto& e = train.examples[order[start + t]];
                    double z = bias;
                    for (std::size_t k = 0; k < e.x.nnz(); ++k) {
                        z += w[e.x.indices[k]] * e.x.values[k];
                    }
                    const double target = model.code_matrix[e.y].get(j) ? 1.0 : 0.0;
                    const double g = (sigmoid(z) - target) / static_cast<double>(B);
                    for (std::size_t k = 0; k < e.x.nnz(); ++k) {
                        gw[e.x.indices[k]] += g * e.x.values[k];
                    }
                    gb += g;
                }
                adam_step(adam_w, w, gw, "ecoc bit weights");
                adam_step(adam_b, std::span<double>(&bias, 1), std::span<const double>(&gb, 1), "ecoc bit bias");
            }
        }
        for (std::size_t i = 0; i < train.n; ++i) {
            model.w(j, i) = static_cast<double>(static_cast<float>(w[i]));
        }
        model.b[j] = static_cast<double>(static_cast<float>(bias));
    });
    return model;
}

} // namespace dsnc

#endif
