#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "dsnc/baselines.hpp"

namespace dsnc {
namespace {

TrainConfig baseline_config(std::size_t c, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.code_size = c;
    cfg.seed = seed;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    return cfg;
}

TEST(Mlp, LearnsSeparableBlobs) {
    std::vector<double> acc;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto split = split_dataset(make_blobs(8, 16, 60, 0.3, seed), seed);
        const auto r = train_mlp(split, baseline_config(8, seed));
        acc.push_back(mlp_accuracy(r.model, split.test));
    }
    std::sort(acc.begin(), acc.end());
    EXPECT_GE(acc[2], 0.95);
}

TEST(Mlp, Deterministic) {
    const auto split = split_dataset(make_blobs(4, 8, 30, 0.3, 2), 2);
    auto cfg = baseline_config(6, 2);
    const auto a = train_mlp(split, cfg);
    cfg.threads = 4;
    const auto b = train_mlp(split, cfg);
    EXPECT_EQ(a.model, b.model);
    EXPECT_EQ(metrics_csv(a.log), metrics_csv(b.log));
}

TEST(Mlp, Preconditions) {
    const auto split = split_dataset(make_blobs(4, 8, 30, 0.3, 2), 2);
    auto cfg = baseline_config(6, 2);
    cfg.epochs = 0;
    EXPECT_THROW(train_mlp(split, cfg), ArgumentError);
    Dataset empty;
    empty.n = 8;
    empty.K = 4;
    EXPECT_THROW(mlp_accuracy(MlpModel(8, 6, 4), empty), ArgumentError);
}

TEST(CodeMatrix, SmallestSpaces) {
    const auto two = generate_code_matrix(2, 1, 1);
    ASSERT_EQ(two.size(), 2u);
    EXPECT_NE(two[0], two[1]);

    const auto four = generate_code_matrix(4, 2, 1);
    const std::set<BinaryCode> rows(four.begin(), four.end());
    EXPECT_EQ(rows.size(), 4u);
}

void expect_valid_matrix(const std::vector<BinaryCode>& m, std::size_t K, std::size_t c) {
    ASSERT_EQ(m.size(), K);
    EXPECT_EQ(std::set<BinaryCode>(m.begin(), m.end()).size(), K);
    for (std::size_t j = 0; j < c; ++j) {
        std::size_t ones = 0;
        for (const auto& row : m) {
            ASSERT_EQ(row.size(), c);
            ones += row.get(j) ? 1 : 0;
        }
        EXPECT_GT(ones, 0u) << "column " << j;
        EXPECT_LT(ones, K) << "column " << j;
    }
}

TEST(CodeMatrix, RowsDistinctColumnsNonConstant) {
    expect_valid_matrix(generate_code_matrix(1000, 36, 7), 1000, 36);
    expect_valid_matrix(generate_code_matrix(10, 100, 8), 10, 100);
    expect_valid_matrix(generate_code_matrix(3, 2, 9), 3, 2);
}

TEST(CodeMatrix, DeterministicPerSeed) {
    EXPECT_EQ(generate_code_matrix(20, 12, 3), generate_code_matrix(20, 12, 3));
    EXPECT_NE(generate_code_matrix(20, 12, 3), generate_code_matrix(20, 12, 4));
}

TEST(CodeMatrix, RejectsTooSmallSpace) {
    try {
        generate_code_matrix(5, 2, 1);
        FAIL() << "expected ArgumentError";
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("code space too small"), std::string::npos);
    }
    EXPECT_THROW(generate_code_matrix(1, 4, 1), ArgumentError);
}

TEST(Ecoc, BitClassifiersFitTrainingTargets) {
    const auto split = split_dataset(make_blobs(4, 10, 50, 0.3, 3), 3);
    auto cfg = baseline_config(8, 3);
    cfg.epochs = 100;
    const auto model = train_ecoc(split, 8, cfg);
    for (std::size_t j = 0; j < 8; ++j) {
        std::size_t hits = 0;
        for (const auto& e : split.train.examples) {
            hits += ecoc_bits(model, e.x).get(j) == model.code_matrix[e.y].get(j) ? 1 : 0;
        }
        EXPECT_GT(static_cast<double>(hits) / static_cast<double>(split.train.size()), 0.9) << "bit " << j;
    }
    EXPECT_GT(ecoc_accuracy(model, split.test), 0.9);
}

TEST(Ecoc, Deterministic) {
    const auto split = split_dataset(make_blobs(4, 10, 30, 0.3, 4), 4);
    auto cfg = baseline_config(6, 4);
    const auto a = train_ecoc(split, 6, cfg);
    cfg.threads = 3;
    const auto b = train_ecoc(split, 6, cfg);
    EXPECT_EQ(a, b);
    EXPECT_EQ(ecoc_accuracy(a, split.test, 1), ecoc_accuracy(a, split.test, 4));
}

TEST(Ecoc, SingleClassRejected) {
    auto data = make_blobs(3, 4, 20, 0.3, 5);
    Split split = split_dataset(data, 5);
    for (auto& e : split.train.examples) {
        e.y = 1;
    }
    EXPECT_THROW(train_ecoc(split, 4, baseline_config(4, 5)), ArgumentError);
}

EcocModel matrix_only(std::vector<BinaryCode> rows) {
    EcocModel m;
    m.K = rows.size();
    m.c = rows[0].size();
    m.code_matrix = std::move(rows);
    return m;
}

TEST(EcocDecode, ExactRowReturnsItsClass) {
    const auto m = matrix_only(generate_code_matrix(12, 7, 6));
    for (std::size_t k = 0; k < 12; ++k) {
        EXPECT_EQ(ecoc_decode(m, m.code_matrix[k]), k);
    }
}

TEST(EcocDecode, TieGoesToSmallestClass) {
    const auto m = matrix_only({BinaryCode::from_integer(2, 0b00), BinaryCode::from_integer(2, 0b11)});
    EXPECT_EQ(ecoc_decode(m, BinaryCode::from_integer(2, 0b01)), 0u);
    EXPECT_EQ(ecoc_decode(m, BinaryCode::from_integer(2, 0b10)), 0u);
    const auto r = matrix_only({BinaryCode::from_integer(2, 0b11), BinaryCode::from_integer(2, 0b00)});
    EXPECT_EQ(ecoc_decode(r, BinaryCode::from_integer(2, 0b01)), 0u);
}

TEST(EcocDecode, MatchesRowScanOracle) {
    RandomStream rng(7);
    const std::size_t K = 30, c = 11;
    const auto m = matrix_only(generate_code_matrix(K, c, 7));
    for (int q = 0; q < 500; ++q) {
        const auto bits = BinaryCode::from_integer(c, rng.below(std::uint64_t{1} << c));
        std::size_t best = K;
        int best_d = 1 << 20;
        for (std::size_t k = 0; k < K; ++k) {
            int d = 0;
            for (std::size_t j = 0; j < c; ++j) {
                d += m.code_matrix[k].get(j) != bits.get(j) ? 1 : 0;
            }
            if (d < best_d) {
                best_d = d;
                best = k;
            }
        }
        EXPECT_EQ(ecoc_decode(m, bits), best);
    }
}

} // namespace
} // namespace dsnc
