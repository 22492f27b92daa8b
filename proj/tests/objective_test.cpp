#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "naive_loss.hpp"

namespace covr {
namespace {

using test::Matrix;
using test::random_unit;

/// Similarity matrix of random unit batches, so entries are genuine cosines.
SimilarityMatrix random_similarity(std::size_t b, std::size_t d, std::mt19937_64& rng, ContrastiveConfig cfg = {}) {
    std::vector<Embedding> f, t;
    for (std::size_t i = 0; i < b; ++i) {
        f.push_back(random_unit(d, rng));
        t.push_back(random_unit(d, rng));
    }
    return similarity_matrix(f, t, cfg);
}

Matrix to_matrix(const Tensor& S) {
    Matrix m(S.rows(), std::vector<double>(S.cols()));
    for (std::size_t i = 0; i < S.rows(); ++i)
        for (std::size_t j = 0; j < S.cols(); ++j) m[i][j] = S.at(i, j);
    return m;
}

TEST(SimilarityMatrix, OrthonormalSelfIsIdentity) {
    std::vector<Embedding> e{{{1, 0, 0}, true}, {{0, 1, 0}, true}, {{0, 0, 1}, true}};
    const auto s = similarity_matrix(e, e);
    for (std::size_t i = 0; i < 3; ++i)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(s.S.at(i, j), i == j ? 1.0 : 0.0);
}

TEST(SimilarityMatrix, OrthogonalSetsGiveZeros) {
    std::vector<Embedding> f{{{1, 0, 0, 0}, true}, {{0, 1, 0, 0}, true}};
    std::vector<Embedding> t{{{0, 0, 1, 0}, true}, {{0, 0, 0, 1}, true}};
    const auto s = similarity_matrix(f, t);
    for (double v : s.S.values()) EXPECT_EQ(v, 0.0);
}

TEST(SimilarityMatrix, MatchesPairwiseDots) {
    std::mt19937_64 rng(1);
    std::vector<Embedding> f, t;
    for (int i = 0; i < 4; ++i) {
        f.push_back(random_unit(8, rng));
        t.push_back(random_unit(8, rng));
    }
    const auto s = similarity_matrix(f, t);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 4; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < 8; ++k) dot += f[i].values[k] * t[j].values[k];
            EXPECT_NEAR(s.S.at(i, j), dot, 1e-12);
            EXPECT_LE(std::abs(s.S.at(i, j)), 1.0 + 1e-6);
        }
}

TEST(SimilarityMatrix, InputErrors) {
    std::vector<Embedding> one{{{1, 0}, true}};
    std::vector<Embedding> two{{{1, 0}, true}, {{0, 1}, true}};
    std::vector<Embedding> unnormalized{{{2, 0}, false}};
    auto kind = [](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::numeric;
    };
    EXPECT_EQ(kind([&] { similarity_matrix(one, two); }), ErrorKind::input);
    EXPECT_EQ(kind([&] { similarity_matrix(unnormalized, one); }), ErrorKind::input);
}

TEST(HardNegativeWeights, ZeroBetaIsUniform) {
    std::mt19937_64 rng(2);
    auto s = random_similarity(5, 8, rng, {0.07, 1.0, 0.0});
    for (auto dir : {WeightDirection::row, WeightDirection::column}) {
        const Tensor w = hard_negative_weights(s, dir);
        for (std::size_t i = 0; i < 5; ++i)
            for (std::size_t j = 0; j < 5; ++j)
                if (i != j) {
                    EXPECT_EQ(w.at(i, j), 1.0);
                }
    }
}

TEST(HardNegativeWeights, SingleNegativeIsOne) {
    std::mt19937_64 rng(3);
    const auto s = random_similarity(2, 8, rng);
    for (auto dir : {WeightDirection::row, WeightDirection::column}) {
        const Tensor w = hard_negative_weights(s, dir);
        EXPECT_DOUBLE_EQ(w.at(0, 1), 1.0);
        EXPECT_DOUBLE_EQ(w.at(1, 0), 1.0);
    }
}

TEST(HardNegativeWeights, SingletonBatch) {
    const Tensor w = hard_negative_weights(Tensor::from_rows({{0.3}}), {}, WeightDirection::row);
    EXPECT_EQ(w.dims(), (Shape{1, 1}));
    EXPECT_EQ(w[0], 1.0);
}

TEST(HardNegativeWeights, MatchesFormula) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_similarity(4, 8, rng);
        const Matrix m = to_matrix(s.S);
        const Tensor wr = hard_negative_weights(s, WeightDirection::row);
        const Tensor wc = hard_negative_weights(s, WeightDirection::column);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                if (i == j) continue;
                EXPECT_NEAR(wr.at(i, j), test::naive_row_weight(m, i, j, 0.07, 0.5), 1e-10);
                EXPECT_NEAR(wc.at(i, j), test::naive_col_weight(m, i, j, 0.07, 0.5), 1e-10);
            }
    }
}

TEST(HardNegativeWeights, OffDiagonalAveragesToOne) {
    std::mt19937_64 rng(5);
    const auto s = random_similarity(6, 8, rng);
    const Tensor wr = hard_negative_weights(s, WeightDirection::row);
    const Tensor wc = hard_negative_weights(s, WeightDirection::column);
    for (std::size_t i = 0; i < 6; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < 6; ++j)
            if (j != i) {
                row += wr.at(i, j);
                col += wc.at(j, i);
            }
        EXPECT_NEAR(row / 5.0, 1.0, 1e-12);
        EXPECT_NEAR(col / 5.0, 1.0, 1e-12);
    }
}

TEST(HnNceLoss, SingletonBatchIsExactlyZero) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) EXPECT_EQ(hn_nce_loss(random_similarity(1, 8, rng)), 0.0);
}

TEST(HnNceLoss, TwoByTwoIdentityMatchesDirectEvaluation) {
    const SimilarityMatrix s{Tensor::from_rows({{1, 0}, {0, 1}}), {0.07, 1.0, 0.5}};
    // two identical terms per direction: -log(e^{1/tau} / (e^{1/tau} + e^0 * 1))
    const double per = -std::log(std::exp(1 / 0.07) / (std::exp(1 / 0.07) + 1.0));
    EXPECT_NEAR(hn_nce_loss(s), 4 * per, 1e-9);
    EXPECT_NEAR(hn_nce_loss(s), test::naive_loss({{1, 0}, {0, 1}}, 0.07, 1.0, 0.5), 1e-9);
}

TEST(HnNceLoss, MatchesNaiveOracle) {
    std::mt19937_64 rng(7);
    for (std::size_t b : {1u, 2u, 3u, 4u, 8u, 16u}) {
        for (int t = 0; t < 20; ++t) {
            const auto s = random_similarity(b, 8, rng);
            EXPECT_NEAR(hn_nce_loss(s), test::naive_loss(to_matrix(s.S), 0.07, 1.0, 0.5), 1e-9) << "B=" << b;
        }
    }
}

TEST(HnNceLoss, OtherHyperparametersMatchOracle) {
    std::mt19937_64 rng(8);
    for (auto cfg : {ContrastiveConfig{0.2, 1.0, 0.0}, ContrastiveConfig{0.05, 2.0, 1.0}, ContrastiveConfig{1.0, 0.5, 0.5}}) {
        const auto s = random_similarity(5, 8, rng, cfg);
        EXPECT_NEAR(hn_nce_loss(s), test::naive_loss(to_matrix(s.S), cfg.tau, cfg.lambda, cfg.beta), 1e-9);
    }
}

TEST(HnNceLoss, NonNegativeWhenLambdaIsOne) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 200; ++t) {
        const std::size_t b = 1 + rng() % 10;
        Tensor S({b, b});
        for (double& v : S.values()) v = u(rng);
        EXPECT_GE(hn_nce_loss(SimilarityMatrix{S, {}}), 0.0);
    }
}

TEST(HnNceLoss, PermutationInvariant) {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 50; ++t) {
        const auto s = random_similarity(6, 8, rng);
        std::vector<std::size_t> perm(6);
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), rng);
        Tensor p({6, 6});
        for (std::size_t i = 0; i < 6; ++i)
            for (std::size_t j = 0; j < 6; ++j) p.at(i, j) = s.S.at(perm[i], perm[j]);
        EXPECT_NEAR(hn_nce_loss(s), hn_nce_loss(SimilarityMatrix{p, s.config}), 1e-9);
    }
}

TEST(HnNceLoss, RaisingAPositiveNeverHurts) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 100; ++t) {
        auto s = random_similarity(5, 8, rng);
        const double before = hn_nce_loss(s);
        s.S.at(t % 5, t % 5) += 0.05;
        EXPECT_LE(hn_nce_loss(s), before + 1e-12);
    }
}

TEST(HnNceLoss, StableForExtremeTemperature) {
    const SimilarityMatrix s{Tensor::from_rows({{1, -1, 0.9}, {0.2, 1, -1}, {-1, 0.99, 1}}), {0.001, 1.0, 0.5}};
    EXPECT_TRUE(std::isfinite(hn_nce_loss(s)));
}

TEST(HnNceLoss, NonPositiveTemperatureIsConfigError) {
    try {
        hn_nce_loss(SimilarityMatrix{Tensor::from_rows({{1}}), {0.0, 1.0, 0.5}});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::config);
    }
}

/// Loss with weights frozen at `S0`, the function whose derivative the
/// stop-gradient backward pass computes.
Var frozen_weight_loss(Var S, const Tensor& S0, const ContrastiveConfig& cfg = {}) {
    return hn_nce_loss(S, cfg, hard_negative_weights(S0, cfg, WeightDirection::row),
                       hard_negative_weights(S0, cfg, WeightDirection::column));
}

TEST(HnNceLoss, ExplicitWeightsMatchImplicit) {
    std::mt19937_64 rng(14);
    const auto s = random_similarity(5, 8, rng);
    Tape tape;
    Var S = tape.constant(s.S);
    EXPECT_EQ(hn_nce_loss(S, {}).value()[0], frozen_weight_loss(S, s.S).value()[0]);
}

TEST(HnNceLoss, WeightsCarryNoGradient) {
    std::mt19937_64 rng(15);
    const auto s = random_similarity(4, 8, rng);
    Tape tape;
    Var S = tape.leaf(s.S, true);
    tape.backward(hn_nce_loss(S, {}));
    const Tensor g = tape.grad(S);
    // same gradient as the loss whose weights were fixed beforehand
    Tape t2;
    Var S2 = t2.leaf(s.S, true);
    t2.backward(frozen_weight_loss(S2, s.S));
    const Tensor g2 = t2.grad(S2);
    for (std::size_t i = 0; i < g.size(); ++i) EXPECT_EQ(g[i], g2[i]);
}

TEST(HnNceLoss, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(12);
    for (std::size_t b : {1u, 2u, 4u, 7u}) {
        const Tensor S0 = random_similarity(b, 8, rng).S;
        std::vector<Tensor> params{S0};
        ScalarFn fn = [&](Tape&, std::span<const Var> p) { return frozen_weight_loss(p[0], S0); };
        EXPECT_LT(grad_check(fn, params, 1e-5, 1e-4).worst(), 1e-4) << "B=" << b;
    }
}

TEST(HnNceLoss, GradientThroughSimilarity) {
    std::mt19937_64 rng(13);
    std::vector<Tensor> params{test::random_tensor({4, 8}, rng), test::random_tensor({4, 8}, rng)};
    auto sim = [](std::span<const Var> p) { return similarity_matrix(l2_normalize_rows(p[0]), l2_normalize_rows(p[1])); };
    Tensor S0;
    {
        Tape tape;
        S0 = sim(std::vector<Var>{tape.constant(params[0]), tape.constant(params[1])}).value();
    }
    ScalarFn fn = [&](Tape&, std::span<const Var> p) { return frozen_weight_loss(sim(p), S0); };
    EXPECT_LT(grad_check(fn, params, 1e-5, 1e-4).worst(), 1e-4);
}

}  // namespace
}  // namespace covr
