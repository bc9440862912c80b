#include <doctest.h>

#include <cmath>

#include "quilt/rank/rank_corr.hpp"
#include "support/oracles.hpp"

using namespace quilt;

TEST_SUITE("rank_corr") {

TEST_CASE("midranks") {
    CHECK(ranks({10, 30, 20}) == std::vector<double>{1, 3, 2});
    CHECK(ranks({5, 5, 9}) == std::vector<double>{1.5, 1.5, 3});
    CHECK_THROWS_AS(ranks({1.0}), ValidationError);

    bool degenerate = false;
    const std::vector<double> r = ranks({2, 2, 2, 2}, &degenerate);
    CHECK(degenerate);
    for (double x : r) CHECK(x == 2.5);

    // Strictly monotone transforms leave ranks bitwise unchanged.
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> v(25);
        for (double& x : v) x = rng.uniform(-3.0, 3.0);
        v[3] = v[17];  // plant a tie
        const auto f = test::random_monotone_transform(rng);
        std::vector<double> w(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) w[i] = f(v[i]);
        CHECK(ranks(v) == ranks(w));
    }
}

TEST_CASE("spearman block values") {
    Matrix data(3, 2);
    data << 1, 1, 2, 3, 3, 2;
    const Matrix rho = spearman_block(data);
    CHECK(rho(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(rho(0, 0) == 1.0);

    Matrix same(4, 2);
    same << 1, 1, 2, 2, 3, 3, 4, 4;
    CHECK(spearman_block(same)(0, 1) == doctest::Approx(1.0));

    Matrix reversed(4, 2);
    reversed << 1, 9, 2, 7, 3, 4, 4, 1;
    CHECK(spearman_block(reversed)(0, 1) == doctest::Approx(-1.0));
}

TEST_CASE("spearman degenerate columns") {
    Matrix data(4, 2);
    data << 1, 5, 2, 5, 3, 5, 4, 5;
    CHECK_THROWS_WITH_AS(spearman_block(data), doctest::Contains("column(s): 2"),
                         ValidationError);
    std::vector<int> degenerate;
    const Matrix rho =
        spearman_block(data, DegeneratePolicy::zero_with_flag, &degenerate);
    CHECK(rho(0, 1) == 0.0);
    CHECK(degenerate == std::vector<int>{1});
}

TEST_CASE("kendall block values") {
    Matrix inc(3, 2);
    inc << 1, 1, 2, 2, 3, 3;
    CHECK(kendall_block(inc)(0, 1) == 1.0);

    Matrix mixed(4, 2);
    mixed << 1, 2, 2, 1, 3, 4, 4, 3;
    CHECK(kendall_block(mixed)(0, 1) == doctest::Approx(1.0 / 3).epsilon(1e-15));

    Matrix dec(3, 2);
    dec << 1, 3, 2, 2, 3, 1;
    CHECK(kendall_block(dec)(0, 1) == -1.0);
}

TEST_CASE("fast kendall equals the pair-enumeration oracle exactly") {
    Rng rng(99);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(120));
        std::vector<double> x(n), y(n);
        for (int i = 0; i < n; ++i) {
            // Coarse grid so ties happen often.
            x[i] = std::floor(rng.uniform(-4.0, 4.0));
            y[i] = std::floor(rng.uniform(-4.0, 4.0));
        }
        CHECK(kendall_pair(x.data(), y.data(), n) == test::kendall_naive(x, y));
    }
}

TEST_CASE("combine blocks averages overlapping pairs") {
    const BlockDesign design(3, {{0, 1}, {0, 1, 2}}, {10, 10});
    std::vector<BlockRankCorrelation> per_block(2);
    per_block[0].block_index = 0;
    per_block[0].rho = Matrix::Identity(2, 2);
    per_block[0].rho(0, 1) = per_block[0].rho(1, 0) = 0.4;
    per_block[1].block_index = 1;
    per_block[1].rho = Matrix::Identity(3, 3);
    per_block[1].rho(0, 1) = per_block[1].rho(1, 0) = 0.6;
    per_block[1].rho(1, 2) = per_block[1].rho(2, 1) = 0.2;

    const MaskedCorrelation combined =
        combine_blocks(design, per_block, RankStatistic::rho);
    CHECK(combined.values()(0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(combined.values()(1, 2) == 0.2);   // single block, unchanged
    CHECK(combined.values()(0, 2) == 0.0);   // only via block 2
    CHECK(combined.values()(0, 0) == 1.0);

    per_block.pop_back();
    CHECK_THROWS_AS(combine_blocks(design, per_block, RankStatistic::rho),
                    ValidationError);
}

TEST_CASE("sine transforms fix the anchors") {
    const BlockDesign design(2, {{0, 1}}, {10});
    Matrix v = Matrix::Identity(2, 2);
    v(0, 1) = v(1, 0) = 1.0;
    const MaskedCorrelation one(v, induced_pair_set(design));
    CHECK(sine_transform(one, RankStatistic::rho).values()(0, 1) ==
          doctest::Approx(1.0).epsilon(1e-15));

    v(0, 1) = v(1, 0) = 1.0 / 3;
    const MaskedCorrelation third(v, induced_pair_set(design));
    CHECK(sine_transform(third, RankStatistic::tau).values()(0, 1) ==
          doctest::Approx(0.5).epsilon(1e-15));

    v(0, 1) = v(1, 0) = 0.0;
    const MaskedCorrelation zero(v, induced_pair_set(design));
    CHECK(sine_transform(zero, RankStatistic::rho).values()(0, 1) == 0.0);
    CHECK(sine_transform(zero, RankStatistic::rho).values()(0, 0) == 1.0);
}

TEST_CASE("psd repair clips block eigenvalues and keeps hidden zeros") {
    const BlockDesign design(3, {{0, 1, 2}}, {10});
    Matrix v = Matrix::Identity(3, 3);
    v(0, 1) = v(1, 0) = 0.9;
    v(0, 2) = v(2, 0) = 0.9;
    v(1, 2) = v(2, 1) = -0.9;  // strongly indefinite
    const MaskedCorrelation bad(v, induced_pair_set(design));
    Eigen::SelfAdjointEigenSolver<Matrix> before(bad.values());
    REQUIRE(before.eigenvalues().minCoeff() < 0.0);

    const MaskedCorrelation fixed = psd_repair(bad, design, 1e-4);
    Eigen::SelfAdjointEigenSolver<Matrix> after(fixed.values());
    CHECK(after.eigenvalues().minCoeff() >= 1e-4 * (1 - 1e-6));
    for (int i = 0; i < 3; ++i) CHECK(fixed.values()(i, i) == 1.0);

    // Already-PSD inputs come back bitwise identical.
    Matrix good = Matrix::Identity(3, 3);
    good(0, 1) = good(1, 0) = 0.3;
    const MaskedCorrelation ok(good, induced_pair_set(design));
    const MaskedCorrelation same = psd_repair(ok, design, 1e-4);
    CHECK(same.values() == ok.values());
}

TEST_CASE("repair leaves unobserved entries untouched") {
    const BlockDesign design(4, {{0, 1, 2}, {1, 2, 3}}, {10, 10});
    Matrix v = Matrix::Identity(4, 4);
    v(0, 1) = v(1, 0) = 0.95;
    v(0, 2) = v(2, 0) = 0.95;
    v(1, 2) = v(2, 1) = -0.9;
    v(1, 3) = v(3, 1) = 0.2;
    v(2, 3) = v(3, 2) = 0.1;
    const MaskedCorrelation masked(v, induced_pair_set(design));
    const MaskedCorrelation fixed = psd_repair(masked, design, 1e-4);
    CHECK(fixed.values()(0, 3) == 0.0);
}

TEST_CASE("pipeline is bitwise invariant under monotone transforms") {
    Rng rng(2024);
    const BlockDesign design(5, {{0, 1, 2, 3}, {2, 3, 4}}, {40, 40});
    for (int trial = 0; trial < 10; ++trial) {
        std::vector<Matrix> data;
        for (int k = 0; k < design.num_blocks(); ++k) {
            Matrix block(design.sample_size(k), design.block(k).size());
            for (long i = 0; i < block.rows(); ++i)
                for (long j = 0; j < block.cols(); ++j)
                    block(i, j) = rng.uniform(-3.0, 3.0);
            data.push_back(std::move(block));
        }
        for (const RankStatistic stat : {RankStatistic::rho, RankStatistic::tau}) {
            const MaskedCorrelation base = rank_correlation(design, data, stat);
            std::vector<Matrix> transformed = data;
            for (Matrix& block : transformed)
                for (long j = 0; j < block.cols(); ++j) {
                    const auto f = test::random_monotone_transform(rng);
                    for (long i = 0; i < block.rows(); ++i)
                        block(i, j) = f(block(i, j));
                }
            const MaskedCorrelation alt = rank_correlation(design, transformed, stat);
            CHECK(base.values() == alt.values());
        }
    }
}

}  // TEST_SUITE
