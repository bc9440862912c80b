#include <doctest.h>

#include <cmath>

#include "quilt/sim/simgen.hpp"
#include "quilt/rank/rank_corr.hpp"
#include "support/oracles.hpp"

using namespace quilt;

TEST_SUITE("simgen") {

TEST_CASE("ring lattice without rewiring") {
    GraphSpec spec;
    spec.p = 12;
    spec.neighbors = 2;
    spec.rewire_prob = 0.0;
    auto [theta, edges] = generate_precision(spec, 1);
    CHECK(edges.size() == 12);  // p * k / 2
    std::vector<int> degree(12, 0);
    for (const auto& [i, j] : edges.pairs()) {
        ++degree[i];
        ++degree[j];
        CHECK((j == (i + 1) % 12 || i == (j + 1) % 12 || (i == 0 && j == 11)));
    }
    for (int d : degree) CHECK(d == 2);
}

TEST_CASE("generated precision is PD with the promised edge count") {
    GraphSpec spec;
    spec.p = 30;
    spec.neighbors = 4;
    spec.rewire_prob = 0.2;
    for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        auto [theta, edges] = generate_precision(spec, seed);
        CHECK(edges.size() == 60);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(theta);
        CHECK(eig.eigenvalues().minCoeff() > 0.0);
        for (const auto& [i, j] : edges.pairs())
            CHECK(std::fabs(theta(i, j)) >= spec.edge_weight_range.first - 1e-12);
    }
}

TEST_CASE("fixed seed reproduces the matrix bitwise") {
    GraphSpec spec;
    spec.p = 20;
    spec.neighbors = 2;
    spec.rewire_prob = 0.3;
    auto [a, ea] = generate_precision(spec, 77);
    auto [b, eb] = generate_precision(spec, 77);
    CHECK(a == b);
    CHECK(ea == eb);
    auto [c, ec] = generate_precision(spec, 78);
    CHECK(a != c);
}

TEST_CASE("full-rank spiked spec reduces to the plain generator") {
    SpikedSpec spec;
    spec.base.p = 10;
    spec.base.neighbors = 2;
    spec.base.rewire_prob = 0.1;
    spec.rank = 10;
    spec.q = 0.0;
    auto [sigma, truth] = generate_spiked(spec, 5);

    auto [theta0, edges0] = generate_precision(spec.base, 5);
    const Matrix expected = correlation_rescale(theta0.inverse());
    CHECK((sigma - expected).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(truth == edges0);
}

TEST_CASE("spiked construction exposes the eigenvalue profile") {
    SpikedSpec spec;
    spec.base.p = 60;
    spec.rank = 3;
    auto [sigma, truth] = generate_spiked(spec, 11);

    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    const Vector lam = eig.eigenvalues();
    const int p = 60;
    // Exactly r eigenvalues above floor + gap, floor from the tail median.
    const int tail = p - spec.rank;
    const double floor_ref = 0.5 * (lam(tail / 2 - 1) + lam(tail / 2));
    const double gap = 0.5 * (spec.eigen_gap_factor - 1.0) * floor_ref;
    int above = 0;
    for (int i = 0; i < p; ++i)
        if (lam(i) > floor_ref + gap) ++above;
    CHECK(above == 3);
    CHECK(lam(p - 3) / lam(p - 4) >= spec.eigen_gap_factor);
    CHECK(spiked_profile_ok(sigma, spec));
    CHECK(truth.size() > 0);

    // Ground truth is the exact support of the inverse.
    const Matrix theta = sigma.inverse();
    CHECK(support_of(theta, 1e-8) == truth);

    auto [sigma2, truth2] = generate_spiked(spec, 11);
    CHECK(sigma == sigma2);
}

TEST_CASE("gaussian marginals return the latent draw unchanged") {
    Rng rng(3);
    const Matrix corr = test::random_correlation(5, rng);
    const Matrix x = sample_copula(corr, 50, MarginalSpec::gaussian(), 9);
    const Matrix y = sample_copula(corr, 50, MarginalSpec::gaussian(), 9);
    CHECK(x == y);
    CHECK(x.rows() == 50);
    CHECK(x.cols() == 5);
}

TEST_CASE("gamma copula moments at independence") {
    const Matrix eye = Matrix::Identity(4, 4);
    const Matrix x = sample_copula(eye, 10000, MarginalSpec::gamma(5.0, 1.0), 31);
    // Gamma(5,1): mean 5, variance 5, fourth central moment 105.
    const double se_mean = std::sqrt(5.0 / 10000);
    const double se_var = std::sqrt((105.0 - 25.0) / 10000);
    for (int j = 0; j < 4; ++j) {
        const double mean = x.col(j).mean();
        const double var =
            (x.col(j).array() - mean).square().sum() / (x.rows() - 1);
        CHECK(std::fabs(mean - 5.0) <= 3 * se_mean);
        CHECK(std::fabs(var - 5.0) <= 3 * se_var);
    }
}

TEST_CASE("copula transforms preserve kendall tau bitwise") {
    Rng rng(41);
    const Matrix corr = test::random_correlation(4, rng);
    const Matrix z = sample_copula(corr, 300, MarginalSpec::gaussian(), 17);
    const Matrix x = sample_copula(corr, 300, MarginalSpec::gamma(5.0, 1.0), 17);
    const Matrix y = sample_copula(corr, 300, MarginalSpec::cauchy(0.0, 3.0), 17);
    CHECK(kendall_block(z) == kendall_block(x));
    CHECK(kendall_block(z) == kendall_block(y));
}

TEST_CASE("block assignment windows and overlaps") {
    const BlockDesign two = assign_blocks(100, 2, 60, BlockScheme::random_chain, 1, 50);
    REQUIRE(two.num_blocks() == 2);
    std::vector<bool> in_first(100, false);
    for (int i : two.block(0)) in_first[i] = true;
    int overlap = 0;
    for (int i : two.block(1))
        if (in_first[i]) ++overlap;
    CHECK(overlap == 20);
    CHECK(validate_design(two).pass);

    const BlockDesign six = assign_blocks(100, 6, 20, BlockScheme::random_chain, 2, 50);
    REQUIRE(six.num_blocks() == 6);
    std::vector<bool> seen(100, false);
    for (int k = 0; k < 6; ++k) {
        if (k > 0) {
            int ov = 0;
            for (int i : six.block(k))
                if (seen[i]) ++ov;
            CHECK(ov == 4);  // (120 - 100) / 5
        }
        for (int i : six.block(k)) seen[i] = true;
    }
    CHECK(validate_design(six).pass);

    const BlockDesign one = assign_blocks(7, 1, 7, BlockScheme::random_chain, 3, 10);
    CHECK(induced_pair_set(one).unobserved_offdiag_pairs() == 0);

    CHECK_THROWS_AS(assign_blocks(100, 2, 40, BlockScheme::random_chain, 1, 50),
                    ValidationError);
    CHECK_THROWS_AS(assign_blocks(7, 1, 5, BlockScheme::random_chain, 1, 10),
                    ValidationError);
}

TEST_CASE("scenario simulation is deterministic and well shaped") {
    ScenarioConfig config;
    config.p = 20;
    config.K = 2;
    config.o = 12;
    config.n = 60;
    config.graph.neighbors = 2;
    config.marginal = MarginalSpec::gamma(5.0, 1.0);

    const ScenarioData a = simulate_scenario(config, 123);
    const ScenarioData b = simulate_scenario(config, 123);
    CHECK(a.design.blocks() == b.design.blocks());
    REQUIRE(a.block_data.size() == 2);
    for (int k = 0; k < 2; ++k) {
        CHECK(a.block_data[k].rows() == 60);
        CHECK(a.block_data[k].cols() == 12);
        CHECK(a.block_data[k] == b.block_data[k]);
    }
    CHECK(a.truth == b.truth);
    CHECK(validate_design(a.design).pass);

    ScenarioConfig shared = config;
    shared.draw = DrawMode::shared_sample;
    const ScenarioData c = simulate_scenario(shared, 123);
    CHECK(c.block_data[0].rows() == 60);
}

}  // TEST_SUITE
