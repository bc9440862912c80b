#include <doctest.h>

#include <cmath>

#include "quilt/madgq/madgq.hpp"
#include "support/oracles.hpp"

using namespace quilt;

namespace {

// Chain 1-2-...-p precision with an optional extra (1,p) edge; the two
// length-(p-1) blocks leave exactly the (1,p) pair unobserved.
Matrix chain_theta(int p, double weight, double hidden_weight) {
    Matrix theta = Matrix::Zero(p, p);
    for (int i = 0; i + 1 < p; ++i) {
        theta(i, i + 1) = weight;
        theta(i + 1, i) = weight;
    }
    if (hidden_weight != 0.0) {
        theta(0, p - 1) = hidden_weight;
        theta(p - 1, 0) = hidden_weight;
    }
    for (int i = 0; i < p; ++i)
        theta(i, i) = theta.row(i).cwiseAbs().sum() + 0.4;
    return theta;
}

BlockDesign chain_design(int p) {
    std::vector<int> b1, b2;
    for (int i = 0; i < p - 1; ++i) b1.push_back(i);
    for (int i = 1; i < p; ++i) b2.push_back(i);
    return BlockDesign(p, {b1, b2}, {200, 200});
}

}  // namespace

TEST_SUITE("madgq") {

TEST_CASE("schur complement basics") {
    CHECK((schur_complement(Matrix::Identity(5, 5), {1, 3}) -
           Matrix::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() == 0.0);

    // Block diagonal: marginalizing the other block changes nothing.
    Matrix theta = Matrix::Zero(4, 4);
    theta.topLeftCorner(2, 2) << 2.0, 0.5, 0.5, 2.0;
    theta.bottomRightCorner(2, 2) << 1.5, -0.3, -0.3, 1.5;
    const Matrix s = schur_complement(theta, {0, 1});
    CHECK((s - theta.topLeftCorner(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);

    // Full block: the complement is the matrix itself.
    const Matrix whole = schur_complement(theta, {0, 1, 2, 3});
    CHECK((whole - theta).cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS_AS(schur_complement(theta, {}), ValidationError);
    CHECK_THROWS_AS(schur_complement(theta, {0, 0}), ValidationError);
}

TEST_CASE("schur complement inverts the marginal covariance") {
    Rng rng(7);
    for (int trial = 0; trial < 25; ++trial) {
        const int p = 3 + static_cast<int>(rng.below(12));
        const Matrix theta = test::random_pd(p, rng, 0.3, 4.0);
        const Matrix sigma = theta.inverse();
        std::vector<int> all(p);
        std::iota(all.begin(), all.end(), 0);
        rng.shuffle(all);
        const int nb = 1 + static_cast<int>(rng.below(p - 1));
        std::vector<int> block(all.begin(), all.begin() + nb);
        std::sort(block.begin(), block.end());

        Matrix sigma_vv(nb, nb);
        for (int a = 0; a < nb; ++a)
            for (int b = 0; b < nb; ++b) sigma_vv(a, b) = sigma(block[a], block[b]);
        const Matrix err = schur_complement(theta, block) - sigma_vv.inverse();
        CHECK(err.cwiseAbs().maxCoeff() <= 1e-8);
    }
}

TEST_CASE("edge thresholding is strict") {
    const BlockDesign design(3, {{0, 1, 2}}, {10});
    const PairMask mask = induced_pair_set(design);
    Matrix theta = Matrix::Identity(3, 3);
    theta(0, 1) = theta(1, 0) = 0.3;
    theta(1, 2) = theta(2, 1) = 0.2;

    CHECK(threshold_edges_O(theta, mask, 0.35).size() == 0);
    const EdgeSet one = threshold_edges_O(theta, mask, 0.25);
    CHECK(one.size() == 1);
    CHECK(one.contains(0, 1));
    // An entry exactly at the threshold is excluded.
    CHECK(threshold_edges_O(theta, mask, 0.2).size() == 1);
}

TEST_CASE("superset nodes require the window in every containing block") {
    const BlockDesign design(3, {{0, 1}, {1, 2}}, {10, 10});
    std::vector<Matrix> schur(2, Matrix::Identity(2, 2));
    CHECK(superset_nodes(schur, design, 0.01, 0.5).empty());

    // Node 2 (index 1) sits in both blocks; only block 1 shows a window hit.
    schur[0](0, 1) = schur[0](1, 0) = 0.1;
    const std::vector<int> w = superset_nodes(schur, design, 0.01, 0.5);
    CHECK(w == std::vector<int>{0});  // node 1 is in block 1 only
}

TEST_CASE("fully observed run gives an empty hidden superset") {
    Rng rng(11);
    const int p = 8;
    std::vector<int> all(p);
    std::iota(all.begin(), all.end(), 0);
    const BlockDesign design(p, {all}, {500});
    const Matrix corr = test::random_correlation(p, rng);
    const MaskedCorrelation masked(corr, induced_pair_set(design));

    MadgqThresholds thresholds;
    thresholds.tau1 = 0.08;
    thresholds.tau2 = 0.01;
    const QuiltResult quilt =
        run_madgq(design, masked, PenaltyMatrix::uniform(p, 0.02), thresholds);
    CHECK(quilt.edges_Oc_superset.size() == 0);
    CHECK(quilt.edges_O ==
          threshold_edges_O(quilt.theta_hat.theta, masked.mask(), thresholds.tau1));
}

TEST_CASE("population diagnostics on an aligned block-diagonal model") {
    Matrix theta = Matrix::Zero(4, 4);
    theta.topLeftCorner(2, 2) << 1.0, 0.3, 0.3, 1.0;
    theta.bottomRightCorner(2, 2) << 1.2, -0.25, -0.25, 1.2;
    const BlockDesign design(4, {{0, 1}, {2, 3}, {1, 2}}, {50, 50, 50});

    const PopulationDiagnostics diag = population_diagnostics(theta, design);
    CHECK(diag.has_edges_O);
    CHECK(diag.delta <= 1e-8);
    CHECK(diag.nu == doctest::Approx(0.25));
    CHECK((diag.theta_tilde - theta).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(diag.assumption1);
}

TEST_CASE("population diagnostics with no edges") {
    const Matrix theta = Matrix::Identity(3, 3);
    const BlockDesign design(3, {{0, 1}, {1, 2}}, {50, 50});
    const PopulationDiagnostics diag = population_diagnostics(theta, design);
    CHECK_FALSE(diag.has_edges_O);
    CHECK(diag.delta <= 1e-9);
    CHECK_FALSE(diag.psi_finite);
}

TEST_CASE("hidden chain edge produces distortion") {
    const Matrix theta = chain_theta(4, 0.5, 0.25);
    const BlockDesign design = chain_design(4);
    const PopulationDiagnostics diag = population_diagnostics(theta, design);
    CHECK(diag.delta > 1e-4);
    CHECK(diag.nu == doctest::Approx(0.35).epsilon(0.3));
    CHECK(diag.assumption2);
    // At p=4 every sub-delta magnitude sits exactly at delta, so the strict
    // window is empty and the distortion rows have no strict witness.
    CHECK_FALSE(diag.psi_finite);
    CHECK_FALSE(diag.assumption3);
}

namespace {

// Chain of length p with one hidden edge, observed through two blocks that
// each omit the two nodes nearest one endpoint. The wider hidden set gives
// the Schur distortions genuine fill, so the window quantities are strict.
Matrix wide_theta(int p, double weight, int hi, int hj, double hidden_weight) {
    Matrix theta = Matrix::Zero(p, p);
    for (int i = 0; i + 1 < p; ++i) {
        theta(i, i + 1) = weight;
        theta(i + 1, i) = weight;
    }
    theta(hi, hj) = hidden_weight;
    theta(hj, hi) = hidden_weight;
    for (int i = 0; i < p; ++i)
        theta(i, i) = theta.row(i).cwiseAbs().sum() + 0.5;
    return theta;
}

BlockDesign wide_design(int p) {
    std::vector<int> b1, b2;
    for (int i = 0; i < p - 2; ++i) b1.push_back(i);
    for (int i = 2; i < p; ++i) b2.push_back(i);
    return BlockDesign(p, {b1, b2}, {200, 200});
}

}  // namespace

TEST_CASE("superset matches the window oracle on a population instance") {
    const int p = 8;
    const Matrix theta_raw = wide_theta(p, 0.5, 1, p - 1, 0.15);
    const BlockDesign design = wide_design(p);

    const Matrix sigma = theta_raw.inverse();
    Vector d = sigma.diagonal().cwiseSqrt().cwiseInverse();
    Matrix corr = d.asDiagonal() * sigma * d.asDiagonal();
    for (int i = 0; i < p; ++i) corr(i, i) = 1.0;
    corr = ((corr + corr.transpose()) * 0.5).eval();
    const Matrix theta_corr = corr.inverse();
    const PopulationDiagnostics diag = population_diagnostics(theta_corr, design);
    REQUIRE(diag.assumption1);
    REQUIRE(diag.assumption3);
    REQUIRE(diag.psi_finite);
    REQUIRE(diag.psi > 1e-3);

    // Oracle: Eq. (6) window (0, delta) on the independently solved
    // population Schur complements.
    const PairMask mask = induced_pair_set(design);
    Matrix masked = corr;
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (!mask.observed(i, j)) masked(i, j) = 0.0;
    const Matrix tilde_ipf = test::ipf_constrained_mle(masked, design, 1e-13);
    std::vector<Matrix> schur_ipf;
    for (int k = 0; k < design.num_blocks(); ++k)
        schur_ipf.push_back(schur_complement(tilde_ipf, design.block(k)));
    const std::vector<int> w_oracle =
        superset_nodes(schur_ipf, design, 1e-9, diag.delta);

    // Production path at thresholds inside the windows.
    const double tau1 = 0.5 * diag.nu;
    const double tau2 = 0.5 * std::min(diag.psi, tau1);
    const std::vector<int> w_prod =
        superset_nodes(diag.schur_tilde, design, tau2, tau1);
    CHECK(w_prod == w_oracle);
    CHECK(!w_prod.empty());
}

TEST_CASE("raising tau1 never adds edges") {
    Rng rng(13);
    const int p = 10;
    const Matrix theta = test::random_pd(p, rng, 0.5, 2.0);
    const BlockDesign design(p, {{0, 1, 2, 3, 4, 5, 6}, {4, 5, 6, 7, 8, 9}}, {50, 50});
    const PairMask mask = induced_pair_set(design);
    EdgeSet prev = threshold_edges_O(theta, mask, 0.05);
    for (double tau1 : {0.1, 0.2, 0.4, 0.8}) {
        const EdgeSet next = threshold_edges_O(theta, mask, tau1);
        for (const auto& [i, j] : next.pairs()) CHECK(prev.contains(i, j));
        prev = next;
    }
}

TEST_CASE("lemma-style norm inequalities hold on random instances") {
    Rng rng(29);
    for (int trial = 0; trial < 40; ++trial) {
        const int p = 3 + static_cast<int>(rng.below(10));
        const Matrix x = test::random_pd(p, rng, 0.2, 3.0);
        Matrix y = x;
        y += 0.1 * test::random_pd(p, rng, 0.1, 1.0);

        std::vector<int> block;
        for (int i = 0; i < p; ++i)
            if (rng.coin()) block.push_back(i);
        if (block.empty()) block.push_back(0);

        const Matrix sx = schur_complement(x, block);
        const Matrix sy = schur_complement(y, block);
        Eigen::SelfAdjointEigenSolver<Matrix> ex(x), ey(y), ed(x - y);
        const double lhs = (sx - sy).cwiseAbs().maxCoeff();
        const double rhs = (ex.eigenvalues().maxCoeff() / ex.eigenvalues().minCoeff()) *
                           (ey.eigenvalues().maxCoeff() / ey.eigenvalues().minCoeff()) *
                           ed.eigenvalues().cwiseAbs().maxCoeff();
        CHECK(lhs <= rhs * (1 + 1e-10));
    }

    for (int trial = 0; trial < 40; ++trial) {
        const int p = 3 + static_cast<int>(rng.below(10));
        const Matrix x = test::random_sparse_symmetric(p, 0.3, rng);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(x);
        const double spectral = eig.eigenvalues().cwiseAbs().maxCoeff();
        long nnz = 0;
        int degree = 0;
        for (int i = 0; i < p; ++i) {
            int row = 0;
            for (int j = 0; j < p; ++j)
                if (x(i, j) != 0.0) {
                    ++nnz;
                    ++row;
                }
            degree = std::max(degree, row);
        }
        const double bound = std::min(std::sqrt(static_cast<double>(nnz)),
                                      static_cast<double>(degree)) *
                             x.cwiseAbs().maxCoeff();
        CHECK(spectral <= bound * (1 + 1e-10));
    }
}

}  // TEST_SUITE
