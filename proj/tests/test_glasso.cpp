#include <doctest.h>

#include <cmath>

#include "quilt/glasso/glasso.hpp"
#include "support/oracles.hpp"

using namespace quilt;

TEST_SUITE("glasso") {

TEST_CASE("unpenalized solve inverts the input") {
    Rng rng(5);
    for (int trial = 0; trial < 12; ++trial) {
        const int p = 2 + static_cast<int>(rng.below(20));
        const Matrix sigma = test::random_pd(p, rng, 0.2, 5.0);
        const GlassoResult res =
            solve(sigma, PenaltyMatrix::uniform(p, 0.0), SolverOptions{});
        const double err =
            (res.est.theta * sigma - Matrix::Identity(p, p)).cwiseAbs().maxCoeff();
        CHECK(err <= 1e-6);
    }
}

TEST_CASE("penalty dominating the covariance gives the identity") {
    Matrix sigma(2, 2);
    sigma << 1.0, 0.5, 0.5, 1.0;
    const GlassoResult res =
        solve(sigma, PenaltyMatrix::uniform(2, 0.5), SolverOptions{});
    CHECK(res.est.theta(0, 1) == 0.0);
    CHECK(res.est.theta(0, 0) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(res.est.theta(1, 1) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(res.est.support.size() == 0);
}

TEST_CASE("zero constraint pins entries exactly") {
    // Chain 1-2-3; constrain the (1,3) entry of the estimate to zero.
    Matrix theta(3, 3);
    theta << 1.5, 0.4, 0.0, 0.4, 1.8, -0.5, 0.0, -0.5, 1.3;
    const Matrix sigma = theta.inverse();

    SolverOptions options;
    options.zero_constraint = {{{0, 2}}};
    const GlassoResult res = solve(sigma, PenaltyMatrix::uniform(3, 0.01), options);
    CHECK(res.est.theta(0, 2) == 0.0);
    CHECK(res.est.theta(2, 0) == 0.0);
    CHECK(kkt_residual(sigma, PenaltyMatrix::uniform(3, 0.01), res.est.theta,
                       options.zero_constraint) <= 1e-5);
    CHECK(res.kkt <= 1e-5);
}

TEST_CASE("kkt residual behaves as an optimality score") {
    Rng rng(17);
    const int p = 6;
    const Matrix sigma = test::random_pd(p, rng, 0.5, 2.0);
    const PenaltyMatrix none = PenaltyMatrix::uniform(p, 0.0);

    const Matrix exact = sigma.inverse();
    CHECK(kkt_residual(sigma, none, exact) <= 1e-8);

    // With a nonzero uniform penalty, the unpenalized inverse misses the
    // sign term by exactly lambda on its support.
    const PenaltyMatrix lam = PenaltyMatrix::uniform(p, 0.05);
    CHECK(kkt_residual(sigma, lam, exact) == doctest::Approx(0.05).epsilon(1e-9));

    Matrix perturbed = exact;
    perturbed(0, 1) += 0.1;
    perturbed(1, 0) += 0.1;
    CHECK(kkt_residual(sigma, none, perturbed) >
          kkt_residual(sigma, none, exact));
}

TEST_CASE("objective is monotone across sweeps") {
    Rng rng(23);
    for (int trial = 0; trial < 6; ++trial) {
        const int p = 4 + static_cast<int>(rng.below(12));
        const Matrix sigma = test::random_correlation(p, rng);
        SolverOptions options;
        options.track_objective = true;
        if (trial % 2 == 1) {
            options.zero_constraint = std::vector<std::pair<int, int>>{};
            for (int i = 0; i + 3 < p; i += 3)
                options.zero_constraint->push_back({i, i + 3});
        }
        const GlassoResult res =
            solve(sigma, PenaltyMatrix::uniform(p, 0.05), options);
        for (std::size_t t = 1; t < res.objective.size(); ++t)
            CHECK(res.objective[t] >= res.objective[t - 1] - 1e-9);
    }
}

TEST_CASE("solution is invariant under permutation") {
    Rng rng(31);
    const int p = 7;
    const Matrix sigma = test::random_correlation(p, rng);
    const PenaltyMatrix lam = PenaltyMatrix::uniform(p, 0.08);
    SolverOptions options;
    options.zero_constraint = {{{0, 3}, {2, 5}}};
    const GlassoResult base = solve(sigma, lam, options);

    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    Matrix sigma_p(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j) sigma_p(i, j) = sigma(perm[i], perm[j]);
    std::vector<int> inverse_perm(p);
    for (int i = 0; i < p; ++i) inverse_perm[perm[i]] = i;
    SolverOptions options_p;
    options_p.zero_constraint = std::vector<std::pair<int, int>>{
        {inverse_perm[0], inverse_perm[3]}, {inverse_perm[2], inverse_perm[5]}};
    const GlassoResult permuted = solve(sigma_p, lam, options_p);

    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            CHECK(permuted.est.theta(i, j) ==
                  doctest::Approx(base.est.theta(perm[i], perm[j])).epsilon(1e-6));
}

TEST_CASE("input validation and failure paths") {
    Matrix bad_diag = Matrix::Identity(2, 2);
    bad_diag(1, 1) = 0.0;
    CHECK_THROWS_AS(solve(bad_diag, PenaltyMatrix::uniform(2, 0.1), SolverOptions{}),
                    ValidationError);

    SolverOptions bad_tol;
    bad_tol.tolerance = 0.0;
    CHECK_THROWS_AS(solve(Matrix::Identity(2, 2), PenaltyMatrix::uniform(2, 0.1),
                          bad_tol),
                    ValidationError);

    SolverOptions diag_constraint;
    diag_constraint.zero_constraint = {{{1, 1}}};
    CHECK_THROWS_AS(solve(Matrix::Identity(2, 2), PenaltyMatrix::uniform(2, 0.1),
                          diag_constraint),
                    ValidationError);

    Rng rng(41);
    const Matrix sigma = test::random_correlation(12, rng);
    SolverOptions starved;
    starved.max_iterations = 0;
    CHECK_THROWS_AS(solve(sigma, PenaltyMatrix::uniform(12, 0.01), starved),
                    NumericalError);
}

TEST_CASE("per-pair penalty rule") {
    const BlockDesign design(4, {{0, 1, 2}, {1, 2, 3}}, {100, 400});
    const PenaltyMatrix lam = PenaltyMatrix::per_pair(design, 1.0);
    const double logp = std::log(4.0);
    CHECK(lam.lambda(0, 1) == doctest::Approx(std::sqrt(logp / 100)));
    CHECK(lam.lambda(1, 2) == doctest::Approx(std::sqrt(logp / 500)));
    CHECK(lam.lambda(2, 3) == doctest::Approx(std::sqrt(logp / 400)));
    // Never co-observed: the largest observed penalty.
    CHECK(lam.lambda(0, 3) == doctest::Approx(std::sqrt(logp / 100)));
    CHECK(lam.lambda(0, 0) == 0.0);
}

TEST_CASE("population solution matches iterative proportional fitting") {
    // Chain 1-2-3-4 with the (1,4) pair never observed.
    Matrix theta(4, 4);
    theta << 1.6, 0.45, 0.0, 0.0,
             0.45, 1.7, -0.4, 0.0,
             0.0, -0.4, 1.5, 0.35,
             0.0, 0.0, 0.35, 1.4;
    const Matrix sigma = theta.inverse();
    const BlockDesign design(4, {{0, 1, 2}, {1, 2, 3}}, {100, 100});
    const PairMask mask = induced_pair_set(design);

    Matrix masked_sigma = sigma;
    masked_sigma(0, 3) = masked_sigma(3, 0) = 0.0;
    Vector d = masked_sigma.diagonal().cwiseSqrt().cwiseInverse();
    Matrix corr = d.asDiagonal() * masked_sigma * d.asDiagonal();
    for (int i = 0; i < 4; ++i) corr(i, i) = 1.0;
    corr = ((corr + corr.transpose()) * 0.5).eval();
    corr(0, 3) = corr(3, 0) = 0.0;

    const MaskedCorrelation masked(corr, mask);
    const PrecisionEstimate population = population_madgq(masked, 1e-11);
    const Matrix via_ipf = test::ipf_constrained_mle(corr, design, 1e-12);
    CHECK((population.theta - via_ipf).cwiseAbs().maxCoeff() <= 1e-7);
    CHECK(population.theta(0, 3) == 0.0);

    CHECK(std::fabs(population.theta(0, 1)) > 0.1);
}

TEST_CASE("population solution on a fully observed design is the inverse") {
    Rng rng(53);
    const int p = 6;
    const Matrix corr = test::random_correlation(p, rng);
    std::vector<int> all(p);
    std::iota(all.begin(), all.end(), 0);
    const BlockDesign design(p, {all}, {50});
    const MaskedCorrelation masked(corr, induced_pair_set(design));
    const PrecisionEstimate population = population_madgq(masked, 1e-11);
    CHECK((population.theta - corr.inverse()).cwiseAbs().maxCoeff() <= 1e-7);
}

}  // TEST_SUITE
