#include "quilt/sim/simgen.hpp"

#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "quilt/glasso/glasso.hpp"

namespace quilt {

MarginalSpec MarginalSpec::gamma(double shape, double scale) {
    if (shape <= 0.0 || scale <= 0.0)
        throw ValidationError("MarginalSpec: gamma parameters must be positive");
    MarginalSpec m;
    m.family = Family::gamma;
    m.a = shape;
    m.b = scale;
    return m;
}

MarginalSpec MarginalSpec::cauchy(double location, double scale) {
    if (scale <= 0.0)
        throw ValidationError("MarginalSpec: cauchy scale must be positive");
    MarginalSpec m;
    m.family = Family::cauchy;
    m.a = location;
    m.b = scale;
    return m;
}

namespace {

std::vector<std::pair<int, int>> graph_edges(const GraphSpec& spec, Rng& rng) {
    const int p = spec.p;
    std::set<std::pair<int, int>> edges;
    auto canon = [](int i, int j) {
        return i < j ? std::pair<int, int>{i, j} : std::pair<int, int>{j, i};
    };
    switch (spec.structure) {
        case GraphStructure::small_world: {
            const int k = spec.neighbors;
            if (k < 2 || k % 2 != 0 || k >= p)
                throw ValidationError("GraphSpec: small-world neighbors must be even, "
                                      "positive, and below p");
            if (spec.rewire_prob < 0.0 || spec.rewire_prob > 1.0)
                throw ValidationError("GraphSpec: rewire probability outside [0,1]");
            for (int i = 0; i < p; ++i)
                for (int d = 1; d <= k / 2; ++d) edges.insert(canon(i, (i + d) % p));
            // Watts-Strogatz rewiring: each lattice edge may move its far end.
            for (int i = 0; i < p; ++i) {
                for (int d = 1; d <= k / 2; ++d) {
                    const int j = (i + d) % p;
                    if (rng.uniform01() >= spec.rewire_prob) continue;
                    if (static_cast<int>(edges.size()) >= p * (p - 1) / 2) continue;
                    const auto old_edge = canon(i, j);
                    if (edges.find(old_edge) == edges.end()) continue;
                    int t = i;
                    for (int tries = 0; tries < 16 * p; ++tries) {
                        t = static_cast<int>(rng.below(p));
                        if (t != i && edges.find(canon(i, t)) == edges.end()) break;
                        t = i;
                    }
                    if (t == i) continue;
                    edges.erase(old_edge);
                    edges.insert(canon(i, t));
                }
            }
            break;
        }
        case GraphStructure::chain:
            for (int i = 0; i + 1 < p; ++i) edges.insert({i, i + 1});
            break;
        case GraphStructure::block_diagonal: {
            if (spec.clique_size < 2)
                throw ValidationError("GraphSpec: clique size must be at least 2");
            for (int start = 0; start < p; start += spec.clique_size) {
                const int end = std::min(start + spec.clique_size, p);
                for (int i = start; i < end; ++i)
                    for (int j = i + 1; j < end; ++j) edges.insert({i, j});
            }
            break;
        }
    }
    return {edges.begin(), edges.end()};
}

}  // namespace

std::pair<Matrix, EdgeSet> generate_precision(const GraphSpec& spec, std::uint64_t seed) {
    if (spec.p < 2) throw ValidationError("GraphSpec: p must be at least 2");
    const auto [lo, hi] = spec.edge_weight_range;
    if (!(lo > 0.0) || hi < lo)
        throw ValidationError("GraphSpec: edge weight range must satisfy 0 < lo <= hi");
    if (spec.diagonal_boost <= 0.0)
        throw ValidationError("GraphSpec: diagonal boost must be positive");

    Rng rng(seed);
    const std::vector<std::pair<int, int>> edges = graph_edges(spec, rng);
    Matrix theta = Matrix::Zero(spec.p, spec.p);
    for (const auto& [i, j] : edges) {
        const double w = rng.uniform(lo, hi) * (rng.coin() ? 1.0 : -1.0);
        theta(i, j) = w;
        theta(j, i) = w;
    }
    for (int i = 0; i < spec.p; ++i)
        theta(i, i) = theta.row(i).cwiseAbs().sum() + spec.diagonal_boost;
    return {std::move(theta), EdgeSet(spec.p, edges)};
}

Matrix correlation_rescale(const Matrix& sigma) {
    const int p = static_cast<int>(sigma.rows());
    Vector d = sigma.diagonal();
    if ((d.array() <= 0.0).any())
        throw NumericalError("correlation_rescale: non-positive diagonal");
    Vector inv_sqrt = d.cwiseSqrt().cwiseInverse();
    Matrix out = inv_sqrt.asDiagonal() * sigma * inv_sqrt.asDiagonal();
    for (int i = 0; i < p; ++i) out(i, i) = 1.0;
    out = ((out + out.transpose()) * 0.5).eval();
    for (int i = 0; i < p; ++i) out(i, i) = 1.0;
    return out;
}

namespace {

Matrix inverse_pd_or_throw(const Matrix& a, const char* who) {
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(who) + ": matrix not positive definite");
    Matrix inv = llt.solve(Matrix::Identity(a.rows(), a.cols()));
    return ((inv + inv.transpose()) * 0.5).eval();
}

double best_recovery_f1(const Matrix& sigma, const EdgeSet& truth) {
    SolverOptions options;
    options.tolerance = 1e-7;
    options.kkt_target = 1e-5;
    double best = 0.0;
    Matrix warm;
    for (double lam : {0.1, 5e-2, 3e-2, 2e-2, 1e-2, 5e-3, 2e-3}) {
        if (warm.size() > 0) options.theta_init = &warm;
        const GlassoResult res = solve(
            sigma, PenaltyMatrix::uniform(static_cast<int>(sigma.rows()), lam), options);
        warm = res.est.theta;
        long tp = 0, fp = 0;
        for (const auto& [i, j] : res.est.support.pairs())
            truth.contains(i, j) ? ++tp : ++fp;
        const long fn = static_cast<long>(truth.size()) - tp;
        const long denom = 2 * tp + fp + fn;
        if (denom > 0) best = std::max(best, 2.0 * tp / static_cast<double>(denom));
    }
    return best;
}

}  // namespace

bool spiked_profile_ok(const Matrix& sigma, const SpikedSpec& spec) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    const Vector& lam = eig.eigenvalues();  // ascending
    const int p = static_cast<int>(lam.size());
    if (lam(0) <= 0.0) return false;
    if (spec.rank >= p) return true;
    const int tail = p - spec.rank;
    const double floor_ref =
        spec.q > 0.0 ? spec.q
                     : (tail % 2 == 1 ? lam(tail / 2)
                                      : 0.5 * (lam(tail / 2 - 1) + lam(tail / 2)));
    const double gap = spec.gap > 0.0
                           ? spec.gap
                           : 0.5 * (spec.eigen_gap_factor - 1.0) * floor_ref;
    int above = 0;
    for (int i = 0; i < p; ++i)
        if (lam(i) > floor_ref + gap) ++above;
    if (above != spec.rank) return false;
    return lam(p - spec.rank) >= spec.eigen_gap_factor * lam(p - spec.rank - 1);
}

std::pair<Matrix, EdgeSet> generate_spiked(const SpikedSpec& spec, std::uint64_t seed) {
    if (spec.rank < 1) throw ValidationError("SpikedSpec: rank must be positive");
    if (spec.q < 0.0) throw ValidationError("SpikedSpec: noise floor must be nonnegative");
    GraphSpec base = spec.base;
    const int p = base.p;
    if (spec.rank > p) throw ValidationError("SpikedSpec: rank exceeds dimension");

    if (spec.rank == p) {
        auto [theta0, support0] = generate_precision(base, seed);
        Matrix sigma =
            correlation_rescale(inverse_pd_or_throw(theta0, "generate_spiked"));
        return {std::move(sigma), std::move(support0)};
    }

    const int r = spec.rank;
    int m = spec.cluster_size;
    if (m == 0) {
        // A correlation spike delocalized over m variables cannot exceed m,
        // so the carriers must grow with the required dominance factor.
        m = std::min(static_cast<int>(std::ceil(2.0 * spec.eigen_gap_factor)), p / r);
    }
    if (m < 2 || r * m > p)
        throw ValidationError("SpikedSpec: cluster size infeasible for p and rank");

    for (int attempt = 0; attempt < spec.max_retries; ++attempt) {
        const std::uint64_t attempt_seed =
            attempt == 0 ? seed : derive_seed(seed, static_cast<std::uint64_t>(attempt));
        auto [theta0, support0] = generate_precision(base, attempt_seed);
        Rng rng(derive_seed(attempt_seed, 0x53494b45ULL));

        // Disjoint spike carriers on a random node arrangement.
        std::vector<int> arrangement(p);
        std::iota(arrangement.begin(), arrangement.end(), 0);
        rng.shuffle(arrangement);
        std::vector<std::vector<int>> clusters(r);
        for (int c = 0; c < r; ++c)
            clusters[c].assign(arrangement.begin() + c * m,
                               arrangement.begin() + (c + 1) * m);

        for (int c = 0; c < r; ++c) {
            const double coupling = -rng.uniform(0.4, 0.5);
            for (int a = 0; a < m; ++a)
                for (int b = a + 1; b < m; ++b) {
                    theta0(clusters[c][a], clusters[c][b]) += coupling;
                    theta0(clusters[c][b], clusters[c][a]) += coupling;
                }
        }
        for (int i = 0; i < p; ++i) {
            double rowsum = 0.0;
            for (int j = 0; j < p; ++j)
                if (j != i) rowsum += std::fabs(theta0(i, j));
            theta0(i, i) = rowsum + base.diagonal_boost;
        }

        Matrix carriers(p, r);
        carriers.setZero();
        for (int c = 0; c < r; ++c)
            for (int idx : clusters[c]) carriers(idx, c) = 1.0 / std::sqrt(double(m));

        // Pin every cluster mode at a common eigenvalue eps (Newton steps on
        // the rank-one pull weights), shrinking eps until the spike ratio
        // clears the configured factor. Uneven pulls would let one spike eat
        // the trace budget after rescaling, so balance matters.
        auto build_theta = [&](const Vector& gamma, Matrix& theta_out) {
            theta_out = theta0;
            for (int c = 0; c < r; ++c)
                theta_out.noalias() -=
                    gamma(c) * carriers.col(c) * carriers.col(c).transpose();
        };
        // Place one eigenvalue of theta - gamma u u^T exactly at the target
        // via the secular equation: gamma = 1 / sum_k w_k^2 / (lambda_k - t).
        auto secular_pull = [&](const Matrix& theta, const Vector& u, double target) {
            Eigen::SelfAdjointEigenSolver<Matrix> eig(theta);
            const Vector w = eig.eigenvectors().transpose() * u;
            double s = 0.0;
            for (int k = 0; k < p; ++k) {
                double denom = eig.eigenvalues()(k) - target;
                if (std::fabs(denom) < 1e-12) denom = std::copysign(1e-12, denom);
                s += w(k) * w(k) / denom;
            }
            return s > 0.0 ? 1.0 / s : -1.0;
        };
        // Pin the cluster modes sequentially at slightly staggered targets,
        // descending so every new target sits below the modes already
        // pinned; the secular root is then always the new bottom eigenvalue.
        auto pin_modes = [&](double eps, Matrix& theta_out) {
            theta_out = theta0;
            for (int c = 0; c < r; ++c) {
                const double target = eps * (1.0 + 0.06 * (r - 1 - c));
                const double gamma = secular_pull(theta_out, carriers.col(c), target);
                if (gamma <= 0.0) return false;
                theta_out.noalias() -=
                    gamma * carriers.col(c) * carriers.col(c).transpose();
            }
            Eigen::SelfAdjointEigenSolver<Matrix> eig(theta_out);
            return eig.eigenvalues().minCoeff() >= 0.7 * eps;
        };

        // One coarse pin estimates the smallest non-spike mode; the target
        // eps follows from the requested dominance, with a short ladder
        // around it since the unit-diagonal rescale deflates deep spikes.
        Matrix sigma;
        bool ok = false;
        {
            Matrix theta_coarse;
            if (!pin_modes(std::max(0.1, 2.0 * spec.lmin_floor), theta_coarse)) {
                log::debug("generate_spiked: coarse pin failed, retrying");
                continue;
            }
            Eigen::SelfAdjointEigenSolver<Matrix> eig(theta_coarse);
            const double bulk_min = eig.eigenvalues()(r);  // smallest non-pinned
            for (double scale : {1.1, 0.8, 1.5, 0.6, 0.45, 2.0}) {
                const double eps = bulk_min / (scale * spec.eigen_gap_factor);
                if (eps < spec.lmin_floor) continue;
                Matrix theta;
                if (!pin_modes(eps, theta)) continue;
                sigma =
                    correlation_rescale(inverse_pd_or_throw(theta, "generate_spiked"));
                if (log::level() >= log::Level::debug) {
                    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
                    const Vector& l = es.eigenvalues();
                    log::debug("generate_spiked: eps " + std::to_string(eps) +
                               " spike_min " + std::to_string(l(p - r)) +
                               " tail_max " + std::to_string(l(p - r - 1)) +
                               " ratio " + std::to_string(l(p - r) / l(p - r - 1)));
                }
                if (spiked_profile_ok(sigma, spec)) {
                    ok = true;
                    break;
                }
            }
        }
        if (!ok) {
            log::debug("generate_spiked: eigenvalue profile unreachable, retrying");
            continue;
        }

        const Matrix theta_final = inverse_pd_or_throw(sigma, "generate_spiked");
        const EdgeSet truth = support_of(theta_final, 1e-8);
        if (truth.size() == 0) {
            log::debug("generate_spiked: empty support, retrying");
            continue;
        }
        double f1 = 0.0;
        try {
            f1 = best_recovery_f1(sigma, truth);
        } catch (const NumericalError&) {
        }
        if (f1 < spec.min_recovery_f1) {
            log::debug("generate_spiked: recovery F1 " + std::to_string(f1) +
                       " below target, retrying");
            continue;
        }
        return {sigma, truth};
    }
    throw NumericalError("generate_spiked: construction failed after retry budget");
}

Matrix sample_copula(const Matrix& sigma, int n,
                     const std::vector<MarginalSpec>& marginals, std::uint64_t seed) {
    const int p = static_cast<int>(sigma.rows());
    if (n < 1) throw ValidationError("sample_copula: n must be positive");
    if (sigma.cols() != p) throw ValidationError("sample_copula: sigma must be square");
    for (int i = 0; i < p; ++i)
        if (std::fabs(sigma(i, i) - 1.0) > 1e-8)
            throw ValidationError("sample_copula: sigma must have unit diagonal");
    if (marginals.size() != 1 && static_cast<int>(marginals.size()) != p)
        throw ValidationError("sample_copula: one marginal, or one per column");

    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success)
        throw NumericalError("sample_copula: sigma not positive definite");
    const Matrix l = llt.matrixL();

    Rng rng(seed);
    Matrix z(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) z(i, j) = rng.normal();
    z = (z * l.transpose()).eval();

    for (int j = 0; j < p; ++j) {
        const MarginalSpec& m = marginals.size() == 1 ? marginals[0] : marginals[j];
        switch (m.family) {
            case MarginalSpec::Family::gaussian:
                break;  // identity transform, latent values pass through
            case MarginalSpec::Family::gamma: {
                const boost::math::gamma_distribution<double> dist(m.a, m.b);
                for (int i = 0; i < n; ++i) {
                    double u = 0.5 * std::erfc(-z(i, j) / M_SQRT2);
                    u = std::clamp(u, 1e-16, 1.0 - 1e-16);
                    z(i, j) = boost::math::quantile(dist, u);
                }
                break;
            }
            case MarginalSpec::Family::cauchy:
                for (int i = 0; i < n; ++i) {
                    double u = 0.5 * std::erfc(-z(i, j) / M_SQRT2);
                    u = std::clamp(u, 1e-16, 1.0 - 1e-16);
                    z(i, j) = m.a + m.b * std::tan(M_PI * (u - 0.5));
                }
                break;
        }
    }
    return z;
}

Matrix sample_copula(const Matrix& sigma, int n, const MarginalSpec& marginal,
                     std::uint64_t seed) {
    return sample_copula(sigma, n, std::vector<MarginalSpec>{marginal}, seed);
}

BlockDesign assign_blocks(int p, int K, int o, BlockScheme scheme, std::uint64_t seed,
                          int n_per_block) {
    if (scheme != BlockScheme::random_chain)
        throw ValidationError("assign_blocks: unknown scheme");
    if (p < 1 || K < 1 || o < 1 || o > p)
        throw ValidationError("assign_blocks: need 1 <= o <= p and K >= 1");
    if (static_cast<long>(K) * o < p)
        throw ValidationError("assign_blocks: K*o < p, blocks cannot cover all variables");
    if (K == 1 && o != p)
        throw ValidationError("assign_blocks: a single block must cover all variables");
    if (n_per_block < 1)
        throw ValidationError("assign_blocks: sample size must be positive");

    std::vector<int> perm(p);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(perm);

    const long excess = static_cast<long>(K) * o - p;
    std::vector<std::vector<int>> blocks;
    long start = 0;
    for (int k = 0; k < K; ++k) {
        std::vector<int> block(perm.begin() + start, perm.begin() + start + o);
        blocks.push_back(std::move(block));
        if (k + 1 < K) {
            long overlap = excess / (K - 1);
            if (k < excess % (K - 1)) ++overlap;  // remainder to earliest overlaps
            start += o - overlap;
        }
    }
    return BlockDesign(p, std::move(blocks), std::vector<int>(K, n_per_block));
}

ScenarioData simulate_scenario(const ScenarioConfig& config, std::uint64_t seed) {
    Matrix sigma_corr;
    EdgeSet truth(config.p);
    if (config.spiked) {
        SpikedSpec spec = config.spiked_spec;
        spec.base.p = config.p;
        auto [sigma, edges] = generate_spiked(spec, derive_seed(seed, 1));
        sigma_corr = std::move(sigma);
        truth = std::move(edges);
    } else {
        GraphSpec spec = config.graph;
        spec.p = config.p;
        auto [theta, edges] = generate_precision(spec, derive_seed(seed, 1));
        sigma_corr =
            correlation_rescale(inverse_pd_or_throw(theta, "simulate_scenario"));
        truth = std::move(edges);
    }
    Matrix theta_true = inverse_pd_or_throw(sigma_corr, "simulate_scenario");

    BlockDesign design = assign_blocks(config.p, config.K, config.o,
                                       BlockScheme::random_chain,
                                       derive_seed(seed, 2), config.n);

    std::vector<Matrix> block_data;
    block_data.reserve(design.num_blocks());
    if (config.draw == DrawMode::independent_blocks) {
        for (int k = 0; k < design.num_blocks(); ++k) {
            const auto& v = design.block(k);
            const int pk = static_cast<int>(v.size());
            Matrix sub(pk, pk);
            for (int a = 0; a < pk; ++a)
                for (int b = 0; b < pk; ++b) sub(a, b) = sigma_corr(v[a], v[b]);
            block_data.push_back(sample_copula(sub, design.sample_size(k),
                                               config.marginal,
                                               derive_seed(seed, 3, k)));
        }
    } else {
        const Matrix full =
            sample_copula(sigma_corr, config.n, config.marginal, derive_seed(seed, 3));
        for (int k = 0; k < design.num_blocks(); ++k) {
            const auto& v = design.block(k);
            Matrix sub(full.rows(), v.size());
            for (std::size_t a = 0; a < v.size(); ++a) sub.col(a) = full.col(v[a]);
            block_data.push_back(std::move(sub));
        }
    }

    return ScenarioData{std::move(design), std::move(block_data), std::move(truth),
                        std::move(sigma_corr), std::move(theta_true)};
}

}  // namespace quilt
