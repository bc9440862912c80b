#pragma once

#include <string>
#include <utility>
#include <vector>

#include "quilt/core/types.hpp"
#include "quilt/rank/rank_corr.hpp"
#include "quilt/sim/rng.hpp"

namespace quilt {

enum class GraphStructure { small_world, chain, block_diagonal };

struct GraphSpec {
    int p = 100;
    GraphStructure structure = GraphStructure::small_world;
    int neighbors = 2;          // small_world ring degree (even)
    double rewire_prob = 0.1;   // small_world
    int clique_size = 5;        // block_diagonal
    std::pair<double, double> edge_weight_range{0.2, 0.5};
    double diagonal_boost = 0.1;
};

/// Precision matrix with the requested support: edge weights drawn uniformly
/// from +-[lo, hi], diagonal set to the absolute row sum plus the boost
/// (diagonal dominance). Returns the matrix and its exact edge set.
std::pair<Matrix, EdgeSet> generate_precision(const GraphSpec& spec,
                                              std::uint64_t seed);

struct MarginalSpec {
    enum class Family { gaussian, gamma, cauchy };
    Family family = Family::gaussian;
    // gamma: a = shape, b = scale; cauchy: a = location, b = scale.
    double a = 0.0;
    double b = 1.0;

    static MarginalSpec gaussian() { return {}; }
    static MarginalSpec gamma(double shape, double scale);
    static MarginalSpec cauchy(double location, double scale);
};

struct SpikedSpec {
    int rank = 5;
    double q = 0.0;                      // noise floor for the profile check; 0 = derive
    double spike_to_floor_ratio = 20.0;  // spike magnitude target over the floor
    double eigen_gap_factor = 10.0;      // required r-th / (r+1)-th ratio
    double gap = 0.0;                    // profile check margin; 0 = auto
    int cluster_size = 0;                // spike carrier size; 0 = auto
    double lmin_floor = 0.01;            // smallest precision eigenvalue allowed
    double min_recovery_f1 = 0.7;        // verification: glasso F1 on the exact output
    int max_retries = 10;
    GraphSpec base{100,
                   GraphStructure::small_world,
                   2,
                   0.1,
                   5,
                   {0.08, 0.15},
                   1.0};  // weak, stiff overlay so the spike carriers dominate
};

/// Spiked correlation whose inverse support is exact: a weak small-world
/// overlay plus `rank` disjoint strongly coupled clusters, each contributing
/// one delocalized near-null precision mode (one spike of the correlation).
/// Cluster modes are pulled down spectrally until the r-th/(r+1)-th
/// eigenvalue ratio clears the configured factor. The ground truth is the
/// support of the inverse above 1e-8 (overlay plus cluster pairs); the
/// construction verifies the eigenvalue profile and that the graphical lasso
/// on the exact output reaches the configured F1 against that truth,
/// retrying with a fresh stream otherwise. rank == p skips the surgery and
/// reduces to the plain generator.
std::pair<Matrix, EdgeSet> generate_spiked(const SpikedSpec& spec, std::uint64_t seed);

/// Profile check used by the constructor: exactly r eigenvalues above
/// floor + gap (floor from spec.q or the tail median) and an r-th/(r+1)-th
/// ratio of at least the configured factor.
bool spiked_profile_ok(const Matrix& sigma, const SpikedSpec& spec);

/// Rescale a PD covariance to unit diagonal.
Matrix correlation_rescale(const Matrix& sigma);

/// Draw n nonparanormal rows: latent N(0, sigma) transformed per column by
/// the marginal quantile at the Gaussian CDF value. Gaussian marginals leave
/// the latent draw untouched.
Matrix sample_copula(const Matrix& sigma, int n,
                     const std::vector<MarginalSpec>& marginals, std::uint64_t seed);
Matrix sample_copula(const Matrix& sigma, int n, const MarginalSpec& marginal,
                     std::uint64_t seed);

enum class BlockScheme { random_chain };

/// Randomly permute the variables and lay K windows of size o with equal
/// overlap floor((K*o - p)/(K-1)) between consecutive windows, the remainder
/// going to the earliest overlaps.
BlockDesign assign_blocks(int p, int K, int o, BlockScheme scheme, std::uint64_t seed,
                          int n_per_block);

enum class DrawMode { independent_blocks, shared_sample };

struct ScenarioConfig {
    std::string id = "scenario";
    int p = 100;
    int K = 2;
    int o = 60;
    int n = 2000;
    bool spiked = false;
    GraphSpec graph;
    SpikedSpec spiked_spec;
    MarginalSpec marginal;
    RankStatistic statistic = RankStatistic::rho;
    DrawMode draw = DrawMode::independent_blocks;
};

struct ScenarioData {
    BlockDesign design;
    std::vector<Matrix> block_data;
    EdgeSet truth;
    Matrix sigma_corr;
    Matrix theta_true;
};

/// Generate the graph, the block assignment, and per-block copula data
/// (independent per-block draws by default).
ScenarioData simulate_scenario(const ScenarioConfig& config, std::uint64_t seed);

}  // namespace quilt
