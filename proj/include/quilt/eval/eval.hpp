#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "quilt/core/types.hpp"
#include "quilt/glasso/glasso.hpp"
#include "quilt/sim/simgen.hpp"

namespace quilt {

enum class Restriction { all, observed, unobserved };

struct RecoveryMetrics {
    long tp = 0;
    long fp = 0;
    long fn = 0;
    double tpr = 0.0;   // undefined (empty truth) reported via tpr_defined
    bool tpr_defined = false;
    double fdp = 0.0;   // fp / max(tp + fp, 1): zero discoveries give 0
    double f1 = 0.0;
};

/// Edge-recovery counts over unordered pairs, optionally restricted to the
/// observed or unobserved side of a mask.
RecoveryMetrics compare_edges(const EdgeSet& estimate, const EdgeSet& truth,
                              const PairMask* mask = nullptr,
                              Restriction restriction = Restriction::all);

struct OracleTuneResult {
    std::size_t best_index = 0;
    RecoveryMetrics metrics;
    EdgeSet edges;
    std::size_t n_failed = 0;

    OracleTuneResult(int p) : edges(p) {}
};

/// Exhaustive grid search for the best F1 against the truth. A runner may
/// return nullopt (failed point); ties break to the sparser estimate, then
/// the smaller grid index. Throws if every point fails.
OracleTuneResult tune_f1_oracle(
    std::size_t grid_size,
    const std::function<std::optional<EdgeSet>(std::size_t)>& runner,
    const EdgeSet& truth);

/// Extended BIC: -n(log det T - <S,T>) + |E| log n + 4 gamma |E| log p, with
/// |E| the unordered off-diagonal support size.
double ebic(const Matrix& sigma_input, const PrecisionEstimate& theta,
            double n_effective, double gamma = 0.5);

/// Rank selection for the blockwise SVD completion: Gaussian pseudo-
/// likelihood BIC on the observed off-diagonal residuals; infeasible ranks
/// (merge overlap below r) are skipped, ties go to the smaller rank.
int bic_rank(const MaskedCorrelation& masked, const BlockDesign& design,
             const std::vector<int>& rank_grid);

struct StabilityResult {
    std::size_t selected_index = 0;
    std::vector<double> instability;   // per grid value
    std::vector<double> monotonized;   // running max from the sparse end
    bool all_unstable = false;
};

/// Stability selection over a grid ordered from most to least regularized:
/// average edge instability 2 xi (1 - xi) across subsamples, monotonized
/// from the sparse end; picks the least regularization whose monotonized
/// instability stays within the threshold.
StabilityResult stability_select(
    std::size_t grid_size,
    const std::function<EdgeSet(std::size_t, const std::vector<Matrix>&)>& runner,
    const std::vector<Matrix>& block_data, double subsample_fraction,
    int n_subsamples, std::uint64_t seed, double instability_threshold = 0.05);

/// Bisection on tau1 so the reported edge count lands within the tolerance
/// of the target (the fairness-comparison tuning mode).
double match_edge_count_tau1(const Matrix& theta, const PairMask& mask, long target,
                             double rel_tol = 0.05);

enum class Method { madgq_npn, bsvd_npn, zero_impute };
std::string method_name(Method m);
std::optional<Method> method_from_name(const std::string& name);

struct TuningGrids {
    std::vector<double> lambda_grid;  // descending (most regularized first)
    int tau1_grid_size = 15;
    std::vector<int> rank_grid;       // empty: BIC over 1..8 (clipped to feasible)
};

struct SweepRow {
    std::string scenario;
    std::string method;
    int o = 0;
    int K = 0;
    int replicate = 0;
    bool failed = false;
    RecoveryMetrics all;
    RecoveryMetrics in_o;
    RecoveryMetrics in_oc;
};

struct SweepCell {
    std::string scenario;
    std::string method;
    double mean_tpr = 0.0, sd_tpr = 0.0;
    double mean_fdp = 0.0, sd_fdp = 0.0;
    double mean_f1 = 0.0, sd_f1 = 0.0;
    int n_used = 0;
    int n_failed = 0;
    bool sd_defined = true;  // false with fewer than 2 replicates
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<SweepCell> cells;
};

/// Per-replicate F1-oracle evaluation of one method on simulated data whose
/// rank correlation has already been computed.
SweepRow evaluate_method(Method method, const ScenarioData& data,
                         const MaskedCorrelation& masked, const TuningGrids& grids,
                         const std::string& scenario_id, int o, int K, int replicate);

/// Full benchmark: for each scenario and replicate (seeded from the root by
/// the documented splitting rule) simulate, run each method with F1-oracle
/// tuning, and aggregate mean/sd per cell. Per-replicate failures are
/// recorded; a cell with more than 20% failures fails the sweep.
SweepResult run_sweep(const std::vector<ScenarioConfig>& scenarios,
                      const std::vector<Method>& methods, int replicates,
                      std::uint64_t root_seed, const TuningGrids& grids,
                      int threads = 1);

/// Default lambda grid used by the benchmark harness (descending).
std::vector<double> default_lambda_grid();

}  // namespace quilt
