#pragma once

#include <vector>

#include "quilt/glasso/glasso.hpp"
#include "quilt/rank/rank_corr.hpp"

namespace quilt {

/// Rank-r factor of the completed covariance: C C^T (+ q_hat I) is the
/// implied completion, q_hat the spike-floor estimate (median diagonal).
struct LowRankFactor {
    Matrix c;
    double q_hat = 0.0;
};

struct BsvdResult {
    Matrix completed;  // C C^T
    LowRankFactor factor;
};

/// Blockwise SVD completion: factor the first block's shifted submatrix,
/// then factor each later block and rotate it onto the already-placed rows
/// by orthogonal Procrustes over the overlap, keeping previously set rows.
/// Requires every block after the first to overlap the union of prior
/// blocks in at least r variables. Retained eigenvalues are clipped at zero
/// before the square root; clipping beyond `clip_warn_tol` logs a warning.
BsvdResult bsvd_complete(const Matrix& sigma_obs, const PairMask& mask,
                         const BlockDesign& design, int rank,
                         double clip_warn_tol = 1e-8);

BsvdResult bsvd_complete(const MaskedCorrelation& masked, const BlockDesign& design,
                         int rank, double clip_warn_tol = 1e-8);

/// How the completed matrix is assembled before the graphical lasso:
/// observed off-diagonal entries always come from the input; the completion
/// fills O^c only. reset_unit pins the diagonal at 1 (it is known exactly
/// for a correlation); add_spike uses the factor diagonal plus q_hat.
enum class DiagonalMode { reset_unit, add_spike };

Matrix assemble_completed(const MaskedCorrelation& masked, const BsvdResult& bsvd,
                          DiagonalMode mode = DiagonalMode::reset_unit);

struct LrgqOptions {
    SolverOptions solver;
    double psd_ridge = 1e-4;
    DegeneratePolicy degenerate_policy = DegeneratePolicy::error;
    DiagonalMode diagonal_mode = DiagonalMode::reset_unit;
};

struct LrgqResult {
    PrecisionEstimate est;
    EdgeSet edges;
    Matrix completed;  // glasso input after assembly
    LowRankFactor factor;
    int rank = 0;

    LrgqResult(int p) : edges(p) {}
};

/// Low-rank quilting pipeline: rank correlation, blockwise SVD completion,
/// unconstrained graphical lasso on the assembled matrix.
LrgqResult run_lrgq(const BlockDesign& design, const std::vector<Matrix>& block_data,
                    int rank, const PenaltyMatrix& penalty, RankStatistic statistic,
                    const LrgqOptions& options = {});

LrgqResult run_lrgq(const BlockDesign& design, const MaskedCorrelation& masked,
                    int rank, const PenaltyMatrix& penalty,
                    const LrgqOptions& options = {});

/// Baseline: unconstrained graphical lasso on the zero-filled matrix
/// (after the per-block PSD repair).
LrgqResult zero_impute_baseline(const MaskedCorrelation& masked,
                                const PenaltyMatrix& penalty,
                                const BlockDesign& design,
                                const LrgqOptions& options = {});

}  // namespace quilt
