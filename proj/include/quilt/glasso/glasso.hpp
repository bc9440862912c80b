#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "quilt/core/types.hpp"

namespace quilt {

/// Symmetric nonnegative off-diagonal penalty weights; the diagonal is never
/// penalized (the objective's norm is off-diagonal only).
struct PenaltyMatrix {
    Matrix lambda;

    static PenaltyMatrix uniform(int p, double lam);
    /// Per-pair rule lambda_ij = c0 * sqrt(log p / n_ij) with n_ij the joint
    /// sample size of (i,j) across blocks. Pairs observed in no block get the
    /// largest penalty used on any observed pair.
    static PenaltyMatrix per_pair(const BlockDesign& design, double c0);

    void validate(int p) const;
};

struct SolverOptions {
    int max_iterations = 2000;
    // Max-norm change of the working covariance per sweep.
    double tolerance = 1e-6;
    // Index pairs (i != j) pinned to exactly zero, exempt from KKT.
    std::optional<std::vector<std::pair<int, int>>> zero_constraint;

    // Implementation knobs.
    double kkt_target = 1e-7;        // stationarity residual to reach after W settles
    double zero_snap = 1e-10;        // |theta| below this snaps to exact 0 for support
    int inner_max_iterations = 10000;
    bool track_objective = false;    // record the penalized log-likelihood per sweep
    const Matrix* theta_init = nullptr;  // warm start (must satisfy the constraint)
};

struct GlassoResult {
    PrecisionEstimate est;
    Matrix w;  // final working covariance, approximately theta^{-1}
    int sweeps = 0;
    double kkt = 0.0;
    std::vector<double> objective;  // per sweep, when track_objective
};

/// l1-penalized Gaussian log-likelihood maximization over precision matrices,
/// optionally with hard zeros on a pair set. Block coordinate descent over
/// columns; each column solves its lasso subproblem with constrained
/// coordinates excluded, so pinned entries are exact zeros.
GlassoResult solve(const Matrix& sigma, const PenaltyMatrix& penalty,
                   const SolverOptions& options);

/// Maximum stationarity violation of theta for the penalized problem,
/// computed from an exact inverse of theta (independent of the solver path).
/// Constrained pairs are exempt. Entries with |theta_ij| <= zero_tol are
/// treated as zeros.
double kkt_residual(const Matrix& sigma, const PenaltyMatrix& penalty,
                    const Matrix& theta,
                    const std::optional<std::vector<std::pair<int, int>>>&
                        zero_constraint = std::nullopt,
                    double zero_tol = 1e-12);

/// Penalized log-likelihood log det(theta) - <sigma, theta> - ||lambda o theta||_1,off
/// (off-diagonal sum over ordered pairs). Throws if theta is not PD.
double penalized_objective(const Matrix& sigma, const PenaltyMatrix& penalty,
                           const Matrix& theta);

/// Unpenalized maximum-determinant solution constrained to zeros on the
/// unobserved pair set: the population quantity used by the diagnostics.
PrecisionEstimate population_madgq(const MaskedCorrelation& sigma_o,
                                   double tolerance = 1e-10);

std::vector<std::pair<int, int>> zero_constraint_from_mask(const PairMask& mask);

}  // namespace quilt
