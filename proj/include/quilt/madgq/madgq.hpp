#pragma once

#include <vector>

#include "quilt/glasso/glasso.hpp"
#include "quilt/rank/rank_corr.hpp"

namespace quilt {

struct MadgqThresholds {
    double tau1 = 0.0;
    double tau2 = 0.0;
    double c = 0.05;  // scale of the default tau2 rule

    /// Default tau2 = c * sqrt(log p / min_k n_k).
    static double default_tau2(int p, int min_sample_size, double c = 0.05);
    void validate() const;
};

/// Output of the quilting pipeline, with the intermediates kept so each step
/// can be inspected and tested separately.
struct QuiltResult {
    EdgeSet edges_O;
    EdgeSet edges_Oc_superset;
    std::vector<int> node_set_W;
    PrecisionEstimate theta_hat;
    std::vector<Matrix> schur_complements;
    MadgqThresholds thresholds;

    QuiltResult(int p) : edges_O(p), edges_Oc_superset(p) {}
};

/// Schur complement of theta onto the block: theta_VV - theta_VC theta_CC^{-1} theta_CV.
/// Equals theta itself when the block is everything.
Matrix schur_complement(const Matrix& theta, const std::vector<int>& block);

/// Edge set {(i,j) in O, i != j : |theta_ij| > tau1} (strict).
EdgeSet threshold_edges_O(const Matrix& theta, const PairMask& mask, double tau1);

/// Node set of nodes whose every containing block has some off-diagonal
/// Schur entry strictly inside the window (tau2, tau1).
std::vector<int> superset_nodes(const std::vector<Matrix>& schur_complements,
                                const BlockDesign& design, double tau2, double tau1);

struct MadgqOptions {
    SolverOptions solver;
    double psd_ridge = 1e-4;
    DegeneratePolicy degenerate_policy = DegeneratePolicy::error;
};

/// Full pipeline on per-block raw data: rank correlation, constrained solve,
/// thresholding, per-block Schur complements, node window, superset.
QuiltResult run_madgq(const BlockDesign& design, const std::vector<Matrix>& block_data,
                      const PenaltyMatrix& penalty, const MadgqThresholds& thresholds,
                      RankStatistic statistic, const MadgqOptions& options = {});

/// Same pipeline starting from a precomputed masked correlation.
QuiltResult run_madgq(const BlockDesign& design, const MaskedCorrelation& masked,
                      const PenaltyMatrix& penalty, const MadgqThresholds& thresholds,
                      const MadgqOptions& options = {});

/// Population quantities used by the recovery theory, computed exactly from a
/// true precision matrix and a design (desk-scale p).
struct PopulationDiagnostics {
    Matrix theta_tilde;               // constrained max-determinant solution
    std::vector<Matrix> schur_tilde;  // its Schur complement per block

    bool has_edges_O = false;
    double nu = 0.0;      // min |theta_ij| over true edges in O
    double delta = 0.0;   // max off-diagonal |theta - theta_tilde| on O
    double psi = 0.0;     // window margin of small Schur entries
    bool psi_finite = false;

    int d = 0;            // max row l0 of theta
    int d_tilde = 0;      // max row l0 of theta_tilde
    long s_tilde = 0;     // off-diagonal nonzeros of theta_tilde (ordered)

    double kappa_tilde = 0.0;        // eigenvalue condition number of theta_tilde
    double kappa_sigma_tilde = 0.0;  // max row l1 norm of its inverse
    double kappa_gamma_tilde = 0.0;  // inf-norm of (Gamma_SS)^{-1}
    double alpha = 0.0;              // incoherence margin

    bool assumption1 = false;  // delta < nu / 2
    bool assumption2 = false;  // hidden-edge path condition
    bool assumption3 = false;  // distorted rows expose a sub-delta entry
    bool assumption4 = false;  // alpha > 0

    double zero_tol = 0.0;
};

PopulationDiagnostics population_diagnostics(const Matrix& theta_true,
                                             const BlockDesign& design,
                                             double solver_tolerance = 1e-11,
                                             double zero_tol = 1e-8);

}  // namespace quilt
