#include "quilt/madgq/madgq.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

namespace quilt {

double MadgqThresholds::default_tau2(int p, int min_sample_size, double c) {
    if (p < 2 || min_sample_size < 1)
        throw ValidationError("default_tau2: need p >= 2 and a positive sample size");
    return c * std::sqrt(std::log(static_cast<double>(p)) / min_sample_size);
}

void MadgqThresholds::validate() const {
    if (!(tau1 > 0.0) || !(tau2 > 0.0))
        throw ValidationError("MadgqThresholds: thresholds must be positive");
    if (!(tau1 > tau2))
        throw ValidationError("MadgqThresholds: tau1 must exceed tau2");
}

Matrix schur_complement(const Matrix& theta, const std::vector<int>& block) {
    const int p = static_cast<int>(theta.rows());
    if (block.empty()) throw ValidationError("schur_complement: empty block");
    std::vector<bool> in_block(p, false);
    for (int idx : block) {
        if (idx < 0 || idx >= p)
            throw ValidationError("schur_complement: index out of range");
        if (in_block[idx])
            throw ValidationError("schur_complement: duplicate index");
        in_block[idx] = true;
    }
    std::vector<int> comp;
    comp.reserve(p - block.size());
    for (int i = 0; i < p; ++i)
        if (!in_block[i]) comp.push_back(i);

    const int nb = static_cast<int>(block.size());
    Matrix a(nb, nb);
    for (int x = 0; x < nb; ++x)
        for (int y = 0; y < nb; ++y) a(x, y) = theta(block[x], block[y]);
    if (comp.empty()) return a;

    const int nc = static_cast<int>(comp.size());
    Matrix b(nb, nc), d(nc, nc);
    for (int x = 0; x < nb; ++x)
        for (int y = 0; y < nc; ++y) b(x, y) = theta(block[x], comp[y]);
    for (int x = 0; x < nc; ++x)
        for (int y = 0; y < nc; ++y) d(x, y) = theta(comp[x], comp[y]);

    Eigen::LLT<Matrix> llt(d);
    if (llt.info() != Eigen::Success)
        throw NumericalError("schur_complement: complement block is not positive definite");
    Matrix s = a - b * llt.solve(b.transpose());
    s = ((s + s.transpose()) * 0.5).eval();
    return s;
}

EdgeSet threshold_edges_O(const Matrix& theta, const PairMask& mask, double tau1) {
    const int p = mask.p();
    EdgeSet out(p);
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (mask.observed(i, j) && std::fabs(theta(i, j)) > tau1) out.insert(i, j);
    return out;
}

std::vector<int> superset_nodes(const std::vector<Matrix>& schur_complements,
                                const BlockDesign& design, double tau2, double tau1) {
    if (static_cast<int>(schur_complements.size()) != design.num_blocks())
        throw ValidationError("superset_nodes: one Schur complement per block required");
    const int p = design.p();
    std::vector<int> out;
    for (int i = 0; i < p; ++i) {
        bool in_all = true;
        bool in_any_block = false;
        for (int k = 0; k < design.num_blocks() && in_all; ++k) {
            const auto& v = design.block(k);
            const auto it = std::lower_bound(v.begin(), v.end(), i);
            if (it == v.end() || *it != i) continue;
            in_any_block = true;
            const int a = static_cast<int>(it - v.begin());
            const Matrix& s = schur_complements[k];
            bool found = false;
            for (int b = 0; b < static_cast<int>(v.size()); ++b) {
                if (b == a) continue;
                const double x = std::fabs(s(a, b));
                if (x > tau2 && x < tau1) {
                    found = true;
                    break;
                }
            }
            if (!found) in_all = false;
        }
        if (in_any_block && in_all) out.push_back(i);
    }
    return out;
}

QuiltResult run_madgq(const BlockDesign& design, const MaskedCorrelation& masked,
                      const PenaltyMatrix& penalty, const MadgqThresholds& thresholds,
                      const MadgqOptions& options) {
    thresholds.validate();
    const DesignReport report = validate_design(design);
    if (!report.pass) {
        std::ostringstream oss;
        oss << "run_madgq: invalid design:";
        for (const auto& v : report.violations) oss << ' ' << v << ';';
        throw ValidationError(oss.str());
    }
    const MaskedCorrelation repaired = psd_repair(masked, design, options.psd_ridge);

    SolverOptions solver = options.solver;
    solver.zero_constraint = zero_constraint_from_mask(repaired.mask());
    GlassoResult sol = solve(repaired.values(), penalty, solver);

    QuiltResult out(design.p());
    out.thresholds = thresholds;
    out.edges_O = threshold_edges_O(sol.est.theta, repaired.mask(), thresholds.tau1);
    out.schur_complements.reserve(design.num_blocks());
    for (int k = 0; k < design.num_blocks(); ++k)
        out.schur_complements.push_back(schur_complement(sol.est.theta, design.block(k)));
    out.node_set_W = superset_nodes(out.schur_complements, design, thresholds.tau2,
                                    thresholds.tau1);

    std::vector<bool> in_w(design.p(), false);
    for (int i : out.node_set_W) in_w[i] = true;
    for (int i = 0; i < design.p(); ++i)
        for (int j = i + 1; j < design.p(); ++j)
            if (in_w[i] && in_w[j] && !repaired.mask().observed(i, j))
                out.edges_Oc_superset.insert(i, j);

    out.theta_hat = std::move(sol.est);
    return out;
}

QuiltResult run_madgq(const BlockDesign& design, const std::vector<Matrix>& block_data,
                      const PenaltyMatrix& penalty, const MadgqThresholds& thresholds,
                      RankStatistic statistic, const MadgqOptions& options) {
    const MaskedCorrelation masked =
        rank_correlation(design, block_data, statistic, options.degenerate_policy);
    return run_madgq(design, masked, penalty, thresholds, options);
}

namespace {

// Path from j to any target inside the vertex set allowed ∪ {j}.
bool connected_within(const EdgeSet& edges, int j, const std::vector<bool>& allowed,
                      const std::vector<bool>& target, int p) {
    std::vector<bool> visited(p, false);
    std::deque<int> queue{j};
    visited[j] = true;
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int v = 0; v < p; ++v) {
            if (visited[v] || !edges.contains(u, v) || u == v) continue;
            if (target[v]) return true;
            if (!allowed[v]) continue;
            visited[v] = true;
            queue.push_back(v);
        }
    }
    return false;
}

}  // namespace

PopulationDiagnostics population_diagnostics(const Matrix& theta_true,
                                             const BlockDesign& design,
                                             double solver_tolerance, double zero_tol) {
    const int p = design.p();
    if (theta_true.rows() != p || theta_true.cols() != p)
        throw ValidationError("population_diagnostics: dimension mismatch");
    const DesignReport report = validate_design(design);
    if (!report.pass)
        throw ValidationError("population_diagnostics: design fails coverage conditions");

    Eigen::LLT<Matrix> llt(theta_true);
    if (llt.info() != Eigen::Success)
        throw NumericalError("population_diagnostics: theta is not positive definite");
    const Matrix sigma = llt.solve(Matrix::Identity(p, p));
    const PairMask mask = induced_pair_set(design);

    PopulationDiagnostics diag;
    diag.zero_tol = zero_tol;

    {
        SolverOptions options;
        options.max_iterations = 20000;
        options.tolerance = solver_tolerance;
        options.kkt_target = std::max(1e-10, 10.0 * solver_tolerance);
        options.zero_snap = 1e-12;
        options.zero_constraint = zero_constraint_from_mask(mask);
        diag.theta_tilde =
            solve(sigma, PenaltyMatrix::uniform(p, 0.0), options).est.theta;
    }
    diag.schur_tilde.reserve(design.num_blocks());
    for (int k = 0; k < design.num_blocks(); ++k)
        diag.schur_tilde.push_back(schur_complement(diag.theta_tilde, design.block(k)));

    const EdgeSet edges = support_of(theta_true, zero_tol);
    double nu = std::numeric_limits<double>::infinity();
    for (const auto& [i, j] : edges.pairs()) {
        if (!mask.observed(i, j)) continue;
        diag.has_edges_O = true;
        nu = std::min(nu, std::fabs(theta_true(i, j)));
    }
    diag.nu = diag.has_edges_O ? nu : 0.0;

    double delta = 0.0;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (mask.observed(i, j))
                delta = std::max(delta,
                                 std::fabs(theta_true(i, j) - diag.theta_tilde(i, j)));
    diag.delta = delta;

    // Entries within boundary dust of delta sit exactly on the open window
    // boundary in exact arithmetic and do not count as inside it.
    const double boundary = std::max(1e-9, 1e-6 * delta);
    double psi = std::numeric_limits<double>::infinity();
    for (int k = 0; k < design.num_blocks(); ++k) {
        const Matrix& s = diag.schur_tilde[k];
        for (int a = 0; a < s.rows(); ++a)
            for (int b = 0; b < s.cols(); ++b) {
                if (a == b) continue;
                const double x = std::fabs(s(a, b));
                if (x > zero_tol && x < delta - boundary)
                    psi = std::min(psi, std::min(x, delta - x));
            }
    }
    diag.psi_finite = std::isfinite(psi);
    diag.psi = diag.psi_finite ? psi : 0.0;

    auto max_row_l0 = [&](const Matrix& m) {
        int best = 0;
        for (int i = 0; i < p; ++i) {
            int count = 0;
            for (int j = 0; j < p; ++j)
                if (std::fabs(m(i, j)) > zero_tol) ++count;
            best = std::max(best, count);
        }
        return best;
    };
    diag.d = max_row_l0(theta_true);
    diag.d_tilde = max_row_l0(diag.theta_tilde);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            if (i != j && std::fabs(diag.theta_tilde(i, j)) > zero_tol) ++diag.s_tilde;

    Eigen::SelfAdjointEigenSolver<Matrix> eig(diag.theta_tilde);
    if (eig.eigenvalues().minCoeff() <= 0.0)
        throw NumericalError("population_diagnostics: theta_tilde lost positive definiteness");
    diag.kappa_tilde = eig.eigenvalues().maxCoeff() / eig.eigenvalues().minCoeff();

    Eigen::LLT<Matrix> llt_tilde(diag.theta_tilde);
    const Matrix sigma_tilde = llt_tilde.solve(Matrix::Identity(p, p));
    diag.kappa_sigma_tilde = sigma_tilde.cwiseAbs().rowwise().sum().maxCoeff();

    // Support pairs of theta_tilde (ordered, diagonal included) index the
    // rows/columns of Gamma = sigma_tilde (x) sigma_tilde used by the
    // incoherence condition.
    std::vector<std::pair<int, int>> support_pairs;
    for (int j = 0; j < p; ++j)
        for (int l = 0; l < p; ++l)
            if (j == l || std::fabs(diag.theta_tilde(j, l)) > zero_tol)
                support_pairs.emplace_back(j, l);
    const int ns = static_cast<int>(support_pairs.size());
    Matrix gamma_ss(ns, ns);
    for (int a = 0; a < ns; ++a)
        for (int b = 0; b < ns; ++b)
            gamma_ss(a, b) = sigma_tilde(support_pairs[a].first, support_pairs[b].first) *
                             sigma_tilde(support_pairs[a].second, support_pairs[b].second);
    Eigen::LLT<Matrix> llt_gamma(gamma_ss);
    if (llt_gamma.info() != Eigen::Success)
        throw NumericalError("population_diagnostics: Gamma_SS is not positive definite");
    const Matrix gamma_inv = llt_gamma.solve(Matrix::Identity(ns, ns));
    diag.kappa_gamma_tilde = gamma_inv.cwiseAbs().rowwise().sum().maxCoeff();

    double worst = 0.0;
    Vector row(ns);
    for (int i = 0; i < p; ++i) {
        for (int j = 0; j < p; ++j) {
            if (i == j || !mask.observed(i, j)) continue;
            if (std::fabs(diag.theta_tilde(i, j)) > zero_tol) continue;  // e in S
            for (int a = 0; a < ns; ++a)
                row(a) = sigma_tilde(i, support_pairs[a].first) *
                         sigma_tilde(j, support_pairs[a].second);
            worst = std::max(worst, llt_gamma.solve(row).cwiseAbs().sum());
        }
    }
    diag.alpha = 1.0 - worst;

    diag.assumption1 = diag.has_edges_O && diag.delta < 0.5 * diag.nu;
    diag.assumption4 = diag.alpha > 0.0;

    // Assumption on hidden-edge connectivity: every node with a never
    // co-observed neighbor must, in each of its blocks, have a companion
    // that reaches that hidden neighborhood through hidden vertices.
    diag.assumption2 = true;
    for (int i = 0; i < p && diag.assumption2; ++i) {
        std::vector<bool> hidden(p, false), target(p, false);
        bool any_target = false;
        for (int h = 0; h < p; ++h) {
            if (h == i || mask.observed(i, h)) continue;
            hidden[h] = true;
            if (edges.contains(i, h)) {
                target[h] = true;
                any_target = true;
            }
        }
        if (!any_target) continue;
        for (int k = 0; k < design.num_blocks() && diag.assumption2; ++k) {
            const auto& v = design.block(k);
            if (!std::binary_search(v.begin(), v.end(), i)) continue;
            bool found = false;
            for (int j : v) {
                if (j == i) continue;
                if (connected_within(edges, j, hidden, target, p)) {
                    found = true;
                    break;
                }
            }
            if (!found) diag.assumption2 = false;
        }
    }

    diag.assumption3 = true;
    for (int k = 0; k < design.num_blocks() && diag.assumption3; ++k) {
        const auto& v = design.block(k);
        const Matrix& s = diag.schur_tilde[k];
        for (int a = 0; a < static_cast<int>(v.size()); ++a) {
            bool distorted = false;
            for (int b = 0; b < static_cast<int>(v.size()); ++b) {
                if (a == b) continue;
                if (std::fabs(theta_true(v[a], v[b]) - s(a, b)) > zero_tol) {
                    distorted = true;
                    break;
                }
            }
            if (!distorted) continue;
            bool witness = false;
            const double boundary = std::max(1e-9, 1e-6 * diag.delta);
            for (int b = 0; b < static_cast<int>(v.size()); ++b) {
                if (a == b) continue;
                const double x = std::fabs(s(a, b));
                if (x > zero_tol && x < diag.delta - boundary) {
                    witness = true;
                    break;
                }
            }
            if (!witness) {
                diag.assumption3 = false;
                break;
            }
        }
    }

    return diag;
}

}  // namespace quilt
