#include "quilt/lrgq/lrgq.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace quilt {

namespace {

// Top-r factor of a symmetric matrix: eigenvectors of the r largest
// |eigenvalues| scaled by sqrt(max(eigenvalue, 0)), in the SVD's
// magnitude order.
Matrix top_factor(const Matrix& sym, int rank, double clip_warn_tol, int block_index) {
    const int n = static_cast<int>(sym.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return std::fabs(eig.eigenvalues()(a)) > std::fabs(eig.eigenvalues()(b));
    });
    Matrix c = Matrix::Zero(n, rank);
    for (int h = 0; h < rank; ++h) {
        const double lam = eig.eigenvalues()(order[h]);
        if (lam < -clip_warn_tol) {
            std::ostringstream oss;
            oss << "bsvd_complete: clipping negative eigenvalue " << lam
                << " in block " << (block_index + 1);
            log::warn(oss.str());
        }
        c.col(h) = eig.eigenvectors().col(order[h]) * std::sqrt(std::max(lam, 0.0));
    }
    return c;
}

}  // namespace

BsvdResult bsvd_complete(const Matrix& sigma_obs, const PairMask& mask,
                         const BlockDesign& design, int rank, double clip_warn_tol) {
    const int p = design.p();
    if (rank < 1) throw ValidationError("bsvd_complete: rank must be positive");
    if (sigma_obs.rows() != p || sigma_obs.cols() != p || mask.p() != p)
        throw ValidationError("bsvd_complete: dimension mismatch");
    {
        const DesignReport report = validate_design(design);
        if (!report.pass)
            throw ValidationError("bsvd_complete: design fails coverage conditions");
    }
    for (int k = 0; k < design.num_blocks(); ++k) {
        const auto& v = design.block(k);
        if (rank > static_cast<int>(v.size()))
            throw ValidationError("bsvd_complete: rank exceeds block size");
        for (std::size_t a = 0; a < v.size(); ++a)
            for (std::size_t b = a; b < v.size(); ++b)
                if (!mask.observed(v[a], v[b]))
                    throw ValidationError("bsvd_complete: block entry not observed");
    }

    std::vector<double> diag(p);
    for (int i = 0; i < p; ++i) diag[i] = sigma_obs(i, i);
    std::sort(diag.begin(), diag.end());
    const double q_hat = p % 2 == 1 ? diag[p / 2]
                                    : 0.5 * (diag[p / 2 - 1] + diag[p / 2]);

    Matrix c = Matrix::Zero(p, rank);
    std::vector<bool> placed(p, false);

    const auto& first = design.block(0);
    {
        const int n1 = static_cast<int>(first.size());
        Matrix sub(n1, n1);
        for (int a = 0; a < n1; ++a)
            for (int b = 0; b < n1; ++b)
                sub(a, b) = sigma_obs(first[a], first[b]) - (a == b ? q_hat : 0.0);
        const Matrix f = top_factor(sub, rank, clip_warn_tol, 0);
        for (int a = 0; a < n1; ++a) {
            c.row(first[a]) = f.row(a);
            placed[first[a]] = true;
        }
    }

    for (int k = 1; k < design.num_blocks(); ++k) {
        const auto& v = design.block(k);
        const int nk = static_cast<int>(v.size());
        std::vector<int> overlap_local;
        for (int a = 0; a < nk; ++a)
            if (placed[v[a]]) overlap_local.push_back(a);
        if (static_cast<int>(overlap_local.size()) < rank) {
            std::ostringstream oss;
            oss << "bsvd_complete: block " << (k + 1) << " overlaps prior coverage in "
                << overlap_local.size() << " variables, need >= " << rank;
            throw ValidationError(oss.str());
        }

        Matrix sub(nk, nk);
        for (int a = 0; a < nk; ++a)
            for (int b = 0; b < nk; ++b)
                sub(a, b) = sigma_obs(v[a], v[b]) - (a == b ? q_hat : 0.0);
        const Matrix d = top_factor(sub, rank, clip_warn_tol, k);

        // Orthogonal Procrustes of the new factor onto the placed rows.
        Matrix g = Matrix::Zero(rank, rank);
        for (int a : overlap_local) g += d.row(a).transpose() * c.row(v[a]);
        Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullU | Eigen::ComputeFullV);
        const Matrix rot = svd.matrixU() * svd.matrixV().transpose();
        const Matrix aligned = d * rot;
        for (int a = 0; a < nk; ++a) {
            if (placed[v[a]]) continue;  // previously set rows are kept
            c.row(v[a]) = aligned.row(a);
            placed[v[a]] = true;
        }
    }

    BsvdResult out;
    out.completed = c * c.transpose();
    out.factor.c = std::move(c);
    out.factor.q_hat = q_hat;
    return out;
}

BsvdResult bsvd_complete(const MaskedCorrelation& masked, const BlockDesign& design,
                         int rank, double clip_warn_tol) {
    return bsvd_complete(masked.values(), masked.mask(), design, rank, clip_warn_tol);
}

Matrix assemble_completed(const MaskedCorrelation& masked, const BsvdResult& bsvd,
                          DiagonalMode mode) {
    const int p = masked.p();
    Matrix out = bsvd.completed;
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (masked.mask().observed(i, j)) {
                out(i, j) = masked.values()(i, j);
                out(j, i) = masked.values()(i, j);
            }
    for (int i = 0; i < p; ++i)
        out(i, i) = mode == DiagonalMode::reset_unit
                        ? 1.0
                        : bsvd.completed(i, i) + bsvd.factor.q_hat;
    return out;
}

namespace {

LrgqResult finish_with_glasso(const Matrix& input, const PenaltyMatrix& penalty,
                              const SolverOptions& solver, int p) {
    GlassoResult sol = solve(input, penalty, solver);
    LrgqResult out(p);
    out.edges = sol.est.support;
    out.est = std::move(sol.est);
    out.completed = input;
    return out;
}

}  // namespace

LrgqResult run_lrgq(const BlockDesign& design, const MaskedCorrelation& masked,
                    int rank, const PenaltyMatrix& penalty, const LrgqOptions& options) {
    const MaskedCorrelation repaired = psd_repair(masked, design, options.psd_ridge);
    BsvdResult bsvd = bsvd_complete(repaired, design, rank);
    const Matrix input = assemble_completed(repaired, bsvd, options.diagonal_mode);
    LrgqResult out = finish_with_glasso(input, penalty, options.solver, design.p());
    out.factor = std::move(bsvd.factor);
    out.rank = rank;
    return out;
}

LrgqResult run_lrgq(const BlockDesign& design, const std::vector<Matrix>& block_data,
                    int rank, const PenaltyMatrix& penalty, RankStatistic statistic,
                    const LrgqOptions& options) {
    const MaskedCorrelation masked =
        rank_correlation(design, block_data, statistic, options.degenerate_policy);
    return run_lrgq(design, masked, rank, penalty, options);
}

LrgqResult zero_impute_baseline(const MaskedCorrelation& masked,
                                const PenaltyMatrix& penalty,
                                const BlockDesign& design, const LrgqOptions& options) {
    const MaskedCorrelation repaired = psd_repair(masked, design, options.psd_ridge);
    return finish_with_glasso(repaired.values(), penalty, options.solver, masked.p());
}

}  // namespace quilt
