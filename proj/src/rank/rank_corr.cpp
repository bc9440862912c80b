#include "quilt/rank/rank_corr.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

#include "quilt/simd/kernels.hpp"

namespace quilt {

std::vector<double> ranks(const std::vector<double>& column, bool* degenerate) {
    const int n = static_cast<int>(column.size());
    if (n < 2) throw ValidationError("ranks: need at least 2 observations");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return column[a] < column[b]; });
    std::vector<double> r(n);
    int lo = 0;
    while (lo < n) {
        int hi = lo;
        while (hi + 1 < n && column[order[hi + 1]] == column[order[lo]]) ++hi;
        const double midrank = 0.5 * (lo + hi) + 1.0;
        for (int t = lo; t <= hi; ++t) r[order[t]] = midrank;
        lo = hi + 1;
    }
    if (degenerate != nullptr)
        *degenerate = (column[order[0]] == column[order[n - 1]]);
    return r;
}

namespace {

std::vector<int> find_degenerate_columns(const Matrix& data) {
    std::vector<int> out;
    for (int j = 0; j < data.cols(); ++j) {
        const double first = data(0, j);
        bool constant = true;
        for (int i = 1; i < data.rows(); ++i)
            if (data(i, j) != first) {
                constant = false;
                break;
            }
        if (constant) out.push_back(j);
    }
    return out;
}

void handle_degenerate(const std::vector<int>& cols, const char* who,
                       DegeneratePolicy policy,
                       std::vector<int>* degenerate_columns) {
    if (cols.empty()) return;
    if (policy == DegeneratePolicy::error) {
        std::ostringstream oss;
        oss << who << ": constant column(s):";
        for (int c : cols) oss << ' ' << (c + 1);
        throw ValidationError(oss.str());
    }
    if (degenerate_columns != nullptr)
        degenerate_columns->insert(degenerate_columns->end(), cols.begin(), cols.end());
}

// Merge sort over the y-sequence counting strict inversions.
std::int64_t count_inversions(std::vector<double>& y, std::vector<double>& buf,
                              int lo, int hi) {
    if (hi - lo < 2) return 0;
    const int mid = (lo + hi) / 2;
    std::int64_t inv = count_inversions(y, buf, lo, mid) +
                       count_inversions(y, buf, mid, hi);
    int i = lo, j = mid, k = lo;
    while (i < mid && j < hi) {
        if (y[i] <= y[j]) {
            buf[k++] = y[i++];
        } else {
            inv += mid - i;
            buf[k++] = y[j++];
        }
    }
    while (i < mid) buf[k++] = y[i++];
    while (j < hi) buf[k++] = y[j++];
    std::copy(buf.begin() + lo, buf.begin() + hi, y.begin() + lo);
    return inv;
}

std::int64_t tie_pairs(std::int64_t run) { return run * (run - 1) / 2; }

}  // namespace

double kendall_pair(const double* x, const double* y, int n) {
    if (n < 2) throw ValidationError("kendall_pair: need at least 2 observations");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (x[a] != x[b]) return x[a] < x[b];
        return y[a] < y[b];
    });

    // Pairs tied in x, and tied in both, from runs in the (x, y) order.
    std::int64_t ties_x = 0, ties_xy = 0;
    std::vector<double> ysorted(n);
    for (int i = 0; i < n; ++i) ysorted[i] = y[order[i]];
    int lo = 0;
    while (lo < n) {
        int hi = lo;
        while (hi + 1 < n && x[order[hi + 1]] == x[order[lo]]) ++hi;
        ties_x += tie_pairs(hi - lo + 1);
        int a = lo;
        while (a <= hi) {
            int b = a;
            while (b + 1 <= hi && ysorted[b + 1] == ysorted[a]) ++b;
            ties_xy += tie_pairs(b - a + 1);
            a = b + 1;
        }
        lo = hi + 1;
    }

    std::int64_t ties_y = 0;
    {
        std::vector<double> ycopy(y, y + n);
        std::sort(ycopy.begin(), ycopy.end());
        int a = 0;
        while (a < n) {
            int b = a;
            while (b + 1 < n && ycopy[b + 1] == ycopy[a]) ++b;
            ties_y += tie_pairs(b - a + 1);
            a = b + 1;
        }
    }

    std::vector<double> buf(n);
    const std::int64_t discordant = count_inversions(ysorted, buf, 0, n);
    const std::int64_t total = static_cast<std::int64_t>(n) * (n - 1) / 2;
    const std::int64_t concordant_minus_discordant =
        total - ties_x - ties_y + ties_xy - 2 * discordant;
    return static_cast<double>(concordant_minus_discordant) /
           static_cast<double>(total);
}

Matrix spearman_block(const Matrix& data, DegeneratePolicy policy,
                      std::vector<int>* degenerate_columns) {
    const int n = static_cast<int>(data.rows());
    const int p = static_cast<int>(data.cols());
    if (n < 3) throw ValidationError("spearman_block: need at least 3 observations");
    const std::vector<int> degenerate = find_degenerate_columns(data);
    handle_degenerate(degenerate, "spearman_block", policy, degenerate_columns);

    // Centered rank vectors; the midrank mean is exactly (n+1)/2.
    Matrix centered(n, p);
    std::vector<double> norms(p);
    std::vector<double> col(n);
    const double mean = 0.5 * (n + 1);
    for (int j = 0; j < p; ++j) {
        for (int i = 0; i < n; ++i) col[i] = data(i, j);
        const std::vector<double> r = ranks(col);
        for (int i = 0; i < n; ++i) centered(i, j) = r[i] - mean;
        norms[j] = std::sqrt(simd::dot(centered.col(j).data(), centered.col(j).data(),
                                       static_cast<std::size_t>(n)));
    }

    Matrix out = Matrix::Zero(p, p);
    for (int j = 0; j < p; ++j) out(j, j) = 1.0;
    for (int j = 0; j < p; ++j) {
        for (int l = j + 1; l < p; ++l) {
            double v = 0.0;
            if (norms[j] > 0.0 && norms[l] > 0.0) {
                v = simd::dot(centered.col(j).data(), centered.col(l).data(),
                              static_cast<std::size_t>(n)) /
                    (norms[j] * norms[l]);
            }
            out(j, l) = v;
            out(l, j) = v;
        }
    }
    return out;
}

Matrix kendall_block(const Matrix& data, DegeneratePolicy policy,
                     std::vector<int>* degenerate_columns) {
    const int n = static_cast<int>(data.rows());
    const int p = static_cast<int>(data.cols());
    if (n < 2) throw ValidationError("kendall_block: need at least 2 observations");
    const std::vector<int> degenerate = find_degenerate_columns(data);
    handle_degenerate(degenerate, "kendall_block", policy, degenerate_columns);

    Matrix out = Matrix::Zero(p, p);
    for (int j = 0; j < p; ++j) out(j, j) = 1.0;
    for (int j = 0; j < p; ++j) {
        for (int l = j + 1; l < p; ++l) {
            const double v = kendall_pair(data.col(j).data(), data.col(l).data(), n);
            out(j, l) = v;
            out(l, j) = v;
        }
    }
    return out;
}

MaskedCorrelation combine_blocks(const BlockDesign& design,
                                 const std::vector<BlockRankCorrelation>& per_block,
                                 RankStatistic statistic) {
    const int p = design.p();
    if (static_cast<int>(per_block.size()) != design.num_blocks())
        throw ValidationError("combine_blocks: one BlockRankCorrelation per block required");
    Matrix sums = Matrix::Zero(p, p);
    Matrix counts = Matrix::Zero(p, p);
    for (int k = 0; k < design.num_blocks(); ++k) {
        const auto& v = design.block(k);
        const int pk = static_cast<int>(v.size());
        const Matrix& stat = statistic == RankStatistic::rho ? per_block[k].rho
                                                             : per_block[k].tau;
        if (stat.rows() != pk || stat.cols() != pk)
            throw ValidationError("combine_blocks: block statistic dimension mismatch");
        for (int a = 0; a < pk; ++a) {
            for (int b = a + 1; b < pk; ++b) {
                sums(v[a], v[b]) += stat(a, b);
                counts(v[a], v[b]) += 1.0;
            }
        }
    }
    Matrix out = Matrix::Zero(p, p);
    for (int i = 0; i < p; ++i) out(i, i) = 1.0;
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            if (counts(i, j) > 0.0) {
                const double v = sums(i, j) / counts(i, j);
                out(i, j) = v;
                out(j, i) = v;
            }
        }
    }
    return MaskedCorrelation(std::move(out), induced_pair_set(design));
}

MaskedCorrelation sine_transform(const MaskedCorrelation& masked,
                                 RankStatistic statistic) {
    const int p = masked.p();
    Matrix out = Matrix::Zero(p, p);
    for (int i = 0; i < p; ++i) out(i, i) = 1.0;
    for (int i = 0; i < p; ++i) {
        for (int j = i + 1; j < p; ++j) {
            if (!masked.mask().observed(i, j)) continue;
            const double x = masked.values()(i, j);
            const double v = statistic == RankStatistic::rho
                                 ? 2.0 * std::sin(M_PI / 6.0 * x)
                                 : std::sin(M_PI / 2.0 * x);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return MaskedCorrelation(std::move(out), masked.mask());
}

MaskedCorrelation psd_repair(const MaskedCorrelation& masked,
                             const BlockDesign& design, double ridge) {
    if (ridge < 0.0) throw ValidationError("psd_repair: ridge must be nonnegative");
    const int p = masked.p();
    Matrix values = masked.values();
    const double floor_tol = ridge * (1.0 - 1e-9) - 1e-14;

    bool touched_any = false;
    for (int pass = 0; pass < 10; ++pass) {
        bool touched = false;
        for (int k = 0; k < design.num_blocks(); ++k) {
            const auto& v = design.block(k);
            const int pk = static_cast<int>(v.size());
            Matrix sub(pk, pk);
            for (int a = 0; a < pk; ++a)
                for (int b = 0; b < pk; ++b) sub(a, b) = values(v[a], v[b]);
            Eigen::SelfAdjointEigenSolver<Matrix> eig(sub);
            if (eig.eigenvalues().minCoeff() >= floor_tol) continue;
            touched = true;
            Vector lam = eig.eigenvalues().cwiseMax(ridge);
            Matrix repaired =
                eig.eigenvectors() * lam.asDiagonal() * eig.eigenvectors().transpose();
            Vector d = repaired.diagonal().cwiseSqrt();
            for (int a = 0; a < pk; ++a) {
                values(v[a], v[a]) = 1.0;
                for (int b = a + 1; b < pk; ++b) {
                    double val = repaired(a, b) / (d(a) * d(b));
                    val = std::clamp(val, -1.0, 1.0);
                    values(v[a], v[b]) = val;
                    values(v[b], v[a]) = val;
                }
            }
        }
        touched_any = touched_any || touched;
        if (!touched) break;
    }
    if (!touched_any) return masked;  // identity on inputs already at the floor
    return MaskedCorrelation(std::move(values), masked.mask());
}

MaskedCorrelation rank_correlation(const BlockDesign& design,
                                   const std::vector<Matrix>& block_data,
                                   RankStatistic statistic,
                                   DegeneratePolicy policy) {
    if (static_cast<int>(block_data.size()) != design.num_blocks())
        throw ValidationError("rank_correlation: one data matrix per block required");
    std::vector<BlockRankCorrelation> per_block(design.num_blocks());
    for (int k = 0; k < design.num_blocks(); ++k) {
        const Matrix& data = block_data[k];
        if (data.cols() != static_cast<long>(design.block(k).size()))
            throw ValidationError("rank_correlation: block " + std::to_string(k + 1) +
                                  " has wrong column count");
        per_block[k].block_index = k;
        if (statistic == RankStatistic::rho)
            per_block[k].rho = spearman_block(data, policy);
        else
            per_block[k].tau = kendall_block(data, policy);
    }
    return sine_transform(combine_blocks(design, per_block, statistic), statistic);
}

}  // namespace quilt
