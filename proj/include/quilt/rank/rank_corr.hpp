#pragma once

#include <optional>
#include <vector>

#include "quilt/core/types.hpp"

namespace quilt {

enum class RankStatistic { rho, tau };

/// What to do with constant (zero-variance) columns: reject the input, or
/// emit 0 correlations for the affected pairs and report the columns.
enum class DegeneratePolicy { error, zero_with_flag };

/// Midranks of a column, in 1..n; ties get the average of their rank range.
/// A constant column yields all ranks (n+1)/2 and sets *degenerate.
std::vector<double> ranks(const std::vector<double>& column,
                          bool* degenerate = nullptr);

/// Spearman correlation matrix of an n x p data block: Pearson correlation
/// of the midrank vectors. Throws on constant columns under the default
/// policy; with zero_with_flag their pairs are 0 and the column indices are
/// appended to *degenerate_columns.
Matrix spearman_block(const Matrix& data,
                      DegeneratePolicy policy = DegeneratePolicy::error,
                      std::vector<int>* degenerate_columns = nullptr);

/// Kendall tau matrix of an n x p data block: pair-sign average with
/// sign(0) = 0 for ties. Production path is an O(n log n) merge-sort count
/// whose integer concordant-minus-discordant total matches the O(n^2)
/// enumeration exactly.
Matrix kendall_block(const Matrix& data,
                     DegeneratePolicy policy = DegeneratePolicy::error,
                     std::vector<int>* degenerate_columns = nullptr);

/// Kendall tau of a single pair of columns (O(n log n)).
double kendall_pair(const double* x, const double* y, int n);

/// Per-block rank statistics; only the matrices that were computed are
/// non-empty (size 0 x 0 otherwise).
struct BlockRankCorrelation {
    int block_index = 0;
    Matrix rho;
    Matrix tau;
};

/// Average the per-block statistics across blocks onto a p x p matrix
/// (unweighted, fixed block order); pairs observed in no block are 0.
MaskedCorrelation combine_blocks(const BlockDesign& design,
                                 const std::vector<BlockRankCorrelation>& per_block,
                                 RankStatistic statistic);

/// De-biasing sine transforms: 2 sin(pi/6 x) for rho, sin(pi/2 x) for tau,
/// applied on observed entries; the diagonal stays exactly 1 and entries
/// off the mask stay 0.
MaskedCorrelation sine_transform(const MaskedCorrelation& masked,
                                 RankStatistic statistic);

/// Clip each block submatrix's eigenvalues at `ridge` and rescale it to unit
/// diagonal, leaving entries outside O untouched. Inputs whose blocks already
/// satisfy the floor are returned unchanged (bitwise). Overlapping blocks are
/// repaired in block order; a few passes are run until every block satisfies
/// the floor.
MaskedCorrelation psd_repair(const MaskedCorrelation& masked,
                             const BlockDesign& design, double ridge);

/// Full pipeline for one statistic: per-block statistics, cross-block
/// average, sine transform.
MaskedCorrelation rank_correlation(const BlockDesign& design,
                                   const std::vector<Matrix>& block_data,
                                   RankStatistic statistic,
                                   DegeneratePolicy policy = DegeneratePolicy::error);

}  // namespace quilt
