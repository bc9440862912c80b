#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

#include "quilt/common.hpp"

namespace quilt {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Undirected edge set over nodes 0..p-1, stored canonically (i < j, sorted).
class EdgeSet {
public:
    EdgeSet() : p_(0) {}
    explicit EdgeSet(int p);
    EdgeSet(int p, std::vector<std::pair<int, int>> edges);

    void insert(int i, int j);
    bool contains(int i, int j) const;

    int p() const { return p_; }
    std::size_t size() const { return edges_.size(); }
    const std::vector<std::pair<int, int>>& pairs() const { return edges_; }

    bool operator==(const EdgeSet& other) const {
        return p_ == other.p_ && edges_ == other.edges_;
    }

private:
    int p_;
    std::vector<std::pair<int, int>> edges_;
};

/// K overlapping variable subsets with per-block sample sizes. Indices are
/// 0-based here; user-facing formats are 1-based and converted in quilt::io.
/// Construction rejects malformed blocks (empty, out of range, duplicates);
/// coverage and |O| > p (the sufficient-measurement conditions) are checked
/// separately by validate_design so that diagnostic reporting stays possible.
class BlockDesign {
public:
    BlockDesign(int p, std::vector<std::vector<int>> blocks,
                std::vector<int> sample_sizes);

    int p() const { return p_; }
    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    const std::vector<int>& block(int k) const { return blocks_[k]; }
    const std::vector<std::vector<int>>& blocks() const { return blocks_; }
    int sample_size(int k) const { return sample_sizes_[k]; }
    const std::vector<int>& sample_sizes() const { return sample_sizes_; }
    int min_sample_size() const;

private:
    int p_;
    std::vector<std::vector<int>> blocks_;
    std::vector<int> sample_sizes_;
};

struct DesignReport {
    bool pass = true;
    std::vector<std::string> violations;
};

/// Diagnostic check of the block-coverage conditions: every node in some
/// block, and at least one off-diagonal pair observed (|O| > p).
DesignReport validate_design(const BlockDesign& design);

/// Symmetric boolean indicator of the jointly observed pair set O.
/// Diagonal entries are always observed.
class PairMask {
public:
    static PairMask full(int p);
    PairMask(int p, BoolMatrix observed);

    bool observed(int i, int j) const { return obs_(i, j); }
    int p() const { return p_; }
    const BoolMatrix& matrix() const { return obs_; }

    /// Number of unordered off-diagonal observed pairs.
    long observed_offdiag_pairs() const;
    /// Number of unordered off-diagonal unobserved pairs.
    long unobserved_offdiag_pairs() const;

    /// Unordered pairs (i < j) with observed(i,j) == false.
    std::vector<std::pair<int, int>> unobserved_pairs() const;

    bool operator==(const PairMask& other) const {
        return p_ == other.p_ && (obs_ == other.obs_).all();
    }

private:
    int p_;
    BoolMatrix obs_;
};

/// Mask induced by a design: (i,j) observed iff some block contains both.
PairMask induced_pair_set(const BlockDesign& design);

/// Symmetric p x p correlation estimate defined on O, zero-coded elsewhere.
/// Construction enforces: symmetry within 1e-12 (then mirrored exactly from
/// the upper triangle, never averaged), unit diagonal, entries in [-1,1]
/// within 1e-12, and exact zeros off the mask.
class MaskedCorrelation {
public:
    MaskedCorrelation(Matrix values, PairMask mask);

    const Matrix& values() const { return values_; }
    const PairMask& mask() const { return mask_; }
    int p() const { return mask_.p(); }

private:
    Matrix values_;
    PairMask mask_;
};

/// Symmetric positive-definite precision matrix with its off-diagonal
/// support; entries not in the support are exact zeros.
struct PrecisionEstimate {
    Matrix theta;
    EdgeSet support;
};

/// Support of a symmetric matrix: off-diagonal entries with |x| > tol.
EdgeSet support_of(const Matrix& theta, double tol = 0.0);

}  // namespace quilt
