#include "quilt/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace quilt {

EdgeSet::EdgeSet(int p) : p_(p) {
    if (p < 0) throw ValidationError("EdgeSet: p must be nonnegative");
}

EdgeSet::EdgeSet(int p, std::vector<std::pair<int, int>> edges) : EdgeSet(p) {
    for (auto& [i, j] : edges) {
        if (i == j) throw ValidationError("EdgeSet: self-loop rejected");
        if (i < 0 || j < 0 || i >= p || j >= p)
            throw ValidationError("EdgeSet: node index out of range");
        if (i > j) std::swap(i, j);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    edges_ = std::move(edges);
}

void EdgeSet::insert(int i, int j) {
    if (i == j) throw ValidationError("EdgeSet: self-loop rejected");
    if (i < 0 || j < 0 || i >= p_ || j >= p_)
        throw ValidationError("EdgeSet: node index out of range");
    if (i > j) std::swap(i, j);
    const std::pair<int, int> e{i, j};
    auto it = std::lower_bound(edges_.begin(), edges_.end(), e);
    if (it == edges_.end() || *it != e) edges_.insert(it, e);
}

bool EdgeSet::contains(int i, int j) const {
    if (i > j) std::swap(i, j);
    return std::binary_search(edges_.begin(), edges_.end(), std::pair<int, int>{i, j});
}

BlockDesign::BlockDesign(int p, std::vector<std::vector<int>> blocks,
                         std::vector<int> sample_sizes)
    : p_(p), blocks_(std::move(blocks)), sample_sizes_(std::move(sample_sizes)) {
    if (p_ < 1) throw ValidationError("BlockDesign: p must be positive");
    if (blocks_.empty()) throw ValidationError("BlockDesign: no blocks");
    if (sample_sizes_.size() != blocks_.size())
        throw ValidationError("BlockDesign: one sample size per block required");
    for (std::size_t k = 0; k < blocks_.size(); ++k) {
        auto& v = blocks_[k];
        if (v.empty())
            throw ValidationError("BlockDesign: block " + std::to_string(k + 1) + " is empty");
        for (int idx : v)
            if (idx < 0 || idx >= p_)
                throw ValidationError("BlockDesign: index out of range in block " +
                                      std::to_string(k + 1));
        std::vector<int> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw ValidationError("BlockDesign: duplicate index in block " +
                                  std::to_string(k + 1));
        v = std::move(sorted);
        if (sample_sizes_[k] < 1)
            throw ValidationError("BlockDesign: sample size of block " +
                                  std::to_string(k + 1) + " must be positive");
    }
}

int BlockDesign::min_sample_size() const {
    return *std::min_element(sample_sizes_.begin(), sample_sizes_.end());
}

DesignReport validate_design(const BlockDesign& design) {
    DesignReport report;
    std::vector<bool> covered(design.p(), false);
    for (int k = 0; k < design.num_blocks(); ++k)
        for (int idx : design.block(k)) covered[idx] = true;
    for (int i = 0; i < design.p(); ++i) {
        if (!covered[i]) {
            report.pass = false;
            report.violations.push_back("node " + std::to_string(i + 1) +
                                        " not covered by any block");
        }
    }
    const PairMask mask = induced_pair_set(design);
    const long observed = design.p() + 2 * mask.observed_offdiag_pairs();
    if (observed <= design.p()) {
        report.pass = false;
        std::ostringstream oss;
        oss << "|O| = " << observed << " <= p = " << design.p()
            << " (no off-diagonal pair observed)";
        report.violations.push_back(oss.str());
    }
    return report;
}

PairMask PairMask::full(int p) {
    return PairMask(p, BoolMatrix::Constant(p, p, true));
}

PairMask::PairMask(int p, BoolMatrix observed) : p_(p), obs_(std::move(observed)) {
    if (obs_.rows() != p_ || obs_.cols() != p_)
        throw ValidationError("PairMask: dimension mismatch");
    for (int i = 0; i < p_; ++i) {
        if (!obs_(i, i)) throw ValidationError("PairMask: diagonal must be observed");
        for (int j = i + 1; j < p_; ++j)
            if (obs_(i, j) != obs_(j, i))
                throw ValidationError("PairMask: mask must be symmetric");
    }
}

long PairMask::observed_offdiag_pairs() const {
    long count = 0;
    for (int i = 0; i < p_; ++i)
        for (int j = i + 1; j < p_; ++j)
            if (obs_(i, j)) ++count;
    return count;
}

long PairMask::unobserved_offdiag_pairs() const {
    return static_cast<long>(p_) * (p_ - 1) / 2 - observed_offdiag_pairs();
}

std::vector<std::pair<int, int>> PairMask::unobserved_pairs() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < p_; ++i)
        for (int j = i + 1; j < p_; ++j)
            if (!obs_(i, j)) out.emplace_back(i, j);
    return out;
}

PairMask induced_pair_set(const BlockDesign& design) {
    BoolMatrix obs = BoolMatrix::Constant(design.p(), design.p(), false);
    for (int i = 0; i < design.p(); ++i) obs(i, i) = true;
    for (int k = 0; k < design.num_blocks(); ++k) {
        const auto& v = design.block(k);
        for (std::size_t a = 0; a < v.size(); ++a)
            for (std::size_t b = a + 1; b < v.size(); ++b) {
                obs(v[a], v[b]) = true;
                obs(v[b], v[a]) = true;
            }
    }
    return PairMask(design.p(), std::move(obs));
}

MaskedCorrelation::MaskedCorrelation(Matrix values, PairMask mask)
    : values_(std::move(values)), mask_(std::move(mask)) {
    const int p = mask_.p();
    if (values_.rows() != p || values_.cols() != p)
        throw ValidationError("MaskedCorrelation: dimension mismatch");
    for (int i = 0; i < p; ++i) {
        if (values_(i, i) != 1.0)
            throw ValidationError("MaskedCorrelation: diagonal must be exactly 1");
        for (int j = i + 1; j < p; ++j) {
            if (std::fabs(values_(i, j) - values_(j, i)) > 1e-12)
                throw ValidationError("MaskedCorrelation: asymmetry beyond 1e-12");
            values_(j, i) = values_(i, j);  // mirror the upper triangle
            if (std::fabs(values_(i, j)) > 1.0 + 1e-12)
                throw ValidationError("MaskedCorrelation: entry outside [-1, 1]");
            if (!mask_.observed(i, j) && values_(i, j) != 0.0)
                throw ValidationError("MaskedCorrelation: nonzero entry outside mask");
        }
    }
}

EdgeSet support_of(const Matrix& theta, double tol) {
    const int p = static_cast<int>(theta.rows());
    EdgeSet out(p);
    for (int i = 0; i < p; ++i)
        for (int j = i + 1; j < p; ++j)
            if (std::fabs(theta(i, j)) > tol) out.insert(i, j);
    return out;
}

}  // namespace quilt
