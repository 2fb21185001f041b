#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mbma/selection.hpp"

namespace mbma {

enum class Provenance { SingleModel, Bma };

// Symmetric N x N co-clustering probabilities with unit diagonal. Because the
// diagonal is forced to 1 the matrix need not be positive semidefinite.
class ConsensusMatrix {
public:
    ConsensusMatrix(Matrix s, Provenance provenance);

    const Matrix& values() const noexcept { return s_; }
    Index size() const noexcept { return s_.rows(); }
    Provenance provenance() const noexcept { return provenance_; }
    double operator()(Index i, Index j) const { return s_(i, j); }
    // 1 - S
    Matrix dissimilarity() const;

private:
    Matrix s_;
    Provenance provenance_;
};

// S_ij = sum_g z_ig z_jg off the diagonal, 1 on it.
ConsensusMatrix similarity(const ResponsibilityMatrix& z, std::size_t workers = 1);

struct WeightedResponsibility {
    double weight;
    const ResponsibilityMatrix* z;
};

// sum_m w_m S^m over the given models.
ConsensusMatrix bma_consensus(std::span<const WeightedResponsibility> models, std::size_t workers = 1);
ConsensusMatrix bma_consensus(const ModelEnsemble& ensemble, std::size_t workers = 1);

// Merge k creates node N + k; leaves are nodes 0..N-1. `left` holds the
// subtree with the smaller leaf index.
struct Merge {
    int left;
    int right;
    double height;
    int size;
    // Smallest co-clustering probability inside the merged group; 1 - height
    // when the tree was built from a bare dissimilarity.
    double similarity = 0.0;
};

class Dendrogram {
public:
    Dendrogram(int leaves, std::vector<Merge> merges);

    int leaves() const noexcept { return n_; }
    const std::vector<Merge>& merges() const noexcept { return merges_; }
    int root() const noexcept { return n_ == 1 ? 0 : n_ + static_cast<int>(merges_.size()) - 1; }

    std::vector<int> members(int node) const;  // ascending
    std::vector<int> leaf_order() const;       // left-to-right

    // Nested parentheses with ":height" after each internal node, ending in
    // ';'. Leaves print as labels[i], or as 1-based indices.
    std::string to_text(const std::vector<std::string>& labels = {}) const;

private:
    int n_;
    std::vector<Merge> merges_;
};

Dendrogram complete_linkage(const ConsensusMatrix& s);
// Complete linkage over an arbitrary symmetric dissimilarity matrix.
Dendrogram complete_linkage_dissimilarity(const Matrix& d);

// Groups whose members all co-cluster with probability >= level: merges whose
// similarity is >= level are kept. Groups are ordered by their
// smallest member.
std::vector<std::vector<int>> cut(const Dendrogram& dend, double level);

// Gruvaeus-Wainer leaf orientation: at every merge of A and B picks among
// (A,B), (A',B), (A,B'), (A',B') the one whose adjacent boundary objects are
// least dissimilar; earlier options win ties.
std::vector<int> seriate(const Dendrogram& dend, const Matrix& d);

// Sum of dissimilarities between consecutive objects in `order`.
double adjacent_dissimilarity(const Matrix& d, const std::vector<int>& order);

struct Heatmap {
    std::vector<int> order;
    Matrix values;                     // S reordered
    std::vector<std::uint8_t> pixels;  // round(255 S), row-major

    std::string csv() const;  // header of 1-based ids, then the rows
    std::string pgm() const;  // binary grayscale
    std::string ppm() const;  // white -> yellow -> red ramp
};

Heatmap heatmap_render(const ConsensusMatrix& s, const std::vector<int>& order);

}  // namespace mbma
