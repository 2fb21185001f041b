#include "mbma/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "agglomerate.hpp"
#include "mbma/io.hpp"
#include "mbma/parallel.hpp"

namespace mbma {

namespace {

constexpr Index kRowBlock = 64;

// Accumulates w * Z Z^T into s, one block of rows per task.
void accumulate(Matrix& s, const Matrix& z, double w, std::size_t workers) {
    const Index n = z.rows();
    const auto blocks = static_cast<std::size_t>((n + kRowBlock - 1) / kRowBlock);
    parallel_for(blocks, workers, [&](std::size_t b) {
        const Index r0 = static_cast<Index>(b) * kRowBlock;
        const Index rows = std::min(kRowBlock, n - r0);
        s.middleRows(r0, rows).noalias() += w * (z.middleRows(r0, rows) * z.transpose());
    });
}

Matrix finish(Matrix s) {
    s = 0.5 * (s + s.transpose());
    s = s.cwiseMax(0.0).cwiseMin(1.0);
    s.diagonal().setOnes();
    return s;
}

}  // namespace

ConsensusMatrix::ConsensusMatrix(Matrix s, Provenance provenance) : s_(std::move(s)), provenance_(provenance) {
    if (s_.rows() != s_.cols() || s_.rows() < 1) throw InputError("consensus matrix must be square and non-empty");
    for (Index i = 0; i < s_.rows(); ++i) {
        if (s_(i, i) != 1.0) throw InputError("consensus diagonal must be 1");
        for (Index j = 0; j < s_.cols(); ++j) {
            const double v = s_(i, j);
            if (!(v >= 0.0 && v <= 1.0)) throw InputError("consensus entries must lie in [0,1]");
            if (std::abs(v - s_(j, i)) > 1e-12) throw InputError("consensus matrix must be symmetric");
        }
    }
}

Matrix ConsensusMatrix::dissimilarity() const {
    Matrix d = (1.0 - s_.array()).matrix();
    d.diagonal().setZero();
    return d;
}

ConsensusMatrix similarity(const ResponsibilityMatrix& z, std::size_t workers) {
    Matrix s = Matrix::Zero(z.rows(), z.rows());
    accumulate(s, z.values(), 1.0, workers);
    return ConsensusMatrix(finish(std::move(s)), Provenance::SingleModel);
}

ConsensusMatrix bma_consensus(std::span<const WeightedResponsibility> models, std::size_t workers) {
    if (models.empty()) throw InputError("consensus needs at least one model");
    const Index n = models.front().z->rows();
    Matrix s = Matrix::Zero(n, n);
    for (const auto& m : models) {
        if (m.z->rows() != n) throw InputError("models disagree on the number of observations");
        if (m.weight == 0.0) continue;
        accumulate(s, m.z->values(), m.weight, workers);
    }
    return ConsensusMatrix(finish(std::move(s)), Provenance::Bma);
}

ConsensusMatrix bma_consensus(const ModelEnsemble& ensemble, std::size_t workers) {
    std::vector<WeightedResponsibility> models;
    for (const auto& r : ensemble.records())
        if (r.ok()) models.push_back({r.weight, &r.fit->z});
    return bma_consensus(models, workers);
}

Dendrogram::Dendrogram(int leaves, std::vector<Merge> merges) : n_(leaves), merges_(std::move(merges)) {
    if (n_ < 1 || static_cast<int>(merges_.size()) != n_ - 1) throw InputError("dendrogram needs N-1 merges");
}

std::vector<int> Dendrogram::members(int node) const {
    std::vector<int> out;
    std::vector<int> stack{node};
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        if (v < n_) {
            out.push_back(v);
        } else {
            const auto& m = merges_.at(static_cast<std::size_t>(v - n_));
            stack.push_back(m.left);
            stack.push_back(m.right);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> Dendrogram::leaf_order() const {
    std::vector<int> out;
    std::vector<int> stack{root()};
    while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        if (v < n_) {
            out.push_back(v);
        } else {
            const auto& m = merges_[static_cast<std::size_t>(v - n_)];
            stack.push_back(m.right);
            stack.push_back(m.left);
        }
    }
    return out;
}

std::string Dendrogram::to_text(const std::vector<std::string>& labels) const {
    auto label = [&](int leaf) {
        return labels.empty() ? std::to_string(leaf + 1) : labels.at(static_cast<std::size_t>(leaf));
    };
    std::vector<std::string> text(static_cast<std::size_t>(2 * n_ - 1));
    for (int i = 0; i < n_; ++i) text[static_cast<std::size_t>(i)] = label(i);
    for (std::size_t k = 0; k < merges_.size(); ++k) {
        const auto& m = merges_[k];
        text[static_cast<std::size_t>(n_) + k] = "(" + text[static_cast<std::size_t>(m.left)] + "," +
                                                 text[static_cast<std::size_t>(m.right)] + "):" + io::format_double(m.height);
    }
    return text[static_cast<std::size_t>(root())] + ";\n";
}

Dendrogram complete_linkage_dissimilarity(const Matrix& d) {
    const int n = static_cast<int>(d.rows());
    if (d.rows() != d.cols() || n < 1) throw InputError("dissimilarity matrix must be square and non-empty");
    auto complete = [](double dka, double dkb, double, int, int, int) { return std::max(dka, dkb); };
    const auto steps = detail::agglomerate(d, complete);
    std::vector<int> node(static_cast<std::size_t>(n));
    std::iota(node.begin(), node.end(), 0);
    std::vector<Merge> merges;
    merges.reserve(steps.size());
    for (const auto& s : steps) {
        merges.push_back({node[static_cast<std::size_t>(s.a)], node[static_cast<std::size_t>(s.b)], s.height, s.size_a + s.size_b, 1.0 - s.height});
        node[static_cast<std::size_t>(s.a)] = n + static_cast<int>(merges.size()) - 1;
    }
    return Dendrogram(n, std::move(merges));
}

Dendrogram complete_linkage(const ConsensusMatrix& s) {
    const Dendrogram tree = complete_linkage_dissimilarity(s.dissimilarity());
    // Record min S directly so the cut compares against S itself, not 1 - (1 - S).
    const int n = tree.leaves();
    std::vector<Merge> merges = tree.merges();
    for (std::size_t k = 0; k < merges.size(); ++k) {
        auto& m = merges[k];
        double lo = 1.0;
        for (int child : {m.left, m.right})
            if (child >= n) lo = std::min(lo, merges[static_cast<std::size_t>(child - n)].similarity);
        for (int i : tree.members(m.left))
            for (int j : tree.members(m.right)) lo = std::min(lo, s(i, j));
        m.similarity = lo;
    }
    return Dendrogram(n, std::move(merges));
}

std::vector<std::vector<int>> cut(const Dendrogram& dend, double level) {
    if (!(level >= 0.0 && level <= 1.0)) throw InputError("probability level must lie in [0,1]");
    const int n = dend.leaves();
    std::vector<int> parent(static_cast<std::size_t>(2 * n - 1));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
        return x;
    };
    for (std::size_t k = 0; k < dend.merges().size(); ++k) {
        const auto& m = dend.merges()[k];
        if (m.similarity >= level) {
            const int id = n + static_cast<int>(k);
            parent[static_cast<std::size_t>(find(m.left))] = id;
            parent[static_cast<std::size_t>(find(m.right))] = id;
        }
    }
    std::vector<std::vector<int>> groups;
    std::vector<int> group_of(parent.size(), -1);
    for (int i = 0; i < n; ++i) {
        const int r = find(i);
        if (group_of[static_cast<std::size_t>(r)] < 0) {
            group_of[static_cast<std::size_t>(r)] = static_cast<int>(groups.size());
            groups.emplace_back();
        }
        groups[static_cast<std::size_t>(group_of[static_cast<std::size_t>(r)])].push_back(i);
    }
    return groups;
}

std::vector<int> seriate(const Dendrogram& dend, const Matrix& d) {
    const int n = dend.leaves();
    if (d.rows() != n || d.cols() != n) throw InputError("dissimilarity size does not match dendrogram");
    std::vector<std::vector<int>> order(static_cast<std::size_t>(2 * n - 1));
    for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = {i};
    for (std::size_t k = 0; k < dend.merges().size(); ++k) {
        const auto& m = dend.merges()[k];
        auto A = std::move(order[static_cast<std::size_t>(m.left)]);
        auto B = std::move(order[static_cast<std::size_t>(m.right)]);
        // (A,B), (A',B), (A,B'), (A',B'): boundary objects are the end of the
        // first block and the start of the second.
        const double cost[4] = {d(A.back(), B.front()), d(A.front(), B.front()), d(A.back(), B.back()),
                                d(A.front(), B.back())};
        int best = 0;
        for (int o = 1; o < 4; ++o)
            if (cost[o] < cost[best]) best = o;
        if (best == 1 || best == 3) std::reverse(A.begin(), A.end());
        if (best == 2 || best == 3) std::reverse(B.begin(), B.end());
        A.insert(A.end(), B.begin(), B.end());
        order[static_cast<std::size_t>(n) + k] = std::move(A);
    }
    return order[static_cast<std::size_t>(dend.root())];
}

double adjacent_dissimilarity(const Matrix& d, const std::vector<int>& order) {
    double s = 0.0;
    for (std::size_t k = 1; k < order.size(); ++k) s += d(order[k - 1], order[k]);
    return s;
}

Heatmap heatmap_render(const ConsensusMatrix& s, const std::vector<int>& order) {
    const Index n = s.size();
    std::vector<int> check(order);
    std::sort(check.begin(), check.end());
    std::vector<int> iota(static_cast<std::size_t>(n));
    std::iota(iota.begin(), iota.end(), 0);
    if (check != iota) throw InputError("heatmap order is not a permutation");

    Heatmap h;
    h.order = order;
    h.values.resize(n, n);
    h.pixels.resize(static_cast<std::size_t>(n * n));
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < n; ++j) {
            const double v = s(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
            h.values(i, j) = v;
            h.pixels[static_cast<std::size_t>(i * n + j)] = static_cast<std::uint8_t>(std::floor(255.0 * v + 0.5));
        }
    return h;
}

std::string Heatmap::csv() const {
    std::vector<std::string> header;
    for (int i : order) header.push_back(std::to_string(i + 1));
    return io::matrix_to_csv(values, header);
}

std::string Heatmap::pgm() const {
    const auto n = std::to_string(values.rows());
    std::string out = "P5\n" + n + " " + n + "\n255\n";
    out.append(pixels.begin(), pixels.end());
    return out;
}

std::string Heatmap::ppm() const {
    const auto n = std::to_string(values.rows());
    std::string out = "P6\n" + n + " " + n + "\n255\n";
    for (Index i = 0; i < values.rows(); ++i)
        for (Index j = 0; j < values.cols(); ++j) {
            const double v = values(i, j);
            const double g = v < 0.5 ? 1.0 : 2.0 * (1.0 - v);
            const double b = v < 0.5 ? 1.0 - 2.0 * v : 0.0;
            out.push_back(static_cast<char>(255));
            out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::floor(255.0 * g + 0.5))));
            out.push_back(static_cast<char>(static_cast<std::uint8_t>(std::floor(255.0 * b + 0.5))));
        }
    return out;
}

}  // namespace mbma
