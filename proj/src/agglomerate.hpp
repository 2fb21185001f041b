#pragma once

// Generic agglomerative clustering over a dense dissimilarity matrix with
// Lance-Williams style updates. Shared by the Ward initializer and the
// complete-linkage dendrogram.
//
// Clusters are identified by their smallest leaf index. Ties in the merge
// criterion are broken by the lexicographically smallest (id, id) pair, so the
// merge sequence is a deterministic function of the matrix.

#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace mbma::detail {

struct AggloStep {
    int a;  // surviving id (smaller)
    int b;  // absorbed id
    double height;
    int size_a;  // sizes before merging
    int size_b;
};

// update(d_ka, d_kb, d_ab, n_a, n_b, n_k) -> dissimilarity from k to a+b.
template <class Update>
std::vector<AggloStep> agglomerate(Eigen::MatrixXd dist, Update update) {
    const int n = static_cast<int>(dist.rows());
    std::vector<AggloStep> steps;
    if (n < 2) return steps;
    steps.reserve(static_cast<std::size_t>(n - 1));

    std::vector<char> active(static_cast<std::size_t>(n), 1);
    std::vector<int> size(static_cast<std::size_t>(n), 1);
    std::vector<int> nn(static_cast<std::size_t>(n), -1);

    auto less = [&](int i, int j, int k, int l) {
        // key(i,j) < key(k,l) with key = (dist, min id, max id)
        const double x = dist(i, j), y = dist(k, l);
        if (x != y) return x < y;
        const int a0 = std::min(i, j), a1 = std::max(i, j);
        const int b0 = std::min(k, l), b1 = std::max(k, l);
        return a0 != b0 ? a0 < b0 : a1 < b1;
    };
    auto recompute = [&](int i) {
        int best = -1;
        for (int j = 0; j < n; ++j) {
            if (j == i || !active[static_cast<std::size_t>(j)]) continue;
            if (best < 0 || less(i, j, i, best)) best = j;
        }
        nn[static_cast<std::size_t>(i)] = best;
    };
    for (int i = 0; i < n; ++i) recompute(i);

    for (int step = 0; step < n - 1; ++step) {
        int bi = -1;
        for (int i = 0; i < n; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            if (bi < 0 || less(i, nn[static_cast<std::size_t>(i)], bi, nn[static_cast<std::size_t>(bi)])) bi = i;
        }
        const int a = std::min(bi, nn[static_cast<std::size_t>(bi)]);
        const int b = std::max(bi, nn[static_cast<std::size_t>(bi)]);
        const double h = dist(a, b);
        const int na = size[static_cast<std::size_t>(a)], nb = size[static_cast<std::size_t>(b)];
        steps.push_back({a, b, h, na, nb});

        active[static_cast<std::size_t>(b)] = 0;
        for (int k = 0; k < n; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == a) continue;
            const double v = update(dist(k, a), dist(k, b), h, na, nb, size[static_cast<std::size_t>(k)]);
            dist(k, a) = v;
            dist(a, k) = v;
        }
        size[static_cast<std::size_t>(a)] = na + nb;
        if (step == n - 2) break;
        recompute(a);
        for (int k = 0; k < n; ++k) {
            if (!active[static_cast<std::size_t>(k)] || k == a) continue;
            const int cur = nn[static_cast<std::size_t>(k)];
            if (cur == a || cur == b)
                recompute(k);
            else if (less(k, a, k, cur))
                nn[static_cast<std::size_t>(k)] = a;
        }
    }
    return steps;
}

}  // namespace mbma::detail
