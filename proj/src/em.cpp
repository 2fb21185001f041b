#include "mbma/em.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "agglomerate.hpp"
#include "mbma/rng.hpp"

namespace mbma {

namespace {

// Weighted sufficient statistics of one responsibility matrix.
struct Scatter {
    Vector n;                   // n_g
    std::vector<Vector> mean;   // mu_g
    std::vector<Matrix> W;      // sum_i z_ig (x_i - mu_g)(x_i - mu_g)^T
};

Scatter scatter(const ResponsibilityMatrix& z, const DataMatrix& data, const MStepOptions& opts) {
    const auto N = data.rows();
    const auto d = data.cols();
    const auto G = z.cols();
    if (z.rows() != N) throw InputError("responsibility rows do not match data rows");
    const Matrix& X = data.values();
    Scatter s;
    s.n = z.values().colwise().sum().transpose();
    const double floor = opts.min_cluster_weight * static_cast<double>(N);
    for (Index g = 0; g < G; ++g)
        if (!(s.n(g) >= floor) || s.n(g) <= 0.0)
            throw DegenerateFitError("component " + std::to_string(g) + " is empty");
    s.mean.resize(static_cast<std::size_t>(G));
    s.W.resize(static_cast<std::size_t>(G));
    for (Index g = 0; g < G; ++g) {
        const auto zg = z.values().col(g);
        Vector mu = (X.transpose() * zg) / s.n(g);
        Matrix centered = X.rowwise() - mu.transpose();
        Matrix W = centered.transpose() * (centered.array().colwise() * zg.array()).matrix();
        W = 0.5 * (W + W.transpose());
        if (opts.jitter > 0.0) W.diagonal().array() += opts.jitter * W.trace() / static_cast<double>(d);
        s.mean[static_cast<std::size_t>(g)] = std::move(mu);
        s.W[static_cast<std::size_t>(g)] = std::move(W);
    }
    return s;
}

// Geometric mean, or 0 if any entry is non-positive.
double geometric_mean(const Vector& v) {
    if ((v.array() <= 0.0).any()) return 0.0;
    return std::exp(v.array().log().mean());
}

struct Eig {
    Vector values;  // decreasing
    Matrix vectors;
};

Eig eig_desc(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed in M-step");
    return {es.eigenvalues().reverse(), es.eigenvectors().rowwise().reverse()};
}

void check_shape(const Vector& b) {
    if (!(geometric_mean(b) > 0.0) || !b.allFinite()) throw SingularCovarianceError("singular shape estimate");
}

bool close(const Vector& a, const Vector& b, double tol) {
    return ((a - b).array().abs() <= tol * b.array().abs().max(1e-300)).all();
}

// Shared-shape models with variable volume: VEI uses diag(W_g), VEV the
// eigenvalues of W_g. Alternates the shape update, then the volume update,
// which is coordinate ascent on a problem convex in log-parameters.
void shared_shape_variable_volume(const std::vector<Vector>& omega, const Vector& n, const MStepOptions& opts,
                                  Vector& A, Vector& lambda) {
    const auto G = static_cast<Index>(omega.size());
    const double d = static_cast<double>(omega.front().size());
    Vector B = Vector::Zero(omega.front().size());
    for (const auto& o : omega) B += o;
    check_shape(B);
    A = B / geometric_mean(B);
    lambda.resize(G);
    for (Index g = 0; g < G; ++g) lambda(g) = (omega[static_cast<std::size_t>(g)].array() / A.array()).sum() / (n(g) * d);
    for (int it = 0; it < opts.inner_max_iter; ++it) {
        B.setZero();
        for (Index g = 0; g < G; ++g) {
            if (!(lambda(g) > 0.0)) throw SingularCovarianceError("zero volume estimate");
            B += omega[static_cast<std::size_t>(g)] / lambda(g);
        }
        check_shape(B);
        const Vector A_new = B / geometric_mean(B);
        Vector lambda_new(G);
        for (Index g = 0; g < G; ++g)
            lambda_new(g) = (omega[static_cast<std::size_t>(g)].array() / A_new.array()).sum() / (n(g) * d);
        const bool done = close(A_new, A, opts.inner_tol) && close(lambda_new, lambda, opts.inner_tol);
        A = A_new;
        lambda = lambda_new;
        if (done) break;
    }
}

void check_singular(const Matrix& sigma, double tol, Index g) {
    const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(sigma, Eigen::EigenvaluesOnly).eigenvalues();
    const double lo = ev.minCoeff(), hi = ev.maxCoeff();
    if (!std::isfinite(lo) || !std::isfinite(hi) || !(lo > 0.0) || lo < tol * hi)
        throw SingularCovarianceError("near-singular covariance for component " + std::to_string(g));
}

}  // namespace

void FitConfig::validate() const {
    if (max_iter < 1) throw InputError("max_iter must be >= 1");
    if (!(rel_tol > 0.0)) throw InputError("rel_tol must be > 0");
    if (!(jitter >= 0.0)) throw InputError("jitter must be >= 0");
    if (!(min_cluster_weight >= 0.0)) throw InputError("min_cluster_weight must be >= 0");
}

EStepResult e_step_with_loglik(const MixtureParams& params, const DataMatrix& data) {
    if (data.cols() != params.dim()) throw InputError("data dimension does not match mixture dimension");
    Matrix lw = params.weighted_log_densities(data.values());
    double ll = 0.0;
    for (Index i = 0; i < lw.rows(); ++i) {
        const double m = lw.row(i).maxCoeff();
        if (!std::isfinite(m)) throw NumericError("all components underflow", static_cast<std::size_t>(i));
        auto row = lw.row(i).array();
        row = (row - m).exp();
        const double s = row.sum();
        row /= s;
        ll += m + std::log(s);
    }
    return {ResponsibilityMatrix(std::move(lw)), ll};
}

ResponsibilityMatrix e_step(const MixtureParams& params, const DataMatrix& data) {
    return e_step_with_loglik(params, data).z;
}

MixtureParams m_step(const ResponsibilityMatrix& z, const DataMatrix& data, CovarianceSpec spec,
                     const MStepOptions& opts) {
    const Scatter s = scatter(z, data, opts);
    const auto G = z.cols();
    const auto d = data.cols();
    const double N = s.n.sum();
    const double dd = static_cast<double>(d);
    const auto Gs = static_cast<std::size_t>(G);
    const Matrix I = Matrix::Identity(d, d);

    Matrix W = Matrix::Zero(d, d);
    for (const auto& w : s.W) W += w;

    std::vector<Matrix> sigma(Gs);
    switch (spec.name()) {
        case ModelName::EII: {
            const double v = W.trace() / (N * dd);
            for (auto& m : sigma) m = v * I;
            break;
        }
        case ModelName::VII:
            for (std::size_t g = 0; g < Gs; ++g) sigma[g] = (s.W[g].trace() / (s.n(static_cast<Index>(g)) * dd)) * I;
            break;
        case ModelName::EEI: {
            const Matrix m = Matrix(W.diagonal().asDiagonal()) / N;
            for (auto& x : sigma) x = m;
            break;
        }
        case ModelName::VEI: {
            std::vector<Vector> omega(Gs);
            for (std::size_t g = 0; g < Gs; ++g) omega[g] = s.W[g].diagonal();
            Vector A, lambda;
            shared_shape_variable_volume(omega, s.n, opts, A, lambda);
            for (std::size_t g = 0; g < Gs; ++g) sigma[g] = Matrix((lambda(static_cast<Index>(g)) * A).asDiagonal());
            break;
        }
        case ModelName::EVI: {
            // closed form: A_g = diag(W_g)/|diag(W_g)|^(1/d), lambda = sum_g |diag(W_g)|^(1/d) / N
            double lambda = 0.0;
            std::vector<Vector> A(Gs);
            for (std::size_t g = 0; g < Gs; ++g) {
                const Vector b = s.W[g].diagonal();
                check_shape(b);
                const double gm = geometric_mean(b);
                A[g] = b / gm;
                lambda += gm;
            }
            lambda /= N;
            for (std::size_t g = 0; g < Gs; ++g) sigma[g] = Matrix((lambda * A[g]).asDiagonal());
            break;
        }
        case ModelName::VVI:
            for (std::size_t g = 0; g < Gs; ++g)
                sigma[g] = Matrix(s.W[g].diagonal().asDiagonal()) / s.n(static_cast<Index>(g));
            break;
        case ModelName::EEE: {
            const Matrix m = W / N;
            for (auto& x : sigma) x = m;
            break;
        }
        case ModelName::EEV: {
            // closed form: D_g from eig(W_g), shape and volume from the summed eigenvalues
            std::vector<Eig> e(Gs);
            Vector B = Vector::Zero(d);
            for (std::size_t g = 0; g < Gs; ++g) {
                e[g] = eig_desc(s.W[g]);
                B += e[g].values.cwiseMax(0.0);
            }
            check_shape(B);
            const double gm = geometric_mean(B);
            const Vector A = B / gm;
            const double lambda = gm / N;
            for (std::size_t g = 0; g < Gs; ++g)
                sigma[g] = lambda * e[g].vectors * A.asDiagonal() * e[g].vectors.transpose();
            break;
        }
        case ModelName::VEV: {
            // D_g = eigenvectors of W_g (paired with the decreasing shape), then
            // alternate A and lambda_g.
            std::vector<Eig> e(Gs);
            std::vector<Vector> omega(Gs);
            for (std::size_t g = 0; g < Gs; ++g) {
                e[g] = eig_desc(s.W[g]);
                omega[g] = e[g].values.cwiseMax(0.0);
            }
            Vector A, lambda;
            shared_shape_variable_volume(omega, s.n, opts, A, lambda);
            for (std::size_t g = 0; g < Gs; ++g)
                sigma[g] = lambda(static_cast<Index>(g)) * e[g].vectors * A.asDiagonal() * e[g].vectors.transpose();
            break;
        }
        case ModelName::VVV:
            for (std::size_t g = 0; g < Gs; ++g) sigma[g] = s.W[g] / s.n(static_cast<Index>(g));
            break;
    }

    for (std::size_t g = 0; g < Gs; ++g) {
        sigma[g] = 0.5 * (sigma[g] + sigma[g].transpose());
        check_singular(sigma[g], opts.singular_tol, static_cast<Index>(g));
    }
    Vector tau = s.n / N;
    tau /= tau.sum();
    try {
        return MixtureParams::from_covariances(std::move(tau), s.mean, std::move(sigma));
    } catch (const ParameterError& e) {
        throw SingularCovarianceError(e.what());
    }
}

double expected_complete_loglik(const MixtureParams& params, const ResponsibilityMatrix& z,
                                const DataMatrix& data) {
    const Matrix lw = params.weighted_log_densities(data.values());
    return (z.values().array() * lw.array()).sum();
}

FittedModel fit_from(const DataMatrix& data, CovarianceSpec spec, const ResponsibilityMatrix& z0,
                     const FitConfig& cfg) {
    cfg.validate();
    const int G = static_cast<int>(z0.cols());
    const auto N = data.rows();
    if (N <= G) throw InputError("need more observations than components");
    if (z0.rows() != N) throw InputError("initial responsibilities do not match data rows");

    MStepOptions opts;
    opts.min_cluster_weight = cfg.min_cluster_weight;
    opts.singular_tol = cfg.singular_tol;
    bool jittered = false;
    auto guarded_m_step = [&](const ResponsibilityMatrix& z) {
        try {
            opts.jitter = 0.0;
            return m_step(z, data, spec, opts);
        } catch (const SingularCovarianceError& e) {
            if (jittered || cfg.jitter <= 0.0)
                throw DegenerateFitError(std::string("singular covariance: ") + e.what());
            jittered = true;
        }
        try {
            opts.jitter = cfg.jitter;
            return m_step(z, data, spec, opts);
        } catch (const SingularCovarianceError& e) {
            throw DegenerateFitError(std::string("singular covariance after jitter: ") + e.what());
        }
    };

    MixtureParams params = guarded_m_step(z0);
    std::vector<double> trace;
    bool converged = false;
    int it = 0;
    for (;;) {
        ++it;
        EStepResult e = e_step_with_loglik(params, data);
        const double ll = e.loglik;
        const bool first = trace.empty();
        const double prev = first ? 0.0 : trace.back();
        trace.push_back(ll);
        if (!first && std::abs(ll - prev) / (1.0 + std::abs(ll)) < cfg.rel_tol) converged = true;
        if (converged || it >= cfg.max_iter) {
            const long kappa = param_count(spec, G, static_cast<int>(data.cols()));
            const double bic = 2.0 * ll - static_cast<double>(kappa) * std::log(static_cast<double>(N));
            return FittedModel{spec, G, std::move(params), std::move(e.z), ll, kappa, bic, it,
                               converged, jittered, std::move(trace)};
        }
        params = guarded_m_step(e.z);
    }
}

FittedModel fit(const DataMatrix& data, CovarianceSpec spec, int G, const FitConfig& cfg) {
    cfg.validate();
    if (G < 1) throw InputError("G must be >= 1");
    if (data.rows() <= G) throw InputError("need more observations than components");
    return fit_from(data, spec, initialize(data, G, cfg.init), cfg);
}

// ---------------------------------------------------------------------------
// Initialization

namespace {

int count_distinct(const Matrix& X) {
    std::vector<Index> idx(static_cast<std::size_t>(X.rows()));
    std::iota(idx.begin(), idx.end(), Index{0});
    auto row_less = [&](Index a, Index b) {
        for (Index j = 0; j < X.cols(); ++j)
            if (X(a, j) != X(b, j)) return X(a, j) < X(b, j);
        return false;
    };
    std::sort(idx.begin(), idx.end(), row_less);
    int distinct = idx.empty() ? 0 : 1;
    for (std::size_t k = 1; k < idx.size(); ++k)
        if (row_less(idx[k - 1], idx[k])) ++distinct;
    return distinct;
}

std::vector<int> kmeans_pp(const DataMatrix& data, int G, std::uint64_t seed) {
    const Matrix& X = data.values();
    const auto N = X.rows();
    Philox4x32 rng = make_stream(seed, 0, StreamRole::Init);
    std::vector<Vector> centers;
    centers.push_back(X.row(static_cast<Index>(rng.uniform() * static_cast<double>(N))).transpose());
    Vector d2(N);
    while (static_cast<int>(centers.size()) < G) {
        for (Index i = 0; i < N; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, (X.row(i).transpose() - c).squaredNorm());
            d2(i) = best;
        }
        const double total = d2.sum();
        double u = rng.uniform() * total;
        Index pick = N - 1;
        for (Index i = 0; i < N; ++i) {
            if (d2(i) <= 0.0) continue;
            u -= d2(i);
            if (u <= 0.0) {
                pick = i;
                break;
            }
        }
        centers.push_back(X.row(pick).transpose());
    }
    std::vector<int> labels(static_cast<std::size_t>(N), -1);
    for (int iter = 0; iter < 100; ++iter) {
        bool changed = false;
        for (Index i = 0; i < N; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (int g = 0; g < G; ++g) {
                const double v = (X.row(i).transpose() - centers[static_cast<std::size_t>(g)]).squaredNorm();
                if (v < bd) {
                    bd = v;
                    best = g;
                }
            }
            if (labels[static_cast<std::size_t>(i)] != best) {
                labels[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        if (!changed) break;
        for (int g = 0; g < G; ++g) {
            Vector sum = Vector::Zero(X.cols());
            int count = 0;
            for (Index i = 0; i < N; ++i)
                if (labels[static_cast<std::size_t>(i)] == g) {
                    sum += X.row(i).transpose();
                    ++count;
                }
            if (count > 0) centers[static_cast<std::size_t>(g)] = sum / count;
        }
    }
    std::vector<int> used(static_cast<std::size_t>(G), 0);
    for (int l : labels) used[static_cast<std::size_t>(l)] = 1;
    if (std::count(used.begin(), used.end(), 1) < G) throw InitError("k-means++ produced an empty group");
    return labels;
}

}  // namespace

WardTree WardTree::build(const DataMatrix& data) {
    const Matrix& X = data.values();
    const auto N = X.rows();
    Matrix dist(N, N);
    for (Index i = 0; i < N; ++i) {
        dist(i, i) = 0.0;
        for (Index j = i + 1; j < N; ++j) {
            const double v = (X.row(i) - X.row(j)).squaredNorm();
            dist(i, j) = v;
            dist(j, i) = v;
        }
    }
    // Lance-Williams update for Ward on squared Euclidean distances.
    auto ward = [](double dka, double dkb, double dab, int na, int nb, int nk) {
        const double t = na + nb + nk;
        return ((na + nk) * dka + (nb + nk) * dkb - nk * dab) / t;
    };
    WardTree tree;
    tree.n_ = static_cast<int>(N);
    tree.distinct_ = count_distinct(X);
    for (const auto& s : detail::agglomerate(std::move(dist), ward)) tree.merges_.emplace_back(s.a, s.b);
    return tree;
}

std::vector<int> WardTree::cut(int G) const {
    if (G < 1 || G > n_) throw InitError("cannot cut " + std::to_string(n_) + " points into " + std::to_string(G) + " groups");
    std::vector<int> parent(static_cast<std::size_t>(n_));
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
        return x;
    };
    for (int k = 0; k < n_ - G; ++k) {
        const auto [a, b] = merges_[static_cast<std::size_t>(k)];
        parent[static_cast<std::size_t>(find(b))] = find(a);
    }
    std::vector<int> label_of_root(static_cast<std::size_t>(n_), -1);
    std::vector<int> labels(static_cast<std::size_t>(n_));
    int next = 0;
    for (int i = 0; i < n_; ++i) {
        const int r = find(i);
        if (label_of_root[static_cast<std::size_t>(r)] < 0) label_of_root[static_cast<std::size_t>(r)] = next++;
        labels[static_cast<std::size_t>(i)] = label_of_root[static_cast<std::size_t>(r)];
    }
    return labels;
}

ResponsibilityMatrix initialize(const DataMatrix& data, int G, const InitStrategy& strategy) {
    const auto N = data.rows();
    if (G < 1 || N < G) throw InitError("need at least G observations to initialize");
    if (const auto* p = std::get_if<ProvidedZ>(&strategy)) {
        if (p->z.rows() != N || p->z.cols() != G) throw InputError("provided Z has wrong shape");
        return ResponsibilityMatrix(p->z);
    }
    if (G == 1) return ResponsibilityMatrix(Matrix::Ones(N, 1));
    if (count_distinct(data.values()) < G)
        throw InitError("fewer than " + std::to_string(G) + " distinct observations");
    if (const auto* k = std::get_if<KMeansPlusPlus>(&strategy))
        return ResponsibilityMatrix::from_labels(kmeans_pp(data, G, k->seed), G);
    return ResponsibilityMatrix::from_labels(WardTree::build(data).cut(G), G);
}

}  // namespace mbma
