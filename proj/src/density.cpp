#include "mbma/density.hpp"

#include <cmath>
#include <numbers>

#include "mbma/io.hpp"
#include "mbma/parallel.hpp"
#include "mbma/rng.hpp"
#include "mbma/simgen.hpp"

namespace mbma {

namespace {

constexpr Index kBlock = 1024;

struct Moments {
    double mean;
    double std_error;
};

Moments mean_and_se(const std::vector<double>& t) {
    const auto n = static_cast<double>(t.size());
    const double mean = pairwise_sum(t) / n;
    if (t.size() < 2) return {mean, 0.0};
    std::vector<double> sq(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) sq[i] = (t[i] - mean) * (t[i] - mean);
    return {mean, std::sqrt(pairwise_sum(sq) / (n - 1.0) / n)};
}

void check_dim(const MixtureParams& truth, const DensityEstimate& est) {
    if (truth.dim() != est.dim()) throw InputError("truth and estimate differ in dimension");
}

}  // namespace

std::string_view estimator_name(EstimatorKind kind) {
    switch (kind) {
        case EstimatorKind::Bma: return "BMA";
        case EstimatorKind::SingleModel: return "SM";
        case EstimatorKind::Kernel: return "KDE";
    }
    return "?";
}

void DensityEstimate::add(double weight, const GaussianComponent& c) {
    Matrix a = c.inv_chol.transpose();
    Eigen::RowVectorXd offset = c.mean.transpose() * a;
    terms_.push_back({weight, std::move(a), std::move(offset), std::log(weight) + c.log_norm});
}

void DensityEstimate::add_mixture(double weight, const MixtureParams& p) {
    for (int g = 0; g < p.components(); ++g) {
        const double w = weight * p.weight(g);
        if (w > 0.0) add(w, p.component(g));
    }
}

DensityEstimate DensityEstimate::bma(const ModelEnsemble& ensemble) {
    DensityEstimate e(EstimatorKind::Bma, static_cast<int>(ensemble.d()));
    for (const auto& r : ensemble.records())
        if (r.ok() && r.weight > 0.0) e.add_mixture(r.weight, r.fit->params);
    if (e.terms_.empty()) throw InputError("ensemble has no weighted models");
    return e;
}

DensityEstimate DensityEstimate::single_model(const ModelEnsemble& ensemble) {
    DensityEstimate e(EstimatorKind::SingleModel, static_cast<int>(ensemble.d()));
    e.add_mixture(1.0, ensemble.best().fit->params);
    return e;
}

DensityEstimate DensityEstimate::from_mixture(const MixtureParams& params) {
    DensityEstimate e(EstimatorKind::SingleModel, params.dim());
    e.add_mixture(1.0, params);
    return e;
}

DensityEstimate DensityEstimate::kernel(const DataMatrix& data, const Matrix& H) {
    const auto d = static_cast<int>(data.cols());
    if (H.rows() != d || H.cols() != d) throw InputError("bandwidth dimension does not match data");
    Eigen::LLT<Matrix> llt(H);
    if (llt.info() != Eigen::Success) throw NumericError("bandwidth matrix is not positive definite");
    const Matrix L = llt.matrixL();
    const Matrix a = L.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d)).transpose();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    const double w = 1.0 / static_cast<double>(data.rows());
    const double log_norm = -0.5 * (d * std::log(2.0 * std::numbers::pi) + log_det);
    DensityEstimate e(EstimatorKind::Kernel, d);
    e.terms_.reserve(static_cast<std::size_t>(data.rows()));
    for (Index i = 0; i < data.rows(); ++i)
        e.terms_.push_back({w, a, data.row(i) * a, std::log(w) + log_norm});
    return e;
}

void DensityEstimate::accumulate_block(const Matrix& points, Eigen::Ref<Vector> out) const {
    out.setZero();
    const Index b = points.rows();
    Eigen::ArrayXd y(b), q(b);
    for (const auto& t : terms_) {
        // a is upper triangular: column j of y only needs the first j+1 coordinates
        q.setZero();
        for (Index j = 0; j < d_; ++j) {
            y.setConstant(-t.offset(j));
            for (Index k = 0; k <= j; ++k) y += t.a(k, j) * points.col(k).array();
            q += y.square();
        }
        out.array() += (t.log_norm - 0.5 * q).exp();
    }
}

Vector DensityEstimate::density(const Matrix& points, std::size_t workers) const {
    if (points.cols() != d_) throw InputError("evaluation points have the wrong dimension");
    const Index n = points.rows();
    Vector out(n);
    const auto blocks = static_cast<std::size_t>((n + kBlock - 1) / kBlock);
    parallel_for(blocks, workers, [&](std::size_t b) {
        const Index r0 = static_cast<Index>(b) * kBlock;
        const Index rows = std::min(kBlock, n - r0);
        accumulate_block(points.middleRows(r0, rows), out.segment(r0, rows));
    });
    return out;
}

double DensityEstimate::operator()(const Vector& x) const {
    if (x.size() != d_) throw InputError("evaluation point has the wrong dimension");
    return density(Matrix(x.transpose()))(0);
}

double bma_density(const ModelEnsemble& ensemble, const Vector& x) { return DensityEstimate::bma(ensemble)(x); }

double sm_density(const ModelEnsemble& ensemble, const Vector& x) {
    return DensityEstimate::single_model(ensemble)(x);
}

Matrix kde_bandwidth(const DataMatrix& data) {
    const Index n = data.rows();
    const Index d = data.cols();
    if (n < 2) throw InputError("bandwidth needs at least two observations");
    const Matrix centered = data.values().rowwise() - data.values().colwise().mean();
    const Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Matrix> es(cov, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || lo <= 1e-12 * hi) throw NumericError("sample covariance is singular");
    const double nd = static_cast<double>(n), dd = static_cast<double>(d);
    const double factor = std::pow(4.0 / (nd * (dd + 2.0)), 2.0 / (dd + 4.0));
    return factor * cov;
}

double kde_density(const DataMatrix& data, const Matrix& H, const Vector& x) {
    return DensityEstimate::kernel(data, H)(x);
}

std::string eval_csv_header() { return "truth_id,estimator,metric,value,stderr,n,seed\n"; }

std::string eval_csv_row(const EvalEntry& e) {
    return e.truth_id + "," + e.estimator + "," + e.metric + "," + io::format_double(e.value) + "," +
           io::format_double(e.std_error) + "," + std::to_string(e.n) + "," + std::to_string(e.seed) + "\n";
}

EvalEntry estimate_mise(const MixtureParams& truth, const DensityEstimate& estimate, const MiseOptions& opts) {
    check_dim(truth, estimate);
    const int d = truth.dim();
    EvalEntry out;
    out.estimator = std::string(estimator_name(estimate.kind()));
    out.metric = "MISE";
    out.seed = opts.seed;
    const bool quadrature = opts.method == MiseMethod::Quadrature || (opts.method == MiseMethod::Auto && d <= 2);
    const DensityEstimate f = DensityEstimate::from_mixture(truth);

    if (quadrature) {
        if (d > 2) throw InputError("quadrature MISE supports d <= 2");
        if (opts.nodes < 2) throw InputError("quadrature needs at least two nodes per axis");
        const int m = opts.nodes;
        std::vector<Vector> axis(static_cast<std::size_t>(d));
        std::vector<Vector> wts(static_cast<std::size_t>(d));
        for (int j = 0; j < d; ++j) {
            double lo = INFINITY, hi = -INFINITY;
            for (int g = 0; g < truth.components(); ++g) {
                const double sd = std::sqrt(truth.covariance(g)(j, j));
                lo = std::min(lo, truth.mean(g)(j) - opts.sd_span * sd);
                hi = std::max(hi, truth.mean(g)(j) + opts.sd_span * sd);
            }
            const double h = (hi - lo) / (m - 1);
            axis[static_cast<std::size_t>(j)] = Vector::LinSpaced(m, lo, hi);
            Vector w = Vector::Constant(m, h);
            w(0) = w(m - 1) = 0.5 * h;
            wts[static_cast<std::size_t>(j)] = std::move(w);
        }
        const Index total = d == 1 ? m : static_cast<Index>(m) * m;
        Matrix pts(total, d);
        Vector weight(total);
        for (Index k = 0; k < total; ++k) {
            const Index i = d == 1 ? k : k / m;
            pts(k, 0) = axis[0](i);
            weight(k) = wts[0](i);
            if (d == 2) {
                pts(k, 1) = axis[1](k % m);
                weight(k) *= wts[1](k % m);
            }
        }
        const Vector ft = f.density(pts, opts.workers);
        const Vector fe = estimate.density(pts, opts.workers);
        std::vector<double> terms(static_cast<std::size_t>(total));
        for (Index k = 0; k < total; ++k) terms[static_cast<std::size_t>(k)] = weight(k) * (ft(k) - fe(k)) * (ft(k) - fe(k));
        out.value = pairwise_sum(terms);
        out.n = static_cast<long>(total);
        out.method = "trapezoid";
        return out;
    }

    if (opts.mc_samples < 2) throw InputError("Monte Carlo MISE needs at least two samples");
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (int g = 0; g < truth.components(); ++g) {
        means.push_back(truth.mean(g));
        covs.push_back(opts.mc_inflation * truth.covariance(g));
    }
    const MixtureParams proposal = MixtureParams::from_covariances(truth.weights(), std::move(means), std::move(covs));
    Philox4x32 rng = make_stream(opts.seed, opts.replicate, StreamRole::MiseMonteCarlo);
    const Matrix x = sample_labelled(proposal, static_cast<int>(opts.mc_samples), rng).values;
    const Vector ft = f.density(x, opts.workers);
    const Vector fe = estimate.density(x, opts.workers);
    const Vector q = DensityEstimate::from_mixture(proposal).density(x, opts.workers);
    std::vector<double> terms(static_cast<std::size_t>(x.rows()));
    for (Index k = 0; k < x.rows(); ++k) terms[static_cast<std::size_t>(k)] = (ft(k) - fe(k)) * (ft(k) - fe(k)) / q(k);
    const auto [mean, se] = mean_and_se(terms);
    out.value = mean;
    out.std_error = se;
    out.n = opts.mc_samples;
    out.method = "monte-carlo";
    return out;
}

EvalEntry estimate_kl(const MixtureParams& truth, const DensityEstimate& estimate, const KlOptions& opts) {
    check_dim(truth, estimate);
    if (opts.n_mc < 1) throw InputError("n_mc must be >= 1");
    Philox4x32 rng = make_stream(opts.seed, opts.replicate, StreamRole::KlMonteCarlo);
    const Matrix x = sample_labelled(truth, static_cast<int>(opts.n_mc), rng).values;
    const Vector log_f = truth.log_density(x);
    const Vector fe = estimate.density(x, opts.workers);
    EvalEntry out;
    out.estimator = std::string(estimator_name(estimate.kind()));
    out.metric = "KL";
    out.seed = opts.seed;
    out.n = opts.n_mc;
    out.method = "monte-carlo";
    std::vector<double> terms(static_cast<std::size_t>(x.rows()));
    for (Index k = 0; k < x.rows(); ++k) {
        double v = fe(k);
        if (!(v >= kDensityFloor)) {
            v = kDensityFloor;
            ++out.clamped;
        }
        terms[static_cast<std::size_t>(k)] = log_f(k) - std::log(v);
    }
    const auto [mean, se] = mean_and_se(terms);
    out.value = mean;
    out.std_error = se;
    return out;
}

std::string contour_grid_csv(const std::vector<const DensityEstimate*>& estimates,
                             const std::vector<std::string>& names, double x0, double x1, double y0, double y1,
                             int nodes, std::size_t workers) {
    if (estimates.size() != names.size() || estimates.empty()) throw InputError("contour grid needs named estimates");
    for (const auto* e : estimates)
        if (e->dim() != 2) throw InputError("contour grids require two-dimensional data");
    if (nodes < 2) throw InputError("contour grid needs at least two nodes per axis");
    const Vector xs = Vector::LinSpaced(nodes, x0, x1);
    const Vector ys = Vector::LinSpaced(nodes, y0, y1);
    const Index total = static_cast<Index>(nodes) * nodes;
    Matrix pts(total, 2);
    for (Index k = 0; k < total; ++k) {
        pts(k, 0) = xs(k / nodes);
        pts(k, 1) = ys(k % nodes);
    }
    std::vector<Vector> values;
    for (const auto* e : estimates) values.push_back(e->density(pts, workers));
    std::string out = "x,y";
    for (const auto& n : names) out += "," + n;
    out += "\n";
    for (Index k = 0; k < total; ++k) {
        out += io::format_double(pts(k, 0)) + "," + io::format_double(pts(k, 1));
        for (const auto& v : values) out += "," + io::format_double(v(k));
        out += "\n";
    }
    return out;
}

}  // namespace mbma
