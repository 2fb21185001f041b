#include <doctest.h>

#include <sstream>

#include "helpers.hpp"
#include "mbma/density.hpp"
#include "mbma/simgen.hpp"

using namespace mbma;
using doctest::Approx;

namespace {

MixtureParams normal(const Vector& mu, const Matrix& s) {
    return MixtureParams::from_covariances(Vector::Ones(1), {mu}, {s});
}

// Ensemble of fixed mixtures with the given BICs; weights follow from the BICs.
ModelEnsemble make_ensemble(const std::vector<MixtureParams>& ps, const std::vector<double>& bics) {
    const auto w = posterior_model_probs(bics, std::vector<double>(bics.size(), 1.0));
    std::vector<ModelRecord> recs;
    for (std::size_t k = 0; k < ps.size(); ++k) {
        const int G = ps[k].components();
        ResponsibilityMatrix z(Matrix::Constant(3, G, 1.0 / G));
        FittedModel f{ModelName::VVV, G, ps[k], std::move(z), bics[k] / 2, 0, bics[k], 1, true, false, {}};
        recs.push_back(ModelRecord{ModelName::VVV, G, std::move(f), {}, 1.0, w[k], 0.0, k});
    }
    return ModelEnsemble(std::move(recs), 3, ps.front().dim());
}

Matrix whitened(int n, int d, std::uint64_t seed) {
    Philox4x32 rng(seed);
    Matrix x(n, d);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < d; ++j) x(i, j) = rng.normal();
    x = x.rowwise() - x.colwise().mean();
    const Matrix cov = x.transpose() * x / static_cast<double>(n - 1);
    const Matrix L = Eigen::LLT<Matrix>(cov).matrixL();
    return L.triangularView<Eigen::Lower>().solve(x.transpose()).transpose();
}

MixtureParams perturbed(const MixtureParams& p) {
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (int g = 0; g < p.components(); ++g) {
        means.push_back(p.mean(g).array() + 0.1);
        covs.push_back(1.2 * p.covariance(g));
    }
    return MixtureParams::from_covariances(p.weights(), means, covs);
}

}  // namespace

TEST_CASE("BMA density of a single model is that model") {
    const auto p = catalog("trimodal");
    const auto ens = make_ensemble({p}, {-10.0});
    Philox4x32 rng(1);
    for (int t = 0; t < 10; ++t) {
        const Vector x = testing::random_matrix(rng, 2, 1, -3, 3);
        CHECK(bma_density(ens, x) == Approx(mixture_density(p, x)).epsilon(1e-13));
    }
}

TEST_CASE("two-model BMA density at the origin") {
    const auto a = normal(Vector::Zero(2), Matrix::Identity(2, 2));
    const auto b = normal(Vector::Zero(2), 4 * Matrix::Identity(2, 2));
    const auto ens = make_ensemble({a, b}, {-5.0, -5.0});
    CHECK(bma_density(ens, Vector::Zero(2)) == Approx(0.0994718394324345849).epsilon(1e-14));
    CHECK_THROWS_AS(bma_density(ens, Vector::Zero(3)), InputError);
}

TEST_CASE("BMA density of a claw sweep matches an explicit loop") {
    const auto data = sample(catalog("claw"), 250, 31);
    const auto ens = sweep(data, ModelGrid::default_grid(2), FitConfig{});
    const auto est = DensityEstimate::bma(ens);
    Philox4x32 rng(2);
    const Matrix pts = testing::random_matrix(rng, 100, 2, -2.5, 2.5);
    const Vector got = est.density(pts);
    for (Index i = 0; i < 100; ++i) {
        double ref = 0;
        for (const auto& r : ens.records())
            if (r.ok()) ref += r.weight * mixture_density(r.fit->params, pts.row(i).transpose());
        CHECK(std::abs(got(i) - ref) <= 1e-12 * std::max(1.0, ref));
        // convex combination of the model densities
        double lo = INFINITY, hi = 0;
        for (const auto& r : ens.records())
            if (r.ok()) {
                const double f = mixture_density(r.fit->params, pts.row(i).transpose());
                lo = std::min(lo, f);
                hi = std::max(hi, f);
            }
        CHECK(got(i) >= lo * (1 - 1e-12));
        CHECK(got(i) <= hi * (1 + 1e-12));
    }
}

TEST_CASE("single-model density") {
    const auto a = catalog("bimodal");
    const auto b = catalog("gaussian");
    // the second model dominates
    const auto ens = make_ensemble({a, b}, {-100.0, -40.0});
    const Vector x = (Vector(2) << 0.2, -0.4).finished();
    CHECK(sm_density(ens, x) == Approx(mixture_density(b, x)).epsilon(1e-14));
    CHECK(std::abs(sm_density(ens, x) - bma_density(ens, x)) < 1e-6);
    // equal BIC: the earlier model in sweep order
    const auto tie = make_ensemble({a, b}, {-50.0, -50.0});
    CHECK(sm_density(tie, x) == Approx(mixture_density(a, x)).epsilon(1e-14));
}

TEST_CASE("iris single-model density is the VEV/2 model") {
    const auto x = testing::iris();
    const auto ens = sweep(x, ModelGrid::default_grid(4), FitConfig{});
    const Vector mean = x.values().colwise().mean().transpose();
    const auto vev2 = fit(x, ModelName::VEV, 2);
    CHECK(sm_density(ens, mean) == Approx(mixture_density(vev2.params, mean)).epsilon(1e-12));
}

TEST_CASE("normal-scale bandwidth") {
    // 1D, unit sample variance, N = 100
    const DataMatrix x1(whitened(100, 1, 3));
    CHECK(kde_bandwidth(x1)(0, 0) == Approx(0.177817907226440001).epsilon(1e-12));
    // scale homogeneity
    const DataMatrix x2(whitened(250, 2, 4));
    const Matrix H = kde_bandwidth(x2);
    CHECK((H - 0.158740105196819947 * Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
    const DataMatrix x3(3.5 * x2.values());
    CHECK((kde_bandwidth(x3) - 12.25 * H).cwiseAbs().maxCoeff() < 1e-12);
    CHECK_THROWS_AS(kde_bandwidth(DataMatrix(Matrix::Zero(1, 2))), InputError);
    Matrix collinear(5, 2);
    collinear << 0, 0, 1, 2, 2, 4, 3, 6, 4, 8;
    CHECK_THROWS_AS(kde_bandwidth(DataMatrix(collinear)), NumericError);
}

TEST_CASE("kernel density examples") {
    const DataMatrix one(Matrix::Zero(1, 2));
    CHECK(kde_density(one, Matrix::Identity(2, 2), Vector::Zero(2)) == Approx(0.159154943091895336).epsilon(1e-14));
    const DataMatrix two((Matrix(2, 2) << -1.0, 0.0, 1.0, 0.0).finished());
    const double k = testing::bvn(0, 0, 1, 0, 1, 0, 1);
    CHECK(kde_density(two, Matrix::Identity(2, 2), Vector::Zero(2)) == Approx(k).epsilon(1e-14));
    CHECK_THROWS_AS(kde_density(two, Matrix::Identity(3, 3), Vector::Zero(2)), InputError);
}

TEST_CASE("kernel density matches a brute-force loop") {
    Philox4x32 rng(5);
    const DataMatrix x(testing::random_matrix(rng, 50, 2, -2, 2));
    const Matrix H = (Matrix(2, 2) << 0.3, 0.1, 0.1, 0.2).finished();
    for (int q = 0; q < 20; ++q) {
        const Vector pt = testing::random_matrix(rng, 2, 1, -2, 2);
        double ref = 0;
        for (Index i = 0; i < 50; ++i) ref += testing::bvn(pt(0), pt(1), x.values()(i, 0), x.values()(i, 1), 0.3, 0.1, 0.2);
        CHECK(std::abs(kde_density(x, H, pt) - ref / 50) <= 1e-12 * std::max(1.0, ref / 50));
    }
}

TEST_CASE("kernel density at bandwidth extremes") {
    const DataMatrix x((Matrix(3, 2) << 0.0, 0.0, 1.0, 1.0, -1.0, 2.0).finished());
    double prev = 0;
    for (double h : {1e-1, 1e-2, 1e-3, 1e-4}) {
        const double f = kde_density(x, h * Matrix::Identity(2, 2), Vector::Zero(2));
        CHECK(f > prev);
        prev = f;
    }
    const double a = kde_density(x, 1e6 * Matrix::Identity(2, 2), Vector::Zero(2));
    const double b = kde_density(x, 1e6 * Matrix::Identity(2, 2), Vector::Constant(2, 5.0));
    CHECK(std::abs(a - b) / a < 1e-4);
}

TEST_CASE("MISE of the truth against itself") {
    const auto p = catalog("claw");
    const auto e = estimate_mise(p, DensityEstimate::from_mixture(p));
    CHECK(e.value < 1e-8);
    CHECK(e.method == "trapezoid");
    CHECK(e.n == 400 * 400);
    const auto p3 = extend(p, Padding{1});
    const auto m = estimate_mise(p3, DensityEstimate::from_mixture(p3));
    CHECK(m.method == "monte-carlo");
    CHECK(m.value == 0.0);
}

TEST_CASE("shifted Gaussian ISE in one dimension") {
    const auto f = normal(Vector::Zero(1), Matrix::Identity(1, 1));
    const auto g = normal(Vector::Ones(1), Matrix::Identity(1, 1));
    const auto e = estimate_mise(f, DensityEstimate::from_mixture(g));
    CHECK(std::abs(e.value - 0.124798294080033890) < 1e-3);
    CHECK(std::abs(e.value - 0.124798294080033890) < 1e-8);
}

TEST_CASE("MISE is symmetric, KL is not") {
    const auto f = normal(Vector::Zero(2), Matrix::Identity(2, 2));
    const auto g = normal(Vector::Constant(2, 0.5), 2 * Matrix::Identity(2, 2));
    const auto fg = estimate_mise(f, DensityEstimate::from_mixture(g));
    MiseOptions wide;
    wide.sd_span = 12;  // both boxes cover both densities
    const auto a = estimate_mise(f, DensityEstimate::from_mixture(g), wide);
    const auto b = estimate_mise(g, DensityEstimate::from_mixture(f), wide);
    CHECK(a.value == Approx(b.value).epsilon(1e-8));
    CHECK(fg.value == Approx(a.value).epsilon(1e-6));
    KlOptions ko;
    ko.seed = 3;
    const auto kfg = estimate_kl(f, DensityEstimate::from_mixture(g), ko);
    const auto kgf = estimate_kl(g, DensityEstimate::from_mixture(f), ko);
    // closed forms: KL(f||g) = 0.5(1 + 0.25 - 2 + 2 ln 2) and KL(g||f) = 0.5(2*2 + 0.5 - 2 - 2 ln 2)
    CHECK(std::abs(kfg.value - 0.318147180559945) < 4 * kfg.std_error);
    CHECK(std::abs(kgf.value - 0.556852819440055) < 4 * kgf.std_error);
    CHECK(std::abs(kfg.value - kgf.value) > 0.1);
}

TEST_CASE("KL of the truth against itself and the Gaussian variance example") {
    const auto p = catalog("skewed_unimodal");
    const auto self = estimate_kl(p, DensityEstimate::from_mixture(p), KlOptions{10000, 1, 0, 1});
    CHECK(std::abs(self.value) <= 3 * self.std_error + 1e-12);
    const auto f = normal(Vector::Zero(1), Matrix::Identity(1, 1));
    const auto g = normal(Vector::Zero(1), 2 * Matrix::Identity(1, 1));
    const auto kl = estimate_kl(f, DensityEstimate::from_mixture(g), KlOptions{100000, 7, 0, 1});
    CHECK(std::abs(kl.value - 0.0965735902799726547) <= 3 * kl.std_error);
    CHECK(kl.n == 100000);
    CHECK(kl.clamped == 0);
}

TEST_CASE("KL floor is counted") {
    const auto f = normal(Vector::Zero(1), Matrix::Identity(1, 1));
    const auto far = normal(Vector::Constant(1, 100.0), 0.01 * Matrix::Identity(1, 1));
    const auto kl = estimate_kl(f, DensityEstimate::from_mixture(far), KlOptions{1000, 1, 0, 1});
    CHECK(kl.clamped == 1000);
    CHECK(std::isfinite(kl.value));
}

TEST_CASE("KL of a kurtotic BMA estimate has small Monte Carlo error") {
    const auto truth = catalog("kurtotic");
    const auto ens = sweep(sample(truth, 250, 41), ModelGrid::default_grid(2), FitConfig{});
    const auto kl = estimate_kl(truth, DensityEstimate::bma(ens), KlOptions{100000, 41, 0, 1});
    CHECK(std::isfinite(kl.value));
    CHECK(kl.std_error < 0.05 * std::abs(kl.value));
}

TEST_CASE("quadrature and Monte Carlo MISE agree") {
    for (const auto& id : catalog_ids()) {
        CAPTURE(id);
        const auto truth = catalog(id);
        const auto est = DensityEstimate::from_mixture(perturbed(truth));
        const auto q = estimate_mise(truth, est);
        MiseOptions mc;
        mc.method = MiseMethod::MonteCarlo;
        mc.seed = 17;
        const auto m = estimate_mise(truth, est, mc);
        CHECK(std::abs(q.value - m.value) <= 3 * m.std_error);
    }
}

TEST_CASE("kernel estimate is worse than BMA for a single Gaussian") {
    const auto truth = catalog("gaussian");
    const auto data = sample(truth, 250, 5);
    const auto ens = sweep(data, ModelGrid::default_grid(2), FitConfig{});
    const double kde = estimate_mise(truth, DensityEstimate::kernel(data, kde_bandwidth(data))).value;
    const double bma = estimate_mise(truth, DensityEstimate::bma(ens)).value;
    CHECK(kde / bma > 1.0);
}

TEST_CASE("evaluation CSV rows") {
    EvalEntry e;
    e.truth_id = "gaussian";
    e.estimator = "BMA";
    e.metric = "KL";
    e.value = 0.25;
    e.std_error = 0.5;
    e.n = 10;
    e.seed = 3;
    CHECK(eval_csv_header() == "truth_id,estimator,metric,value,stderr,n,seed\n");
    CHECK(eval_csv_row(e) == "gaussian,BMA,KL,0.25,0.5,10,3\n");
}

TEST_CASE("contour grid") {
    const auto ens = make_ensemble({catalog("bimodal")}, {-1.0});
    const auto bma = DensityEstimate::bma(ens);
    const auto sm = DensityEstimate::single_model(ens);
    const std::string csv = contour_grid_csv({&bma, &sm}, {"bma", "sm"}, -2, 2, -2, 2, 5);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "x,y,bma,sm");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        const auto c2 = line.find(',', line.find(',') + 1);
        const auto c3 = line.find(',', c2 + 1);
        CHECK(line.substr(c2 + 1, c3 - c2 - 1) == line.substr(c3 + 1));
    }
    CHECK(rows == 25);
    const auto three = DensityEstimate::from_mixture(extend(catalog("bimodal"), Padding{1}));
    CHECK_THROWS_AS(contour_grid_csv({&three}, {"x"}, 0, 1, 0, 1, 3), InputError);
}
