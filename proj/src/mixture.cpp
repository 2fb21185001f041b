#include "mbma/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mbma {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct SpecInfo {
    ModelName name;
    std::string_view str;
    Volume volume;
    Shape shape;
    Orientation orientation;
};

constexpr std::array<SpecInfo, 10> kSpecs{{
    {ModelName::EII, "EII", Volume::Equal, Shape::Identity, Orientation::Identity},
    {ModelName::VII, "VII", Volume::Variable, Shape::Identity, Orientation::Identity},
    {ModelName::EEI, "EEI", Volume::Equal, Shape::Equal, Orientation::Identity},
    {ModelName::VEI, "VEI", Volume::Variable, Shape::Equal, Orientation::Identity},
    {ModelName::EVI, "EVI", Volume::Equal, Shape::Variable, Orientation::Identity},
    {ModelName::VVI, "VVI", Volume::Variable, Shape::Variable, Orientation::Identity},
    {ModelName::EEE, "EEE", Volume::Equal, Shape::Equal, Orientation::Equal},
    {ModelName::EEV, "EEV", Volume::Equal, Shape::Equal, Orientation::Variable},
    {ModelName::VEV, "VEV", Volume::Variable, Shape::Equal, Orientation::Variable},
    {ModelName::VVV, "VVV", Volume::Variable, Shape::Variable, Orientation::Variable},
}};

const SpecInfo& info(ModelName n) { return kSpecs[static_cast<std::size_t>(n)]; }

// Eigen decomposition with eigenvalues sorted in decreasing order.
void decompose(const Matrix& sigma, GaussianComponent& c) {
    const int d = static_cast<int>(sigma.rows());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sigma);
    if (es.info() != Eigen::Success) throw ParameterError("covariance eigendecomposition failed");
    Vector ev = es.eigenvalues().reverse();
    Matrix vecs = es.eigenvectors().rowwise().reverse();
    if (ev(d - 1) <= 0.0) throw ParameterError("covariance is not positive definite");
    const double log_det = ev.array().log().sum();
    c.volume = std::exp(log_det / d);
    c.shape = ev / c.volume;
    c.orientation = std::move(vecs);
}

void finish_component(GaussianComponent& c) {
    const auto d = c.covariance.rows();
    Eigen::LLT<Matrix> llt(c.covariance);
    if (llt.info() != Eigen::Success) throw ParameterError("covariance is not positive definite");
    const Matrix L = llt.matrixL();
    const double log_det = 2.0 * L.diagonal().array().log().sum();
    if (!std::isfinite(log_det)) throw ParameterError("covariance determinant is not finite");
    c.inv_chol = L.triangularView<Eigen::Lower>().solve(Matrix::Identity(d, d));
    c.log_norm = -0.5 * (static_cast<double>(d) * kLog2Pi + log_det);
}

void check_weights(const Vector& tau) {
    if (tau.size() == 0) throw ParameterError("mixture needs at least one component");
    for (Index g = 0; g < tau.size(); ++g)
        if (!(tau(g) > 0.0) || !std::isfinite(tau(g)))
            throw ParameterError("mixing proportions must be positive");
    if (std::abs(tau.sum() - 1.0) > 1e-10) throw ParameterError("mixing proportions must sum to 1");
}

}  // namespace

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1) throw InputError("data matrix must be non-empty");
    for (Index i = 0; i < values_.rows(); ++i)
        for (Index j = 0; j < values_.cols(); ++j)
            if (!std::isfinite(values_(i, j)))
                throw InputError("non-finite value at row " + std::to_string(i) + ", column " +
                                 std::to_string(j));
}

CovarianceSpec CovarianceSpec::parse(std::string_view name) {
    for (const auto& s : kSpecs)
        if (s.str == name) return {s.name};
    throw InputError("unknown covariance model '" + std::string(name) + "'");
}

std::optional<CovarianceSpec> CovarianceSpec::from_triple(Volume v, Shape s, Orientation o) noexcept {
    for (const auto& x : kSpecs)
        if (x.volume == v && x.shape == s && x.orientation == o) return CovarianceSpec{x.name};
    return std::nullopt;
}

const std::array<CovarianceSpec, 10>& CovarianceSpec::all() noexcept {
    static const std::array<CovarianceSpec, 10> specs{
        ModelName::EII, ModelName::VII, ModelName::EEI, ModelName::VEI, ModelName::EVI,
        ModelName::VVI, ModelName::EEE, ModelName::EEV, ModelName::VEV, ModelName::VVV};
    return specs;
}

Volume CovarianceSpec::volume() const noexcept { return info(name_).volume; }
Shape CovarianceSpec::shape() const noexcept { return info(name_).shape; }
Orientation CovarianceSpec::orientation() const noexcept { return info(name_).orientation; }
std::string_view CovarianceSpec::str() const noexcept { return info(name_).str; }

long CovarianceSpec::covariance_params(int G, int d) const noexcept {
    const long g = G;
    const long p = d;
    const long rot = p * (p - 1) / 2;
    switch (name_) {
        case ModelName::EII: return 1;
        case ModelName::VII: return g;
        case ModelName::EEI: return p;
        case ModelName::VEI: return g + (p - 1);
        case ModelName::EVI: return 1 + g * (p - 1);
        case ModelName::VVI: return g * p;
        case ModelName::EEE: return p * (p + 1) / 2;
        case ModelName::EEV: return 1 + (p - 1) + g * rot;
        case ModelName::VEV: return g + (p - 1) + g * rot;
        case ModelName::VVV: return g * p * (p + 1) / 2;
    }
    return 0;
}

long param_count(CovarianceSpec spec, int G, int d) {
    if (G < 1 || d < 1) throw InputError("param_count needs G >= 1 and d >= 1");
    return static_cast<long>(G - 1) + static_cast<long>(G) * d + spec.covariance_params(G, d);
}

Matrix compose_covariance(double lambda, const Matrix& D, const Vector& A) {
    const auto d = A.size();
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("volume must be positive");
    if (D.rows() != d || D.cols() != d) throw ParameterError("orientation/shape dimension mismatch");
    if ((A.array() <= 0.0).any()) throw ParameterError("shape entries must be positive");
    if (std::abs(A.array().log().sum()) > 1e-8) throw ParameterError("shape matrix must have determinant 1");
    if (!(D * D.transpose()).isIdentity(1e-8)) throw ParameterError("orientation matrix must be orthogonal");
    Matrix s = lambda * D * A.asDiagonal() * D.transpose();
    return 0.5 * (s + s.transpose());
}

double GaussianComponent::log_density(const Eigen::Ref<const Vector>& x) const {
    const Vector y = inv_chol.triangularView<Eigen::Lower>() * (x - mean);
    return log_norm - 0.5 * y.squaredNorm();
}

MixtureParams MixtureParams::from_covariances(Vector tau, std::vector<Vector> means,
                                              std::vector<Matrix> covariances) {
    check_weights(tau);
    const auto G = static_cast<std::size_t>(tau.size());
    if (means.size() != G || covariances.size() != G)
        throw ParameterError("component count mismatch");
    const auto d = means.front().size();
    MixtureParams p;
    p.tau_ = std::move(tau);
    p.components_.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        auto& c = p.components_[g];
        if (means[g].size() != d || covariances[g].rows() != d || covariances[g].cols() != d)
            throw ParameterError("component dimension mismatch");
        if (!means[g].allFinite() || !covariances[g].allFinite())
            throw ParameterError("non-finite component parameters");
        c.mean = std::move(means[g]);
        c.covariance = 0.5 * (covariances[g] + covariances[g].transpose());
        decompose(c.covariance, c);
        finish_component(c);
    }
    return p;
}

MixtureParams MixtureParams::from_decomposition(Vector tau, std::vector<Vector> means,
                                                const std::vector<double>& lambda,
                                                const std::vector<Matrix>& D,
                                                const std::vector<Vector>& A) {
    check_weights(tau);
    const auto G = static_cast<std::size_t>(tau.size());
    if (means.size() != G || lambda.size() != G || D.size() != G || A.size() != G)
        throw ParameterError("component count mismatch");
    MixtureParams p;
    p.tau_ = std::move(tau);
    p.components_.resize(G);
    for (std::size_t g = 0; g < G; ++g) {
        auto& c = p.components_[g];
        if (means[g].size() != A[g].size()) throw ParameterError("component dimension mismatch");
        c.mean = std::move(means[g]);
        c.covariance = compose_covariance(lambda[g], D[g], A[g]);
        c.volume = lambda[g];
        c.orientation = D[g];
        c.shape = A[g];
        finish_component(c);
    }
    return p;
}

Matrix MixtureParams::weighted_log_densities(const Matrix& points) const {
    const auto n = points.rows();
    const int G = components();
    if (points.cols() != dim()) throw InputError("point dimension does not match mixture dimension");
    Matrix out(n, G);
    for (int g = 0; g < G; ++g) {
        const auto& c = components_[static_cast<std::size_t>(g)];
        Matrix centered = points.transpose();
        centered.colwise() -= c.mean;
        const Matrix y = c.inv_chol.triangularView<Eigen::Lower>() * centered;
        out.col(g) = (std::log(tau_(g)) + c.log_norm) -
                     0.5 * y.colwise().squaredNorm().transpose().array();
    }
    return out;
}

Vector MixtureParams::log_density(const Matrix& points) const {
    const Matrix lw = weighted_log_densities(points);
    Vector out(lw.rows());
    for (Index i = 0; i < lw.rows(); ++i) out(i) = log_sum_exp(lw.row(i).transpose());
    return out;
}

Vector MixtureParams::density(const Matrix& points) const {
    return log_density(points).array().exp();
}

MixtureParams MixtureParams::permuted(const std::vector<int>& perm) const {
    if (perm.size() != components_.size()) throw InputError("permutation size mismatch");
    MixtureParams p;
    p.tau_.resize(tau_.size());
    p.components_.resize(components_.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
        p.tau_(static_cast<Index>(k)) = tau_(perm[k]);
        p.components_[k] = components_.at(static_cast<std::size_t>(perm[k]));
    }
    return p;
}

ResponsibilityMatrix::ResponsibilityMatrix(Matrix z) : z_(std::move(z)) {
    if (z_.rows() < 1 || z_.cols() < 1) throw InputError("responsibility matrix must be non-empty");
    for (Index i = 0; i < z_.rows(); ++i) {
        double s = 0.0;
        for (Index g = 0; g < z_.cols(); ++g) {
            const double v = z_(i, g);
            if (!(v >= 0.0 && v <= 1.0)) throw InputError("responsibility outside [0,1] at row " + std::to_string(i));
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-10) throw InputError("responsibility row " + std::to_string(i) + " does not sum to 1");
    }
}

ResponsibilityMatrix ResponsibilityMatrix::from_labels(const std::vector<int>& labels, int G) {
    Matrix z = Matrix::Zero(static_cast<Index>(labels.size()), G);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= G) throw InputError("label out of range");
        z(static_cast<Index>(i), labels[i]) = 1.0;
    }
    return ResponsibilityMatrix(std::move(z));
}

std::vector<int> ResponsibilityMatrix::map_labels() const {
    std::vector<int> out(static_cast<std::size_t>(z_.rows()));
    for (Index i = 0; i < z_.rows(); ++i) {
        Index best = 0;
        z_.row(i).maxCoeff(&best);
        out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
    return out;
}

double log_sum_exp(const Eigen::Ref<const Vector>& v) {
    const double m = v.maxCoeff();
    if (!std::isfinite(m)) return m;
    return m + std::log((v.array() - m).exp().sum());
}

double mixture_density(const MixtureParams& params, const Vector& x) {
    if (x.size() != params.dim()) throw InputError("point dimension does not match mixture dimension");
    double f = 0.0;
    for (int g = 0; g < params.components(); ++g)
        f += params.weight(g) * std::exp(params.component(g).log_density(x));
    return f;
}

double log_likelihood(const MixtureParams& params, const DataMatrix& data) {
    const Vector ld = params.log_density(data.values());
    double total = 0.0;
    for (Index i = 0; i < ld.size(); ++i) {
        if (!std::isfinite(ld(i))) throw NumericError("non-finite log density", static_cast<std::size_t>(i));
        total += ld(i);
    }
    return total;
}

}  // namespace mbma
