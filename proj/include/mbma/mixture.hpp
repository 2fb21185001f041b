#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mbma/error.hpp"

namespace mbma {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// N observations by d features, all finite.
class DataMatrix {
public:
    explicit DataMatrix(Matrix values);

    Index rows() const noexcept { return values_.rows(); }
    Index cols() const noexcept { return values_.cols(); }
    const Matrix& values() const noexcept { return values_; }
    auto row(Index i) const { return values_.row(i); }

private:
    Matrix values_;
};

enum class Volume { Equal, Variable };
enum class Shape { Equal, Variable, Identity };
enum class Orientation { Equal, Variable, Identity };

enum class ModelName { EII, VII, EEI, VEI, EVI, VVI, EEE, EEV, VEV, VVV };

// Volume/shape/orientation constraint for Sigma_g = lambda_g D_g A_g D_g^T.
class CovarianceSpec {
public:
    constexpr CovarianceSpec(ModelName name) noexcept : name_(name) {}  // NOLINT(implicit)

    // Accepts the three-letter name, case-sensitive ("VEV").
    static CovarianceSpec parse(std::string_view name);
    static std::optional<CovarianceSpec> from_triple(Volume v, Shape s, Orientation o) noexcept;
    static const std::array<CovarianceSpec, 10>& all() noexcept;

    ModelName name() const noexcept { return name_; }
    Volume volume() const noexcept;
    Shape shape() const noexcept;
    Orientation orientation() const noexcept;
    std::string_view str() const noexcept;

    // Number of free covariance parameters for G components in d dimensions.
    long covariance_params(int G, int d) const noexcept;

    friend constexpr bool operator==(CovarianceSpec a, CovarianceSpec b) noexcept {
        return a.name_ == b.name_;
    }

private:
    ModelName name_;
};

// Returns lambda * D * diag(A) * D^T. A holds the diagonal of the shape matrix
// and must have unit product.
Matrix compose_covariance(double lambda, const Matrix& D, const Vector& A);

// One normal component with its covariance stored both composed and
// decomposed. The Cholesky-derived inverse factor is cached for evaluation.
struct GaussianComponent {
    Vector mean;
    Matrix covariance;
    double volume = 1.0;  // lambda_g = det(Sigma_g)^(1/d)
    Matrix orientation;   // D_g, columns ordered by decreasing eigenvalue
    Vector shape;         // diagonal of A_g, decreasing, product 1
    Matrix inv_chol;      // L^{-1} with Sigma = L L^T
    double log_norm = 0;  // -0.5 (d log 2pi + log det Sigma)

    double log_density(const Eigen::Ref<const Vector>& x) const;
};

class MixtureParams {
public:
    // Builds from composed covariances; the decomposition is computed.
    static MixtureParams from_covariances(Vector tau, std::vector<Vector> means,
                                          std::vector<Matrix> covariances);
    // Builds from (lambda, D, A) factors via compose_covariance.
    static MixtureParams from_decomposition(Vector tau, std::vector<Vector> means,
                                            const std::vector<double>& lambda,
                                            const std::vector<Matrix>& D,
                                            const std::vector<Vector>& A);

    int components() const noexcept { return static_cast<int>(components_.size()); }
    int dim() const noexcept { return static_cast<int>(components_.front().mean.size()); }
    const Vector& weights() const noexcept { return tau_; }
    double weight(int g) const { return tau_(g); }
    const GaussianComponent& component(int g) const { return components_.at(static_cast<std::size_t>(g)); }
    const Vector& mean(int g) const { return component(g).mean; }
    const Matrix& covariance(int g) const { return component(g).covariance; }

    // log(tau_g) + log phi(x_i | mu_g, Sigma_g) for all rows of `points` (n x d).
    Matrix weighted_log_densities(const Matrix& points) const;
    // log f(x_i) for all rows, via log-sum-exp.
    Vector log_density(const Matrix& points) const;
    Vector density(const Matrix& points) const;

    // Same mixture with components permuted: new component k = old perm[k].
    MixtureParams permuted(const std::vector<int>& perm) const;

private:
    MixtureParams() = default;
    Vector tau_;
    std::vector<GaussianComponent> components_;
};

// N x G matrix of conditional membership probabilities.
class ResponsibilityMatrix {
public:
    explicit ResponsibilityMatrix(Matrix z);

    Index rows() const noexcept { return z_.rows(); }
    Index cols() const noexcept { return z_.cols(); }
    const Matrix& values() const noexcept { return z_; }
    double operator()(Index i, Index g) const { return z_(i, g); }

    // Hard assignment matrix from 0-based labels in [0, G).
    static ResponsibilityMatrix from_labels(const std::vector<int>& labels, int G);
    // Label of the largest probability per row (first on ties).
    std::vector<int> map_labels() const;

private:
    Matrix z_;
};

double mixture_density(const MixtureParams& params, const Vector& x);
double log_likelihood(const MixtureParams& params, const DataMatrix& data);

// (G - 1) + G d + covariance parameters.
long param_count(CovarianceSpec spec, int G, int d);

// Numerically stable log(sum(exp(v))).
double log_sum_exp(const Eigen::Ref<const Vector>& v);

}  // namespace mbma
