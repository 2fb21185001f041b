#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "mbma/mixture.hpp"

namespace mbma {

// Initialization strategies.
struct HierarchicalAgglomeration {};  // Ward linkage on Euclidean distance, deterministic
struct KMeansPlusPlus {
    std::uint64_t seed = 0;
};
struct ProvidedZ {
    Matrix z;
};
using InitStrategy = std::variant<HierarchicalAgglomeration, KMeansPlusPlus, ProvidedZ>;

struct FitConfig {
    int max_iter = 1000;
    double rel_tol = 1e-6;
    InitStrategy init = HierarchicalAgglomeration{};
    // Ridge factor: a near-singular covariance gets jitter * trace / d added to
    // its scatter diagonal, once per fit.
    double jitter = 1e-8;
    // Components with n_g below min_cluster_weight * N are empty.
    double min_cluster_weight = 1e-6;
    // Smallest/largest eigenvalue ratio below which a covariance is near-singular.
    double singular_tol = 1e-10;

    void validate() const;
};

struct MStepOptions {
    double min_cluster_weight = 1e-6;
    double jitter = 0.0;
    double singular_tol = 1e-10;
    int inner_max_iter = 100;
    double inner_tol = 1e-8;
};

// Thrown by m_step when an estimated covariance is near-singular.
class SingularCovarianceError : public NumericError {
public:
    using NumericError::NumericError;
};

struct FittedModel {
    CovarianceSpec spec;
    int G;
    MixtureParams params;
    ResponsibilityMatrix z;
    double loglik;
    long kappa;
    double bic;
    int iterations;
    bool converged;
    bool jittered;
    std::vector<double> loglik_trace;  // observed log-likelihood after each E-step
};

struct EStepResult {
    ResponsibilityMatrix z;
    double loglik;
};

ResponsibilityMatrix e_step(const MixtureParams& params, const DataMatrix& data);
EStepResult e_step_with_loglik(const MixtureParams& params, const DataMatrix& data);

MixtureParams m_step(const ResponsibilityMatrix& z, const DataMatrix& data, CovarianceSpec spec,
                     const MStepOptions& opts = {});

// Sum_i Sum_g z_ig [log tau_g + log phi(x_i | mu_g, Sigma_g)].
double expected_complete_loglik(const MixtureParams& params, const ResponsibilityMatrix& z,
                                const DataMatrix& data);

FittedModel fit(const DataMatrix& data, CovarianceSpec spec, int G, const FitConfig& cfg = {});
// EM started from a given responsibility matrix (cfg.init is ignored).
FittedModel fit_from(const DataMatrix& data, CovarianceSpec spec, const ResponsibilityMatrix& z0,
                     const FitConfig& cfg = {});

ResponsibilityMatrix initialize(const DataMatrix& data, int G, const InitStrategy& strategy);

// Ward agglomeration tree, built once and cut at any G.
class WardTree {
public:
    static WardTree build(const DataMatrix& data);

    // Hard labels for G groups, numbered by first appearance in row order.
    std::vector<int> cut(int G) const;
    int leaves() const noexcept { return n_; }
    int distinct_points() const noexcept { return distinct_; }

private:
    int n_ = 0;
    int distinct_ = 0;
    std::vector<std::pair<int, int>> merges_;
};

}  // namespace mbma
