#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mbma/selection.hpp"

namespace mbma {

enum class EstimatorKind { Bma, SingleModel, Kernel };

std::string_view estimator_name(EstimatorKind kind);  // "BMA", "SM", "KDE"

// A finite sum of weighted normal kernels. All three estimators reduce to this
// form: BMA weights are w_m tau_g, the kernel estimate uses 1/N per point.
class DensityEstimate {
public:
    static DensityEstimate bma(const ModelEnsemble& ensemble);
    // The highest-BIC model; the earlier model in sweep order wins ties.
    static DensityEstimate single_model(const ModelEnsemble& ensemble);
    static DensityEstimate kernel(const DataMatrix& data, const Matrix& H);
    // A fixed mixture, reported as a single model.
    static DensityEstimate from_mixture(const MixtureParams& params);

    EstimatorKind kind() const noexcept { return kind_; }
    int dim() const noexcept { return d_; }
    std::size_t terms() const noexcept { return terms_.size(); }

    // Density at every row of `points` (n x d).
    Vector density(const Matrix& points, std::size_t workers = 1) const;
    double operator()(const Vector& x) const;

private:
    struct Term {
        double weight;
        Matrix a;       // (L^{-1})^T
        Eigen::RowVectorXd offset;  // mu^T (L^{-1})^T
        double log_norm;
    };
    DensityEstimate(EstimatorKind kind, int d) : kind_(kind), d_(d) {}
    void add(double weight, const GaussianComponent& c);
    void add_mixture(double weight, const MixtureParams& p);
    void accumulate_block(const Matrix& points, Eigen::Ref<Vector> out) const;

    EstimatorKind kind_;
    int d_;
    std::vector<Term> terms_;
};

double bma_density(const ModelEnsemble& ensemble, const Vector& x);
double sm_density(const ModelEnsemble& ensemble, const Vector& x);

// Normal-scale rule (4 / (N (d + 2)))^(2 / (d + 4)) times the sample
// covariance (N - 1 denominator).
Matrix kde_bandwidth(const DataMatrix& data);
double kde_density(const DataMatrix& data, const Matrix& H, const Vector& x);

struct EvalEntry {
    std::string truth_id;
    std::string estimator;
    std::string metric;  // "MISE" or "KL"
    double value = 0.0;
    double std_error = 0.0;  // 0 for quadrature
    long n = 0;              // quadrature nodes or Monte Carlo draws
    std::uint64_t seed = 0;
    std::string method;      // "trapezoid" or "monte-carlo"
    long clamped = 0;        // KL: estimate evaluations raised to the floor
};

std::string eval_csv_header();
std::string eval_csv_row(const EvalEntry& e);

enum class MiseMethod { Auto, Quadrature, MonteCarlo };

struct MiseOptions {
    MiseMethod method = MiseMethod::Auto;  // quadrature for d <= 2
    int nodes = 400;                       // per axis
    double sd_span = 6.0;                  // box half-width in component SDs
    long mc_samples = 100000;
    double mc_inflation = 2.25;            // proposal covariance factor
    std::uint64_t seed = 0;
    std::uint32_t replicate = 0;
    std::size_t workers = 1;
};

// Integrated squared error between the truth and an estimate. Quadrature is a
// tensor trapezoid rule over the union of per-component boxes mu +- 6 sd;
// Monte Carlo draws from the truth with inflated covariances.
EvalEntry estimate_mise(const MixtureParams& truth, const DensityEstimate& estimate, const MiseOptions& opts = {});

struct KlOptions {
    long n_mc = 100000;
    std::uint64_t seed = 0;
    std::uint32_t replicate = 0;
    std::size_t workers = 1;
};

constexpr double kDensityFloor = 1e-300;

// Monte Carlo mean of log f(X) - log fhat(X), X ~ f.
EvalEntry estimate_kl(const MixtureParams& truth, const DensityEstimate& estimate, const KlOptions& opts = {});

// x, y, then one column per estimate, on an nodes x nodes grid (x varies slowest).
std::string contour_grid_csv(const std::vector<const DensityEstimate*>& estimates,
                             const std::vector<std::string>& names, double x0, double x1, double y0, double y1,
                             int nodes, std::size_t workers = 1);

}  // namespace mbma
