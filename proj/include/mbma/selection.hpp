#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mbma/em.hpp"

namespace mbma {

struct GridEntry {
    CovarianceSpec spec;
    int G;
};

// The (spec, G) pairs of a sweep, in sweep order.
class ModelGrid {
public:
    explicit ModelGrid(std::vector<GridEntry> entries);

    // G = 1 uses {EII, EEI, EEE}; larger G uses all ten specs. In one dimension
    // the specs collapse to equal/variable variance, so only EII and VII are used.
    static ModelGrid default_grid(int d, int g_min = 1, int g_max = 9);
    // Given specs for every G in [g_min, g_max] (duplicates at G = 1 removed).
    static ModelGrid with_specs(const std::vector<CovarianceSpec>& specs, int g_min, int g_max);

    const std::vector<GridEntry>& entries() const noexcept { return entries_; }
    std::size_t size() const noexcept { return entries_.size(); }

private:
    std::vector<GridEntry> entries_;
};

struct ModelRecord {
    CovarianceSpec spec;
    int G;
    std::optional<FittedModel> fit;  // empty when the fit failed
    std::string failure;
    double prior = 1.0;
    double weight = 0.0;  // posterior model probability, exactly 0 for failures
    double seconds = 0.0;
    std::size_t grid_index = 0;

    bool ok() const noexcept { return fit.has_value(); }
};

// Fitted models sorted by decreasing BIC (sweep order on ties), followed by the
// failures in sweep order.
class ModelEnsemble {
public:
    ModelEnsemble(std::vector<ModelRecord> records, Index n, Index d);

    const std::vector<ModelRecord>& records() const noexcept { return records_; }
    const ModelRecord& best() const;
    std::size_t successes() const noexcept;
    Index n() const noexcept { return n_; }
    Index d() const noexcept { return d_; }

private:
    std::vector<ModelRecord> records_;
    Index n_, d_;
};

double bic(double loglik, long kappa, double n);

// w_m proportional to prior_m exp(BIC_m / 2), normalized.
std::vector<double> posterior_model_probs(std::span<const double> bics, std::span<const double> priors);

struct SweepOptions {
    std::size_t workers = 1;
    std::vector<double> priors;  // aligned with the grid; empty means uniform
};

ModelEnsemble sweep(const DataMatrix& data, const ModelGrid& grid, const FitConfig& cfg,
                    const SweepOptions& opts = {});

}  // namespace mbma
