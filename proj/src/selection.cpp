#include "mbma/selection.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <set>

#include "mbma/parallel.hpp"

namespace mbma {

ModelGrid::ModelGrid(std::vector<GridEntry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw InputError("model grid is empty");
    std::set<std::pair<int, int>> seen;
    for (const auto& e : entries_) {
        if (e.G < 1) throw InputError("model grid has G < 1");
        if (!seen.emplace(static_cast<int>(e.spec.name()), e.G).second)
            throw InputError("duplicate model " + std::string(e.spec.str()) + "/" + std::to_string(e.G));
    }
}

ModelGrid ModelGrid::default_grid(int d, int g_min, int g_max) {
    if (d == 1) return with_specs({ModelName::EII, ModelName::VII}, g_min, g_max);
    std::vector<CovarianceSpec> all(CovarianceSpec::all().begin(), CovarianceSpec::all().end());
    return with_specs(all, g_min, g_max);
}

ModelGrid ModelGrid::with_specs(const std::vector<CovarianceSpec>& specs, int g_min, int g_max) {
    if (g_min < 1 || g_max < g_min) throw InputError("invalid cluster-count range");
    std::vector<GridEntry> entries;
    for (int G = g_min; G <= g_max; ++G) {
        for (auto s : specs) {
            // One-component models only differ in the shared structure.
            if (G == 1) {
                const auto n = s.name();
                if (n != ModelName::EII && n != ModelName::EEI && n != ModelName::EEE) continue;
            }
            entries.push_back({s, G});
        }
    }
    return ModelGrid(std::move(entries));
}

ModelEnsemble::ModelEnsemble(std::vector<ModelRecord> records, Index n, Index d)
    : records_(std::move(records)), n_(n), d_(d) {
    std::stable_sort(records_.begin(), records_.end(), [](const ModelRecord& a, const ModelRecord& b) {
        if (a.ok() != b.ok()) return a.ok();
        if (!a.ok()) return a.grid_index < b.grid_index;
        if (a.fit->bic != b.fit->bic) return a.fit->bic > b.fit->bic;
        return a.grid_index < b.grid_index;
    });
    double total = 0.0;
    for (const auto& r : records_) {
        if (!r.ok() && r.weight != 0.0) throw InputError("failed model carries nonzero weight");
        if (r.ok() && r.fit->z.rows() != n) throw InputError("model responsibilities do not match N");
        total += r.weight;
    }
    if (successes() == 0) throw SweepError("ensemble has no successfully fitted model");
    if (std::abs(total - 1.0) > 1e-12) throw InputError("posterior model weights do not sum to 1");
}

const ModelRecord& ModelEnsemble::best() const { return records_.front(); }

std::size_t ModelEnsemble::successes() const noexcept {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [](const auto& r) { return r.ok(); }));
}

double bic(double loglik, long kappa, double n) {
    if (!(n >= 1.0)) throw InputError("BIC needs N >= 1");
    return 2.0 * loglik - static_cast<double>(kappa) * std::log(n);
}

std::vector<double> posterior_model_probs(std::span<const double> bics, std::span<const double> priors) {
    if (bics.empty() || bics.size() != priors.size()) throw InputError("BIC and prior lists must be aligned and non-empty");
    double prior_total = 0.0;
    for (double p : priors) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw InputError("priors must be finite and non-negative");
        prior_total += p;
    }
    if (!(prior_total > 0.0)) throw InputError("all model priors are zero");
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < bics.size(); ++m)
        if (priors[m] > 0.0) top = std::max(top, bics[m]);
    std::vector<double> w(bics.size(), 0.0);
    double total = 0.0;
    for (std::size_t m = 0; m < bics.size(); ++m) {
        if (priors[m] > 0.0) w[m] = priors[m] * std::exp(0.5 * (bics[m] - top));
        total += w[m];
    }
    for (double& x : w) x /= total;
    return w;
}

ModelEnsemble sweep(const DataMatrix& data, const ModelGrid& grid, const FitConfig& cfg, const SweepOptions& opts) {
    cfg.validate();
    const auto& entries = grid.entries();
    if (!opts.priors.empty() && opts.priors.size() != entries.size())
        throw InputError("prior list does not match the model grid");
    const bool any_fittable = std::any_of(entries.begin(), entries.end(), [&](const GridEntry& e) { return e.G < data.rows(); });
    if (!any_fittable) throw InputError("no model in the grid has fewer components than observations (N = " +
                                        std::to_string(data.rows()) + ")");

    std::optional<WardTree> ward;
    if (std::holds_alternative<HierarchicalAgglomeration>(cfg.init) && data.rows() > 1) ward = WardTree::build(data);

    std::vector<ModelRecord> records(entries.size(), ModelRecord{ModelName::EII, 0, std::nullopt, {}, 1.0, 0.0, 0.0, 0});
    parallel_for(entries.size(), opts.workers, [&](std::size_t k) {
        const auto& e = entries[k];
        ModelRecord r{e.spec, e.G, std::nullopt, {}, opts.priors.empty() ? 1.0 : opts.priors[k], 0.0, 0.0, k};
        const auto t0 = std::chrono::steady_clock::now();
        try {
            if (data.rows() <= e.G) throw InputError("need more observations than components");
            if (ward && e.G > 1) {
                if (ward->distinct_points() < e.G)
                    throw InitError("fewer than " + std::to_string(e.G) + " distinct observations");
                r.fit = fit_from(data, e.spec, ResponsibilityMatrix::from_labels(ward->cut(e.G), e.G), cfg);
            } else {
                r.fit = fit(data, e.spec, e.G, cfg);
            }
        } catch (const Error& err) {
            r.fit.reset();
            r.failure = err.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        records[k] = std::move(r);
    });

    std::vector<double> bics, priors;
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < records.size(); ++k) {
        if (!records[k].ok()) continue;
        bics.push_back(records[k].fit->bic);
        priors.push_back(records[k].prior);
        idx.push_back(k);
    }
    if (idx.empty()) throw SweepError("every model in the sweep failed");
    const auto w = posterior_model_probs(bics, priors);
    for (std::size_t j = 0; j < idx.size(); ++j) records[idx[j]].weight = w[j];
    return ModelEnsemble(std::move(records), data.rows(), data.cols());
}

}  // namespace mbma
