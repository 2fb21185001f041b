#include "mbma/bench.hpp"

#include <chrono>

#include "mbma/io.hpp"
#include "mbma/parallel.hpp"
#include "mbma/simgen.hpp"

namespace mbma {

namespace {

MixtureParams bench_truth(const std::string& token, int pad_to) {
    MixtureParams p = resolve_truth(token);
    if (pad_to > p.dim()) p = extend(p, Padding{pad_to - p.dim()});
    return p;
}

void run_one(const MixtureParams& truth, const BenchConfig& cfg, BenchReplicate& rep) {
    const auto start = std::chrono::steady_clock::now();
    const auto r = static_cast<std::uint32_t>(rep.replicate);
    try {
        const DataMatrix data = sample(truth, cfg.n, rep.seed, r);
        const ModelEnsemble ens = sweep(data, ModelGrid::default_grid(truth.dim()), FitConfig{});
        const DensityEstimate est[3] = {DensityEstimate::kernel(data, kde_bandwidth(data)),
                                        DensityEstimate::single_model(ens), DensityEstimate::bma(ens)};
        MiseOptions mo;
        mo.seed = rep.seed;
        mo.replicate = r;
        mo.mc_samples = cfg.mise_samples;
        KlOptions ko;
        ko.seed = rep.seed;
        ko.replicate = r;
        ko.n_mc = cfg.kl_samples;
        for (int k = 0; k < 3; ++k) {
            rep.mise[k] = estimate_mise(truth, est[k], mo).value;
            const EvalEntry kl = estimate_kl(truth, est[k], ko);
            rep.kl[k] = kl.value;
            rep.clamped[k] = kl.clamped;
        }
        rep.ok = true;
    } catch (const Error& e) {
        rep.ok = false;
        rep.failure = e.what();
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

BenchResult run_bench(const BenchConfig& cfg) {
    if (cfg.replicates < 1) throw InputError("replicates must be >= 1");
    if (cfg.n < 2) throw InputError("bench sample size must be >= 2");
    if (cfg.densities.empty()) throw InputError("no densities given");
    std::vector<MixtureParams> truths;
    for (const auto& t : cfg.densities) truths.push_back(bench_truth(t, cfg.pad_to));

    BenchResult out;
    for (std::size_t k = 0; k < cfg.densities.size(); ++k)
        for (int r = 0; r < cfg.replicates; ++r) {
            BenchReplicate rep;
            rep.density = cfg.densities[k];
            rep.replicate = r;
            rep.seed = cfg.seed + k;
            out.replicates.push_back(std::move(rep));
        }
    const auto R = static_cast<std::size_t>(cfg.replicates);
    parallel_for(out.replicates.size(), cfg.workers,
                 [&](std::size_t i) { run_one(truths[i / R], cfg, out.replicates[i]); });

    for (std::size_t k = 0; k < cfg.densities.size(); ++k) {
        BenchRow row;
        row.density = cfg.densities[k];
        std::vector<double> mise[3], kl[3];
        for (std::size_t r = 0; r < R; ++r) {
            const auto& rep = out.replicates[k * R + r];
            if (!rep.ok) {
                ++row.failures;
                continue;
            }
            ++row.ok;
            for (int e = 0; e < 3; ++e) {
                mise[e].push_back(rep.mise[e]);
                kl[e].push_back(rep.kl[e]);
            }
        }
        for (int e = 0; e < 3; ++e) {
            const double denom = row.ok > 0 ? row.ok : 1;
            row.mean_mise[e] = row.ok > 0 ? pairwise_sum(mise[e]) / denom : NAN;
            row.mean_kl[e] = row.ok > 0 ? pairwise_sum(kl[e]) / denom : NAN;
        }
        out.rows.push_back(std::move(row));
    }
    return out;
}

std::string bench_table_csv(const BenchResult& result) {
    using io::format_double;
    std::string out = "density,ks_bma_mise,ks_bma_kl,sm_bma_mise,sm_bma_kl,replicates,failures\n";
    for (const auto& r : result.rows)
        out += r.density + "," + format_double(r.ks_bma_mise()) + "," + format_double(r.ks_bma_kl()) + "," +
               format_double(r.sm_bma_mise()) + "," + format_double(r.sm_bma_kl()) + "," + std::to_string(r.ok) +
               "," + std::to_string(r.failures) + "\n";
    return out;
}

std::string bench_replicates_csv(const BenchResult& result) {
    using io::format_double;
    std::string out =
        "density,replicate,seed,ok,mise_kde,mise_sm,mise_bma,kl_kde,kl_sm,kl_bma,kl_clamped,failure\n";
    for (const auto& r : result.replicates) {
        out += r.density + "," + std::to_string(r.replicate) + "," + std::to_string(r.seed) + "," +
               (r.ok ? "1" : "0");
        for (double v : r.mise) out += "," + format_double(v);
        for (double v : r.kl) out += "," + format_double(v);
        out += "," + std::to_string(r.clamped[0] + r.clamped[1] + r.clamped[2]) + ",";
        // failure messages never contain quotes we need to keep
        std::string msg = r.failure;
        for (char& c : msg)
            if (c == ',' || c == '"' || c == '\n') c = ' ';
        out += msg + "\n";
    }
    return out;
}

}  // namespace mbma
