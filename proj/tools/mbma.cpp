// mbma: sweep, consensus, density, bench and simulate subcommands.
//
// Exit status: 0 success, 2 input error, 3 computation failure.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mbma/bench.hpp"
#include "mbma/consensus.hpp"
#include "mbma/density.hpp"
#include "mbma/ensemble_io.hpp"
#include "mbma/io.hpp"
#include "mbma/parallel.hpp"
#include "mbma/simgen.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mbma;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string now_utc() {
    const std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Collects what a run read and wrote; written last as manifest.json.
class Manifest {
public:
    Manifest(std::string subcommand, fs::path out_dir) : out_(std::move(out_dir)) {
        doc_["tool"] = "mbma";
        doc_["version"] = kVersion;
        doc_["subcommand"] = std::move(subcommand);
        doc_["output_dir"] = out_.generic_string();
        doc_["inputs"] = json::array();
        doc_["artifacts"] = json::array();
        doc_["timing"]["started"] = now_utc();
    }

    json& operator[](const char* key) { return doc_[key]; }

    void input(const fs::path& p) {
        doc_["inputs"].push_back({{"path", p.generic_string()}, {"sha256", io::sha256_file(p)}});
    }

    fs::path write(const std::string& name, std::string_view contents) {
        const fs::path p = out_ / name;
        io::write_file(p, contents);
        artifact(p);
        return p;
    }

    void artifact(const fs::path& p) {
        doc_["artifacts"].push_back({{"path", fs::relative(p, out_).generic_string()},
                                     {"sha256", io::sha256_file(p)},
                                     {"bytes", fs::file_size(p)}});
    }

    void finish() {
        doc_["timing"]["finished"] = now_utc();
        doc_["timing"]["wall_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
        io::write_file(out_ / "manifest.json", doc_.dump(2) + "\n");
    }

private:
    fs::path out_;
    json doc_;
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::vector<std::string> split(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

struct DataInput {
    std::string path;
    std::string label_col;

    io::CsvTable read() const {
        io::CsvReadOptions opts;
        if (!label_col.empty()) opts.label_column = label_col;
        return io::read_csv(path, opts);
    }
};

struct FitFlags {
    int gmin = 1;
    int gmax = 9;
    std::string specs;
    std::string init = "ward";
    std::uint64_t init_seed = 0;
    int max_iter = 1000;
    double tol = 1e-6;
    double jitter = 1e-8;

    void add(CLI::App* app) {
        app->add_option("--gmin", gmin, "smallest number of components")->capture_default_str();
        app->add_option("--gmax", gmax, "largest number of components")->capture_default_str();
        app->add_option("--specs", specs, "comma-separated covariance specs (default: full grid)");
        app->add_option("--init", init, "initialization: ward or kmeans++")
            ->check(CLI::IsMember({"ward", "kmeans++"}))
            ->capture_default_str();
        app->add_option("--init-seed", init_seed, "seed for kmeans++")->capture_default_str();
        app->add_option("--max-iter", max_iter, "EM iteration cap")->capture_default_str();
        app->add_option("--tol", tol, "relative log-likelihood tolerance")->capture_default_str();
        app->add_option("--jitter", jitter, "ridge factor for near-singular covariances")->capture_default_str();
    }

    ModelGrid grid(int d) const {
        if (specs.empty()) return ModelGrid::default_grid(d, gmin, gmax);
        std::vector<CovarianceSpec> list;
        for (const auto& s : split(specs)) list.push_back(CovarianceSpec::parse(s));
        return ModelGrid::with_specs(list, gmin, gmax);
    }

    FitConfig config() const {
        FitConfig cfg;
        cfg.max_iter = max_iter;
        cfg.rel_tol = tol;
        cfg.jitter = jitter;
        if (init == "kmeans++") cfg.init = KMeansPlusPlus{init_seed};
        cfg.validate();
        return cfg;
    }

    json describe(const ModelGrid& g) const {
        json entries = json::array();
        for (const auto& e : g.entries()) entries.push_back(std::string(e.spec.str()) + "/" + std::to_string(e.G));
        return {{"models", entries}, {"size", g.size()}, {"init", init}, {"init_seed", init_seed},
                {"max_iter", max_iter}, {"tol", tol}, {"jitter", jitter}};
    }
};

void print_ranking(const ModelEnsemble& ens, std::size_t top) {
    std::printf("%4s  %-4s %3s %14s %10s\n", "rank", "spec", "G", "BIC", "weight");
    std::size_t k = 0;
    for (const auto& r : ens.records()) {
        if (k++ >= top || !r.ok()) break;
        std::printf("%4zu  %-4s %3d %14.3f %10.4f\n", k, std::string(r.spec.str()).c_str(), r.G, r.fit->bic, r.weight);
    }
    if (ens.successes() < ens.records().size())
        std::printf("%zu of %zu models failed\n", ens.records().size() - ens.successes(), ens.records().size());
}

json model_timings(const ModelEnsemble& ens) {
    json t = json::array();
    for (const auto& r : ens.records())
        t.push_back({{"model", std::string(r.spec.str()) + "/" + std::to_string(r.G)}, {"seconds", r.seconds}});
    return t;
}

// ---- sweep ------------------------------------------------------------------

struct SweepCmd {
    DataInput input;
    FitFlags fit;
    std::string out = "mbma-sweep";
    std::size_t workers = default_workers();

    int run() {
        const auto table = input.read();
        const DataMatrix data(table.values);
        const ModelGrid grid = fit.grid(static_cast<int>(data.cols()));
        const FitConfig cfg = fit.config();
        Manifest m("sweep", out);
        m.input(input.path);
        m["grid"] = fit.describe(grid);
        m["seeds"] = {{"init_seed", fit.init_seed}};
        const ModelEnsemble ens = sweep(data, grid, cfg, SweepOptions{workers, {}});
        const auto written =
            save_ensemble(ens, DataInfo::describe(data, input.path, table.columns), fs::path(out) / "ensemble.json");
        for (const auto& p : written) m.artifact(p);
        m.write("ranking.csv", ranking_csv(ens));
        m["timing"]["models"] = model_timings(ens);
        m.finish();
        print_ranking(ens, 10);
        return 0;
    }
};

// ---- consensus ---------------------------------------------------------------

struct ConsensusCmd {
    std::string ensemble;
    std::string partitions;
    std::string weights;
    std::string order = "seriate";
    double cut_level = -1;
    int model = 0;
    std::string out = "mbma-consensus";
    std::size_t workers = default_workers();

    void emit(Manifest& m, const std::string& tag, const ConsensusMatrix& s) const {
        const Dendrogram dend = complete_linkage(s);
        std::vector<int> ord;
        if (order == "seriate") {
            ord = seriate(dend, s.dissimilarity());
        } else {
            ord.resize(static_cast<std::size_t>(s.size()));
            std::iota(ord.begin(), ord.end(), 0);
        }
        const Heatmap h = heatmap_render(s, ord);
        m.write("consensus_" + tag + ".csv", h.csv());
        m.write("heatmap_" + tag + ".pgm", h.pgm());
        m.write("heatmap_" + tag + ".ppm", h.ppm());
        m.write("dendrogram_" + tag + ".txt", dend.to_text());
        if (cut_level >= 0) {
            std::string csv = "observation,group\n";
            const auto groups = cut(dend, cut_level);
            std::vector<int> group_of(static_cast<std::size_t>(s.size()));
            for (std::size_t g = 0; g < groups.size(); ++g)
                for (int i : groups[g]) group_of[static_cast<std::size_t>(i)] = static_cast<int>(g) + 1;
            for (std::size_t i = 0; i < group_of.size(); ++i)
                csv += std::to_string(i + 1) + "," + std::to_string(group_of[i]) + "\n";
            m.write("partition_" + tag + ".csv", csv);
            std::printf("%s: %zu groups at level %g\n", tag.c_str(), groups.size(), cut_level);
        }
    }

    int run() {
        if (ensemble.empty() == partitions.empty()) throw InputError("give exactly one of --ensemble or --partitions");
        if (cut_level > 1.0) throw InputError("--cut must lie in [0,1]");
        Manifest m("consensus", out);
        m["options"] = {{"order", order}, {"cut", cut_level}, {"model", model}};
        if (!partitions.empty()) {
            // Columns of hard labels, one clustering per column.
            m.input(partitions);
            const auto table = io::read_csv(partitions);
            const auto M = static_cast<std::size_t>(table.values.cols());
            std::vector<double> w(M, 1.0 / static_cast<double>(M));
            if (!weights.empty()) {
                w.clear();
                for (const auto& s : split(weights)) w.push_back(std::stod(s));
                if (w.size() != M) throw InputError("--weights must have one entry per partition column");
            }
            std::vector<ResponsibilityMatrix> zs;
            for (std::size_t c = 0; c < M; ++c) {
                std::vector<int> labels;
                int G = 0;
                for (Index i = 0; i < table.values.rows(); ++i) {
                    const double v = table.values(i, static_cast<Index>(c));
                    if (v < 1 || v != std::floor(v)) throw InputError("partition labels must be positive integers");
                    labels.push_back(static_cast<int>(v) - 1);
                    G = std::max(G, labels.back() + 1);
                }
                zs.push_back(ResponsibilityMatrix::from_labels(labels, G));
            }
            std::vector<WeightedResponsibility> models;
            for (std::size_t c = 0; c < M; ++c) models.push_back({w[c], &zs[c]});
            emit(m, "bma", bma_consensus(models, workers));
        } else {
            m.input(ensemble);
            const SavedEnsemble saved = load_ensemble(ensemble);
            emit(m, "bma", bma_consensus(saved.ensemble, workers));
            if (model > 0) {
                if (static_cast<std::size_t>(model) > saved.ensemble.successes())
                    throw InputError("--model exceeds the number of fitted models");
                const auto& r = saved.ensemble.records()[static_cast<std::size_t>(model - 1)];
                m["single_model"] = std::string(r.spec.str()) + "/" + std::to_string(r.G);
                emit(m, "model", similarity(r.fit->z, workers));
            }
        }
        m.finish();
        return 0;
    }
};

// ---- density -------------------------------------------------------------------

struct DensityCmd {
    DataInput input;
    std::string ensemble;
    std::string grid_out;
    std::string eval;
    FitFlags fit;
    int nodes = 100;
    int n = 250;
    std::uint64_t seed = 1;
    long kl_samples = 100000;
    long mise_samples = 100000;
    std::string out = "mbma-density";
    std::size_t workers = default_workers();

    int run() {
        if (grid_out.empty() == eval.empty()) throw InputError("give exactly one of --grid-out or --eval");
        Manifest m("density", out);
        m["seeds"] = {{"seed", seed}};

        std::optional<DataMatrix> data;
        std::vector<std::string> columns;
        std::optional<MixtureParams> truth;
        if (!input.path.empty()) {
            auto table = input.read();
            data.emplace(table.values);
            columns = table.columns;
            m.input(input.path);
        }
        if (!eval.empty()) {
            truth = resolve_truth(eval);
            if (!data) data.emplace(sample(*truth, n, seed).values());
            if (data->cols() != truth->dim()) throw InputError("data dimension does not match the truth density");
        }

        std::optional<ModelEnsemble> ens;
        if (!ensemble.empty()) {
            m.input(ensemble);
            ens.emplace(load_ensemble(ensemble).ensemble);
        } else if (data) {
            const ModelGrid grid = fit.grid(static_cast<int>(data->cols()));
            m["grid"] = fit.describe(grid);
            ens.emplace(sweep(*data, grid, fit.config(), SweepOptions{workers, {}}));
        } else {
            throw InputError("need --data or --ensemble");
        }
        if (data && data->cols() != ens->d()) throw InputError("data and ensemble differ in dimension");

        const DensityEstimate bma = DensityEstimate::bma(*ens);
        const DensityEstimate sm = DensityEstimate::single_model(*ens);
        std::optional<DensityEstimate> kde;
        if (data) kde.emplace(DensityEstimate::kernel(*data, kde_bandwidth(*data)));

        if (!grid_out.empty()) {
            if (ens->d() != 2) throw InputError("--grid-out needs two-dimensional data");
            Vector lo, hi;
            if (data) {
                lo = data->values().colwise().minCoeff().transpose();
                hi = data->values().colwise().maxCoeff().transpose();
            } else {
                const auto info = load_ensemble(ensemble).data;
                lo = info.min;
                hi = info.max;
            }
            const Vector pad = 0.1 * (hi - lo);
            std::vector<const DensityEstimate*> est{&bma, &sm};
            std::vector<std::string> names{"bma", "sm"};
            if (kde) {
                est.push_back(&*kde);
                names.push_back("kde");
            }
            m.write(grid_out, contour_grid_csv(est, names, lo(0) - pad(0), hi(0) + pad(0), lo(1) - pad(1),
                                               hi(1) + pad(1), nodes, workers));
        } else {
            if (!kde) throw InputError("--eval needs data for the kernel estimate");
            std::string csv = eval_csv_header();
            for (const DensityEstimate* e : std::vector<const DensityEstimate*>{&bma, &sm, &*kde}) {
                MiseOptions mo;
                mo.seed = seed;
                mo.mc_samples = mise_samples;
                mo.workers = workers;
                EvalEntry mise = estimate_mise(*truth, *e, mo);
                KlOptions ko;
                ko.seed = seed;
                ko.n_mc = kl_samples;
                ko.workers = workers;
                EvalEntry kl = estimate_kl(*truth, *e, ko);
                mise.truth_id = kl.truth_id = eval;
                csv += eval_csv_row(mise) + eval_csv_row(kl);
                if (kl.clamped > 0)
                    std::fprintf(stderr, "warning: %s density floored at %ld KL sample points\n",
                                 kl.estimator.c_str(), kl.clamped);
            }
            m.write("eval.csv", csv);
            std::fputs(csv.c_str(), stdout);
        }
        m.finish();
        return 0;
    }
};

// ---- bench -----------------------------------------------------------------------

struct BenchCmd {
    std::string densities = "all";
    int replicates = 25;
    int n = 250;
    std::uint64_t seed = 1;
    int dims = 0;
    long kl_samples = 10000;
    long mise_samples = 100000;
    std::string out = "mbma-bench";
    std::size_t workers = default_workers();

    int run() {
        BenchConfig cfg;
        cfg.densities = densities == "all" ? catalog_ids() : split(densities);
        cfg.replicates = replicates;
        cfg.n = n;
        cfg.seed = seed;
        cfg.pad_to = dims;
        cfg.kl_samples = kl_samples;
        cfg.mise_samples = mise_samples;
        cfg.workers = workers;
        Manifest m("bench", out);
        m["config"] = {{"densities", cfg.densities}, {"replicates", replicates}, {"n", n}, {"dims", dims},
                       {"kl_samples", kl_samples}, {"mise_samples", mise_samples}};
        const BenchResult res = run_bench(cfg);
        json seeds = json::array();
        json timing = json::array();
        for (const auto& r : res.replicates) {
            seeds.push_back({{"density", r.density}, {"replicate", r.replicate}, {"seed", r.seed}});
            timing.push_back(r.seconds);
        }
        m["seeds"] = {{"experiment_seed", seed}, {"replicates", seeds}};
        m["timing"]["replicates"] = timing;
        m.write("bench.csv", bench_table_csv(res));
        m.write("replicates.csv", bench_replicates_csv(res));
        m.finish();
        std::fputs(bench_table_csv(res).c_str(), stdout);
        return 0;
    }
};

// ---- simulate ----------------------------------------------------------------------

struct SimulateCmd {
    std::string density;
    int n = 250;
    std::uint64_t seed = 1;
    std::uint32_t replicate = 0;
    int dims = 0;
    std::string out = "sample.csv";

    int run() {
        MixtureParams p = resolve_truth(density);
        if (dims > p.dim()) p = extend(p, Padding{dims - p.dim()});
        const DataMatrix data = sample(p, n, seed, replicate);
        std::vector<std::string> header;
        for (int j = 0; j < p.dim(); ++j) header.push_back("x" + std::to_string(j + 1));
        const std::string text = "# density=" + density + " n=" + std::to_string(n) + " seed=" +
                                 std::to_string(seed) + " replicate=" + std::to_string(replicate) + "\n" +
                                 io::matrix_to_csv(data.values(), header);
        const fs::path path(out);
        io::write_file(path, text);
        Manifest m("simulate", path.parent_path().empty() ? fs::path(".") : path.parent_path());
        m["seeds"] = {{"seed", seed}, {"replicate", replicate}};
        m["config"] = {{"density", density}, {"n", n}, {"dims", p.dim()}};
        m.artifact(path);
        m.finish();
        return 0;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model-averaged Gaussian mixture clustering and density estimation"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    SweepCmd sw;
    auto* s = app.add_subcommand("sweep", "fit the model grid to a CSV and rank by BIC");
    s->add_option("csv", sw.input.path, "input CSV")->required();
    s->add_option("--label-col", sw.input.label_col, "column to exclude (name or 1-based index)");
    sw.fit.add(s);
    s->add_option("--out", sw.out, "output directory")->capture_default_str();
    s->add_option("--workers", sw.workers, "worker threads (env MBMA_WORKERS)");

    ConsensusCmd co;
    auto* c = app.add_subcommand("consensus", "consensus matrix, heatmap and dendrogram");
    c->add_option("--ensemble", co.ensemble, "ensemble JSON written by sweep");
    c->add_option("--partitions", co.partitions, "CSV with one hard clustering (labels 1..G) per column");
    c->add_option("--weights", co.weights, "comma-separated weights for --partitions");
    c->add_option("--order", co.order, "heatmap order")->check(CLI::IsMember({"given", "seriate"}))->capture_default_str();
    c->add_option("--cut", co.cut_level, "emit groups co-clustering with at least this probability");
    c->add_option("--model", co.model, "also emit the single-model consensus of the k-th ranked model");
    c->add_option("--out", co.out, "output directory")->capture_default_str();
    c->add_option("--workers", co.workers, "worker threads (env MBMA_WORKERS)");

    DensityCmd de;
    auto* d = app.add_subcommand("density", "density grids or evaluation against a known truth");
    d->add_option("--data", de.input.path, "input CSV");
    d->add_option("--label-col", de.input.label_col, "column to exclude");
    d->add_option("--ensemble", de.ensemble, "ensemble JSON (otherwise the data are swept)");
    d->add_option("--grid-out", de.grid_out, "contour grid CSV file name (2D only)");
    d->add_option("--nodes", de.nodes, "grid nodes per axis")->capture_default_str();
    d->add_option("--eval", de.eval, "truth density id");
    d->add_option("--n", de.n, "sample size drawn from the truth when no data are given")->capture_default_str();
    d->add_option("--seed", de.seed, "experiment seed")->capture_default_str();
    d->add_option("--kl-samples", de.kl_samples, "Monte Carlo draws for KL")->capture_default_str();
    d->add_option("--mise-samples", de.mise_samples, "Monte Carlo draws for MISE when d > 2")->capture_default_str();
    de.fit.add(d);
    d->add_option("--out", de.out, "output directory")->capture_default_str();
    d->add_option("--workers", de.workers, "worker threads (env MBMA_WORKERS)");

    BenchCmd be;
    auto* b = app.add_subcommand("bench", "simulation benchmark of BMA, single-model and kernel estimates");
    b->add_option("--densities", be.densities, "comma-separated truth ids, or 'all'")->capture_default_str();
    b->add_option("--replicates", be.replicates, "replicates per density")->capture_default_str();
    b->add_option("--n", be.n, "observations per replicate")->capture_default_str();
    b->add_option("--seed", be.seed, "experiment seed")->capture_default_str();
    b->add_option("--dims", be.dims, "pad bivariate truths with standard normal columns up to this dimension");
    b->add_option("--kl-samples", be.kl_samples, "Monte Carlo draws for KL")->capture_default_str();
    b->add_option("--mise-samples", be.mise_samples, "Monte Carlo draws for MISE when d > 2")->capture_default_str();
    b->add_option("--out", be.out, "output directory")->capture_default_str();
    b->add_option("--workers", be.workers, "worker threads (env MBMA_WORKERS)");

    SimulateCmd si;
    auto* m = app.add_subcommand("simulate", "draw a seeded sample from a catalog density");
    m->add_option("--density", si.density, "truth id")->required();
    m->add_option("--n", si.n, "observations")->capture_default_str();
    m->add_option("--seed", si.seed, "experiment seed")->capture_default_str();
    m->add_option("--replicate", si.replicate, "replicate index")->capture_default_str();
    m->add_option("--dims", si.dims, "pad with standard normal columns up to this dimension");
    m->add_option("--out", si.out, "output CSV")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*s) return sw.run();
        if (*c) return co.run();
        if (*d) return de.run();
        if (*b) return be.run();
        if (*m) return si.run();
    } catch (const InputError& e) {
        std::fprintf(stderr, "mbma: input error: %s\n", e.what());
        return 2;
    } catch (const InitError& e) {
        std::fprintf(stderr, "mbma: %s\n", e.what());
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "mbma: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mbma: %s\n", e.what());
        return 3;
    }
    return 0;
}
