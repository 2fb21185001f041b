#include "mbma/ensemble_io.hpp"

#include <json.hpp>

#include "mbma/io.hpp"

namespace mbma {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kFormat = "mbma-ensemble/1";

json vec_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json mat_json(const Matrix& m) {
    json rows = json::array();
    for (Index i = 0; i < m.rows(); ++i) rows.push_back(vec_json(m.row(i).transpose()));
    return rows;
}

Vector json_vec(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vector>(v.data(), static_cast<Index>(v.size()));
}

Matrix json_mat(const json& j) {
    Matrix m(static_cast<Index>(j.size()), j.empty() ? 0 : static_cast<Index>(j[0].size()));
    for (Index i = 0; i < m.rows(); ++i) m.row(i) = json_vec(j[static_cast<std::size_t>(i)]).transpose();
    return m;
}

json params_json(const MixtureParams& p) {
    json means = json::array(), covs = json::array();
    for (int g = 0; g < p.components(); ++g) {
        means.push_back(vec_json(p.mean(g)));
        covs.push_back(mat_json(p.covariance(g)));
    }
    return {{"tau", vec_json(p.weights())}, {"mean", means}, {"covariance", covs}};
}

MixtureParams json_params(const json& j) {
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (const auto& m : j.at("mean")) means.push_back(json_vec(m));
    for (const auto& c : j.at("covariance")) covs.push_back(json_mat(c));
    return MixtureParams::from_covariances(json_vec(j.at("tau")), std::move(means), std::move(covs));
}

std::string z_name(const ModelRecord& r) { return std::string(r.spec.str()) + "_" + std::to_string(r.G); }

}  // namespace

DataInfo DataInfo::describe(const DataMatrix& data, std::string source, std::vector<std::string> columns) {
    DataInfo info;
    info.n = data.rows();
    info.d = data.cols();
    info.sha256 = io::data_fingerprint(data);
    info.source = std::move(source);
    if (columns.empty())
        for (Index j = 0; j < data.cols(); ++j) columns.push_back("V" + std::to_string(j + 1));
    info.columns = std::move(columns);
    info.min = data.values().colwise().minCoeff().transpose();
    info.max = data.values().colwise().maxCoeff().transpose();
    return info;
}

std::vector<fs::path> save_ensemble(const ModelEnsemble& ensemble, const DataInfo& data, const fs::path& json_path) {
    std::vector<fs::path> written;
    const fs::path store_rel = json_path.stem().string() + ".z";
    const fs::path store = json_path.parent_path() / store_rel;
    fs::create_directories(store);

    json models = json::array();
    for (const auto& r : ensemble.records()) {
        json m = {{"spec", std::string(r.spec.str())}, {"G", r.G}, {"prior", r.prior}, {"weight", r.weight},
                  {"grid_index", r.grid_index}};
        if (r.ok()) {
            const auto& f = *r.fit;
            const std::string name = z_name(r);
            const fs::path bin = store / (name + ".bin");
            const fs::path side = store / (name + ".json");
            io::write_matrix_binary(bin, f.z.values());
            const json sidecar = {{"N", f.z.rows()}, {"G", f.G}, {"spec", std::string(r.spec.str())},
                                  {"dtype", "float64-le"}, {"order", "row-major"}};
            io::write_file(side, sidecar.dump(2) + "\n");
            written.push_back(bin);
            written.push_back(side);
            m.update({{"kappa", f.kappa}, {"loglik", f.loglik}, {"bic", f.bic}, {"converged", f.converged},
                      {"iterations", f.iterations}, {"jittered", f.jittered}, {"params", params_json(f.params)},
                      {"z_file", (store_rel / (name + ".bin")).generic_string()}});
        } else {
            m["failed"] = r.failure;
        }
        models.push_back(std::move(m));
    }
    const json doc = {{"format", kFormat},
                      {"data", {{"n", data.n}, {"d", data.d}, {"sha256", data.sha256}, {"source", data.source},
                                {"columns", data.columns}, {"min", vec_json(data.min)}, {"max", vec_json(data.max)}}},
                      {"models", models}};
    io::write_file(json_path, doc.dump(2) + "\n");
    written.insert(written.begin(), json_path);
    return written;
}

SavedEnsemble load_ensemble(const fs::path& json_path) {
    json doc;
    try {
        doc = json::parse(io::read_file(json_path));
    } catch (const json::exception& e) {
        throw InputError("cannot parse ensemble JSON '" + json_path.string() + "': " + e.what());
    }
    try {
        if (doc.at("format") != kFormat) throw InputError("unsupported ensemble format");
        const auto& dj = doc.at("data");
        DataInfo info;
        info.n = dj.at("n").get<Index>();
        info.d = dj.at("d").get<Index>();
        info.sha256 = dj.at("sha256").get<std::string>();
        info.source = dj.at("source").get<std::string>();
        info.columns = dj.at("columns").get<std::vector<std::string>>();
        info.min = json_vec(dj.at("min"));
        info.max = json_vec(dj.at("max"));

        std::vector<ModelRecord> records;
        for (const auto& m : doc.at("models")) {
            ModelRecord r{CovarianceSpec::parse(m.at("spec").get<std::string>()), m.at("G").get<int>(), std::nullopt,
                          {}, m.at("prior").get<double>(), m.at("weight").get<double>(), 0.0,
                          m.at("grid_index").get<std::size_t>()};
            if (m.contains("failed")) {
                r.failure = m.at("failed").get<std::string>();
            } else {
                const fs::path bin = json_path.parent_path() / m.at("z_file").get<std::string>();
                if (!fs::exists(bin)) throw InputError("missing Z store file '" + bin.string() + "'");
                Matrix z = io::read_matrix_binary(bin, info.n, r.G);
                r.fit = FittedModel{r.spec,
                                    r.G,
                                    json_params(m.at("params")),
                                    ResponsibilityMatrix(std::move(z)),
                                    m.at("loglik").get<double>(),
                                    m.at("kappa").get<long>(),
                                    m.at("bic").get<double>(),
                                    m.at("iterations").get<int>(),
                                    m.at("converged").get<bool>(),
                                    m.at("jittered").get<bool>(),
                                    {}};
            }
            records.push_back(std::move(r));
        }
        return {ModelEnsemble(std::move(records), info.n, info.d), std::move(info)};
    } catch (const json::exception& e) {
        throw InputError("malformed ensemble JSON '" + json_path.string() + "': " + e.what());
    }
}

std::string ranking_csv(const ModelEnsemble& ens) {
    std::string out = "rank,spec,G,loglik,kappa,bic,weight,iterations,converged,status\n";
    int rank = 0;
    for (const auto& r : ens.records()) {
        out += std::to_string(++rank) + "," + std::string(r.spec.str()) + "," + std::to_string(r.G) + ",";
        if (r.ok()) {
            const auto& f = *r.fit;
            out += io::format_double(f.loglik) + "," + std::to_string(f.kappa) + "," + io::format_double(f.bic) +
                   "," + io::format_double(r.weight) + "," + std::to_string(f.iterations) + "," +
                   (f.converged ? "1" : "0") + ",ok\n";
        } else {
            out += ",,,0,,,failed\n";
        }
    }
    return out;
}

}  // namespace mbma
