#include "mbma/simgen.hpp"

#include <charconv>
#include <cmath>

namespace mbma {

namespace {

// Bivariate component with equal variances and covariance c: [[v, c], [c, v]].
struct Row {
    Rational tau;
    double m1, m2;
    double v, c;
};

struct Table {
    const char* id;
    std::vector<Row> rows;
};

const std::vector<Table>& tables() {
    static const std::vector<Table> t = {
        {"gaussian", {{{1, 1}, 0, 0, 1.25, 0.75}}},
        {"skewed_unimodal",
         {{{1, 5}, 0, 0, 1.25, 0.75},
          {{1, 5}, 0.3535534, 0.3535534, 0.6804138, 0.4082483},
          {{3, 5}, 0.7660323, 0.7660323, 0.5176083, 0.3105650}}},
        {"strongly_skewed",
         {{{1, 8}, 0, 0, 1.25, 0.75},
          {{1, 8}, -0.7071068, -0.7071068, 0.5555556, 0.3333333},
          {{1, 8}, -1.178511, -1.178511, 0.2469136, 0.1481481},
          {{1, 8}, -1.492781, -1.492781, 0.10973937, 0.06584362},
          {{1, 8}, -1.702294, -1.702294, 0.04877305, 0.02926383},
          {{1, 8}, -1.84197, -1.84197, 0.02167691, 0.01300615},
          {{1, 8}, -1.935086, -1.935086, 0.009634183, 0.005780510},
          {{1, 8}, -1.997164, -1.997164, 0.004281859, 0.002569116}}},
        {"kurtotic",
         {{{2, 3}, 0, 0, 1.25, 0.75},
          {{1, 3}, 0, 0, 0.03952847, 0.02371708}}},
        {"outlier",
         {{{1, 10}, 0, 0, 1.25, 0.75},
          {{9, 10}, 0, 0, 0.03952847, 0.02371708}}},
        {"bimodal",
         {{{1, 2}, -0.5303301, -0.5303301, 0.6804138, -0.4082483},
          {{1, 2}, 0.5303301, 0.5303301, 0.6804138, -0.4082483}}},
        {"separated_bimodal",
         {{{1, 2}, -1.06066, -1.06066, 0.6804138, -0.4082483},
          {{1, 2}, 1.06066, 1.06066, 0.6804138, -0.4082483}}},
        {"asymmetric_bimodal",
         {{{3, 4}, 0, 0, 1.25, -0.75},
          {{1, 4}, 0.7071068, 0.7071068, 0.13888889, -0.08333333}}},
        {"trimodal",
         {{{2, 5}, -0.8485281, -0.8485281, 0.5809475, -0.3485685},
          {{2, 5}, 0.8485281, 0.8485281, 0.5809475, -0.3485685},
          {{1, 5}, 0, 0, 0.15625, -0.09375}}},
        {"claw",
         {{{2, 7}, 0, 0, 0.625, 0.375},
          {{1, 7}, -0.7071068, -0.7071068, 0.03952847, -0.02371708},
          {{1, 7}, -0.3535534, -0.3535534, 0.03952847, -0.02371708},
          {{1, 7}, 0, 0, 0.03952847, -0.02371708},
          {{1, 7}, 0.3535534, 0.3535534, 0.03952847, -0.02371708},
          {{1, 7}, 0.7071068, 0.7071068, 0.03952847, -0.02371708}}},
    };
    return t;
}

}  // namespace

const std::vector<std::string>& catalog_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto& t : tables()) v.emplace_back(t.id);
        return v;
    }();
    return ids;
}

DensityCatalogEntry catalog_entry(std::string_view id) {
    for (const auto& t : tables()) {
        if (id != t.id) continue;
        const auto G = static_cast<Index>(t.rows.size());
        Vector tau(G);
        std::vector<Vector> means;
        std::vector<Matrix> covs;
        std::vector<Rational> weights;
        for (Index g = 0; g < G; ++g) {
            const auto& r = t.rows[static_cast<std::size_t>(g)];
            tau(g) = r.tau.value();
            weights.push_back(r.tau);
            means.push_back((Vector(2) << r.m1, r.m2).finished());
            covs.push_back((Matrix(2, 2) << r.v, r.c, r.c, r.v).finished());
        }
        tau /= tau.sum();
        return {t.id, std::move(weights), MixtureParams::from_covariances(tau, std::move(means), std::move(covs))};
    }
    throw InputError("unknown density id '" + std::string(id) + "'");
}

MixtureParams catalog(std::string_view id) { return catalog_entry(id).params; }

MixtureParams bimodal_kd(int dim, double separation) {
    double offset = 0.0;
    // tabulated mean offsets along x1 = x2
    if (separation == 1.5)
        offset = 0.5303301;
    else if (separation == 3.0)
        offset = 1.06066;
    else if (separation == 5.0)
        offset = 1.767767;
    else
        throw InputError("unsupported bimodal separation " + std::to_string(separation));
    Matrix cov;
    if (dim == 3) {
        cov = Matrix::Zero(3, 3);
        cov.topLeftCorner(2, 2) << 1.5, -0.5, -0.5, 1.5;
        cov(2, 2) = 0.5;
    } else if (dim == 6) {
        cov = Matrix::Zero(6, 6);
        cov.topLeftCorner(2, 2) << 3.0, 1.0, 1.0, 3.0;
        cov(2, 2) = 1.0;
        cov(3, 3) = 1.0;
        cov(4, 4) = 0.5;
        cov(5, 5) = 0.25;
    } else {
        throw InputError("unsupported bimodal dimension " + std::to_string(dim));
    }
    Vector m1 = Vector::Zero(dim), m2 = Vector::Zero(dim);
    m1.head(2).setConstant(-offset);
    m2.head(2).setConstant(offset);
    return MixtureParams::from_covariances(Vector::Constant(2, 0.5), {m1, m2}, {cov, cov});
}

MixtureParams extend(const MixtureParams& base, const ExtensionSpec& spec) {
    if (const auto* b = std::get_if<BimodalKd>(&spec)) return bimodal_kd(b->dim, b->separation);
    const int pad = std::get<Padding>(spec).dims;
    if (pad < 0) throw InputError("padding must be non-negative");
    const int d = base.dim();
    std::vector<Vector> means;
    std::vector<Matrix> covs;
    for (int g = 0; g < base.components(); ++g) {
        Vector m = Vector::Zero(d + pad);
        m.head(d) = base.mean(g);
        Matrix c = Matrix::Identity(d + pad, d + pad);
        c.topLeftCorner(d, d) = base.covariance(g);
        means.push_back(std::move(m));
        covs.push_back(std::move(c));
    }
    return MixtureParams::from_covariances(base.weights(), std::move(means), std::move(covs));
}

MixtureParams resolve_truth(std::string_view token) {
    auto parse_double = [&](std::string_view s) {
        double v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size()) throw InputError("bad number in density token '" + std::string(token) + "'");
        return v;
    };
    for (int dim : {3, 6}) {
        const std::string prefix = "bimodal" + std::to_string(dim) + "d:";
        if (token.starts_with(prefix)) return bimodal_kd(dim, parse_double(token.substr(prefix.size())));
    }
    if (const auto plus = token.find("+pad"); plus != std::string_view::npos) {
        const auto k = parse_double(token.substr(plus + 4));
        if (k < 0 || k != std::floor(k)) throw InputError("bad padding in '" + std::string(token) + "'");
        return extend(catalog(token.substr(0, plus)), Padding{static_cast<int>(k)});
    }
    return catalog(token);
}

LabelledSample sample_labelled(const MixtureParams& params, int n, Philox4x32& rng) {
    if (n < 1) throw InputError("sample size must be >= 1");
    const int G = params.components();
    const int d = params.dim();
    std::vector<Matrix> chol;
    for (int g = 0; g < G; ++g) chol.push_back(Eigen::LLT<Matrix>(params.covariance(g)).matrixL());
    LabelledSample out{Matrix(n, d), std::vector<int>(static_cast<std::size_t>(n))};
    Vector z(d);
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        int g = 0;
        double acc = params.weight(0);
        while (g + 1 < G && u >= acc) acc += params.weight(++g);
        for (int k = 0; k < d; ++k) z(k) = rng.normal();
        out.values.row(i) = (params.mean(g) + chol[static_cast<std::size_t>(g)] * z).transpose();
        out.labels[static_cast<std::size_t>(i)] = g;
    }
    return out;
}

DataMatrix sample(const MixtureParams& params, int n, std::uint64_t seed, std::uint32_t replicate) {
    Philox4x32 rng = make_stream(seed, replicate, StreamRole::Data);
    return DataMatrix(sample_labelled(params, n, rng).values);
}

}  // namespace mbma
