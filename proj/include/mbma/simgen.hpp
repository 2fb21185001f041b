#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mbma/mixture.hpp"
#include "mbma/rng.hpp"

namespace mbma {

struct Rational {
    long num;
    long den;
    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
};

// One of the ten bivariate benchmark mixtures. Weights are kept as exact
// rationals; means and covariances are the tabulated decimal constants.
struct DensityCatalogEntry {
    std::string id;
    std::vector<Rational> weights;
    MixtureParams params;
};

// gaussian, skewed_unimodal, strongly_skewed, kurtotic, outlier, bimodal,
// separated_bimodal, asymmetric_bimodal, trimodal, claw
const std::vector<std::string>& catalog_ids();
DensityCatalogEntry catalog_entry(std::string_view id);
MixtureParams catalog(std::string_view id);

struct Padding {
    int dims;  // standard normal columns appended to every component
};
struct BimodalKd {
    int dim;            // 3 or 6
    double separation;  // 1.5, 3 or 5
};
using ExtensionSpec = std::variant<Padding, BimodalKd>;

MixtureParams extend(const MixtureParams& base, const ExtensionSpec& spec);
MixtureParams bimodal_kd(int dim, double separation);

// Resolves "<id>", "<id>+pad<k>" or "bimodal<d>d:<sep>".
MixtureParams resolve_truth(std::string_view token);

struct LabelledSample {
    Matrix values;
    std::vector<int> labels;
};

// Draws the component from tau, then mu_g + L_g z with z standard normal.
LabelledSample sample_labelled(const MixtureParams& params, int n, Philox4x32& rng);
DataMatrix sample(const MixtureParams& params, int n, std::uint64_t seed, std::uint32_t replicate = 0);

}  // namespace mbma
