#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include "mbma/io.hpp"
#include "mbma/mixture.hpp"
#include "mbma/rng.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return MBMA_SOURCE_DIR; }
inline std::filesystem::path iris_path() { return source_dir() / "data" / "iris.csv"; }

inline mbma::DataMatrix iris() {
    mbma::io::CsvReadOptions opts;
    opts.label_column = "Species";
    return mbma::DataMatrix(mbma::io::read_csv(iris_path(), opts).values);
}

inline std::filesystem::path scratch_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("mbma_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

// Bivariate normal density written out by hand, independent of the library.
inline double bvn(double x, double y, double m1, double m2, double s11, double s12, double s22) {
    const double det = s11 * s22 - s12 * s12;
    const double dx = x - m1, dy = y - m2;
    const double q = (s22 * dx * dx - 2 * s12 * dx * dy + s11 * dy * dy) / det;
    return std::exp(-0.5 * q) / (2 * std::numbers::pi * std::sqrt(det));
}

// Random matrix with entries uniform in [lo, hi).
inline mbma::Matrix random_matrix(mbma::Philox4x32& rng, mbma::Index r, mbma::Index c, double lo = 0, double hi = 1) {
    mbma::Matrix m(r, c);
    for (mbma::Index i = 0; i < r; ++i)
        for (mbma::Index j = 0; j < c; ++j) m(i, j) = lo + (hi - lo) * rng.uniform();
    return m;
}

// Random row-stochastic matrix.
inline mbma::Matrix random_z(mbma::Philox4x32& rng, mbma::Index n, mbma::Index g) {
    mbma::Matrix z = random_matrix(rng, n, g, 0.01, 1.0);
    for (mbma::Index i = 0; i < n; ++i) z.row(i) /= z.row(i).sum();
    return z;
}

}  // namespace testing
