#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mbma/selection.hpp"

namespace mbma {

// Identifies the data an ensemble was fitted to.
struct DataInfo {
    Index n = 0;
    Index d = 0;
    std::string sha256;
    std::string source;                // path of the input CSV, if any
    std::vector<std::string> columns;
    Vector min, max;                   // per-column range

    static DataInfo describe(const DataMatrix& data, std::string source = {},
                             std::vector<std::string> columns = {});
};

struct SavedEnsemble {
    ModelEnsemble ensemble;
    DataInfo data;
};

// Writes the ensemble JSON document and, next to it, a Z store directory
// (`<stem>.z/`) holding one little-endian float64 row-major matrix per fitted
// model with a JSON sidecar {N, G, spec, dtype}. Returns the written paths.
std::vector<std::filesystem::path> save_ensemble(const ModelEnsemble& ensemble, const DataInfo& data,
                                                 const std::filesystem::path& json_path);

// Reads an ensemble back, including the Z store. A missing or inconsistent
// store raises InputError.
SavedEnsemble load_ensemble(const std::filesystem::path& json_path);

// rank, spec, G, loglik, kappa, bic, weight, iterations, converged, status;
// one row per grid model in ensemble order, failures with empty fit columns.
std::string ranking_csv(const ModelEnsemble& ensemble);

}  // namespace mbma
