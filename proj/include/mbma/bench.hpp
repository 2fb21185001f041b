#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mbma/density.hpp"

namespace mbma {

struct BenchConfig {
    std::vector<std::string> densities;  // truth tokens, see resolve_truth
    int replicates = 25;
    int n = 250;
    std::uint64_t seed = 1;
    int pad_to = 0;          // append standard normal columns up to this dimension
    long kl_samples = 10000;
    long mise_samples = 100000;  // Monte Carlo MISE, d >= 3
    std::size_t workers = 1;
};

// One simulated dataset. Density k of the list uses experiment seed
// `seed + k`; replicate r is the stream's replicate index.
struct BenchReplicate {
    std::string density;
    int replicate = 0;
    std::uint64_t seed = 0;
    bool ok = false;
    std::string failure;
    double mise[3] = {0, 0, 0};  // KDE, SM, BMA
    double kl[3] = {0, 0, 0};
    long clamped[3] = {0, 0, 0};
    double seconds = 0;
};

struct BenchRow {
    std::string density;
    double mean_mise[3] = {0, 0, 0};
    double mean_kl[3] = {0, 0, 0};
    int ok = 0;
    int failures = 0;

    double ks_bma_mise() const { return mean_mise[0] / mean_mise[2]; }
    double sm_bma_mise() const { return mean_mise[1] / mean_mise[2]; }
    double ks_bma_kl() const { return mean_kl[0] / mean_kl[2]; }
    double sm_bma_kl() const { return mean_kl[1] / mean_kl[2]; }
};

struct BenchResult {
    std::vector<BenchReplicate> replicates;  // density-major, replicate-minor
    std::vector<BenchRow> rows;
};

// Replicate fits that fail are recorded and left out of the means.
BenchResult run_bench(const BenchConfig& cfg);

// density, KS/BMA MISE, KS/BMA KL, SM/BMA MISE, SM/BMA KL, replicates, failures
std::string bench_table_csv(const BenchResult& result);
std::string bench_replicates_csv(const BenchResult& result);

}  // namespace mbma
