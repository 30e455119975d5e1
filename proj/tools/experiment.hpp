#pragma once

#include <optional>
#include <string>

#include "exp_config.hpp"

namespace mse::cli {

struct RunOptions {
    std::string out_dir;
    int jobs = 0;  // 0 = auto (min(4, hardware))
    std::optional<std::uint64_t> seed_override;
    bool quiet = false;
};

struct RunResult {
    std::string report_path;
    std::string manifest_path;
};

// Full pipeline, per seed: data generation, base pretraining, Single and
// Multi regimes, configured ablations, mono + cross evaluation, consolidated
// report and manifest. Deterministic per (config, seed) regardless of jobs.
RunResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts);

// Re-checks every artifact digest recorded in a manifest. Throws on mismatch.
void verify_manifest(const std::string& manifest_path);

}  // namespace mse::cli
