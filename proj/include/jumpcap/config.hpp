#pragma once

#include "jumpcap/bsde.hpp"
#include "jumpcap/model.hpp"
#include "jumpcap/policy.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace jumpcap {

/// Everything a run needs: model constants, grid, solver blocks, selector
/// spec and run options. Defaults reproduce the reference configuration.
struct ExperimentConfig {
    ModelParams model;
    int grid_steps = 50;
    BsdeTrainConfig bsde;
    ControlTrainConfig control;
    int selector_points = 20;
    bool oracle_mode = false;
    std::uint64_t mc_paths = 1000000;
    int sim_paths = 20;
    double threshold = 1.58;
    std::uint64_t seed = 1;
    double scale = 1.0;
    Scheme scheme = Scheme::euler;
    int threads = 0; // 0 = hardware concurrency
    std::string out_dir = "out";
    std::string policy_file;

    TimeGrid grid() const { return {grid_steps, model.T}; }
    void validate() const;
};

/// Parses the key-value config format ([section] headers, `key = value`
/// lines, # comments) or, when the text starts with '{', the equivalent
/// nested JSON. Unknown keys are rejected with their key path; missing keys
/// fall back to the defaults and are reported through `notices` (one line
/// per filled key) when it is non-null.
ExperimentConfig parse_config(const std::string& text, std::string* notices = nullptr);

/// Loads a config file; missing-key notices go to stderr.
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical key-value rendering; load(emit(c)) == c and doubles round-trip
/// bit-exactly.
std::string emit_config(const ExperimentConfig& config);

/// FNV-1a hash of the canonical rendering, as a fixed-width hex string.
std::string config_hash(const ExperimentConfig& config);

const char* scheme_name(Scheme scheme);
Scheme scheme_from(const std::string& name);

} // namespace jumpcap
