#pragma once

#include "jumpcap/bsde.hpp"
#include "jumpcap/model.hpp"

#include <cstdint>
#include <vector>

namespace jumpcap {

/// Uniform threshold grid with both endpoints included; strictly increasing.
std::vector<double> build_grid(double a_min, double a_max, int points);

enum class SelectorMode {
    bsde,      // evaluate Y^A(0) with the backward solver
    mc_oracle, // cheap cross-check: plain Monte Carlo of the cost
};

struct SelectorEntry {
    double threshold = 0.0;
    double y0 = 0.0;
    double std_error = 0.0; // mc_oracle mode only; 0 in bsde mode
};

struct SelectorResult {
    std::vector<SelectorEntry> entries; // grid order
    int best_index = 0;

    const SelectorEntry& best() const { return entries.at(static_cast<std::size_t>(best_index)); }
};

struct SelectorConfig {
    SelectorMode mode = SelectorMode::bsde;
    BsdeTrainConfig bsde;          // template; its seed is re-derived per threshold
    std::uint64_t mc_paths = 100000;
    Scheme scheme = Scheme::euler;
    std::uint64_t seed = 0;
    int threads = 1;
};

/// Evaluates Y^A(0) on the grid and returns the argmin, ties broken toward
/// the smaller threshold. BSDE runs get per-threshold seeds derived from the
/// master seed; the Monte Carlo oracle shares one seed across thresholds so
/// the comparison uses common random numbers. Entries are assembled in grid
/// order no matter how the per-threshold evaluations are scheduled.
SelectorResult select_threshold(const ModelParams& params, const TimeGrid& grid,
                                const std::vector<double>& thresholds,
                                const SelectorConfig& config);

} // namespace jumpcap
