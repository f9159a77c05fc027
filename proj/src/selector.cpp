#include "jumpcap/selector.hpp"

#include "jumpcap/parallel.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace jumpcap {

std::vector<double> build_grid(double a_min, double a_max, int points) {
    if (!(a_min < a_max)) {
        throw std::invalid_argument("threshold grid needs a_min < a_max");
    }
    if (points < 2) {
        throw std::invalid_argument("threshold grid needs at least 2 points");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i) {
        grid[static_cast<std::size_t>(i)] =
            a_min + (a_max - a_min) * static_cast<double>(i) / (points - 1);
    }
    grid.front() = a_min;
    grid.back() = a_max;
    return grid;
}

SelectorResult select_threshold(const ModelParams& params, const TimeGrid& grid,
                                const std::vector<double>& thresholds,
                                const SelectorConfig& config) {
    params.validate();
    grid.validate();
    if (thresholds.empty()) {
        throw std::invalid_argument("threshold grid must be nonempty");
    }

    SelectorResult result;
    result.entries.resize(thresholds.size());
    std::vector<std::string> failures(thresholds.size());

    parallel_chunks(thresholds.size(), 1, config.threads,
                    [&](std::size_t i, std::size_t, std::size_t) {
                        const double a = thresholds[i];
                        try {
                            SelectorEntry entry;
                            entry.threshold = a;
                            if (config.mode == SelectorMode::bsde) {
                                BsdeProblem problem{params, grid, a, config.scheme};
                                BsdeTrainConfig train = config.bsde;
                                train.seed = derive_seed(config.seed, i);
                                entry.y0 = solve_bsde(problem, train).y0;
                            } else {
                                const ThresholdPolicy policy(a);
                                const McResult mc =
                                    mc_cost(params, grid, policy, config.mc_paths,
                                            RngStream::seeded(config.seed), config.scheme, 1);
                                entry.y0 = mc.estimate;
                                entry.std_error = mc.std_error;
                            }
                            result.entries[i] = entry;
                        } catch (const std::exception& e) {
                            failures[i] = e.what();
                        }
                    });

    for (std::size_t i = 0; i < thresholds.size(); ++i) {
        if (!failures[i].empty()) {
            throw std::runtime_error("threshold A=" + std::to_string(thresholds[i]) +
                                     " failed: " + failures[i]);
        }
        if (!std::isfinite(result.entries[i].y0)) {
            throw std::runtime_error("threshold A=" + std::to_string(thresholds[i]) +
                                     " produced a non-finite value");
        }
    }

    int best = 0;
    for (std::size_t i = 1; i < result.entries.size(); ++i) {
        if (result.entries[i].y0 < result.entries[static_cast<std::size_t>(best)].y0) {
            best = static_cast<int>(i);
        }
    }
    result.best_index = best;
    return result;
}

} // namespace jumpcap
