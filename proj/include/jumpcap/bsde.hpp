#pragma once

#include "jumpcap/model.hpp"
#include "jumpcap/net.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace jumpcap {

/// The pure-jump backward equation for a fixed threshold policy:
/// driver f = e^{-rt} (d - v c)^+, terminal g = kappa * c, forward dynamics
/// simulated under the threshold rule.
struct BsdeProblem {
    ModelParams model;
    TimeGrid grid;
    double threshold = 0.0;
    Scheme scheme = Scheme::euler;

    double driver(double t, const SystemState& state) const;
    double terminal(const SystemState& state) const;
};

struct BsdeTrainConfig {
    int batch = 10;            // paths per epoch
    int aux_batch = 5000;      // jump resamples for the compensator estimate
    int epochs_terminal = 4000; // epochs at timestep M-1
    int epochs_other = 200;     // epochs at every other timestep
    double learning_rate = 1e-4;
    int hidden_width = 100;
    int hidden_layers = 2;
    std::uint64_t seed = 0;
    double scale = 1.0;        // desk-scale factor: shrinks epochs and aux batch
    bool cache_paths = false;  // reuse one path batch per step instead of resimulating

    int scaled_epochs_terminal() const;
    int scaled_epochs_other() const;
    int scaled_aux_batch() const;
    void validate() const;
};

/// Per-timestep network pair: the value net maps (t, v, d, c) to Y, the jump
/// net maps (t, v, d, c, total jump V-increment) to the jump integrand U.
struct BsdeStepNets {
    MlpParams value_net;
    MlpParams jump_net;
};

BsdeStepNets make_step_nets(const BsdeTrainConfig& config, RngStream& rng);

struct BsdeSolution {
    std::vector<BsdeStepNets> nets;                 // index n = 0..M-1
    double y0 = 0.0;                                // value net 0 at (0, x0)
    std::vector<std::vector<double>> loss_history;  // [step][epoch]

    double value_at(double t, const SystemState& state, int step) const;
};

/// Squared temporal residual of the backward step, averaged over the batch:
///   mean_j | target_j - (Y_j - f_j dt + U_j - mean_k W_jk) |^2
/// where target is g(X_M) at the terminal step and the frozen next-step
/// value net otherwise, and W_jk are jump-net evaluations at the resampled
/// jump features in aux_features (one row per path). Gradients, when
/// requested, accumulate into zeroed bundles shaped like the two nets.
double bsde_step_loss(int step, const BsdeProblem& problem, const BsdeStepNets& nets,
                      const PathBundle& paths, const MlpParams* frozen_next_value,
                      const Eigen::MatrixXd& aux_features, GradBundle* value_grads = nullptr,
                      GradBundle* jump_grads = nullptr);

struct StepTrainResult {
    BsdeStepNets nets;
    std::vector<double> losses;
};

/// Trains the timestep-n pair for the configured number of epochs; each
/// epoch resimulates a fresh batch from t = 0 (unless cache_paths) and a
/// fresh auxiliary jump batch, then applies one Adam update.
StepTrainResult train_timestep(int step, const BsdeProblem& problem,
                               const BsdeTrainConfig& config, const BsdeStepNets& warm_start,
                               const MlpParams* frozen_next_value, RngStream stream);

/// Backward sweep n = M-1..0 with warm starts, returning every trained pair
/// and Y(0) evaluated at (0, x0).
BsdeSolution solve_bsde(const BsdeProblem& problem, const BsdeTrainConfig& config);

} // namespace jumpcap
