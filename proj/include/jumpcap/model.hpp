#pragma once

#include "jumpcap/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace jumpcap {

/// Market, jump and cost constants of the one-technology model, plus the
/// admissible threshold bounds. s(t) and p(t) are exposed as constants with
/// zero-derivative hooks so the drift formulas keep their seasonal terms.
struct ModelParams {
    double T = 1.0;           // horizon
    double v0 = 0.4;          // initial capacity factor
    double d0 = 0.7;          // initial demand
    double c0 = 0.0;          // initial installed capacity
    double lambda1 = 5.0;     // jump intensity, source 1
    double lambda2 = 5.0;     // jump intensity, source 2
    double m1 = 0.5;          // inverse mean jump size, source 1
    double m2 = 1.0;          // inverse mean jump size, source 2
    double sigma11 = 0.2;     // loading of source 1 on the capacity factor
    double sigma12 = 0.2;     // loading of source 2 on the capacity factor
    double sigma22 = 0.05;    // loading of source 2 on demand
    double xi1 = 0.2;         // mean-reversion speed, capacity factor
    double xi2 = 0.2;         // mean-reversion speed, demand
    double p = 0.7;           // demand load factor (constant)
    double s = 1.0;           // seasonal factor (constant)
    double r = 0.4;           // discount rate
    double kappa = 0.1;       // unit installation cost
    double a_min = 0.0;       // admissible threshold lower bound
    double a_max = 3.0;       // admissible threshold upper bound

    double s_at(double t) const { (void)t; return s; }
    double s_prime(double t) const { (void)t; return 0.0; }
    double p_at(double t) const { (void)t; return p; }
    double p_prime(double t) const { (void)t; return 0.0; }

    /// Throws std::invalid_argument naming the offending field.
    void validate() const;
};

/// The controlled state triple: capacity factor, demand, installed capacity.
struct SystemState {
    double v = 0.0;
    double d = 0.0;
    double c = 0.0;
};

/// The nonnegative OU factors behind (v, d): v = 1 - exp(-s*h1), d = p*h2.
struct LatentState {
    double h1 = 0.0;
    double h2 = 0.0;
};

SystemState initial_state(const ModelParams& params);
/// Recovers h(0) from x0 by inverting the state maps.
LatentState initial_latent(const ModelParams& params);

/// Uniform partition of [0, T] into `steps` intervals.
struct TimeGrid {
    int steps = 50;
    double horizon = 1.0;

    double dt() const { return horizon / steps; }
    double node(int n) const { return n * horizon / steps; }
    void validate() const;
};

enum class Scheme { euler, exact_latent };

/// Per-source install amplitudes: an installation a1*dv1 + a2*dv2 at jumps.
struct InstallRates {
    double a1 = 0.0;
    double a2 = 0.0;
};

/// A capacity-installation rule evaluated along simulated paths. Batched so
/// network-backed policies can amortize the forward pass over many paths.
class Policy {
public:
    virtual ~Policy() = default;

    /// Fills out[i] with the amplitudes for states[i] at time t.
    virtual void rates(double t, std::span<const SystemState> states,
                       std::span<InstallRates> out) const = 0;

    /// Single-state convenience used where paths are handled one jump at a time.
    InstallRates rate_at(double t, const SystemState& state) const;

    /// Threshold-style rules depend on the pre-jump capacity factor and are
    /// re-evaluated at every jump by the exact-latent scheme; feedback rules
    /// keep the step-start decision for the whole step.
    virtual bool reevaluates_at_jumps() const { return false; }
};

/// install = (A - v_pre)^+ * dv at each upward jump of the capacity factor.
class ThresholdPolicy final : public Policy {
public:
    explicit ThresholdPolicy(double threshold);
    double threshold() const { return threshold_; }
    void rates(double t, std::span<const SystemState> states,
               std::span<InstallRates> out) const override;
    bool reevaluates_at_jumps() const override { return true; }

private:
    double threshold_;
};

// Dynamics of the d=1 model, in uncompensated (raw-jump) Euler form. The
// compensator terms of the compensated drifts cancel exactly against the
// jump means, leaving the pure decay parts below.
double drift_v(double t, double v, const ModelParams& params);
double drift_d(double t, double d, const ModelParams& params);
/// V-increment caused by a size-z jump of source (1 or 2), evaluated at the
/// pre-jump capacity factor v. Always in [0, 1-v).
double jump_impact_v(double v, double z, int source, const ModelParams& params);
/// Demand increment caused by a size-z jump of source 2.
double jump_impact_d(double z, double t, const ModelParams& params);
/// Capacity installed under a threshold rule for a V-increment dv.
double threshold_install(double threshold, double v_pre, double dv);

struct StepResult {
    SystemState next;
    double dv1 = 0.0; // jump-induced V increment, source 1
    double dv2 = 0.0; // jump-induced V increment, source 2
};

/// One Euler step with all jump impacts evaluated at the step-start state.
StepResult step_euler(const SystemState& state, double t, const JumpSample& jumps,
                      const InstallRates& rates, const TimeGrid& grid,
                      const ModelParams& params);

/// A batch of simulated trajectories with per-step jump records, the
/// per-source V increments, and the accumulated discounted shortfall.
struct PathBundle {
    int batch = 0;
    int steps = 0;
    TimeGrid grid;
    std::vector<SystemState> states;   // (batch) x (steps+1), path-major
    std::vector<JumpSample> jump_records; // (batch) x (steps), path-major
    std::vector<double> dv1;           // (batch) x (steps), path-major
    std::vector<double> dv2;
    std::vector<double> running_cost;  // per path: sum dt e^{-r t_n} (d - v c)^+

    const SystemState& state(int path, int node) const {
        return states[static_cast<std::size_t>(path) * (steps + 1) + node];
    }
    const JumpSample& jumps(int path, int step) const {
        return jump_records[static_cast<std::size_t>(path) * steps + step];
    }
    double dv_total(int path, int step) const {
        const std::size_t i = static_cast<std::size_t>(path) * steps + step;
        return dv1[i] + dv2[i];
    }
};

/// Euler-with-jumps forward simulation. Path j draws from substream(rng,
/// path_offset + j), so chunked calls with offsets reproduce one big batch.
/// `steps` < grid.steps simulates a prefix only (0 keeps the full grid).
PathBundle simulate_paths(const ModelParams& params, const TimeGrid& grid, const Policy& policy,
                          int batch, RngStream rng, std::uint64_t path_offset = 0, int steps = 0);

/// Cross-check scheme: the latent OU pair decays exactly between jump times
/// (times drawn uniformly within each step), jumps are applied sequentially,
/// and (v, d) are mapped through the exact transforms, so node marginals are
/// exact. Consumes the same per-(path, step, source) substreams as the Euler
/// scheme; shared seeds couple the two schemes jump-for-jump.
PathBundle simulate_exact_latent(const ModelParams& params, const TimeGrid& grid,
                                 const Policy& policy, int batch, RngStream rng,
                                 std::uint64_t path_offset = 0, int steps = 0);

PathBundle simulate(const ModelParams& params, const TimeGrid& grid, const Policy& policy,
                    int batch, RngStream rng, Scheme scheme, std::uint64_t path_offset = 0,
                    int steps = 0);

struct McResult {
    double estimate = 0.0;
    double std_error = 0.0;
    std::uint64_t paths = 0;
};

/// Plain Monte Carlo estimate of the expected cost
/// E[ sum_n dt e^{-r t_n} (d_n - v_n c_n)^+ + kappa c_M ] under `policy`.
/// Deterministic for fixed (rng, params, grid) regardless of thread count.
McResult mc_cost(const ModelParams& params, const TimeGrid& grid, const Policy& policy,
                 std::uint64_t n_paths, RngStream rng, Scheme scheme = Scheme::euler,
                 int threads = 1);

/// Analytic first moment E[D(t)] of demand (OU driven by compound Poisson).
double analytic_mean_demand(const ModelParams& params, double t);
/// Discrete left-endpoint quadrature sum_{n<M} dt e^{-r t_n} E[D(t_n)]; the
/// expected cost of the do-nothing policy from c0 = 0.
double analytic_zero_policy_cost(const ModelParams& params, const TimeGrid& grid);
/// Closed-form no-jump trajectories (lambda1 = lambda2 = 0).
SystemState no_jump_state(const ModelParams& params, double t);

} // namespace jumpcap
