#include "jumpcap/model.hpp"

#include "jumpcap/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace jumpcap {

namespace {

constexpr double kVCap = 1.0 - 1e-12;

void require(bool ok, const std::string& message) {
    if (!ok) {
        throw std::invalid_argument(message);
    }
}

void check_state(const SystemState& s) {
    if (!(s.v >= 0.0 && s.v < 1.0)) {
        throw std::domain_error("capacity factor v must lie in [0,1)");
    }
    if (!(s.d >= 0.0)) {
        throw std::domain_error("demand d must be >= 0");
    }
    if (!(s.c >= 0.0)) {
        throw std::domain_error("installed capacity c must be >= 0");
    }
}

void sample_jumps_into(double intensity, double inv_mean, double dt, RngStream& rng,
                       std::vector<double>& out) {
    out.clear();
    const std::uint64_t count = rng.next_poisson(intensity * dt);
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        out.push_back(rng.next_exponential(inv_mean));
    }
}

double shortfall(const SystemState& s) {
    return std::max(s.d - s.v * s.c, 0.0);
}

struct JumpEvent {
    double tau;
    int source;
    double z;
};

// Advances one path through [t, t+dt) under the Euler-with-jumps scheme;
// every jump impact is evaluated at the step-start state.
void advance_euler(SystemState& s, double t, std::span<const double> z1,
                   std::span<const double> z2, const InstallRates& rates, double dt,
                   const ModelParams& params, double& dv1, double& dv2) {
    dv1 = 0.0;
    dv2 = 0.0;
    double dd = 0.0;
    for (const double z : z1) {
        dv1 += jump_impact_v(s.v, z, 1, params);
    }
    for (const double z : z2) {
        dv2 += jump_impact_v(s.v, z, 2, params);
        dd += jump_impact_d(z, t, params);
    }
    const double c_next = s.c + rates.a1 * dv1 + rates.a2 * dv2;
    const double v_next = s.v + drift_v(t, s.v, params) * dt + dv1 + dv2;
    const double d_next = s.d + drift_d(t, s.d, params) * dt + dd;
    s.v = std::clamp(v_next, 0.0, kVCap);
    s.d = std::max(d_next, 0.0);
    s.c = std::max(c_next, 0.0);
}

// Advances one path through [t0, t1) on the latent level: exact exponential
// decay between jump times (drawn uniformly in the step), jumps applied in
// time order. Installs use the exact per-jump V increment and, for rules
// that re-evaluate at jumps, the exact pre-jump state.
void advance_exact(SystemState& s, LatentState& lat, double t0, double t1,
                   std::span<const double> z1, std::span<const double> z2,
                   RngStream& rng1, RngStream& rng2, const InstallRates& step_rates,
                   const Policy& policy, const ModelParams& params, double& dv1,
                   double& dv2, std::vector<JumpEvent>& events) {
    dv1 = 0.0;
    dv2 = 0.0;
    const double span = t1 - t0;
    events.clear();
    events.reserve(z1.size() + z2.size());
    for (const double z : z1) {
        events.push_back({t0 + rng1.next_unit() * span, 1, z});
    }
    for (const double z : z2) {
        events.push_back({t0 + rng2.next_unit() * span, 2, z});
    }
    std::stable_sort(events.begin(), events.end(), [](const JumpEvent& a, const JumpEvent& b) {
        if (a.tau != b.tau) {
            return a.tau < b.tau;
        }
        return a.source < b.source;
    });

    const bool per_jump = policy.reevaluates_at_jumps();
    double t_cur = t0;
    for (const JumpEvent& ev : events) {
        const double decay = ev.tau - t_cur;
        lat.h1 *= std::exp(-params.xi1 * decay);
        lat.h2 *= std::exp(-params.xi2 * decay);
        t_cur = ev.tau;

        const double s_now = params.s_at(ev.tau);
        const double v_pre = std::min(1.0 - std::exp(-s_now * lat.h1), kVCap);
        const double d_pre = params.p_at(ev.tau) * lat.h2;
        const double sigma = ev.source == 1 ? params.sigma11 : params.sigma12;
        const double dv = (1.0 - v_pre) * (1.0 - std::exp(-s_now * sigma * ev.z));

        InstallRates rates = step_rates;
        if (per_jump) {
            rates = policy.rate_at(ev.tau, SystemState{v_pre, d_pre, s.c});
        }
        if (ev.source == 1) {
            s.c += rates.a1 * dv;
            dv1 += dv;
            lat.h1 += params.sigma11 * ev.z;
        } else {
            s.c += rates.a2 * dv;
            dv2 += dv;
            lat.h1 += params.sigma12 * ev.z;
            lat.h2 += params.sigma22 * ev.z;
        }
    }
    const double tail = t1 - t_cur;
    lat.h1 *= std::exp(-params.xi1 * tail);
    lat.h2 *= std::exp(-params.xi2 * tail);
    s.v = std::clamp(1.0 - std::exp(-params.s_at(t1) * lat.h1), 0.0, kVCap);
    s.d = std::max(params.p_at(t1) * lat.h2, 0.0);
}

struct NullRecorder {
    void initial(std::size_t, const SystemState&) {}
    void step(std::size_t, int, const std::vector<double>&, const std::vector<double>&, double,
              double, const SystemState&) {}
};

struct BundleRecorder {
    PathBundle* bundle;
    std::size_t base; // global index of the first path in this block

    void initial(std::size_t j, const SystemState& s) {
        bundle->states[(base + j) * (bundle->steps + 1)] = s;
    }
    void step(std::size_t j, int n, const std::vector<double>& z1, const std::vector<double>& z2,
              double dv1, double dv2, const SystemState& next) {
        const std::size_t path = base + j;
        bundle->states[path * (bundle->steps + 1) + n + 1] = next;
        JumpSample& rec = bundle->jump_records[path * bundle->steps + n];
        rec.sizes1 = z1;
        rec.sizes2 = z2;
        bundle->dv1[path * bundle->steps + n] = dv1;
        bundle->dv2[path * bundle->steps + n] = dv2;
    }
};

// Core block driver shared by the bundle-building and cost-only entry
// points; block composition is fixed by kPathChunk, not by thread count.
template <typename Recorder>
void simulate_block(const ModelParams& params, const TimeGrid& grid, const Policy& policy,
                    Scheme scheme, int n_steps, const RngStream& rng, std::uint64_t path_offset,
                    std::size_t begin, std::size_t end, std::vector<double>& running,
                    std::vector<double>& final_c, Recorder&& rec) {
    const std::size_t count = end - begin;
    std::vector<SystemState> cur(count, initial_state(params));
    std::vector<LatentState> lat;
    if (scheme == Scheme::exact_latent) {
        lat.assign(count, initial_latent(params));
    }
    std::vector<InstallRates> rates(count);
    std::vector<RngStream> streams(count);
    for (std::size_t j = 0; j < count; ++j) {
        streams[j] = substream(rng, path_offset + begin + j);
        rec.initial(j, cur[j]);
    }
    running.assign(count, 0.0);
    final_c.resize(count);

    const double dt = grid.dt();
    std::vector<double> z1, z2;
    std::vector<JumpEvent> events;

    for (int n = 0; n < n_steps; ++n) {
        const double t = grid.node(n);
        const double disc = dt * std::exp(-params.r * t);
        for (std::size_t j = 0; j < count; ++j) {
            running[j] += disc * shortfall(cur[j]);
        }
        policy.rates(t, cur, rates);
        for (std::size_t j = 0; j < count; ++j) {
            RngStream s1 = substream(streams[j], 2 * static_cast<std::uint64_t>(n));
            RngStream s2 = substream(streams[j], 2 * static_cast<std::uint64_t>(n) + 1);
            sample_jumps_into(params.lambda1, params.m1, dt, s1, z1);
            sample_jumps_into(params.lambda2, params.m2, dt, s2, z2);
            double dv1 = 0.0;
            double dv2 = 0.0;
            if (scheme == Scheme::euler) {
                advance_euler(cur[j], t, z1, z2, rates[j], dt, params, dv1, dv2);
            } else {
                advance_exact(cur[j], lat[j], t, grid.node(n + 1), z1, z2, s1, s2, rates[j],
                              policy, params, dv1, dv2, events);
            }
            rec.step(j, n, z1, z2, dv1, dv2, cur[j]);
        }
    }
    for (std::size_t j = 0; j < count; ++j) {
        final_c[j] = cur[j].c;
    }
}

PathBundle simulate_impl(const ModelParams& params, const TimeGrid& grid, const Policy& policy,
                         int batch, RngStream rng, Scheme scheme, std::uint64_t path_offset,
                         int steps) {
    params.validate();
    grid.validate();
    require(batch >= 1, "batch size must be >= 1");
    const int n_steps = steps == 0 ? grid.steps : steps;
    require(n_steps >= 1 && n_steps <= grid.steps, "steps must lie in [1, grid.steps]");

    PathBundle bundle;
    bundle.batch = batch;
    bundle.steps = n_steps;
    bundle.grid = grid;
    bundle.states.resize(static_cast<std::size_t>(batch) * (n_steps + 1));
    bundle.jump_records.resize(static_cast<std::size_t>(batch) * n_steps);
    bundle.dv1.assign(static_cast<std::size_t>(batch) * n_steps, 0.0);
    bundle.dv2.assign(static_cast<std::size_t>(batch) * n_steps, 0.0);
    bundle.running_cost.assign(batch, 0.0);

    std::vector<double> running, final_c;
    for (std::size_t begin = 0; begin < static_cast<std::size_t>(batch); begin += kPathChunk) {
        const std::size_t end = std::min(begin + kPathChunk, static_cast<std::size_t>(batch));
        BundleRecorder rec{&bundle, begin};
        simulate_block(params, grid, policy, scheme, n_steps, rng, path_offset, begin, end,
                       running, final_c, rec);
        for (std::size_t j = 0; j < end - begin; ++j) {
            bundle.running_cost[begin + j] = running[j];
        }
    }
    return bundle;
}

} // namespace

void ModelParams::validate() const {
    require(T > 0.0, "T must be > 0");
    require(v0 >= 0.0 && v0 < 1.0, "v0 must lie in [0,1)");
    require(d0 >= 0.0, "d0 must be >= 0");
    require(c0 >= 0.0, "c0 must be >= 0");
    require(lambda1 >= 0.0, "lambda1 must be >= 0");
    require(lambda2 >= 0.0, "lambda2 must be >= 0");
    require(m1 > 0.0, "m1 must be > 0");
    require(m2 > 0.0, "m2 must be > 0");
    require(sigma11 > 0.0, "sigma11 must be > 0");
    require(sigma12 >= 0.0, "sigma12 must be >= 0");
    require(sigma22 > 0.0, "sigma22 must be > 0");
    require(xi1 > 0.0, "xi1 must be > 0");
    require(xi2 > 0.0, "xi2 must be > 0");
    require(p > 0.0, "p must be > 0");
    require(s > 0.0, "s must be > 0");
    require(r >= 0.0, "r must be >= 0");
    require(kappa > 0.0, "kappa must be > 0");
    require(a_min >= 0.0 && a_min < a_max, "a_min must satisfy 0 <= a_min < a_max");
}

void TimeGrid::validate() const {
    require(steps >= 1, "grid steps must be >= 1");
    require(horizon > 0.0, "grid horizon must be > 0");
}

SystemState initial_state(const ModelParams& params) {
    return {params.v0, params.d0, params.c0};
}

LatentState initial_latent(const ModelParams& params) {
    return {-std::log1p(-params.v0) / params.s_at(0.0), params.d0 / params.p_at(0.0)};
}

InstallRates Policy::rate_at(double t, const SystemState& state) const {
    InstallRates out;
    rates(t, std::span<const SystemState>(&state, 1), std::span<InstallRates>(&out, 1));
    return out;
}

ThresholdPolicy::ThresholdPolicy(double threshold) : threshold_(threshold) {
    require(threshold >= 0.0, "threshold must be >= 0");
}

void ThresholdPolicy::rates(double t, std::span<const SystemState> states,
                            std::span<InstallRates> out) const {
    (void)t;
    for (std::size_t i = 0; i < states.size(); ++i) {
        const double a = std::max(threshold_ - states[i].v, 0.0);
        out[i] = {a, a};
    }
}

double drift_v(double t, double v, const ModelParams& params) {
    if (!(v >= 0.0 && v < 1.0)) {
        throw std::domain_error("drift_v: capacity factor v must lie in [0,1)");
    }
    const double seasonal = params.xi1 - params.s_prime(t) / params.s_at(t);
    return (1.0 - v) * seasonal * std::log1p(-v);
}

double drift_d(double t, double d, const ModelParams& params) {
    return (params.p_prime(t) / params.p_at(t) - params.xi2) * d;
}

double jump_impact_v(double v, double z, int source, const ModelParams& params) {
    if (!(v >= 0.0 && v < 1.0)) {
        throw std::domain_error("jump_impact_v: capacity factor v must lie in [0,1)");
    }
    if (source != 1 && source != 2) {
        throw std::invalid_argument("jump source must be 1 or 2");
    }
    const double sigma = source == 1 ? params.sigma11 : params.sigma12;
    return (1.0 - v) * (1.0 - std::exp(-params.s_at(0.0) * sigma * z));
}

double jump_impact_d(double z, double t, const ModelParams& params) {
    return params.p_at(t) * params.sigma22 * z;
}

double threshold_install(double threshold, double v_pre, double dv) {
    return std::max(threshold - v_pre, 0.0) * dv;
}

StepResult step_euler(const SystemState& state, double t, const JumpSample& jumps,
                      const InstallRates& rates, const TimeGrid& grid,
                      const ModelParams& params) {
    check_state(state);
    StepResult out;
    out.next = state;
    advance_euler(out.next, t, jumps.sizes1, jumps.sizes2, rates, grid.dt(), params, out.dv1,
                  out.dv2);
    return out;
}

PathBundle simulate_paths(const ModelParams& params, const TimeGrid& grid, const Policy& policy,
                          int batch, RngStream rng, std::uint64_t path_offset, int steps) {
    return simulate_impl(params, grid, policy, batch, rng, Scheme::euler, path_offset, steps);
}

PathBundle simulate_exact_latent(const ModelParams& params, const TimeGrid& grid,
                                 const Policy& policy, int batch, RngStream rng,
                                 std::uint64_t path_offset, int steps) {
    return simulate_impl(params, grid, policy, batch, rng, Scheme::exact_latent, path_offset,
                         steps);
}

PathBundle simulate(const ModelParams& params, const TimeGrid& grid, const Policy& policy,
                    int batch, RngStream rng, Scheme scheme, std::uint64_t path_offset,
                    int steps) {
    return simulate_impl(params, grid, policy, batch, rng, scheme, path_offset, steps);
}

McResult mc_cost(const ModelParams& params, const TimeGrid& grid, const Policy& policy,
                 std::uint64_t n_paths, RngStream rng, Scheme scheme, int threads) {
    params.validate();
    grid.validate();
    require(n_paths >= 2, "mc_cost needs at least 2 paths");

    const std::size_t n_chunks = chunk_count(n_paths, kPathChunk);
    std::vector<double> sums(n_chunks, 0.0);
    std::vector<double> sq_sums(n_chunks, 0.0);

    parallel_chunks(n_paths, kPathChunk, threads,
                    [&](std::size_t c, std::size_t begin, std::size_t end) {
                        std::vector<double> running, final_c;
                        NullRecorder rec;
                        simulate_block(params, grid, policy, scheme, grid.steps, rng, 0, begin,
                                       end, running, final_c, rec);
                        double s = 0.0;
                        double ss = 0.0;
                        for (std::size_t j = 0; j < running.size(); ++j) {
                            const double total = running[j] + params.kappa * final_c[j];
                            s += total;
                            ss += total * total;
                        }
                        sums[c] = s;
                        sq_sums[c] = ss;
                    });

    double total = 0.0;
    double total_sq = 0.0;
    for (std::size_t c = 0; c < n_chunks; ++c) {
        total += sums[c];
        total_sq += sq_sums[c];
    }
    const double n = static_cast<double>(n_paths);
    const double mean = total / n;
    const double var = std::max(total_sq - n * mean * mean, 0.0) / (n - 1.0);
    return {mean, std::sqrt(var / n), n_paths};
}

double analytic_mean_demand(const ModelParams& params, double t) {
    const double h20 = params.d0 / params.p;
    const double decay = std::exp(-params.xi2 * t);
    const double feed = params.sigma22 * params.lambda2 / params.m2;
    return params.p * (h20 * decay + feed * (1.0 - decay) / params.xi2);
}

double analytic_zero_policy_cost(const ModelParams& params, const TimeGrid& grid) {
    const double dt = grid.dt();
    double total = 0.0;
    for (int n = 0; n < grid.steps; ++n) {
        const double t = grid.node(n);
        total += dt * std::exp(-params.r * t) * analytic_mean_demand(params, t);
    }
    return total;
}

SystemState no_jump_state(const ModelParams& params, double t) {
    const double v = 1.0 - std::pow(1.0 - params.v0, std::exp(-params.xi1 * t));
    const double d = params.d0 * std::exp(-params.xi2 * t);
    return {v, d, params.c0};
}

} // namespace jumpcap
