#include <doctest.h>

#include "jumpcap/model.hpp"

#include <cmath>
#include <stdexcept>

using namespace jumpcap;

namespace {

ModelParams reference_params() { return {}; }

// Hand evaluations of the dynamics formulas with the reference constants.
constexpr double kDriftV04 = -0.061299074851918886;   // 0.6 * 0.2 * ln(0.6)
constexpr double kImpactV04 = 0.10876154815321089;    // 0.6 * (1 - e^{-0.2})
constexpr double kInstall158 = 0.12833862682078885;   // 1.18 * kImpactV04

} // namespace

TEST_CASE("drift_v hand values") {
    const ModelParams p = reference_params();
    CHECK(drift_v(0.0, 0.0, p) == 0.0);
    CHECK(drift_v(0.3, 0.4, p) == doctest::Approx(kDriftV04).epsilon(1e-14));
    // (1-v) ln(1-v) -> 0 at the open boundary
    CHECK(std::abs(drift_v(0.0, 1.0 - 1e-9, p)) < 1e-8);
    CHECK_THROWS_AS(drift_v(0.0, 1.0, p), std::domain_error);
    CHECK_THROWS_AS(drift_v(0.0, -0.1, p), std::domain_error);
}

TEST_CASE("drift_d hand values and linearity") {
    const ModelParams p = reference_params();
    CHECK(drift_d(0.0, 0.0, p) == 0.0);
    CHECK(drift_d(0.5, 0.7, p) == doctest::Approx(-0.14).epsilon(1e-14));
    CHECK(drift_d(0.5, 1.4, p) == doctest::Approx(2.0 * drift_d(0.5, 0.7, p)).epsilon(1e-14));
}

TEST_CASE("jump_impact_v hand values and range") {
    const ModelParams p = reference_params();
    CHECK(jump_impact_v(0.4, 0.0, 1, p) == 0.0);
    CHECK(jump_impact_v(0.4, 1.0, 1, p) == doctest::Approx(kImpactV04).epsilon(1e-14));
    CHECK(jump_impact_v(0.999, 100.0, 1, p) < 0.001);
    for (double z : {0.1, 1.0, 10.0, 100.0}) {
        const double impact = jump_impact_v(0.4, z, 2, p);
        CHECK(impact >= 0.0);
        CHECK(impact < 0.6);
    }
    CHECK_THROWS_AS(jump_impact_v(1.0, 1.0, 1, p), std::domain_error);
    CHECK_THROWS_AS(jump_impact_v(0.4, 1.0, 3, p), std::invalid_argument);
}

TEST_CASE("jump_impact_d hand value and linearity") {
    const ModelParams p = reference_params();
    CHECK(jump_impact_d(0.0, 0.0, p) == 0.0);
    CHECK(jump_impact_d(1.0, 0.0, p) == doctest::Approx(0.035).epsilon(1e-14));
    CHECK(jump_impact_d(10.0, 0.0, p) == doctest::Approx(0.35).epsilon(1e-14));
}

TEST_CASE("threshold_install") {
    CHECK(threshold_install(0.0, 0.4, 0.5) == 0.0);
    CHECK(threshold_install(0.3, 0.4, 0.5) == 0.0);
    CHECK(threshold_install(1.58, 0.4, kImpactV04) ==
          doctest::Approx(kInstall158).epsilon(1e-14));
}

TEST_CASE("step_euler composes drift, jumps and installs") {
    const ModelParams p = reference_params();
    const TimeGrid grid{50, p.T};
    const SystemState x0{0.4, 0.7, 0.0};

    SUBCASE("no jumps leaves capacity unchanged") {
        const StepResult r = step_euler(x0, 0.0, JumpSample{}, {5.0, 5.0}, grid, p);
        CHECK(r.next.c == 0.0);
        CHECK(r.next.v == doctest::Approx(0.4 + kDriftV04 * 0.02).epsilon(1e-14));
        CHECK(r.next.d == doctest::Approx(0.7 - 0.14 * 0.02).epsilon(1e-14));
        CHECK(r.dv1 == 0.0);
        CHECK(r.dv2 == 0.0);
    }
    SUBCASE("one source-1 jump installs under the threshold rule") {
        JumpSample jumps;
        jumps.sizes1 = {1.0};
        const double amp = 1.58 - 0.4;
        const StepResult r = step_euler(x0, 0.0, jumps, {amp, amp}, grid, p);
        CHECK(r.dv1 == doctest::Approx(kImpactV04).epsilon(1e-14));
        CHECK(r.next.c == doctest::Approx(kInstall158).epsilon(1e-14));
        CHECK(r.next.v ==
              doctest::Approx(0.4 + kDriftV04 * 0.02 + kImpactV04).epsilon(1e-14));
    }
    SUBCASE("invalid state is rejected") {
        CHECK_THROWS_AS(step_euler({1.5, 0.7, 0.0}, 0.0, JumpSample{}, {}, grid, p),
                        std::domain_error);
        CHECK_THROWS_AS(step_euler({0.4, -0.1, 0.0}, 0.0, JumpSample{}, {}, grid, p),
                        std::domain_error);
    }
}

TEST_CASE("no-jump paths reproduce the closed forms") {
    ModelParams p = reference_params();
    p.lambda1 = 0.0;
    p.lambda2 = 0.0;
    const TimeGrid grid{50, p.T};
    const ThresholdPolicy policy(1.58);

    SUBCASE("exact scheme matches to 1e-10 at every node") {
        const PathBundle bundle =
            simulate_exact_latent(p, grid, policy, 2, RngStream::seeded(1));
        for (int n = 0; n <= grid.steps; ++n) {
            const SystemState want = no_jump_state(p, grid.node(n));
            CHECK(std::abs(bundle.state(0, n).v - want.v) < 1e-10);
            CHECK(std::abs(bundle.state(0, n).d - want.d) < 1e-10);
            CHECK(bundle.state(0, n).c == 0.0);
        }
    }
    SUBCASE("euler error shrinks like O(dt)") {
        const SystemState want = no_jump_state(p, p.T);
        auto terminal_error = [&](int steps) {
            const TimeGrid g{steps, p.T};
            const PathBundle b = simulate_paths(p, g, policy, 1, RngStream::seeded(1));
            return std::abs(b.state(0, steps).v - want.v) +
                   std::abs(b.state(0, steps).d - want.d);
        };
        const double e50 = terminal_error(50);
        const double e100 = terminal_error(100);
        CHECK(e50 / e100 > 1.6);
        CHECK(e50 / e100 < 2.4);
    }
}

TEST_CASE("pathwise invariants on jump-driven simulations") {
    const ModelParams p = reference_params();
    const TimeGrid grid{50, p.T};
    const ThresholdPolicy policy(2.0);
    for (const Scheme scheme : {Scheme::euler, Scheme::exact_latent}) {
        const PathBundle bundle = simulate(p, grid, policy, 64, RngStream::seeded(17), scheme);
        for (int j = 0; j < bundle.batch; ++j) {
            double prev_c = -1.0;
            for (int n = 0; n <= bundle.steps; ++n) {
                const SystemState& s = bundle.state(j, n);
                CHECK(s.v >= 0.0);
                CHECK(s.v < 1.0);
                CHECK(s.d >= 0.0);
                CHECK(s.c >= prev_c);
                prev_c = s.c;
            }
        }
    }
}

TEST_CASE("policy monotonicity under shared random numbers") {
    const ModelParams p = reference_params();
    const TimeGrid grid{50, p.T};
    const PathBundle low = simulate_paths(p, grid, ThresholdPolicy(1.0), 32, RngStream::seeded(9));
    const PathBundle high = simulate_paths(p, grid, ThresholdPolicy(2.0), 32, RngStream::seeded(9));
    for (int j = 0; j < 32; ++j) {
        for (int n = 0; n <= grid.steps; ++n) {
            CHECK(low.state(j, n).c <= high.state(j, n).c + 1e-15);
        }
    }
}

TEST_CASE("seed determinism and chunked offsets compose") {
    const ModelParams p = reference_params();
    const TimeGrid grid{20, p.T};
    const ThresholdPolicy policy(1.58);
    const PathBundle a = simulate_paths(p, grid, policy, 40, RngStream::seeded(4));
    const PathBundle b = simulate_paths(p, grid, policy, 40, RngStream::seeded(4));
    REQUIRE(a.states.size() == b.states.size());
    for (std::size_t i = 0; i < a.states.size(); ++i) {
        CHECK(a.states[i].v == b.states[i].v);
        CHECK(a.states[i].d == b.states[i].d);
        CHECK(a.states[i].c == b.states[i].c);
    }

    const PathBundle head = simulate_paths(p, grid, policy, 15, RngStream::seeded(4), 0);
    const PathBundle tail = simulate_paths(p, grid, policy, 25, RngStream::seeded(4), 15);
    for (int j = 0; j < 15; ++j) {
        CHECK(head.state(j, grid.steps).v == a.state(j, grid.steps).v);
    }
    for (int j = 0; j < 25; ++j) {
        CHECK(tail.state(j, grid.steps).c == a.state(15 + j, grid.steps).c);
    }
}

TEST_CASE("exact scheme demand mean matches the analytic OU moment") {
    const ModelParams p = reference_params();
    const TimeGrid grid{50, p.T};
    const ThresholdPolicy policy(0.0);
    const int batch = 200000;
    double sum = 0.0;
    double sum_sq = 0.0;
    const PathBundle bundle = simulate_exact_latent(p, grid, policy, batch, RngStream::seeded(31));
    for (int j = 0; j < batch; ++j) {
        const double d = bundle.state(j, grid.steps).d;
        sum += d;
        sum_sq += d * d;
    }
    const double mean = sum / batch;
    const double var = (sum_sq - batch * mean * mean) / (batch - 1);
    const double want = analytic_mean_demand(p, p.T);
    CHECK(std::abs(mean - want) < 3.0 * std::sqrt(var / batch));
}

TEST_CASE("mc_cost against the analytic zero-policy oracle") {
    const ModelParams p = reference_params();
    const TimeGrid grid{50, p.T};
    // c0 = 0 and threshold 0: the shortfall is the whole demand, so the cost
    // is the discounted-demand quadrature (terminal term vanishes with c=0).
    const double want = analytic_zero_policy_cost(p, grid);
    const McResult exact = mc_cost(p, grid, ThresholdPolicy(0.0), 200000,
                                   RngStream::seeded(12), Scheme::exact_latent);
    CHECK(std::abs(exact.estimate - want) < 3.0 * exact.std_error);
    const McResult euler = mc_cost(p, grid, ThresholdPolicy(0.0), 100000,
                                   RngStream::seeded(12), Scheme::euler);
    CHECK(std::abs(euler.estimate - want) < 3.0 * euler.std_error + 3e-4);
}

TEST_CASE("with no installs the running cost is the discounted demand sum") {
    const ModelParams p = reference_params();
    const TimeGrid grid{20, p.T};
    const PathBundle bundle =
        simulate_paths(p, grid, ThresholdPolicy(0.0), 16, RngStream::seeded(44));
    for (int j = 0; j < bundle.batch; ++j) {
        double want = 0.0;
        for (int n = 0; n < grid.steps; ++n) {
            want += grid.dt() * std::exp(-p.r * grid.node(n)) * bundle.state(j, n).d;
        }
        CHECK(bundle.running_cost[static_cast<std::size_t>(j)] ==
              doctest::Approx(want).epsilon(1e-12));
        CHECK(bundle.state(j, grid.steps).c == 0.0);
    }
}

TEST_CASE("mc_cost is deterministic and thread-count independent") {
    const ModelParams p = reference_params();
    const TimeGrid grid{25, p.T};
    const ThresholdPolicy policy(1.58);
    const McResult a = mc_cost(p, grid, policy, 30000, RngStream::seeded(5), Scheme::euler, 1);
    const McResult b = mc_cost(p, grid, policy, 30000, RngStream::seeded(5), Scheme::euler, 4);
    CHECK(a.estimate == b.estimate);
    CHECK(a.std_error == b.std_error);
}

TEST_CASE("deterministic no-jump cost has zero standard error") {
    ModelParams p = reference_params();
    p.lambda1 = 0.0;
    p.lambda2 = 0.0;
    const McResult res =
        mc_cost(p, TimeGrid{10, p.T}, ThresholdPolicy(1.0), 100, RngStream::seeded(2));
    CHECK(res.std_error == 0.0);
}

TEST_CASE("reference-parameter cost level at the near-optimal threshold") {
    // Frozen from an independent prototype oracle: J(1.58) ~ 0.3865 under the
    // Euler scheme at M = 50.
    const ModelParams p = reference_params();
    const McResult res = mc_cost(p, TimeGrid{50, p.T}, ThresholdPolicy(1.58), 200000,
                                 RngStream::seeded(77));
    CHECK(res.estimate == doctest::Approx(0.3865).epsilon(0.01));
}

TEST_CASE("schemes agree within discretization tolerance under shared seeds") {
    const ModelParams p = reference_params();
    const TimeGrid grid{50, p.T};
    const ThresholdPolicy policy(1.58);
    const McResult euler = mc_cost(p, grid, policy, 50000, RngStream::seeded(8), Scheme::euler);
    const McResult exact =
        mc_cost(p, grid, policy, 50000, RngStream::seeded(8), Scheme::exact_latent);
    CHECK(std::abs(euler.estimate - exact.estimate) < 0.012);
}

TEST_CASE("latent recovery inverts the state maps") {
    const ModelParams p = reference_params();
    const LatentState lat = initial_latent(p);
    CHECK(1.0 - std::exp(-p.s * lat.h1) == doctest::Approx(p.v0).epsilon(1e-14));
    CHECK(p.p * lat.h2 == doctest::Approx(p.d0).epsilon(1e-14));
}

TEST_CASE("parameter validation names the offending field") {
    ModelParams p = reference_params();
    p.kappa = -1.0;
    CHECK_THROWS_WITH_AS(p.validate(), "kappa must be > 0", std::invalid_argument);
    p = reference_params();
    p.v0 = 1.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p = reference_params();
    p.a_min = 3.0;
    p.a_max = 2.0;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
