#include <doctest.h>

#include "jumpcap/policy.hpp"

#include <cmath>
#include <vector>

using namespace jumpcap;

namespace {

// Softplus head with a large negative output bias: amplitudes ~ 4e-18.
MlpParams zero_policy_stub() {
    MlpParams net = MlpParams::zeros({4, 4, 4, 2}, Activation::relu, OutputTransform::softplus);
    net.biases.back().setConstant(-40.0);
    return net;
}

GradBundle rollout_fd_gradient(MlpParams net, const ModelParams& params, const TimeGrid& grid,
                               int batch, std::uint64_t seed, double h = 1e-5) {
    GradBundle fd = GradBundle::zeros_like(net);
    auto eval = [&]() {
        return rollout_loss(net, params, grid, batch, RngStream::seeded(seed)).loss;
    };
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        for (Eigen::Index i = 0; i < net.weights[l].size(); ++i) {
            double& w = net.weights[l].data()[i];
            const double keep = w;
            w = keep + h;
            const double up = eval();
            w = keep - h;
            const double down = eval();
            w = keep;
            fd.weight_grads[l].data()[i] = (up - down) / (2.0 * h);
        }
        for (Eigen::Index i = 0; i < net.biases[l].size(); ++i) {
            double& b = net.biases[l].data()[i];
            const double keep = b;
            b = keep + h;
            const double up = eval();
            b = keep - h;
            const double down = eval();
            b = keep;
            fd.bias_grads[l].data()[i] = (up - down) / (2.0 * h);
        }
    }
    return fd;
}

} // namespace

TEST_CASE("policy network construction and positivity") {
    RngStream rng = RngStream::seeded(1);
    const MlpParams net = make_policy_net(16, 2, rng);
    CHECK(net.input_dim() == 4);
    CHECK(net.output_dim() == 2);
    const FeedbackPolicy policy(net);
    std::vector<SystemState> states{{0.1, 0.7, 0.0}, {0.9, 0.1, 2.0}};
    std::vector<InstallRates> rates(states.size());
    policy.rates(0.5, states, rates);
    for (const InstallRates& r : rates) {
        CHECK(r.a1 > 0.0);
        CHECK(r.a2 > 0.0);
        CHECK(std::isfinite(r.a1));
        CHECK(std::isfinite(r.a2));
    }

    MlpParams bad = MlpParams::zeros({4, 4, 2}, Activation::relu, OutputTransform::identity);
    CHECK_THROWS_AS(FeedbackPolicy{bad}, std::invalid_argument);
}

TEST_CASE("zero-policy rollout matches the do-nothing Monte Carlo oracle") {
    const ModelParams params;
    const TimeGrid grid{50, params.T};
    const MlpParams stub = zero_policy_stub();
    const RolloutResult rollout =
        rollout_loss(stub, params, grid, 20000, RngStream::seeded(3));
    const McResult oracle =
        mc_cost(params, grid, ThresholdPolicy(0.0), 20000, RngStream::seeded(4));
    const double se = oracle.std_error * std::sqrt(2.0);
    CHECK(std::abs(rollout.loss - oracle.estimate) < 3.0 * se);
    CHECK(std::abs(rollout.loss - analytic_zero_policy_cost(params, grid)) < 4.0 * se);
}

TEST_CASE("rollout equals the cost oracle pathwise under a frozen policy") {
    const ModelParams params;
    const TimeGrid grid{25, params.T};
    RngStream rng = RngStream::seeded(5);
    const MlpParams net = make_policy_net(8, 2, rng);
    const RolloutResult rollout = rollout_loss(net, params, grid, 5000, RngStream::seeded(6));
    const FeedbackPolicy policy(net);
    const McResult oracle = mc_cost(params, grid, policy, 5000, RngStream::seeded(6));
    CHECK(rollout.loss == doctest::Approx(oracle.estimate).epsilon(1e-12));
}

TEST_CASE("capacity is nondecreasing under the nonnegative feedback rule") {
    const ModelParams params;
    const TimeGrid grid{30, params.T};
    RngStream rng = RngStream::seeded(7);
    const MlpParams net = make_policy_net(8, 2, rng);
    const FeedbackPolicy policy(net);
    const PathBundle bundle = simulate_paths(params, grid, policy, 32, RngStream::seeded(8));
    for (int j = 0; j < bundle.batch; ++j) {
        for (int n = 0; n < bundle.steps; ++n) {
            CHECK(bundle.state(j, n + 1).c >= bundle.state(j, n).c);
        }
    }
}

TEST_CASE("reverse-mode rollout gradient matches finite differences") {
    const ModelParams params;
    const TimeGrid grid{3, params.T};
    RngStream rng = RngStream::seeded(11);
    const MlpParams net = make_policy_net(4, 2, rng);

    GradBundle ad = GradBundle::zeros_like(net);
    rollout_loss(net, params, grid, 2, RngStream::seeded(12), &ad);
    const GradBundle fd = rollout_fd_gradient(net, params, grid, 2, 12);

    double worst = 0.0;
    for (std::size_t l = 0; l < ad.weight_grads.size(); ++l) {
        for (Eigen::Index i = 0; i < ad.weight_grads[l].size(); ++i) {
            const double a = ad.weight_grads[l].data()[i];
            const double b = fd.weight_grads[l].data()[i];
            worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}));
        }
        for (Eigen::Index i = 0; i < ad.bias_grads[l].size(); ++i) {
            const double a = ad.bias_grads[l].data()[i];
            const double b = fd.bias_grads[l].data()[i];
            worst = std::max(worst, std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3}));
        }
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("rollout gradients are thread-count independent") {
    const ModelParams params;
    const TimeGrid grid{10, params.T};
    RngStream rng = RngStream::seeded(13);
    const MlpParams net = make_policy_net(8, 2, rng);
    GradBundle g1 = GradBundle::zeros_like(net);
    GradBundle g4 = GradBundle::zeros_like(net);
    const RolloutResult a = rollout_loss(net, params, grid, 3000, RngStream::seeded(14), &g1, 1);
    const RolloutResult b = rollout_loss(net, params, grid, 3000, RngStream::seeded(14), &g4, 4);
    CHECK(a.loss == b.loss);
    for (std::size_t l = 0; l < g1.weight_grads.size(); ++l) {
        CHECK(g1.weight_grads[l] == g4.weight_grads[l]);
        CHECK(g1.bias_grads[l] == g4.bias_grads[l]);
    }
}

TEST_CASE("training is deterministic and reduces the loss") {
    const ModelParams params;
    const TimeGrid grid{10, params.T};
    ControlTrainConfig cfg;
    cfg.batch = 256;
    cfg.epochs = 25;
    cfg.hidden_width = 16;
    cfg.learning_rate = 1e-3;
    cfg.eval_paths = 2000;
    cfg.seed = 15;
    const PolicyTrainResult a = train_policy(params, grid, cfg);
    const PolicyTrainResult b = train_policy(params, grid, cfg);
    REQUIRE(a.loss_history.size() == 25);
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.out_of_sample.estimate == b.out_of_sample.estimate);
    CHECK(a.loss_history.back() < a.loss_history.front());
}

TEST_CASE("a dominating installation cost shrinks the trained policy") {
    ModelParams params;
    params.kappa = 100.0;
    const TimeGrid grid{10, params.T};
    ControlTrainConfig cfg;
    cfg.batch = 256;
    cfg.epochs = 30;
    cfg.hidden_width = 16;
    cfg.learning_rate = 1e-3;
    cfg.eval_paths = 2000;
    cfg.seed = 19;
    const PolicyTrainResult res = train_policy(params, grid, cfg);
    CHECK(res.loss_history.back() < res.loss_history.front());

    auto mean_amplitude = [&](const MlpParams& net) {
        double total = 0.0;
        for (const SurfacePoint& pt : policy_surface(net, params, StateAxis::time, StateAxis::v, 6)) {
            total += pt.a1 + pt.a2;
        }
        return total / 36.0;
    };
    // Zero-epoch training returns the untrained initialization for the same
    // seed, giving the exact before-training baseline.
    ControlTrainConfig init_cfg = cfg;
    init_cfg.epochs = 0;
    const PolicyTrainResult initial = train_policy(params, grid, init_cfg);
    CHECK(mean_amplitude(res.policy) < mean_amplitude(initial.policy));
}

TEST_CASE("policy surface of the zero stub is zero and nonnegative in general") {
    const ModelParams params;
    const MlpParams stub = zero_policy_stub();
    const auto surface = policy_surface(stub, params, StateAxis::time, StateAxis::v, 5);
    REQUIRE(surface.size() == 25);
    for (const SurfacePoint& pt : surface) {
        CHECK(pt.a1 < 1e-12);
        CHECK(pt.a2 < 1e-12);
        CHECK(pt.a1 >= 0.0);
    }

    RngStream rng = RngStream::seeded(17);
    const MlpParams net = make_policy_net(8, 2, rng);
    for (const SurfacePoint& pt : policy_surface(net, params, StateAxis::v, StateAxis::d, 4)) {
        CHECK(pt.a1 >= 0.0);
        CHECK(pt.a2 >= 0.0);
    }
    CHECK_THROWS_AS(policy_surface(net, params, StateAxis::v, StateAxis::v, 4),
                    std::invalid_argument);
}
