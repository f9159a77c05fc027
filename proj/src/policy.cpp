#include "jumpcap/policy.hpp"

#include "jumpcap/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace jumpcap {

namespace {

void check_policy_net(const MlpParams& net) {
    if (net.input_dim() != 4 || net.output_dim() != 2 ||
        net.output != OutputTransform::softplus) {
        throw std::invalid_argument(
            "policy network must map (t,v,d,c) to a softplus pair (a1,a2)");
    }
}

} // namespace

FeedbackPolicy::FeedbackPolicy(const MlpParams& net) : net_(&net) {
    check_policy_net(net);
}

void FeedbackPolicy::rates(double t, std::span<const SystemState> states,
                           std::span<InstallRates> out) const {
    Eigen::MatrixXd inputs(4, static_cast<Eigen::Index>(states.size()));
    for (std::size_t i = 0; i < states.size(); ++i) {
        inputs.col(static_cast<Eigen::Index>(i)) << t, states[i].v, states[i].d, states[i].c;
    }
    const Eigen::MatrixXd outputs = mlp_forward(*net_, inputs);
    for (std::size_t i = 0; i < states.size(); ++i) {
        out[i] = {outputs(0, static_cast<Eigen::Index>(i)),
                  outputs(1, static_cast<Eigen::Index>(i))};
    }
}

MlpParams make_policy_net(int hidden_width, int hidden_layers, RngStream& rng) {
    std::vector<int> dims;
    dims.push_back(4);
    for (int l = 0; l < hidden_layers; ++l) {
        dims.push_back(hidden_width);
    }
    dims.push_back(2);
    return init_params(std::move(dims), Activation::relu, OutputTransform::softplus,
                       InitScheme::he_normal, rng);
}

int ControlTrainConfig::scaled_epochs() const {
    if (epochs <= 0) {
        return 0;
    }
    return std::max(1, static_cast<int>(std::lround(epochs * scale)));
}

void ControlTrainConfig::validate() const {
    if (batch < 1 || epochs < 0 || hidden_width < 1 || hidden_layers < 1 || eval_paths < 2) {
        throw std::invalid_argument("control training config entries must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("control learning rate must be > 0");
    }
    if (!(scale > 0.0 && scale <= 1.0)) {
        throw std::invalid_argument("control scale must lie in (0, 1]");
    }
}

RolloutResult rollout_loss(const MlpParams& policy, const ModelParams& params,
                           const TimeGrid& grid, int batch, RngStream rng, GradBundle* grads,
                           int threads) {
    check_policy_net(policy);
    const FeedbackPolicy rule(policy);
    const PathBundle bundle = simulate_paths(params, grid, rule, batch, rng);

    RolloutResult result;
    result.path_costs.resize(static_cast<std::size_t>(batch));
    const int steps = bundle.steps;
    for (int j = 0; j < batch; ++j) {
        result.path_costs[static_cast<std::size_t>(j)] =
            bundle.running_cost[static_cast<std::size_t>(j)] +
            params.kappa * bundle.state(j, steps).c;
    }
    double total = 0.0;
    for (const double c : result.path_costs) {
        total += c;
    }
    result.loss = total / batch;
    if (!std::isfinite(result.loss)) {
        throw std::runtime_error("rollout_loss: non-finite batch loss");
    }
    if (grads == nullptr) {
        return result;
    }

    // Pathwise reverse sweep: jumps are fixed per scenario, so the loss
    // depends on the parameters only through the install amplitudes. The
    // adjoint of installed capacity picks up the running-cost derivative at
    // each node and the amplitudes' own dependence on the c input.
    const double dt = grid.dt();
    const std::size_t n_chunks = chunk_count(static_cast<std::size_t>(batch), kPathChunk);
    std::vector<GradBundle> chunk_grads(n_chunks, GradBundle::zeros_like(policy));

    parallel_chunks(
        static_cast<std::size_t>(batch), kPathChunk, threads,
        [&](std::size_t chunk, std::size_t begin, std::size_t end) {
            const auto count = static_cast<Eigen::Index>(end - begin);
            Eigen::VectorXd lambda = Eigen::VectorXd::Constant(count, params.kappa);
            Eigen::MatrixXd inputs(4, count);
            Eigen::MatrixXd grad_out(2, count);
            Eigen::MatrixXd grad_in(4, count);
            MlpWorkspace ws;
            for (int n = steps - 1; n >= 0; --n) {
                const double t = grid.node(n);
                const double disc = dt * std::exp(-params.r * t);
                for (Eigen::Index j = 0; j < count; ++j) {
                    const int path = static_cast<int>(begin) + static_cast<int>(j);
                    const SystemState& s = bundle.state(path, n);
                    inputs.col(j) << t, s.v, s.d, s.c;
                    const std::size_t idx =
                        static_cast<std::size_t>(path) * steps + static_cast<std::size_t>(n);
                    grad_out(0, j) = lambda(j) * bundle.dv1[idx];
                    grad_out(1, j) = lambda(j) * bundle.dv2[idx];
                }
                mlp_forward_cached(policy, inputs, ws);
                mlp_backward(policy, ws, grad_out, chunk_grads[chunk], &grad_in);
                for (Eigen::Index j = 0; j < count; ++j) {
                    const int path = static_cast<int>(begin) + static_cast<int>(j);
                    const SystemState& s = bundle.state(path, n);
                    const double active = s.d - s.v * s.c > 0.0 ? 1.0 : 0.0;
                    lambda(j) += grad_in(3, j) - disc * s.v * active;
                }
            }
        });

    for (std::size_t c = 0; c < n_chunks; ++c) {
        grads->add_scaled(chunk_grads[c], 1.0 / batch);
    }
    grads->loss = result.loss;
    return result;
}

PolicyTrainResult train_policy(const ModelParams& params, const TimeGrid& grid,
                               const ControlTrainConfig& config, int threads) {
    params.validate();
    grid.validate();
    config.validate();

    RngStream root = RngStream::seeded(config.seed);
    RngStream init_rng = substream(root, 0x9019D5EEDULL);

    PolicyTrainResult result;
    result.policy = make_policy_net(config.hidden_width, config.hidden_layers, init_rng);

    AdamState opt = AdamState::init(result.policy, {config.learning_rate});
    GradBundle grads = GradBundle::zeros_like(result.policy);
    const int epochs = config.scaled_epochs();
    result.loss_history.reserve(static_cast<std::size_t>(epochs));

    for (int epoch = 0; epoch < epochs; ++epoch) {
        grads.set_zero();
        const RolloutResult rollout =
            rollout_loss(result.policy, params, grid, config.batch,
                         substream(root, static_cast<std::uint64_t>(epoch)), &grads, threads);
        result.loss_history.push_back(rollout.loss);
        adam_step(opt, result.policy, grads);
    }

    const FeedbackPolicy rule(result.policy);
    result.out_of_sample =
        mc_cost(params, grid, rule, static_cast<std::uint64_t>(config.eval_paths),
                substream(root, 0x0075A30FE5ALL), Scheme::euler, threads);
    return result;
}

const char* axis_name(StateAxis axis) {
    switch (axis) {
    case StateAxis::time: return "t";
    case StateAxis::v: return "v";
    case StateAxis::d: return "d";
    case StateAxis::c: return "c";
    }
    return "?";
}

std::vector<SurfacePoint> policy_surface(const MlpParams& policy, const ModelParams& params,
                                         StateAxis axis1, StateAxis axis2, int resolution) {
    check_policy_net(policy);
    if (resolution < 2) {
        throw std::invalid_argument("surface resolution must be >= 2");
    }
    if (axis1 == axis2) {
        throw std::invalid_argument("surface axes must differ");
    }

    auto range = [&](StateAxis axis) -> std::pair<double, double> {
        switch (axis) {
        case StateAxis::time: return {0.0, params.T};
        case StateAxis::v: return {0.0, 0.99};
        case StateAxis::d: return {0.0, 2.0 * params.d0};
        case StateAxis::c: return {0.0, 3.0};
        }
        return {0.0, 1.0};
    };
    auto base_coord = [&](StateAxis axis) {
        switch (axis) {
        case StateAxis::time: return 0.0;
        case StateAxis::v: return params.v0;
        case StateAxis::d: return params.d0;
        case StateAxis::c: return params.c0;
        }
        return 0.0;
    };
    auto coord_index = [](StateAxis axis) {
        switch (axis) {
        case StateAxis::time: return 0;
        case StateAxis::v: return 1;
        case StateAxis::d: return 2;
        case StateAxis::c: return 3;
        }
        return 0;
    };

    const auto [lo1, hi1] = range(axis1);
    const auto [lo2, hi2] = range(axis2);
    const int n = resolution;
    Eigen::MatrixXd inputs(4, n * n);
    std::vector<SurfacePoint> points(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        const double x1 = lo1 + (hi1 - lo1) * i / (n - 1);
        for (int j = 0; j < n; ++j) {
            const double x2 = lo2 + (hi2 - lo2) * j / (n - 1);
            const int col = i * n + j;
            Eigen::Vector4d x(base_coord(StateAxis::time), base_coord(StateAxis::v),
                              base_coord(StateAxis::d), base_coord(StateAxis::c));
            x(coord_index(axis1)) = x1;
            x(coord_index(axis2)) = x2;
            inputs.col(col) = x;
            points[static_cast<std::size_t>(col)].x1 = x1;
            points[static_cast<std::size_t>(col)].x2 = x2;
        }
    }
    const Eigen::MatrixXd outputs = mlp_forward(policy, inputs);
    for (int col = 0; col < n * n; ++col) {
        points[static_cast<std::size_t>(col)].a1 = outputs(0, col);
        points[static_cast<std::size_t>(col)].a2 = outputs(1, col);
    }
    return points;
}

} // namespace jumpcap
