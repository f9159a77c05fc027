#include "jumpcap/bsde.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace jumpcap {

namespace {

std::vector<int> stack_dims(int input, int width, int layers) {
    std::vector<int> dims;
    dims.push_back(input);
    for (int l = 0; l < layers; ++l) {
        dims.push_back(width);
    }
    dims.push_back(1);
    return dims;
}

int scaled(int count, double scale) {
    if (count <= 0) {
        return 0;
    }
    return std::max(1, static_cast<int>(std::lround(count * scale)));
}

// Reusable buffers for the per-epoch loss evaluation; Eigen keeps the
// allocations alive across epochs because the shapes are stable per step.
struct StepScratch {
    MlpWorkspace value_ws, jump_ws, next_ws;
    Eigen::MatrixXd value_in, jump_in, next_in;
    Eigen::MatrixXd grad_y, grad_u;
    Eigen::VectorXd target, residual;
};

// Column layout of the jump-net batch: the realized feature for each path
// first, then the aux features path-major: column B + j*A + k.
void fill_jump_net_inputs(double t, const PathBundle& paths, int step,
                          const Eigen::MatrixXd& aux_features, Eigen::MatrixXd& inputs) {
    const int batch = paths.batch;
    const auto aux = static_cast<int>(aux_features.cols());
    inputs.resize(5, batch + batch * aux);
    for (int j = 0; j < batch; ++j) {
        const SystemState& s = paths.state(j, step);
        inputs(0, j) = t;
        inputs(1, j) = s.v;
        inputs(2, j) = s.d;
        inputs(3, j) = s.c;
        inputs(4, j) = paths.dv_total(j, step);
        for (int k = 0; k < aux; ++k) {
            const int col = batch + j * aux + k;
            inputs(0, col) = t;
            inputs(1, col) = s.v;
            inputs(2, col) = s.d;
            inputs(3, col) = s.c;
            inputs(4, col) = aux_features(j, k);
        }
    }
}

double step_loss_impl(int step, const BsdeProblem& problem, const BsdeStepNets& nets,
                      const PathBundle& paths, const MlpParams* frozen_next_value,
                      const Eigen::MatrixXd& aux_features, GradBundle* value_grads,
                      GradBundle* jump_grads, StepScratch& scratch) {
    const int batch = paths.batch;
    const int last = problem.grid.steps - 1;
    if (step < 0 || step > last) {
        throw std::invalid_argument("bsde step out of range");
    }
    if (paths.steps < step + 1) {
        throw std::invalid_argument("paths must be simulated through step+1");
    }
    if (aux_features.rows() != batch || aux_features.cols() < 1) {
        throw std::invalid_argument("aux features must be batch x aux_batch");
    }
    if (step < last && frozen_next_value == nullptr) {
        throw std::invalid_argument("non-terminal step needs the frozen next value net");
    }

    const double t = problem.grid.node(step);
    const double dt = problem.grid.dt();
    const auto aux = static_cast<int>(aux_features.cols());

    // Value net on the step-n states.
    scratch.value_in.resize(4, batch);
    for (int j = 0; j < batch; ++j) {
        const SystemState& s = paths.state(j, step);
        scratch.value_in.col(j) << t, s.v, s.d, s.c;
    }
    const Eigen::MatrixXd& y =
        mlp_forward_cached(nets.value_net, scratch.value_in, scratch.value_ws);

    // Regression target: terminal condition at M-1, frozen value net otherwise.
    scratch.target.resize(batch);
    if (step == last) {
        for (int j = 0; j < batch; ++j) {
            scratch.target(j) = problem.terminal(paths.state(j, step + 1));
        }
    } else {
        scratch.next_in.resize(4, batch);
        const double t_next = problem.grid.node(step + 1);
        for (int j = 0; j < batch; ++j) {
            const SystemState& s = paths.state(j, step + 1);
            scratch.next_in.col(j) << t_next, s.v, s.d, s.c;
        }
        scratch.target =
            mlp_forward_cached(*frozen_next_value, scratch.next_in, scratch.next_ws).row(0);
    }

    fill_jump_net_inputs(t, paths, step, aux_features, scratch.jump_in);
    const Eigen::MatrixXd& u =
        mlp_forward_cached(nets.jump_net, scratch.jump_in, scratch.jump_ws);

    scratch.residual.resize(batch);
    for (int j = 0; j < batch; ++j) {
        double mean_w = 0.0;
        for (int k = 0; k < aux; ++k) {
            mean_w += u(0, batch + j * aux + k);
        }
        mean_w /= aux;
        const double f = problem.driver(t, paths.state(j, step));
        scratch.residual(j) = scratch.target(j) - (y(0, j) - f * dt + u(0, j) - mean_w);
        if (!std::isfinite(scratch.residual(j))) {
            const SystemState& s = paths.state(j, step);
            throw std::runtime_error("bsde_step_loss: non-finite residual at path " +
                                     std::to_string(j) + " state (v=" + std::to_string(s.v) +
                                     ", d=" + std::to_string(s.d) + ", c=" + std::to_string(s.c) +
                                     ")");
        }
    }
    const double loss = scratch.residual.squaredNorm() / batch;

    if (value_grads != nullptr && jump_grads != nullptr) {
        scratch.grad_y.resize(1, batch);
        scratch.grad_u.resize(1, batch + batch * aux);
        for (int j = 0; j < batch; ++j) {
            const double coeff = 2.0 * scratch.residual(j) / batch;
            scratch.grad_y(0, j) = -coeff;
            scratch.grad_u(0, j) = -coeff;
            const double aux_coeff = coeff / aux;
            for (int k = 0; k < aux; ++k) {
                scratch.grad_u(0, batch + j * aux + k) = aux_coeff;
            }
        }
        mlp_backward(nets.value_net, scratch.value_ws, scratch.grad_y, *value_grads);
        mlp_backward(nets.jump_net, scratch.jump_ws, scratch.grad_u, *jump_grads);
    }
    return loss;
}

} // namespace

double BsdeProblem::driver(double t, const SystemState& state) const {
    return std::exp(-model.r * t) * std::max(state.d - state.v * state.c, 0.0);
}

double BsdeProblem::terminal(const SystemState& state) const {
    return model.kappa * state.c;
}

int BsdeTrainConfig::scaled_epochs_terminal() const { return scaled(epochs_terminal, scale); }
int BsdeTrainConfig::scaled_epochs_other() const { return scaled(epochs_other, scale); }
int BsdeTrainConfig::scaled_aux_batch() const { return scaled(aux_batch, scale); }

void BsdeTrainConfig::validate() const {
    if (batch < 1 || aux_batch < 1 || epochs_terminal < 0 || epochs_other < 0 ||
        hidden_width < 1 || hidden_layers < 1) {
        throw std::invalid_argument("bsde training config entries must be positive");
    }
    if (!(learning_rate > 0.0)) {
        throw std::invalid_argument("bsde learning rate must be > 0");
    }
    if (!(scale > 0.0 && scale <= 1.0)) {
        throw std::invalid_argument("bsde scale must lie in (0, 1]");
    }
}

BsdeStepNets make_step_nets(const BsdeTrainConfig& config, RngStream& rng) {
    BsdeStepNets nets;
    nets.value_net = init_params(stack_dims(4, config.hidden_width, config.hidden_layers),
                                 Activation::tanh, OutputTransform::identity,
                                 InitScheme::glorot_uniform, rng);
    nets.jump_net = init_params(stack_dims(5, config.hidden_width, config.hidden_layers),
                                Activation::tanh, OutputTransform::identity,
                                InitScheme::glorot_uniform, rng);
    return nets;
}

double BsdeSolution::value_at(double t, const SystemState& state, int step) const {
    Eigen::MatrixXd x(4, 1);
    x << t, state.v, state.d, state.c;
    return mlp_forward(nets.at(static_cast<std::size_t>(step)).value_net, x)(0, 0);
}

double bsde_step_loss(int step, const BsdeProblem& problem, const BsdeStepNets& nets,
                      const PathBundle& paths, const MlpParams* frozen_next_value,
                      const Eigen::MatrixXd& aux_features, GradBundle* value_grads,
                      GradBundle* jump_grads) {
    StepScratch scratch;
    return step_loss_impl(step, problem, nets, paths, frozen_next_value, aux_features,
                          value_grads, jump_grads, scratch);
}

StepTrainResult train_timestep(int step, const BsdeProblem& problem,
                               const BsdeTrainConfig& config, const BsdeStepNets& warm_start,
                               const MlpParams* frozen_next_value, RngStream stream) {
    config.validate();
    const int epochs = step == problem.grid.steps - 1 ? config.scaled_epochs_terminal()
                                                      : config.scaled_epochs_other();
    const int aux = config.scaled_aux_batch();
    const ThresholdPolicy policy(problem.threshold);
    const double s_const = problem.model.s_at(0.0);

    StepTrainResult result;
    result.nets = warm_start;
    result.losses.reserve(static_cast<std::size_t>(epochs));

    AdamState value_opt = AdamState::init(result.nets.value_net, {config.learning_rate});
    AdamState jump_opt = AdamState::init(result.nets.jump_net, {config.learning_rate});
    GradBundle value_grads = GradBundle::zeros_like(result.nets.value_net);
    GradBundle jump_grads = GradBundle::zeros_like(result.nets.jump_net);

    // Epoch substreams use small indices; dedicated streams get large tags.
    PathBundle cached;
    if (config.cache_paths) {
        cached = simulate(problem.model, problem.grid, policy, config.batch,
                          substream(stream, 0xCAC4EDBA7C4ULL), problem.scheme, 0, step + 1);
    }

    std::vector<double> impact_sums(static_cast<std::size_t>(aux));
    Eigen::MatrixXd aux_features(config.batch, aux);
    StepScratch scratch;

    // Summed V-impact of one fresh jump pair, before the (1 - v) damping.
    // Draw order matches sample_jumps: count, then sizes, per source.
    auto draw_impact_sum = [&](RngStream& draw) {
        double sum = 0.0;
        const double dt = problem.grid.dt();
        const std::uint64_t n1 = draw.next_poisson(problem.model.lambda1 * dt);
        for (std::uint64_t l = 0; l < n1; ++l) {
            sum += 1.0 - std::exp(-s_const * problem.model.sigma11 *
                                  draw.next_exponential(problem.model.m1));
        }
        const std::uint64_t n2 = draw.next_poisson(problem.model.lambda2 * dt);
        for (std::uint64_t l = 0; l < n2; ++l) {
            sum += 1.0 - std::exp(-s_const * problem.model.sigma12 *
                                  draw.next_exponential(problem.model.m2));
        }
        return sum;
    };

    for (int epoch = 0; epoch < epochs; ++epoch) {
        RngStream epoch_stream = substream(stream, static_cast<std::uint64_t>(epoch));
        const PathBundle& paths =
            config.cache_paths
                ? cached
                : (cached = simulate(problem.model, problem.grid, policy, config.batch,
                                     substream(epoch_stream, 0), problem.scheme, 0, step + 1));

        // One fresh jump pair per aux column; the feature for path j scales
        // the summed impact by its own (1 - v) damping.
        RngStream aux_stream = substream(epoch_stream, 1);
        for (int k = 0; k < aux; ++k) {
            RngStream draw = substream(aux_stream, static_cast<std::uint64_t>(k));
            impact_sums[static_cast<std::size_t>(k)] = draw_impact_sum(draw);
        }
        for (int j = 0; j < config.batch; ++j) {
            const double damping = 1.0 - paths.state(j, step).v;
            for (int k = 0; k < aux; ++k) {
                aux_features(j, k) = damping * impact_sums[static_cast<std::size_t>(k)];
            }
        }

        value_grads.set_zero();
        jump_grads.set_zero();
        const double loss = step_loss_impl(step, problem, result.nets, paths, frozen_next_value,
                                           aux_features, &value_grads, &jump_grads, scratch);
        result.losses.push_back(loss);
        adam_step(value_opt, result.nets.value_net, value_grads);
        adam_step(jump_opt, result.nets.jump_net, jump_grads);
    }
    return result;
}

BsdeSolution solve_bsde(const BsdeProblem& problem, const BsdeTrainConfig& config) {
    problem.model.validate();
    problem.grid.validate();
    config.validate();

    const int steps = problem.grid.steps;
    RngStream root = RngStream::seeded(config.seed);
    RngStream init_rng = substream(root, 0x1A171B00757ULL);

    BsdeSolution solution;
    solution.nets.resize(static_cast<std::size_t>(steps));
    solution.loss_history.resize(static_cast<std::size_t>(steps));

    BsdeStepNets warm = make_step_nets(config, init_rng);
    for (int n = steps - 1; n >= 0; --n) {
        const MlpParams* frozen =
            n == steps - 1 ? nullptr : &solution.nets[static_cast<std::size_t>(n + 1)].value_net;
        StepTrainResult trained = train_timestep(n, problem, config, warm, frozen,
                                                 substream(root, static_cast<std::uint64_t>(n)));
        solution.nets[static_cast<std::size_t>(n)] = trained.nets;
        solution.loss_history[static_cast<std::size_t>(n)] = std::move(trained.losses);
        warm = solution.nets[static_cast<std::size_t>(n)];
    }
    solution.y0 = solution.value_at(0.0, initial_state(problem.model), 0);
    return solution;
}

} // namespace jumpcap
