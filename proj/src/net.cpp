#include "jumpcap/net.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace jumpcap {

namespace {

void check_dims(const std::vector<int>& dims) {
    if (dims.size() < 2) {
        throw std::invalid_argument("network needs at least input and output dims");
    }
    for (const int d : dims) {
        if (d < 1) {
            throw std::invalid_argument("network layer dims must be >= 1");
        }
    }
}

void apply_activation(Activation act, const Eigen::MatrixXd& pre, Eigen::MatrixXd& post) {
    if (act == Activation::tanh) {
        post = pre.array().tanh();
    } else {
        post = pre.cwiseMax(0.0);
    }
}

// delta <- delta .* rho'(pre), expressed through the stored activations:
// tanh' = 1 - act^2 and relu' = 1{act > 0} (zero at the kink).
void scale_by_activation_derivative(Activation act, const Eigen::MatrixXd& post,
                                    Eigen::MatrixXd& delta) {
    if (act == Activation::tanh) {
        delta.array() *= 1.0 - post.array().square();
    } else {
        delta.array() *= (post.array() > 0.0).cast<double>();
    }
}

double softplus(double x) {
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) {
    return x > 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

const char* activation_name(Activation a) {
    return a == Activation::tanh ? "tanh" : "relu";
}

const char* output_name(OutputTransform o) {
    return o == OutputTransform::identity ? "identity" : "softplus";
}

Activation activation_from(const std::string& name) {
    if (name == "tanh") return Activation::tanh;
    if (name == "relu") return Activation::relu;
    throw std::runtime_error("unknown activation tag: " + name);
}

OutputTransform output_from(const std::string& name) {
    if (name == "identity") return OutputTransform::identity;
    if (name == "softplus") return OutputTransform::softplus;
    throw std::runtime_error("unknown output transform tag: " + name);
}

} // namespace

std::size_t MlpParams::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size()) + static_cast<std::size_t>(biases[l].size());
    }
    return n;
}

MlpParams MlpParams::zeros(std::vector<int> dims, Activation activation, OutputTransform output) {
    check_dims(dims);
    MlpParams net;
    net.dims = std::move(dims);
    net.activation = activation;
    net.output = output;
    const std::size_t n_affine = net.dims.size() - 1;
    net.weights.reserve(n_affine);
    net.biases.reserve(n_affine);
    for (std::size_t l = 0; l < n_affine; ++l) {
        net.weights.emplace_back(Eigen::MatrixXd::Zero(net.dims[l + 1], net.dims[l]));
        net.biases.emplace_back(Eigen::VectorXd::Zero(net.dims[l + 1]));
    }
    return net;
}

MlpParams init_params(std::vector<int> dims, Activation activation, OutputTransform output,
                      InitScheme scheme, RngStream& rng) {
    MlpParams net = MlpParams::zeros(std::move(dims), activation, output);
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        Eigen::MatrixXd& w = net.weights[l];
        const double fan_in = static_cast<double>(w.cols());
        const double fan_out = static_cast<double>(w.rows());
        if (scheme == InitScheme::glorot_uniform) {
            const double limit = std::sqrt(6.0 / (fan_in + fan_out));
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                for (Eigen::Index i = 0; i < w.rows(); ++i) {
                    w(i, j) = (2.0 * rng.next_unit() - 1.0) * limit;
                }
            }
        } else {
            const double stddev = std::sqrt(2.0 / fan_in);
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                for (Eigen::Index i = 0; i < w.rows(); ++i) {
                    w(i, j) = stddev * rng.next_gaussian();
                }
            }
        }
    }
    return net;
}

GradBundle GradBundle::zeros_like(const MlpParams& net) {
    GradBundle g;
    g.weight_grads.reserve(net.weights.size());
    g.bias_grads.reserve(net.biases.size());
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        g.weight_grads.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        g.bias_grads.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return g;
}

void GradBundle::set_zero() {
    loss = 0.0;
    for (auto& w : weight_grads) {
        w.setZero();
    }
    for (auto& b : bias_grads) {
        b.setZero();
    }
}

void GradBundle::add_scaled(const GradBundle& other, double factor) {
    loss += factor * other.loss;
    for (std::size_t l = 0; l < weight_grads.size(); ++l) {
        weight_grads[l] += factor * other.weight_grads[l];
        bias_grads[l] += factor * other.bias_grads[l];
    }
}

void GradBundle::scale(double factor) {
    loss *= factor;
    for (std::size_t l = 0; l < weight_grads.size(); ++l) {
        weight_grads[l] *= factor;
        bias_grads[l] *= factor;
    }
}

const Eigen::MatrixXd& mlp_forward_cached(const MlpParams& net,
                                          const Eigen::Ref<const Eigen::MatrixXd>& x,
                                          MlpWorkspace& ws) {
    if (x.rows() != net.input_dim()) {
        throw std::invalid_argument("mlp_forward: input rows do not match network input dim");
    }
    const std::size_t n_affine = net.weights.size();
    ws.pre.resize(n_affine);
    ws.act.resize(n_affine); // act[0] = input copy, act[l] = activation of pre[l-1]
    ws.act[0] = x;
    for (std::size_t l = 0; l < n_affine; ++l) {
        const Eigen::MatrixXd& input = ws.act[l];
        ws.pre[l].noalias() = net.weights[l] * input;
        ws.pre[l].colwise() += net.biases[l];
        if (l + 1 < n_affine) {
            apply_activation(net.activation, ws.pre[l], ws.act[l + 1]);
        }
    }
    const Eigen::MatrixXd& last = ws.pre[n_affine - 1];
    if (net.output == OutputTransform::identity) {
        ws.out = last;
    } else {
        ws.out = last.unaryExpr([](double v) { return softplus(v); });
    }
    return ws.out;
}

Eigen::MatrixXd mlp_forward(const MlpParams& net, const Eigen::Ref<const Eigen::MatrixXd>& x) {
    MlpWorkspace ws;
    return mlp_forward_cached(net, x, ws);
}

void mlp_backward(const MlpParams& net, const MlpWorkspace& ws,
                  const Eigen::Ref<const Eigen::MatrixXd>& grad_out, GradBundle& grads,
                  Eigen::MatrixXd* grad_input) {
    const std::size_t n_affine = net.weights.size();
    Eigen::MatrixXd delta;
    if (net.output == OutputTransform::identity) {
        delta = grad_out;
    } else {
        delta = grad_out.cwiseProduct(
            ws.pre[n_affine - 1].unaryExpr([](double v) { return sigmoid(v); }));
    }
    Eigen::MatrixXd back;
    for (std::size_t l = n_affine; l-- > 0;) {
        grads.weight_grads[l].noalias() += delta * ws.act[l].transpose();
        grads.bias_grads[l] += delta.rowwise().sum();
        if (l > 0) {
            back.noalias() = net.weights[l].transpose() * delta;
            delta.swap(back);
            scale_by_activation_derivative(net.activation, ws.act[l], delta);
        } else if (grad_input != nullptr) {
            grad_input->noalias() = net.weights[0].transpose() * delta;
        }
    }
}

GradBundle mlp_gradient(const MlpParams& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                        const MlpLossFn& loss_fn) {
    if (inputs.cols() < 1) {
        throw std::invalid_argument("mlp_gradient: batch must be nonempty");
    }
    MlpWorkspace ws;
    const Eigen::MatrixXd& outputs = mlp_forward_cached(net, inputs, ws);
    for (Eigen::Index j = 0; j < outputs.cols(); ++j) {
        if (!outputs.col(j).allFinite()) {
            throw std::runtime_error("mlp_gradient: non-finite output at batch index " +
                                     std::to_string(j));
        }
    }
    Eigen::MatrixXd grad_out = Eigen::MatrixXd::Zero(outputs.rows(), outputs.cols());
    const double loss = loss_fn(outputs, grad_out);
    if (!std::isfinite(loss)) {
        Eigen::Index offender = -1;
        for (Eigen::Index j = 0; j < grad_out.cols(); ++j) {
            if (!grad_out.col(j).allFinite()) {
                offender = j;
                break;
            }
        }
        throw std::runtime_error("mlp_gradient: non-finite loss (batch index " +
                                 std::to_string(offender) + ")");
    }
    GradBundle grads = GradBundle::zeros_like(net);
    grads.loss = loss;
    mlp_backward(net, ws, grad_out, grads);
    return grads;
}

AdamState AdamState::init(const MlpParams& net, AdamConfig config) {
    AdamState st;
    st.config = config;
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        st.m_weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        st.v_weights.emplace_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
        st.m_biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
        st.v_biases.emplace_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    }
    return st;
}

void adam_step(AdamState& state, MlpParams& net, const GradBundle& grads) {
    if (state.m_weights.size() != net.weights.size()) {
        throw std::invalid_argument("adam_step: optimizer state does not match network");
    }
    state.step_count += 1;
    const double b1 = state.config.beta1;
    const double b2 = state.config.beta2;
    const double corr1 = 1.0 - std::pow(b1, static_cast<double>(state.step_count));
    const double corr2 = 1.0 - std::pow(b2, static_cast<double>(state.step_count));
    const double lr = state.config.learning_rate;
    const double eps = state.config.epsilon;

    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
            param.array() -=
                lr * (m.array() / corr1) / ((v.array() / corr2).sqrt() + eps);
        };
        update(net.weights[l], state.m_weights[l], state.v_weights[l], grads.weight_grads[l]);
        update(net.biases[l], state.m_biases[l], state.v_biases[l], grads.bias_grads[l]);
    }
}

void save_mlp(const std::filesystem::path& path, const MlpParams& net) {
    nlohmann::json header;
    header["dims"] = net.dims;
    header["activation"] = activation_name(net.activation);
    header["output"] = output_name(net.output);
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open parameter file for writing: " + path.string());
    }
    out.write("JCMLP1\n", 7);
    const std::uint32_t len = static_cast<std::uint32_t>(header_text.size());
    out.write(reinterpret_cast<const char*>(&len), sizeof(len));
    out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        out.write(reinterpret_cast<const char*>(net.weights[l].data()),
                  static_cast<std::streamsize>(sizeof(double) * net.weights[l].size()));
        out.write(reinterpret_cast<const char*>(net.biases[l].data()),
                  static_cast<std::streamsize>(sizeof(double) * net.biases[l].size()));
    }
    if (!out) {
        throw std::runtime_error("failed writing parameter file: " + path.string());
    }
}

MlpParams load_mlp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open parameter file: " + path.string());
    }
    char magic[7];
    in.read(magic, 7);
    if (!in || std::memcmp(magic, "JCMLP1\n", 7) != 0) {
        throw std::runtime_error("not a parameter file: " + path.string());
    }
    std::uint32_t len = 0;
    in.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string header_text(len, '\0');
    in.read(header_text.data(), len);
    if (!in) {
        throw std::runtime_error("truncated parameter file header: " + path.string());
    }
    const nlohmann::json header = nlohmann::json::parse(header_text);
    MlpParams net = MlpParams::zeros(header.at("dims").get<std::vector<int>>(),
                                     activation_from(header.at("activation").get<std::string>()),
                                     output_from(header.at("output").get<std::string>()));
    for (std::size_t l = 0; l < net.weights.size(); ++l) {
        in.read(reinterpret_cast<char*>(net.weights[l].data()),
                static_cast<std::streamsize>(sizeof(double) * net.weights[l].size()));
        in.read(reinterpret_cast<char*>(net.biases[l].data()),
                static_cast<std::streamsize>(sizeof(double) * net.biases[l].size()));
    }
    if (!in) {
        throw std::runtime_error("truncated parameter file: " + path.string());
    }
    return net;
}

} // namespace jumpcap
