#pragma once

#include "jumpcap/rng.hpp"

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <vector>

namespace jumpcap {

enum class Activation { tanh, relu };
enum class OutputTransform { identity, softplus };
enum class InitScheme { glorot_uniform, he_normal };

/// A dense feedforward network: alternating affine maps and the activation,
/// with an optional positivity transform on the output layer. Batches are
/// column-major: one input per column.
struct MlpParams {
    std::vector<int> dims; // [d_in, m, ..., m, d_out]
    Activation activation = Activation::tanh;
    OutputTransform output = OutputTransform::identity;
    std::vector<Eigen::MatrixXd> weights; // weights[l] is dims[l+1] x dims[l]
    std::vector<Eigen::VectorXd> biases;  // biases[l] has dims[l+1] entries

    int input_dim() const { return dims.front(); }
    int output_dim() const { return dims.back(); }
    std::size_t parameter_count() const;

    static MlpParams zeros(std::vector<int> dims, Activation activation,
                           OutputTransform output);
};

/// Weights drawn per scheme, biases zero. Deterministic in the stream.
MlpParams init_params(std::vector<int> dims, Activation activation, OutputTransform output,
                      InitScheme scheme, RngStream& rng);

/// Loss value and parameter gradients shaped exactly like the network.
struct GradBundle {
    double loss = 0.0;
    std::vector<Eigen::MatrixXd> weight_grads;
    std::vector<Eigen::VectorXd> bias_grads;

    static GradBundle zeros_like(const MlpParams& net);
    void set_zero();
    void add_scaled(const GradBundle& other, double factor);
    void scale(double factor);
};

/// Cached intermediates of one forward pass, reused by the backward pass.
struct MlpWorkspace {
    std::vector<Eigen::MatrixXd> pre; // preactivations per affine layer
    std::vector<Eigen::MatrixXd> act; // act[0] = input, act[l+1] = rho(pre[l])
    Eigen::MatrixXd out;
};

Eigen::MatrixXd mlp_forward(const MlpParams& net, const Eigen::Ref<const Eigen::MatrixXd>& x);
const Eigen::MatrixXd& mlp_forward_cached(const MlpParams& net,
                                          const Eigen::Ref<const Eigen::MatrixXd>& x,
                                          MlpWorkspace& ws);

/// Reverse-mode pass for the forward stored in `ws`. `grad_out` is dL/dy of
/// the transformed output; gradients accumulate into `grads` (callers zero
/// them). When `grad_input` is non-null it receives dL/dx.
void mlp_backward(const MlpParams& net, const MlpWorkspace& ws,
                  const Eigen::Ref<const Eigen::MatrixXd>& grad_out, GradBundle& grads,
                  Eigen::MatrixXd* grad_input = nullptr);

/// Evaluates `loss_fn` on the batch outputs and returns the exact gradient of
/// it with respect to every parameter. `loss_fn` receives the outputs
/// (d_out x B) and must fill grad_outputs with dL/dy. A non-finite loss or
/// output raises std::runtime_error naming the offending batch index.
using MlpLossFn = std::function<double(const Eigen::MatrixXd& outputs,
                                       Eigen::MatrixXd& grad_outputs)>;
GradBundle mlp_gradient(const MlpParams& net, const Eigen::Ref<const Eigen::MatrixXd>& inputs,
                        const MlpLossFn& loss_fn);

struct AdamConfig {
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// First/second moment estimates and the step counter of Adam.
struct AdamState {
    AdamConfig config;
    long long step_count = 0;
    std::vector<Eigen::MatrixXd> m_weights, v_weights;
    std::vector<Eigen::VectorXd> m_biases, v_biases;

    static AdamState init(const MlpParams& net, AdamConfig config = {});
};

/// Standard bias-corrected Adam update in place.
void adam_step(AdamState& state, MlpParams& net, const GradBundle& grads);

/// Binary parameter file: JSON header (dims, activation, output transform)
/// followed by the raw weight/bias doubles. Round-trips bit-exactly.
void save_mlp(const std::filesystem::path& path, const MlpParams& net);
MlpParams load_mlp(const std::filesystem::path& path);

} // namespace jumpcap
